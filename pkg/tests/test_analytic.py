import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xfemflow.analytic import PlateField, plate_potential, plate_velocity, solve_dispersion, wavelength
from xfemflow.errors import DomainError, SingularEvaluationError


def oracle_w(x, y, a=1.0):
    # independent form: i sqrt(z - a) sqrt(z + a), cut only on the plate
    z = x + 1j * y
    return 1j * np.sqrt(z - a) * np.sqrt(z + a)


def test_matches_independent_form():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-4, 4, (2, 2000))
    assert np.max(np.abs(plate_potential(x, y, 1.0) - oracle_w(x, y).real)) < 1e-13


def test_mirror_symmetry():
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-3, 3, (2, 500))
    assert np.allclose(plate_potential(x, y), plate_potential(-x, y), atol=1e-13)


def test_tips_are_zero():
    assert plate_potential(np.array([-2.0, 2.0]), 0.0, 2.0) == pytest.approx([0.0, 0.0], abs=1e-15)


def test_face_limits_opposite():
    up = plate_potential(0.0, 0.0, face=1)
    lo = plate_potential(0.0, 0.0, face=-1)
    assert up == pytest.approx(-lo)
    assert up == pytest.approx(plate_potential(0.0, 1e-12), abs=1e-10)
    assert lo == pytest.approx(plate_potential(0.0, -1e-12), abs=1e-10)


@pytest.mark.parametrize("y", [0.1, 0.5, 2.0, 10.0, -0.1, -3.0])
def test_continuity_across_x0(y):
    assert abs(plate_potential(-1e-300, y) - plate_potential(1e-300, y)) < 1e-12


def test_upper_face_velocity():
    x = np.linspace(-0.9, 0.9, 7)
    u, v = plate_velocity(x, 0.0, face=1)
    assert np.allclose(u, x / np.sqrt(1 - x * x))
    assert np.allclose(v, 0.0)


def test_far_field_stream():
    u, v = plate_velocity(np.array([0.0, 300.0]), np.array([400.0, -500.0]))
    assert np.allclose(u, 0.0, atol=1e-5)
    assert np.allclose(v, -1.0, atol=1e-5)


def test_velocity_is_gradient():
    rng = np.random.default_rng(2)
    x, y = rng.uniform(-3, 3, (2, 200))
    keep = np.abs(y) > 0.05
    x, y = x[keep], y[keep]
    h = 1e-6
    u, v = plate_velocity(x, y)
    fu = (plate_potential(x + h, y) - plate_potential(x - h, y)) / (2 * h)
    fv = (plate_potential(x, y + h) - plate_potential(x, y - h)) / (2 * h)
    assert np.allclose(u, fu, rtol=1e-6, atol=1e-7)
    assert np.allclose(v, fv, rtol=1e-6, atol=1e-7)


def test_tip_velocity_singular():
    with pytest.raises(SingularEvaluationError):
        plate_velocity(1.0, 0.0)


def test_square_root_blowup():
    d = np.array([1e-4, 1e-6])
    u, _ = plate_velocity(1.0 - d, 0.0, face=1)
    assert np.allclose(u * np.sqrt(d), 1 / np.sqrt(2), rtol=1e-3)


def test_plate_field_wrapper():
    f = PlateField(2.0)
    assert f.potential(0.5, 0.3) == plate_potential(0.5, 0.3, 2.0)


def test_deep_water_limit():
    g = 9.81
    omega = math.sqrt(100 * g / 10.0)
    k = solve_dispersion(omega, 10.0)
    assert k == pytest.approx(omega ** 2 / g, rel=1e-10)


def test_shallow_water_limit():
    g = 9.81
    h = 1.0
    omega = math.sqrt(1e-4 * g / h)
    assert solve_dispersion(omega, h) == pytest.approx(omega / math.sqrt(g * h), rel=1e-4)


@pytest.mark.parametrize("nd", np.linspace(0.1, 2.0, 20))
def test_dispersion_residual(nd):
    omega = math.sqrt(nd * 2 * 9.81 / 2.0)
    k = solve_dispersion(omega, 40.0)
    K = omega ** 2 / 9.81
    assert abs(k * math.tanh(k * 40.0) - K) <= 1e-12 * K


def test_dispersion_domain_errors():
    with pytest.raises(DomainError):
        solve_dispersion(0.0, 1.0)
    with pytest.raises(DomainError):
        solve_dispersion(1.0, -1.0)


def test_wavelength():
    assert wavelength(1.0, 1e4) == pytest.approx(2 * math.pi * 9.81)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 30.0), st.floats(1e-2, 1e3))
def test_dispersion_property(omega, h):
    k = solve_dispersion(omega, h)
    K = omega * omega / 9.81
    assert abs(k * math.tanh(k * h) - K) <= 1e-12 * K
