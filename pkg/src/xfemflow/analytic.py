"""Closed-form reference solutions.

Flat plate of half-width ``a`` on y = 0 in a unit vertical stream: the
potential is the real part of ``-i sqrt(z^2 - a^2)`` (principal branch),
with the sign flipped on the right half-plane so the field is continuous
across x = 0.  Far away phi ~ -y (stream moving in -y).

Finite-depth linear dispersion relation ``k tanh(k h) = omega^2 / g``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, SingularEvaluationError

GRAVITY = 9.81


def _face_array(face, shape):
    if face is None:
        return np.ones(shape)
    return np.broadcast_to(np.asarray(face, dtype=float), shape)


def _principal_root(x, y, a, face):
    """sqrt(z^2 - a^2), principal branch, with explicit branch-cut limits.

    Points on x = 0 are treated as the limit from x < 0; points on the plate
    (y = 0, |x| < a) take the limit from the side given by ``face``.
    """
    re = x * x - y * y - a * a
    im = 2.0 * x * y
    out = np.sqrt(re + 1j * im)
    on_cut = (im == 0.0) & (re < 0.0)
    if np.any(on_cut):
        side = np.where(y != 0.0, -np.sign(y), np.where(x != 0.0, np.sign(x) * face, -face))
        root = np.sqrt(np.abs(re))
        out = np.where(on_cut, 1j * side * root, out)
    return out


def plate_potential(x, y, a: float = 1.0, face=None):
    """Velocity potential around the fixed plate.

    ``face`` (+1 upper, -1 lower) picks the side for points exactly on the
    plate; it is ignored elsewhere.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    f = _face_array(face, x.shape)
    s = _principal_root(x, y, a, f)
    phi = np.real(-1j * s)
    return np.where(x > 0.0, -phi, phi)


def plate_velocity(x, y, a: float = 1.0, face=None):
    """(u, v) = grad of :func:`plate_potential`.

    Raises SingularEvaluationError at the plate tips.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    if np.any((y == 0.0) & (np.abs(np.abs(x) - a) == 0.0)):
        raise SingularEvaluationError("velocity is unbounded at the plate tips")
    f = _face_array(face, x.shape)
    s = _principal_root(x, y, a, f)
    w = -1j * (x + 1j * y) / s  # u - i v
    u, v = np.real(w), -np.imag(w)
    flip = x > 0.0
    return np.where(flip, -u, u), np.where(flip, -v, v)


@dataclass(frozen=True)
class PlateField:
    """Analytic fixed-plate flow for half-width ``a``."""

    a: float = 1.0

    def potential(self, x, y, face=None):
        return plate_potential(x, y, self.a, face)

    def velocity(self, x, y, face=None):
        return plate_velocity(x, y, self.a, face)


def solve_dispersion(omega: float, h: float, g: float = GRAVITY) -> float:
    """Positive root k of ``k tanh(k h) = omega**2 / g``.

    Newton iteration from the deep-water wavenumber, kept inside the bracket
    ``[K, K + 2 sqrt(K / h)]`` (K = omega^2/g) by bisection steps.
    """
    if not omega > 0:
        raise DomainError("omega must be positive")
    if not h > 0:
        raise DomainError("water depth must be positive")
    K = omega * omega / g
    lo, hi = K, K + 2.0 * math.sqrt(K / h)
    k = K
    for _ in range(100):
        th = math.tanh(k * h)
        res = k * th - K
        if abs(res) <= 1e-14 * K:
            return k
        if res < 0:
            lo = max(lo, k)
        else:
            hi = min(hi, k)
        dres = th + k * h * (1.0 - th * th)
        step = k - res / dres
        k = step if lo < step < hi else 0.5 * (lo + hi)
    res = k * math.tanh(k * h) - K
    if abs(res) <= 1e-12 * K:
        return k
    raise NumericError(f"dispersion solve did not converge (omega={omega}, h={h})")


def wavelength(omega: float, h: float, g: float = GRAVITY) -> float:
    return 2.0 * math.pi / solve_dispersion(omega, h, g)
