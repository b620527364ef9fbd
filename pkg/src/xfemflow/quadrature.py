"""Gauss-Legendre rules and adaptive rules for corner point singularities."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError, QuadratureAccuracyError


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 2) on [-1, 1]^2, or (n,) on [-1, 1]
    weights: np.ndarray


@dataclass(frozen=True)
class AdaptiveConfig:
    """Controls for the adaptive schemes.

    ``tolerance`` is an absolute target on the integral (max-norm for
    vector-valued integrands).
    """

    tolerance: float = 1e-10
    max_levels: int = 200
    base_order: int = 10

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigError("adaptive tolerance must be positive")
        if self.max_levels < 1:
            raise ConfigError("max_levels must be at least 1")
        if not 1 <= self.base_order <= 40:
            raise ConfigError("base_order must be in 1..40")


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_rule_1d(n: int) -> QuadratureRule:
    if not 1 <= n <= 40:
        raise DomainError(f"1D Gauss order must be in 1..40, got {n}")
    x, w = _leggauss(n)
    return QuadratureRule(x, w)


def gauss_rule_2d(n: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule with n points per direction."""
    if not 1 <= n <= 10:
        raise DomainError(f"2D Gauss order must be in 1..10, got {n}")
    return _tensor_rule(n)


@lru_cache(maxsize=None)
def _tensor_rule(n: int) -> QuadratureRule:
    x, w = _leggauss(n)
    xi, eta = np.meshgrid(x, x, indexing="ij")
    pts = np.column_stack([xi.ravel(), eta.ravel()])
    wts = np.outer(w, w).ravel()
    return QuadratureRule(pts, wts)


def _integrate(values, weights):
    values = np.asarray(values)
    return np.tensordot(weights, values, axes=(0, 0))


def _maxabs(a):
    return float(np.max(np.abs(a)))


# (sign_x, sign_y) pointing from the singular vertex into the cell; vertex
# numbering follows the reference element (counterclockwise from lower-left).
_CORNER_DIRS = ((1, 1), (-1, 1), (-1, -1), (1, -1))


def adaptive_singular_cubature(f, cell, singular_corner: int, config: AdaptiveConfig | None = None,
                               exponent: float | None = None, relative: bool = False,
                               full_output: bool = False):
    """Integrate over a rectangle with an integrable point singularity at a vertex.

    Each level halves the cell toward the singular vertex, integrates the
    three regular quarters with a tensor Gauss rule and recurses into the
    quarter touching the vertex.  If the integrand behaves like ``r**exponent``
    near the vertex, the partial sums are accelerated by Richardson
    extrapolation on the known remainder ratio ``2**-(2 + exponent)``.

    Parameters
    ----------
    f : callable
        ``f(x, y)`` with absolute coordinates, or ``f(du, dv)`` with
        offsets from the singular vertex when ``relative`` is True (offsets
        are non-negative and point into the cell).  Must accept 1D arrays
        and return an array whose first axis matches.
    cell : (x0, x1, y0, y1)
    singular_corner : 0..3
        Vertex index, counterclockwise from (x0, y0).
    """
    cfg = config or AdaptiveConfig()
    x0, x1, y0, y1 = map(float, cell)
    if not (x1 > x0 and y1 > y0):
        raise DomainError("cell must have positive extent")
    if singular_corner not in (0, 1, 2, 3):
        raise DomainError("singular_corner must be 0..3")
    if exponent is not None and not exponent > -2.0:
        raise DomainError("integrand exponent must exceed -2 for integrability")
    vx = x0 if singular_corner in (0, 3) else x1
    vy = y0 if singular_corner in (0, 1) else y1
    sx, sy = _CORNER_DIRS[singular_corner]

    g = _tensor_rule(cfg.base_order) if cfg.base_order <= 10 else _tensor_rule_any(cfg.base_order)
    gp, gw = g.points, g.weights
    q = None if exponent is None else 2.0 ** (-(2.0 + exponent))

    def call(du, dv):
        if relative:
            return np.asarray(f(du, dv))
        return np.asarray(f(vx + sx * du, vy + sy * dv))

    wx, wy = x1 - x0, y1 - y0
    partial = None
    prev_est = None
    prev_partial = None
    history = []
    for level in range(1, cfg.max_levels + 1):
        hx, hy = wx / 2.0, wy / 2.0
        # quarters: (offset_u, offset_v); index 0 is the singular one
        offs = ((0.0, 0.0), (hx, 0.0), (0.0, hy), (hx, hy))
        du = np.concatenate([ou + (gp[:, 0] + 1.0) * hx / 2.0 for ou, _ in offs])
        dv = np.concatenate([ov + (gp[:, 1] + 1.0) * hy / 2.0 for _, ov in offs])
        vals = call(du, dv)
        jac = hx * hy / 4.0
        m = len(gw)
        quarter = [_integrate(vals[i * m:(i + 1) * m], gw) * jac for i in range(4)]
        regular = quarter[1] + quarter[2] + quarter[3]
        prev_partial = partial
        partial = regular if partial is None else partial + regular
        if q is not None and prev_partial is not None:
            est = partial + (partial - prev_partial) * q / (1.0 - q)
        else:
            est = partial + quarter[0]
        if prev_est is not None:
            err = _maxabs(est - prev_est)
            history.append(err)
            if err <= cfg.tolerance and level >= 3:
                if full_output:
                    return est, {"levels": level, "error": err, "history": history}
                return est
        prev_est = est
        wx, wy = hx, hy
    raise QuadratureAccuracyError(
        f"adaptive cubature did not reach tolerance {cfg.tolerance:g} in {cfg.max_levels} levels",
        estimate=prev_est, error_bound=history[-1] if history else None,
    )


@lru_cache(maxsize=None)
def _tensor_rule_any(n: int) -> QuadratureRule:
    x, w = _leggauss(n)
    xi, eta = np.meshgrid(x, x, indexing="ij")
    return QuadratureRule(np.column_stack([xi.ravel(), eta.ravel()]), np.outer(w, w).ravel())


def adaptive_line_quadrature(f, segment, singular_endpoint: int, config: AdaptiveConfig | None = None,
                             relative: bool = False, full_output: bool = False):
    """Bisection toward a singular endpoint of a 1D interval.

    1. T3 = 0.
    2. T1 = Gauss on the current interval.
    3. Split in two: T21 on the singular half, T22 on the other; T2 = T21 + T22
       and T3 += T22.
    4. If |T2 - T1| > tol, recurse on the singular half (its Gauss value T21
       becomes the new T1); otherwise return T3 + T21.

    ``f(x)`` receives absolute coordinates, or the distance from the singular
    endpoint when ``relative`` is True.  ``singular_endpoint`` is 0 for
    ``segment[0]`` and 1 for ``segment[1]``.
    """
    cfg = config or AdaptiveConfig()
    a, b = map(float, segment)
    if not b > a:
        raise DomainError("segment must have positive length")
    if singular_endpoint not in (0, 1):
        raise DomainError("singular_endpoint must be 0 or 1")
    x, w = _leggauss(cfg.base_order)
    v = a if singular_endpoint == 0 else b
    sgn = 1.0 if singular_endpoint == 0 else -1.0

    def gauss(lo, hi):
        s = lo + (x + 1.0) * (hi - lo) / 2.0
        vals = np.asarray(f(s) if relative else f(v + sgn * s))
        return _integrate(vals, w) * (hi - lo) / 2.0

    length = b - a
    t1 = gauss(0.0, length)
    t3 = 0.0
    for level in range(1, cfg.max_levels + 1):
        half = length / 2.0
        t21 = gauss(0.0, half)
        t22 = gauss(half, length)
        t2 = t21 + t22
        t3 = t3 + t22
        err = _maxabs(t2 - t1)
        if err <= cfg.tolerance:
            result = t3 + t21
            if full_output:
                return result, {"levels": level, "error": err}
            return result
        t1 = t21
        length = half
    raise QuadratureAccuracyError(
        f"adaptive line quadrature did not reach tolerance {cfg.tolerance:g} in {cfg.max_levels} levels",
        estimate=t3 + t1, error_bound=err,
    )
