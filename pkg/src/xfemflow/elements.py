"""Reference quadrilaterals (4-node bilinear, 8-node serendipity) and the
isoparametric map.

Local node ordering: corners 0-3 counterclockwise from (-1, -1), then the
mid-side nodes 4-7 on edges (0,1), (1,2), (2,3), (3,0).

Shape functions are written as products of the four edge factors
``A = 1 + xi``, ``B = 1 - xi``, ``C = 1 + eta``, ``D = 1 - eta``.  Passing the
factors directly (instead of xi, eta) lets singular integration work with
points that sit 1e-30 away from a vertex without losing them to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MappingError

REF_NODES = {
    1: np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]),
    2: np.array(
        [
            [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0],
            [0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0],
        ]
    ),
}

EDGE_NODES = {
    1: ((0, 1), (1, 2), (2, 3), (3, 0)),
    2: ((0, 1, 4), (1, 2, 5), (2, 3, 6), (3, 0, 7)),
}

N_NODES = {1: 4, 2: 8}

_REF_TOL = 1e-12


@dataclass
class ShapeEval:
    """Shape functions evaluated at a batch of points.

    Shapes: ``values`` (..., n), ``ref_gradients`` and ``phys_gradients``
    (..., n, 2), ``jacobian_det`` (...).  ``phys_gradients`` and
    ``jacobian_det`` are None until an element geometry is supplied.
    """

    values: np.ndarray
    ref_gradients: np.ndarray
    phys_gradients: np.ndarray | None = None
    jacobian_det: np.ndarray | None = None


def check_order(order: int) -> int:
    if order not in (1, 2):
        raise DomainError(f"element order must be 1 (linear) or 2 (quadratic), got {order!r}")
    return order


def factors(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 1.0 + xi, 1.0 - xi, 1.0 + eta, 1.0 - eta


def vertex_factors(vertex: int, u, w):
    """Edge factors at points offset by ``(u, w) >= 0`` from a corner vertex.

    ``u`` moves along xi and ``w`` along eta, both pointing into the element,
    in reference units (the element spans 2 in each direction).
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    xv, ev = REF_NODES[1][vertex]
    A, B = (u, 2.0 - u) if xv < 0 else (2.0 - u, u)
    C, D = (w, 2.0 - w) if ev < 0 else (2.0 - w, w)
    return A, B, C, D


def shape_from_factors(order: int, A, B, C, D):
    """Values (..., n) and reference gradients (..., n, 2)."""
    check_order(order)
    A, B, C, D = np.broadcast_arrays(A, B, C, D)
    one = np.ones_like(A)
    if order == 1:
        N = np.stack([B * D, A * D, A * C, B * C], axis=-1) / 4.0
        dxi = np.stack([-D, D, C, -C], axis=-1) / 4.0
        deta = np.stack([-B, -A, A, B], axis=-1) / 4.0
        return N, np.stack([dxi, deta], axis=-1)

    # corner k: 1/4 * (corner bilinear product) * (1 - P - Q), with P, Q the
    # two factors vanishing at the opposite edges
    lin = [B * D, A * D, A * C, B * C]
    tri = [1.0 - A - C, 1.0 - B - C, 1.0 - B - D, 1.0 - A - D]
    dlin = [(-D, -B), (D, -A), (C, A), (-C, B)]
    dtri = [(-one, -one), (one, -one), (one, one), (-one, one)]
    vals, gx, ge = [], [], []
    for k in range(4):
        vals.append(lin[k] * tri[k] / 4.0)
        gx.append((dlin[k][0] * tri[k] + lin[k] * dtri[k][0]) / 4.0)
        ge.append((dlin[k][1] * tri[k] + lin[k] * dtri[k][1]) / 4.0)
    # mid-side nodes
    vals += [A * B * D / 2.0, A * C * D / 2.0, A * B * C / 2.0, B * C * D / 2.0]
    gx += [(B - A) * D / 2.0, C * D / 2.0, (B - A) * C / 2.0, -C * D / 2.0]
    ge += [-A * B / 2.0, A * (D - C) / 2.0, A * B / 2.0, B * (D - C) / 2.0]
    N = np.stack(vals, axis=-1)
    dN = np.stack([np.stack(gx, axis=-1), np.stack(ge, axis=-1)], axis=-1)
    return N, dN


def _check_reference(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(np.abs(xi) > 1.0 + _REF_TOL) or np.any(np.abs(eta) > 1.0 + _REF_TOL):
        raise DomainError("reference coordinates must lie in [-1, 1]^2")
    return xi, eta


def shape_values(order: int, xi, eta) -> np.ndarray:
    xi, eta = _check_reference(xi, eta)
    return shape_from_factors(order, *factors(xi, eta))[0]


def shape_eval(order: int, xi, eta) -> ShapeEval:
    xi, eta = _check_reference(xi, eta)
    N, dN = shape_from_factors(order, *factors(xi, eta))
    return ShapeEval(N, dN)


def jacobian_transform(coords, dN):
    """Physical gradients and |J| from reference gradients.

    ``coords`` is (..., n, 2) and ``dN`` (..., n, 2) with matching leading
    axes (broadcastable).
    """
    J = np.einsum("...ni,...nj->...ij", dN, coords)  # J[a, b] = d x_b / d ref_a
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-300):
        raise MappingError("singular Jacobian in isoparametric map")
    inv = np.empty_like(J)
    inv[..., 0, 0] = J[..., 1, 1] / det
    inv[..., 1, 1] = J[..., 0, 0] / det
    inv[..., 0, 1] = -J[..., 0, 1] / det
    inv[..., 1, 0] = -J[..., 1, 0] / det
    # grad_x N = J^{-1} grad_ref N
    dNdx = np.einsum("...ij,...nj->...ni", inv, dN)
    return dNdx, det


def map_to_physical(coords, order: int, xi, eta):
    """Map reference points into one element.

    Returns ``(x, y, ShapeEval)``; raises MappingError where the Jacobian is
    not strictly positive.
    """
    coords = np.asarray(coords, dtype=float)
    check_order(order)
    if coords.shape != (N_NODES[order], 2):
        raise DomainError(f"expected {N_NODES[order]} nodal coordinates, got {coords.shape}")
    ev = shape_eval(order, xi, eta)
    xy = ev.values @ coords
    dNdx, det = jacobian_transform(coords, ev.ref_gradients)
    if np.any(det <= 0.0):
        raise MappingError("non-positive Jacobian determinant (inverted element)")
    ev.phys_gradients = dNdx
    ev.jacobian_det = det
    return xy[..., 0], xy[..., 1], ev


def edge_reference_points(edge: int, t):
    """Reference (xi, eta) along local edge ``edge`` for t in [-1, 1]."""
    t = np.asarray(t, dtype=float)
    if edge == 0:
        return t, -np.ones_like(t)
    if edge == 1:
        return np.ones_like(t), t
    if edge == 2:
        return -t, np.ones_like(t)
    if edge == 3:
        return -np.ones_like(t), -t
    raise DomainError(f"edge index must be 0..3, got {edge}")


def edge_trace(order: int, edge: int, t, coords=None):
    """1D trace of the element basis on a local edge.

    Returns ``(values, local_nodes, scale)`` where ``values`` is (..., 2|3)
    ordered like ``EDGE_NODES[order][edge]`` (first vertex, second vertex,
    mid-node), and ``scale`` is ds/dt (None when ``coords`` is omitted).
    """
    check_order(order)
    if edge not in (0, 1, 2, 3):
        raise DomainError(f"edge index must be 0..3, got {edge}")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + _REF_TOL):
        raise DomainError("edge parameter must lie in [-1, 1]")
    if order == 1:
        vals = np.stack([(1.0 - t) / 2.0, (1.0 + t) / 2.0], axis=-1)
        dvals = np.stack([-0.5 * np.ones_like(t), 0.5 * np.ones_like(t)], axis=-1)
    else:
        vals = np.stack([-t * (1.0 - t) / 2.0, t * (1.0 + t) / 2.0, 1.0 - t * t], axis=-1)
        dvals = np.stack([t - 0.5, t + 0.5, -2.0 * t], axis=-1)
    local = EDGE_NODES[order][edge]
    scale = None
    if coords is not None:
        pts = np.asarray(coords, dtype=float)[list(local)]
        tangent = dvals @ pts
        scale = np.hypot(tangent[..., 0], tangent[..., 1])
    return vals, local, scale
