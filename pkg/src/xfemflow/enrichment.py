"""Singular corner-flow enrichment.

Every basis is evaluated on offsets ``(dx, dy)`` from one of its corners so
that points a few ulps away from a singular vertex keep full relative
precision.  Branch ambiguity on a zero-angle corner (plate tip, where both
wedge faces coincide) is resolved with a ``hint`` point on the correct side,
usually the centroid of the element being integrated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .elements import N_NODES, ShapeEval, jacobian_transform, shape_from_factors, factors
from .errors import ConfigError, DomainError, GeometryError, SingularEvaluationError

TWO_PI = 2.0 * math.pi
_ANGLE_TOL = 1e-9


@dataclass(frozen=True)
class Corner:
    """Wedge corner: the fluid occupies ``theta in [0, 2*pi - interior_angle]``
    measured counterclockwise from the wall direction ``wall_direction``."""

    position: tuple
    interior_angle: float
    wall_direction: float
    n_terms: int = 1
    node: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.interior_angle < TWO_PI:
            raise GeometryError("interior angle must lie in [0, 2*pi)")
        if not 1 <= self.n_terms <= 5:
            raise ConfigError("n_terms must be in 1..5")

    @property
    def sweep(self) -> float:
        return TWO_PI - self.interior_angle

    def exponents(self) -> np.ndarray:
        return np.array([corner_exponent(self.interior_angle, j) for j in range(1, self.n_terms + 1)])


def corner_exponent(gamma: float, j: int) -> float:
    """m_j = j*pi / (2*pi - gamma)."""
    if j < 1:
        raise DomainError("term index j must be >= 1")
    if not 0.0 <= gamma < TWO_PI:
        raise GeometryError("degenerate wedge: interior angle must lie in [0, 2*pi)")
    return j * math.pi / (TWO_PI - gamma)


def local_polar(corner: Corner, dx, dy, hint=None):
    """(r, theta) in the corner frame for offsets from the corner.

    ``hint`` is an offset (hx, hy) of a point known to lie on the wanted side
    when the wedge faces coincide.  Raises GeometryError for points inside
    the solid wedge.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    r = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx) - corner.wall_direction, TWO_PI)
    sweep = corner.sweep
    if corner.interior_angle == 0.0 and hint is not None:
        hth = float(np.mod(math.atan2(hint[1], hint[0]) - corner.wall_direction, TWO_PI))
        if hth > math.pi:
            theta = np.where(theta < _ANGLE_TOL, theta + TWO_PI, theta)
        else:
            theta = np.where(theta > TWO_PI - _ANGLE_TOL, theta - TWO_PI, theta)
    else:
        # exact wall points can land on 2*pi - eps from rounding of the frame
        theta = np.where((theta > TWO_PI - _ANGLE_TOL) & (sweep < TWO_PI - _ANGLE_TOL), 0.0, theta)
    outside = (theta > sweep + _ANGLE_TOL) & (r > 0)
    if np.any(outside):
        raise GeometryError("point lies inside the solid wedge of the corner")
    return r, np.minimum(theta, sweep)


def corner_basis(corner: Corner, l: int, dx, dy, hint=None):
    """psi^l = r**m_l * cos(m_l * theta) at offsets from the corner."""
    m = corner_exponent(corner.interior_angle, l)
    r, th = local_polar(corner, dx, dy, hint)
    return r ** m * np.cos(m * th)


def corner_basis_gradient(corner: Corner, l: int, dx, dy, hint=None):
    """Cartesian gradient of :func:`corner_basis`; singular at r = 0."""
    m = corner_exponent(corner.interior_angle, l)
    r, th = local_polar(corner, dx, dy, hint)
    if np.any(r == 0.0):
        raise SingularEvaluationError("corner basis gradient is unbounded at r = 0")
    phi = th + corner.wall_direction
    fac = m * r ** (m - 1.0)
    c, s = np.cos(m * th), np.sin(m * th)
    gx = fac * (c * np.cos(phi) + s * np.sin(phi))
    gy = fac * (c * np.sin(phi) - s * np.cos(phi))
    return gx, gy


class CornerFlowBasis:
    """Terms r^{m_l} cos(m_l theta), l = 1..n_terms, attached to each corner."""

    kind = "corner_flow"

    def __init__(self, corners, n_terms: int = 1):
        if not 1 <= n_terms <= 5:
            raise ConfigError("n_terms must be in 1..5")
        self.corners = tuple(replace(c, n_terms=n_terms) for c in corners)
        self.n_terms = n_terms

    def evaluate(self, ci: int, dx, dy, hint=None, gradient: bool = True):
        """Values (..., L) and gradients (..., L, 2) at offsets from corner ``ci``."""
        corner = self.corners[ci]
        r, th = local_polar(corner, dx, dy, hint)
        m = corner.exponents()
        rr = r[..., None]
        tt = th[..., None]
        vals = rr ** m * np.cos(m * tt)
        if not gradient:
            return vals, None
        if np.any(r == 0.0):
            raise SingularEvaluationError("corner basis gradient is unbounded at r = 0")
        phi = tt + corner.wall_direction
        fac = m * rr ** (m - 1.0)
        c, s = np.cos(m * tt), np.sin(m * tt)
        grads = np.stack([fac * (c * np.cos(phi) + s * np.sin(phi)),
                          fac * (c * np.sin(phi) - s * np.cos(phi))], axis=-1)
        return vals, grads

    def leading_exponent(self, ci: int) -> float:
        return self.corners[ci].exponents()[0]


def _cplx(re, im):
    # explicit construction keeps the sign of a zero imaginary part
    out = np.empty(np.shape(re), dtype=complex)
    out.real = re
    out.imag = im
    return out


class AnalyticPlateBasis:
    """The exact fixed-plate potential used as a single enrichment function.

    Corner 0 must be the tip at x = -a and corner 1 the tip at x = +a.  The
    field is written as ``Re(i sqrt(z - a) sqrt(z + a))``, which needs only the
    offset from either tip to stay accurate.
    """

    kind = "analytic_field"
    n_terms = 1

    def __init__(self, corners, a: float = 1.0):
        self.corners = tuple(corners)
        self.a = float(a)
        xs = sorted(c.position[0] for c in self.corners)
        if len(xs) != 2 or not np.allclose(xs, [-a, a]):
            raise GeometryError("analytic plate enrichment needs the two plate tips as corners")

    def evaluate(self, ci: int, dx, dy, hint=None, gradient: bool = True):
        corner = self.corners[ci]
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        dx, dy = np.broadcast_arrays(dx, dy)
        xc = corner.position[0]
        if hint is not None:
            # on the plate line choose the face from the hint
            side = 1.0 if hint[1] > 0 else -1.0
            x_abs = xc + dx
            on = (dy == 0.0) & (np.abs(x_abs) < self.a)
            dy = np.where(on, np.copysign(0.0, side), dy)
        if xc > 0:
            zm, zp = _cplx(dx, dy), _cplx(dx + 2.0 * self.a, dy)  # z - a, z + a
        else:
            zm, zp = _cplx(dx - 2.0 * self.a, dy), _cplx(dx, dy)
        root = np.sqrt(zm) * np.sqrt(zp)
        vals = np.real(1j * root)[..., None]
        if not gradient:
            return vals, None
        if np.any(root == 0.0):
            raise SingularEvaluationError("analytic plate velocity is unbounded at the tips")
        z = _cplx(xc + dx, dy)
        w = 1j * z / root  # u - i v
        grads = np.stack([np.real(w), -np.imag(w)], axis=-1)[..., None, :]
        return vals, grads

    def leading_exponent(self, ci: int) -> float:
        return 0.5


@dataclass(frozen=True)
class EnrichmentPlan:
    """Enriched nodes, their shift values and extra DOF indices.

    ``dofs[k, l]`` is the global index of term ``l`` at node ``nodes[k]``;
    indices run contiguously from ``n_standard``.
    """

    nodes: np.ndarray
    corner_of: np.ndarray
    shifts: np.ndarray
    dofs: np.ndarray
    n_standard: int
    n_terms: int
    strategy: str
    radius: float | None = None
    position: np.ndarray = field(default=None, repr=False)
    corner_nodes: tuple = ()

    @property
    def n_enriched(self) -> int:
        return len(self.nodes)

    @property
    def n_dofs(self) -> int:
        return self.n_standard + self.n_enriched * self.n_terms

    def index_of(self, node_ids) -> np.ndarray:
        """Row in ``nodes`` for each node id, -1 where not enriched."""
        return self.position[np.asarray(node_ids)]


def empty_plan(mesh) -> EnrichmentPlan:
    return EnrichmentPlan(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                          np.zeros((0, 1)), np.zeros((0, 1), dtype=np.int64), mesh.n_nodes, 1,
                          "none", None, np.full(mesh.n_nodes, -1, dtype=np.int64), ())


def _corner_node(mesh, corner: Corner) -> int:
    scale = float(np.ptp(mesh.nodes, axis=0).max())
    if corner.node is not None:
        nid = int(corner.node)
        if np.hypot(*(mesh.nodes[nid] - corner.position)) <= 1e-9 * scale:
            return nid
    d = np.hypot(mesh.nodes[:, 0] - corner.position[0], mesh.nodes[:, 1] - corner.position[1])
    nid = int(np.argmin(d))
    if d[nid] > 1e-9 * scale:
        raise GeometryError(f"corner {corner.position} does not coincide with a mesh node")
    return nid


def _node_hints(mesh, nodes):
    """A point on the correct side of each node: centroid of an adjacent element."""
    cent = mesh.element_centroids()
    owner = np.full(mesh.n_nodes, -1, dtype=np.int64)
    n = mesh.elements.shape[1]
    owner[mesh.elements.ravel()[::-1]] = np.repeat(np.arange(mesh.n_elements), n)[::-1]
    return cent[owner[nodes]]


def select_enriched_nodes(mesh, basis, strategy: str = "radius", radius: float | None = None) -> EnrichmentPlan:
    """Choose enriched nodes around every corner of ``basis``.

    ``point``: the corner nodes; ``patch``: every node of every element that
    touches a corner; ``radius``: every node within ``radius`` of a corner.
    Shift values are the basis at each node, taken on the node's own side of
    any slit.
    """
    corners = basis.corners
    cnodes = [_corner_node(mesh, c) for c in corners]
    strategy = strategy.lower()
    if strategy == "point":
        chosen = {nid: ci for ci, nid in enumerate(cnodes)}
    elif strategy == "patch":
        chosen = {}
        for ci, nid in enumerate(cnodes):
            els = np.nonzero(np.any(mesh.elements == nid, axis=1))[0]
            for v in np.unique(mesh.elements[els]):
                chosen.setdefault(int(v), ci)
    elif strategy == "radius":
        if radius is None or not radius > 0:
            raise ConfigError("radius strategy needs a positive enrichment radius")
        chosen = {}
        best = np.full(mesh.n_nodes, np.inf)
        owner = np.full(mesh.n_nodes, -1)
        for ci, c in enumerate(corners):
            d = np.hypot(mesh.nodes[:, 0] - c.position[0], mesh.nodes[:, 1] - c.position[1])
            take = (d <= radius * (1.0 + 1e-12)) & (d < best)
            best[take] = d[take]
            owner[take] = ci
        for nid in np.nonzero(owner >= 0)[0]:
            chosen[int(nid)] = int(owner[nid])
    else:
        raise ConfigError(f"unknown enrichment strategy {strategy!r}")

    nodes = np.array(sorted(chosen), dtype=np.int64)
    corner_of = np.array([chosen[n] for n in nodes], dtype=np.int64)
    L = basis.n_terms
    shifts = np.zeros((len(nodes), L))
    hints = _node_hints(mesh, nodes) if len(nodes) else np.zeros((0, 2))
    for k, (nid, ci) in enumerate(zip(nodes, corner_of)):
        pos = np.asarray(corners[ci].position, dtype=float)
        off = mesh.nodes[nid] - pos
        vals, _ = basis.evaluate(ci, off[0], off[1], hint=hints[k] - pos, gradient=False)
        shifts[k] = vals
    dofs = mesh.n_nodes + np.arange(len(nodes) * L, dtype=np.int64).reshape(len(nodes), L)
    position = np.full(mesh.n_nodes, -1, dtype=np.int64)
    position[nodes] = np.arange(len(nodes))
    return EnrichmentPlan(nodes, corner_of, shifts, dofs, mesh.n_nodes, L, strategy,
                          radius if strategy == "radius" else None, position, tuple(cnodes))


def element_dofs(mesh, plan: EnrichmentPlan, e: int):
    """Global DOF indices of element ``e`` and the enriched local nodes.

    Returns ``(dofs, enriched_local, rows)`` where ``enriched_local`` are the
    local node positions carrying enrichment and ``rows`` their rows in the
    plan.
    """
    conn = mesh.elements[e]
    rows = plan.index_of(conn)
    loc = np.nonzero(rows >= 0)[0]
    rows = rows[loc]
    extra = plan.dofs[rows].ravel() if len(rows) else np.zeros(0, dtype=np.int64)
    return np.concatenate([conn, extra]), loc, rows


def element_corner(mesh, plan: EnrichmentPlan, e: int, rows) -> int:
    """Corner index used to evaluate the basis in element ``e``."""
    if len(rows) == 0:
        return -1
    cs = np.unique(plan.corner_of[rows])
    if len(cs) > 1:
        raise GeometryError(f"element {e} touches the enrichment zones of two corners")
    return int(cs[0])


def enriched_shape_eval_factors(coords, order, basis, ci, shifts, loc, A, B, C, D,
                                origin, hint=None):
    """Extended shape functions from edge factors.

    ``coords`` are the element nodal coordinates, ``origin`` the corner
    position used for offsets, ``loc`` the enriched local nodes and
    ``shifts`` (len(loc), L) their shift values.  Returns (values (q, n+k*L),
    phys_gradients (q, n+k*L, 2), det (q,), offsets (q, 2)).
    """
    N, dN = shape_from_factors(order, A, B, C, D)
    rel = np.asarray(coords, dtype=float) - np.asarray(origin, dtype=float)
    dNdx, det = jacobian_transform(coords, dN)
    off = N @ rel
    if len(loc) == 0:
        return N, dNdx, det, off
    psi, gpsi = basis.evaluate(ci, off[..., 0], off[..., 1], hint=hint)
    L = psi.shape[-1]
    Nj = N[..., loc]  # (q, k)
    gNj = dNdx[..., loc, :]  # (q, k, 2)
    diff = psi[..., None, :] - shifts[None, :, :]  # (q, k, L)
    val = (Nj[..., None] * diff).reshape(N.shape[0], -1)
    grad = gNj[..., None, :] * diff[..., None] + Nj[..., None, None] * gpsi[:, None, :, :]
    grad = grad.reshape(N.shape[0], -1, 2)
    return (np.concatenate([N, val], axis=-1), np.concatenate([dNdx, grad], axis=-2), det, off)


def enriched_shape_eval(mesh, e: int, plan: EnrichmentPlan, basis, xi, eta) -> ShapeEval:
    """Standard plus shifted-enriched shape functions of element ``e``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    coords = mesh.nodes[mesh.elements[e]]
    _, loc, rows = element_dofs(mesh, plan, e)
    A, B, C, D = factors(xi, eta)
    if len(loc) == 0:
        N, dN = shape_from_factors(mesh.order, A, B, C, D)
        dNdx, det = jacobian_transform(coords, dN)
        return ShapeEval(N, dN, dNdx, det)
    ci = element_corner(mesh, plan, e, rows)
    origin = np.asarray(basis.corners[ci].position, dtype=float)
    hint = coords[:4].mean(axis=0) - origin
    vals, grads, det, _ = enriched_shape_eval_factors(
        coords, mesh.order, basis, ci, plan.shifts[rows], loc, A, B, C, D, origin, hint)
    _, dN = shape_from_factors(mesh.order, A, B, C, D)
    return ShapeEval(vals, dN, grads, det)


def standard_node_count(order: int) -> int:
    return N_NODES[order]
