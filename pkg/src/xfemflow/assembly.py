"""Global sparse systems for the fixed-plate and radiation problems.

Plain elements (no enriched node) are integrated in one vectorized pass.
Enriched elements are visited one by one: Gauss for blending elements,
adaptive vertex-refined cubature for elements that own the singular corner.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .analytic import GRAVITY, solve_dispersion
from .elements import EDGE_NODES, edge_trace, factors, jacobian_transform, shape_from_factors, vertex_factors
from .enrichment import EnrichmentPlan, element_corner, element_dofs, empty_plan, enriched_shape_eval_factors
from .errors import AssemblyError, ConfigError, QuadratureAccuracyError
from .quadrature import AdaptiveConfig, adaptive_line_quadrature, adaptive_singular_cubature, gauss_rule_1d, gauss_rule_2d

# CCW orientation of each local edge relative to its parameter direction
_EDGE_SIGN = (1.0, 1.0, -1.0, -1.0)


@dataclass(frozen=True)
class QuadratureSettings:
    """Gauss orders and adaptive controls.

    ``plain`` defaults to 2 (linear) or 3 (quadratic) points per direction.
    """

    plain: int | None = None
    enriched: int = 6
    edge: int = 6
    adaptive: AdaptiveConfig = field(default_factory=lambda: AdaptiveConfig(tolerance=1e-10))
    line: AdaptiveConfig = field(default_factory=lambda: AdaptiveConfig(tolerance=1e-10))

    def plain_order(self, order: int) -> int:
        return self.plain if self.plain is not None else order + 1


@dataclass
class AssembledSystem:
    """Reduced system over the free DOFs plus what is needed to expand it."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    n_dofs: int
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    scalar_kind: str = "real"
    info: dict = field(default_factory=dict)

    def expand(self, x) -> np.ndarray:
        out = np.zeros(self.n_dofs, dtype=np.result_type(x, self.fixed_values))
        out[self.free] = x
        out[self.fixed] = self.fixed_values
        return out


# ----------------------------------------------------------------------------
# element level


def plain_stiffness(mesh, els, n_gauss: int):
    """Stiffness blocks (E, n, n) of standard elements."""
    rule = gauss_rule_2d(n_gauss)
    _, dN = shape_from_factors(mesh.order, *factors(rule.points[:, 0], rule.points[:, 1]))
    coords = mesh.nodes[mesh.elements[els]]  # (E, n, 2)
    dNdx, det = jacobian_transform(coords[:, None, :, :], dN[None])
    if np.any(det <= 0.0):
        raise AssemblyError("non-positive Jacobian in a plain element")
    return np.einsum("eqni,eqmi,eq,q->enm", dNdx, dNdx, det, rule.weights, optimize=True)


def _singular_vertex(mesh, plan, e, ci):
    conn = mesh.elements[e, :4]
    hit = np.nonzero(conn == plan.corner_nodes[ci])[0]
    return int(hit[0]) if len(hit) else -1


def _element_context(mesh, plan, basis, e):
    dofs, loc, rows = element_dofs(mesh, plan, e)
    coords = mesh.nodes[mesh.elements[e]]
    if len(loc) == 0:
        return dofs, loc, rows, coords, -1, None, None, -1
    ci = element_corner(mesh, plan, e, rows)
    origin = np.asarray(basis.corners[ci].position, dtype=float)
    hint = coords[:4].mean(axis=0) - origin
    v = _singular_vertex(mesh, plan, e, ci)
    return dofs, loc, rows, coords, ci, origin, hint, v


def element_matrix(mesh, e: int, plan: EnrichmentPlan | None = None, basis=None,
                   settings: QuadratureSettings | None = None):
    """Local stiffness block and its global DOF indices.

    Returns ``(Ke, dofs, kind)`` with ``kind`` in {plain, blending, singular}.
    """
    settings = settings or QuadratureSettings()
    plan = plan if plan is not None else empty_plan(mesh)
    dofs, loc, rows, coords, ci, origin, hint, v = _element_context(mesh, plan, basis, e)
    if len(loc) == 0:
        return plain_stiffness(mesh, [e], settings.plain_order(mesh.order))[0], dofs, "plain"
    shifts = plan.shifts[rows]

    def integrand(A, B, C, D):
        _, grads, det, _ = enriched_shape_eval_factors(
            coords, mesh.order, basis, ci, shifts, loc, A, B, C, D, origin, hint)
        return np.einsum("qai,qbi,q->qab", grads, grads, det)

    if v < 0:
        rule = gauss_rule_2d(settings.enriched)
        vals = integrand(*factors(rule.points[:, 0], rule.points[:, 1]))
        return np.tensordot(rule.weights, vals, axes=(0, 0)), dofs, "blending"
    m1 = basis.leading_exponent(ci)
    try:
        Ke = adaptive_singular_cubature(
            lambda du, dv: integrand(*vertex_factors(v, du, dv)),
            (-1.0, 1.0, -1.0, 1.0), v, settings.adaptive, exponent=2.0 * m1 - 2.0, relative=True)
    except QuadratureAccuracyError as exc:
        raise QuadratureAccuracyError(f"element {e}: {exc}", exc.estimate, exc.error_bound) from None
    return 0.5 * (Ke + Ke.T), dofs, "singular"


def _edge_factors(edge: int, s, from_end: int):
    """Edge factors at distance ``s`` in [0, 2] (reference units) from one end."""
    v = edge if from_end == 0 else (edge + 1) % 4
    s = np.asarray(s, dtype=float)
    zero = np.zeros_like(s)
    u, w = (s, zero) if edge % 2 == 0 else (zero, s)
    return vertex_factors(v, u, w)


def edge_integral(mesh, e: int, edge: int, func, plan=None, basis=None,
                  settings: QuadratureSettings | None = None, gradient: bool = False):
    """Integrate ``func`` along local edge ``edge`` of element ``e``.

    ``func(values, grads, xy, normal)`` gets the extended shape values
    (q, nd), physical gradients (q, nd, 2) or None, physical points (q, 2)
    and the unit normal pointing out of the element (q, 2); it returns an
    array whose first axis is q.  Edges that end at the singular corner of an
    enriched element use adaptive bisection toward that end.  Returns
    ``(integral, dofs)``.
    """
    settings = settings or QuadratureSettings()
    plan = plan if plan is not None else empty_plan(mesh)
    dofs, loc, rows, coords, ci, origin, hint, v = _element_context(mesh, plan, basis, e)
    shifts = plan.shifts[rows] if len(loc) else None

    def at(s, from_end):
        A, B, C, D = _edge_factors(edge, s, from_end)
        N, dN = shape_from_factors(mesh.order, A, B, C, D)
        tang = np.einsum("qn,nj->qj", dN[..., edge % 2], coords) * _EDGE_SIGN[edge]
        jac = np.hypot(tang[:, 0], tang[:, 1])
        normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / jac[:, None]
        xy = N @ coords
        if len(loc):
            if gradient:
                vals, grads, _, _ = enriched_shape_eval_factors(
                    coords, mesh.order, basis, ci, shifts, loc, A, B, C, D, origin, hint)
            else:
                off = N @ (coords - origin)
                psi, _ = basis.evaluate(ci, off[:, 0], off[:, 1], hint=hint, gradient=False)
                extra = (N[:, loc, None] * (psi[:, None, :] - shifts[None])).reshape(len(s), -1)
                vals, grads = np.concatenate([N, extra], axis=1), None
        else:
            vals = N
            grads = jacobian_transform(coords, dN)[0] if gradient else None
        out = np.asarray(func(vals, grads, xy, normal))
        return out * jac.reshape((-1,) + (1,) * (out.ndim - 1))

    ends = EDGE_NODES[1][edge]
    if v in ends:
        from_end = 0 if v == ends[0] else 1
        try:
            val = adaptive_line_quadrature(lambda s: at(s, from_end), (0.0, 2.0), 0,
                                           settings.line, relative=True)
        except QuadratureAccuracyError as exc:
            raise QuadratureAccuracyError(f"element {e} edge {edge}: {exc}", exc.estimate,
                                          exc.error_bound) from None
        return val, dofs
    rule = gauss_rule_1d(settings.edge)
    s = rule.points + 1.0
    return np.tensordot(rule.weights, at(s, 0), axes=(0, 0)), dofs


def edge_mass(mesh, tag: str, n_gauss: int = 4):
    """Consistent boundary mass of standard functions on edges with ``tag``."""
    els, locs = mesh.edges_with_tag(tag)
    if len(els) == 0:
        return sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    rule = gauss_rule_1d(n_gauss)
    rows, cols, data = [], [], []
    for k in range(4):
        sel = locs == k
        if not np.any(sel):
            continue
        vals, local, _ = edge_trace(mesh.order, k, rule.points)
        conn = mesh.elements[els[sel]][:, list(local)]  # (M, p)
        pts = mesh.nodes[conn]  # (M, p, 2)
        dvals = np.stack([rule.points - 0.5, rule.points + 0.5, -2.0 * rule.points], axis=-1) \
            if mesh.order == 2 else np.tile([-0.5, 0.5], (len(rule.points), 1))
        tang = np.einsum("qp,mpj->mqj", dvals, pts)
        jac = np.hypot(tang[..., 0], tang[..., 1])
        Me = np.einsum("qa,qb,mq,q->mab", vals, vals, jac, rule.weights)
        p = conn.shape[1]
        rows.append(np.repeat(conn, p, axis=1).ravel())
        cols.append(np.tile(conn, (1, p)).ravel())
        data.append(Me.ravel())
    M = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_nodes, mesh.n_nodes))
    return M.tocsr()


# ----------------------------------------------------------------------------
# global


def assemble_stiffness(mesh, plan: EnrichmentPlan | None = None, basis=None,
                       settings: QuadratureSettings | None = None):
    """Global stiffness over standard and enriched DOFs (csr, real)."""
    settings = settings or QuadratureSettings()
    plan = plan if plan is not None else empty_plan(mesh)
    n = plan.n_dofs
    enriched_el = np.any(plan.position[mesh.elements] >= 0, axis=1)
    plain = np.nonzero(~enriched_el)[0]
    rows, cols, data = [], [], []
    kinds = {"plain": len(plain), "blending": 0, "singular": 0}
    if len(plain):
        Ke = plain_stiffness(mesh, plain, settings.plain_order(mesh.order))
        conn = mesh.elements[plain]
        p = conn.shape[1]
        rows.append(np.repeat(conn, p, axis=1).ravel())
        cols.append(np.tile(conn, (1, p)).ravel())
        data.append(Ke.ravel())
    for e in np.nonzero(enriched_el)[0]:
        Ke, dofs, kind = element_matrix(mesh, int(e), plan, basis, settings)
        kinds[kind] += 1
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        data.append(Ke.ravel())
    K = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    K.sum_duplicates()
    return K, kinds


def _check_no_enrichment_on(mesh, plan, tags):
    for tag in tags:
        nodes = mesh.nodes_with_tag(tag)
        if len(nodes) and np.any(plan.position[nodes] >= 0):
            raise AssemblyError(f"enriched node lies on the {tag} boundary; reduce the enrichment radius")


def body_load(mesh, flux, plan=None, basis=None, settings=None):
    """Load vector of ``flux(xy, normal)`` on body edges, enriched trace included."""
    plan = plan if plan is not None else empty_plan(mesh)
    b = None
    els, locs = mesh.edges_with_tag("body")
    for e, k in zip(els, locs):
        val, dofs = edge_integral(
            mesh, int(e), int(k), lambda N, G, xy, nrm: N * np.asarray(flux(xy, nrm))[:, None],
            plan, basis, settings)
        if b is None:
            b = np.zeros(plan.n_dofs, dtype=np.result_type(val, float))
        np.add.at(b, dofs, val)
    return b if b is not None else np.zeros(plan.n_dofs)


def assemble_plate_system(mesh, plan: EnrichmentPlan | None = None, basis=None, dirichlet=None,
                          neumann=None, settings: QuadratureSettings | None = None) -> AssembledSystem:
    """Fixed-plate problem: Laplace with Dirichlet data on the outer boundary.

    ``dirichlet(x, y)`` gives the boundary potential; ``neumann(xy, normal)``
    an optional flux on the plate (zero for a fixed plate in a stream).
    Dirichlet DOFs are eliminated.
    """
    plan = plan if plan is not None else empty_plan(mesh)
    _check_no_enrichment_on(mesh, plan, ("dirichlet",))
    K, kinds = assemble_stiffness(mesh, plan, basis, settings)
    n = plan.n_dofs
    b = np.zeros(n)
    if neumann is not None:
        b += body_load(mesh, neumann, plan, basis, settings)
    fixed = mesh.nodes_with_tag("dirichlet")
    if dirichlet is None:
        values = np.zeros(len(fixed))
    else:
        values = np.asarray(dirichlet(mesh.nodes[fixed, 0], mesh.nodes[fixed, 1]), dtype=float)
    is_free = np.ones(n, dtype=bool)
    is_free[fixed] = False
    free = np.nonzero(is_free)[0]
    Kff = K[free][:, free].tocsr()
    rhs = b[free] - K[free][:, fixed] @ values
    return AssembledSystem(Kff, rhs, free, n, fixed, values, "real",
                           {"elements": kinds, "stiffness": K})


def assemble_radiation_system(mesh, plan: EnrichmentPlan | None = None, basis=None,
                              omega: float = 1.0, depth: float | None = None, amplitude: float = 1.0,
                              g: float = GRAVITY, k: float | None = None,
                              settings: QuadratureSettings | None = None) -> AssembledSystem:
    """Heave radiation problem in the half domain (time factor exp(i omega t)).

    Matrix ``K + i k M_m - (omega^2/g) M_f``; load is the body flux
    ``i omega amplitude n_y`` with n out of the fluid.
    """
    if not omega > 0:
        raise ConfigError("omega must be positive")
    depth = mesh.meta.get("depth") if depth is None else depth
    if depth is None or not depth > 0:
        raise ConfigError("water depth must be positive")
    plan = plan if plan is not None else empty_plan(mesh)
    _check_no_enrichment_on(mesh, plan, ("free_surface", "matching", "dirichlet"))
    if k is None:
        k = solve_dispersion(omega, depth, g)
        nu = omega * omega / g
    else:
        nu = k * np.tanh(k * depth)
    K, kinds = assemble_stiffness(mesh, plan, basis, settings)
    n = plan.n_dofs
    Mm = edge_mass(mesh, "matching")
    Mf = edge_mass(mesh, "free_surface")
    pad = lambda M: sp.block_diag([M, sp.csr_matrix((n - mesh.n_nodes, n - mesh.n_nodes))]).tocsr() \
        if n > mesh.n_nodes else M
    A = (K.astype(complex) + 1j * k * pad(Mm) - nu * pad(Mf)).tocsr()
    b = body_load(mesh, lambda xy, nrm: 1j * omega * amplitude * nrm[:, 1], plan, basis, settings)
    return AssembledSystem(A, b.astype(complex), np.arange(n), n, scalar_kind="complex",
                           info={"elements": kinds, "k": k, "nu": nu, "omega": omega,
                                 "depth": depth, "amplitude": amplitude, "stiffness": K})
