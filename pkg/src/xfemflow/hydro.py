"""Post-processing: errors, velocities, added mass, damping, mean drift force.

Body-surface normals point out of the fluid.  Forces on the heaving
rectangle are doubled to account for the mirrored half of the domain.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import QuadratureSettings, edge_integral, edge_mass
from .elements import REF_NODES
from .enrichment import EnrichmentPlan, element_dofs, empty_plan, enriched_shape_eval_factors, element_corner
from .elements import factors, jacobian_transform, shape_from_factors
from .errors import DomainError, SignConventionError, SingularEvaluationError


@dataclass
class SolutionField:
    """Full DOF vector (standard then enriched) on a mesh."""

    mesh: object
    values: np.ndarray
    plan: EnrichmentPlan | None = None
    basis: object = None
    settings: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        if self.plan is None:
            self.plan = empty_plan(self.mesh)
        if len(self.values) != self.plan.n_dofs:
            raise DomainError(f"expected {self.plan.n_dofs} DOFs, got {len(self.values)}")

    @property
    def scalar_kind(self) -> str:
        return "complex" if np.iscomplexobj(self.values) else "real"

    def nodal(self) -> np.ndarray:
        """Potential at the mesh nodes (the shifted enrichment vanishes there)."""
        return self.values[: self.mesh.n_nodes]

    def element_eval(self, e: int, xi, eta):
        """(phi, grad phi) at reference points of element ``e``."""
        mesh, plan = self.mesh, self.plan
        dofs, loc, rows = element_dofs(mesh, plan, e)
        coords = mesh.nodes[mesh.elements[e]]
        A, B, C, D = factors(np.atleast_1d(xi), np.atleast_1d(eta))
        if len(loc):
            ci = element_corner(mesh, plan, e, rows)
            origin = np.asarray(self.basis.corners[ci].position, dtype=float)
            hint = coords[:4].mean(axis=0) - origin
            N, G, _, _ = enriched_shape_eval_factors(
                coords, mesh.order, self.basis, ci, plan.shifts[rows], loc, A, B, C, D, origin, hint)
        else:
            N, dN = shape_from_factors(mesh.order, A, B, C, D)
            G, _ = jacobian_transform(coords, dN)
        u = self.values[dofs]
        return N @ u, np.einsum("qni,n->qi", G, u)

    def edge_integral(self, tag: str, func, gradient: bool = False):
        """Sum over edges with ``tag`` of the integral of ``func(phi, grad, xy, normal)``."""
        total = 0.0
        els, locs = self.mesh.edges_with_tag(tag)
        for e, k in zip(els, locs):
            def inner(N, G, xy, nrm, e=e):
                u = self.values[element_dofs(self.mesh, self.plan, int(e))[0]]
                phi = N @ u
                grad = np.einsum("qni,n->qi", G, u) if G is not None else None
                return func(phi, grad, xy, nrm)
            val, _ = edge_integral(self.mesh, int(e), int(k), inner, self.plan, self.basis,
                                   self.settings, gradient=gradient)
            total = total + val
        return total


def l2_error(numerical, analytic) -> float:
    """sqrt(sum (num - ana)^2 / sum ana^2) over nodal values."""
    numerical = np.asarray(numerical)
    analytic = np.asarray(analytic)
    if numerical.shape != analytic.shape:
        raise DomainError("numerical and analytic arrays differ in shape")
    den = float(np.sum(np.abs(analytic) ** 2))
    if den == 0.0:
        raise ZeroDivisionError("analytic field has zero norm")
    return float(np.sqrt(np.sum(np.abs(numerical - analytic) ** 2) / den))


@dataclass
class VelocityRecovery:
    """Nodal velocities averaged over adjacent elements.

    ``jump`` is the largest difference between element contributions at each
    node (the method is only C0).  Nodes where every contribution is singular
    (the corner itself) are NaN.
    """

    u: np.ndarray
    v: np.ndarray
    jump: np.ndarray


def recover_velocity(field: SolutionField) -> VelocityRecovery:
    mesh = field.mesh
    n = mesh.n_nodes
    ref = REF_NODES[mesh.order]
    acc = np.zeros((n, 2), dtype=field.values.dtype)
    cnt = np.zeros(n)
    vmin = np.full((n, 2), np.inf)
    vmax = np.full((n, 2), -np.inf)
    corner_nodes = set(field.plan.corner_nodes) if field.plan.n_enriched else set()
    for e in range(mesh.n_elements):
        conn = mesh.elements[e]
        keep = np.array([c not in corner_nodes for c in conn])
        if not keep.any():
            continue
        try:
            _, g = field.element_eval(e, ref[keep, 0], ref[keep, 1])
        except SingularEvaluationError:
            continue
        ids = conn[keep]
        np.add.at(acc, ids, g)
        np.add.at(cnt, ids, 1.0)
        gr = np.real(g)
        vmin[ids] = np.minimum(vmin[ids], gr)
        vmax[ids] = np.maximum(vmax[ids], gr)
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = acc / cnt[:, None]
    jump = np.where(cnt > 0, np.max(vmax - vmin, axis=1), np.nan)
    avg[cnt == 0] = np.nan
    return VelocityRecovery(avg[:, 0], avg[:, 1], jump)


def added_mass_uniform_flow(field: SolutionField, stream: float = -1.0, rho: float = 1.0) -> float:
    """Heave added mass of the plate from the fixed-body solution in a stream.

    The moving-body potential is ``phi2 = (U y - phi_fix) / U`` and the added
    mass ``rho * integral of phi2 * n_y`` over both plate faces (n out of the
    fluid).  ``stream`` is the far-field vertical velocity U of the fixed-body
    flow.
    """
    if stream == 0:
        raise DomainError("stream speed must be nonzero")
    val = field.edge_integral(
        "body", lambda phi, g, xy, nrm: ((stream * xy[:, 1] - phi) / stream) * nrm[:, 1])
    return rho * float(np.real(val))


@dataclass(frozen=True)
class HydroResult:
    a33: float
    b33: float
    fbar: float | None
    a33_nd: float
    b33_nd: float
    fbar_nd: float | None
    force: complex


def heave_force(field: SolutionField, omega: float, rho: float = 1.0) -> complex:
    """Complex heave force on the whole body (both halves)."""
    integral = field.edge_integral("body", lambda phi, g, xy, nrm: phi * nrm[:, 1])
    return complex(-1j * omega * rho * 2.0 * integral)


def radiation_coefficients(field: SolutionField, omega: float, rho: float = 1.0,
                           amplitude: float = 1.0):
    """(A33, B33) from pressure integration.

    ``F = (omega^2 A33 - i omega B33) * amplitude``.
    """
    F = heave_force(field, omega, rho)
    a33 = F.real / (omega ** 2 * amplitude)
    b33 = -F.imag / (omega * amplitude)
    if not a33 > 0:
        raise SignConventionError(f"added mass came out non-positive ({a33:g})")
    if b33 < -1e-8 * max(abs(a33) * omega, 1e-300):
        raise SignConventionError(f"radiation damping came out negative ({b33:g})")
    return a33, b33


def energy_flux_damping(field: SolutionField, omega: float, k: float, rho: float = 1.0,
                        amplitude: float = 1.0) -> float:
    """Damping from the wave energy radiated through the matching boundary.

    Mean power per side is ``rho omega k / 2 * int |phi|^2 dy``; two sides
    balance ``B33 omega^2 amplitude^2 / 2``.
    """
    M = edge_mass(field.mesh, "matching")
    phi = field.nodal()
    flux = float(np.real(np.conj(phi) @ (M @ phi)))
    return 2.0 * rho * k * flux / (omega * amplitude ** 2)


def mean_vertical_force(field: SolutionField, omega: float, rho: float = 1.0,
                        amplitude: float = 1.0) -> float:
    """Time-averaged second-order vertical force from direct pressure integration.

    ``-rho * int [ 1/2 Re(eta conj(i omega phi_y)) + 1/4 |grad phi|^2 ] n_y dS``
    over the mean wetted surface, doubled for the mirrored half.
    """
    def integrand(phi, g, xy, nrm):
        lin = 0.5 * np.real(amplitude * np.conj(1j * omega * g[:, 1]))
        quad = 0.25 * np.sum(np.abs(g) ** 2, axis=1)
        return (lin + quad) * nrm[:, 1]

    val = field.edge_integral("body", integrand, gradient=True)
    return float(-rho * 2.0 * np.real(val))


def rectangle_hydro(field: SolutionField, omega: float, beam: float, draft: float,
                    rho: float = 1.0, amplitude: float = 1.0, drift: bool = True) -> HydroResult:
    """All rectangle outputs in dimensional and nondimensional form."""
    a33, b33 = radiation_coefficients(field, omega, rho, amplitude)
    S = beam * draft
    fbar = mean_vertical_force(field, omega, rho, amplitude) if drift else None
    fnd = fbar / (rho * omega ** 2 * amplitude ** 2 * beam) if drift else None
    F = heave_force(field, omega, rho)
    return HydroResult(a33, b33, fbar, a33 / (rho * S), b33 / (rho * S * omega), fnd, F)
