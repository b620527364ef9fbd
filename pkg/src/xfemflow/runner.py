"""Case execution, convergence sweeps and result files."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analytic import plate_potential, solve_dispersion
from .assembly import QuadratureSettings, assemble_plate_system, assemble_radiation_system
from .config import SWEEP_AXES, CaseConfig
from .enrichment import AnalyticPlateBasis, Corner, CornerFlowBasis, select_enriched_nodes
from .errors import ConfigError
from .hydro import SolutionField, added_mass_uniform_flow, l2_error, rectangle_hydro
from .mesh import build_plate_domain, build_rectangle_domain, read_mesh_file
from .quadrature import AdaptiveConfig
from .solver import SolverConfig, solve

log = logging.getLogger(__name__)

COLUMNS = ("case", "method", "order", "strategy", "n_terms", "r_enri", "delta_h", "n_p",
           "omega2B_2g", "l2_error", "a33_nd", "b33_nd", "fbar_nd", "residual", "seconds")


def _settings(cfg: CaseConfig) -> QuadratureSettings:
    q = cfg.quadrature
    return QuadratureSettings(
        enriched=q.enriched_gauss,
        adaptive=AdaptiveConfig(q.adaptive_tolerance, q.max_levels, q.base_order),
        line=AdaptiveConfig(q.line_tolerance, q.max_levels, q.base_order))


def _row(cfg: CaseConfig, **values) -> dict:
    row = dict.fromkeys(COLUMNS)
    xfem = cfg.method == "xfem"
    row.update(case=cfg.case, method=cfg.method, order=cfg.order,
               strategy=cfg.enrichment.strategy if xfem else None,
               n_terms=cfg.n_terms if xfem else None,
               r_enri=cfg.enrichment.r_enri if xfem and cfg.enrichment.strategy == "radius" else None)
    row.update(values)
    return row


def _basis(cfg: CaseConfig, corners, a: float = 1.0):
    if cfg.basis_kind == "analytic":
        if cfg.enrichment.n_terms not in (None, 1):
            raise ConfigError("analytic enrichment has exactly one term")
        return AnalyticPlateBasis(corners, a)
    return CornerFlowBasis(corners, cfg.n_terms)


def run_plate(cfg: CaseConfig) -> list[dict]:
    t0 = time.perf_counter()
    a = cfg.physics.half_width
    if cfg.mesh.mesh_file:
        raise ConfigError("the flat-plate case uses the built-in structured mesh")
    mesh = build_plate_domain(a, cfg.mesh.domain_half_size * a, cfg.mesh.delta_h * a, cfg.order_int)
    settings = _settings(cfg)
    plan = basis = None
    if cfg.method == "xfem":
        basis = _basis(cfg, mesh.corners, a)
        plan = select_enriched_nodes(mesh, basis, cfg.enrichment.strategy, cfg.enrichment.r_enri * a)
    system = assemble_plate_system(mesh, plan, basis, dirichlet=lambda x, y: plate_potential(x, y, a),
                                   settings=settings)
    report = solve(system, SolverConfig(cfg.solver.residual_tolerance))
    field = SolutionField(mesh, system.expand(report.solution), plan, basis, settings)
    exact = plate_potential(mesh.nodes[:, 0], mesh.nodes[:, 1], a, face=mesh.node_face)
    err = l2_error(field.nodal(), exact)
    added = added_mass_uniform_flow(field, cfg.physics.stream, cfg.physics.rho)
    n_p = plan.n_dofs if plan is not None else mesh.n_nodes
    return [_row(cfg, delta_h=cfg.mesh.delta_h, n_p=n_p, l2_error=err,
                 a33_nd=added / (cfg.physics.rho * math.pi * a * a), residual=report.residual,
                 seconds=time.perf_counter() - t0)]


def _omega(nd: float, beam: float, g: float) -> float:
    return math.sqrt(nd * 2.0 * g / beam)


def build_case_mesh(cfg: CaseConfig):
    """Rectangle mesh for ``cfg`` (structured, or read from ``mesh_file``)."""
    p = cfg.physics
    depth = p.depth_over_draft * p.draft
    if cfg.mesh.mesh_file:
        mesh = read_mesh_file(cfg.mesh.mesh_file)
        if mesh.order != cfg.order_int:
            raise ConfigError("mesh file order does not match the configured order")
        d = np.hypot(mesh.nodes[:, 0] - p.beam / 2, mesh.nodes[:, 1] + p.draft)
        corner = Corner((p.beam / 2, -p.draft), math.pi / 2, math.pi, node=int(np.argmin(d)))
        return replace(mesh, corners=(corner,), meta={**mesh.meta, "depth": depth})
    ref = p.reference_omega2B_2g or min(p.omega2B_2g)
    lam = 2.0 * math.pi / solve_dispersion(_omega(ref, p.beam, p.g), depth, p.g)
    return build_rectangle_domain(p.beam, p.draft, depth, cfg.mesh.lx_over_lambda * lam,
                                  cfg.mesh.n_rx, cfg.mesh.n_ox, cfg.mesh.n_oy, cfg.order_int,
                                  cfg.mesh.stretch, cfg.mesh.inner_size)


def run_rectangle(cfg: CaseConfig) -> list[dict]:
    p = cfg.physics
    t0 = time.perf_counter()
    mesh = build_case_mesh(cfg)
    settings = _settings(cfg)
    plan = basis = None
    if cfg.method == "xfem":
        basis = _basis(cfg, mesh.corners)
        plan = select_enriched_nodes(mesh, basis, cfg.enrichment.strategy,
                                     cfg.enrichment.r_enri * p.beam / 2.0)
    n_p = plan.n_dofs if plan is not None else mesh.n_nodes
    setup = time.perf_counter() - t0
    rows = []
    for nd in p.omega2B_2g:
        t1 = time.perf_counter()
        omega = _omega(nd, p.beam, p.g)
        system = assemble_radiation_system(mesh, plan, basis, omega, p.depth_over_draft * p.draft,
                                           p.amplitude, p.g, settings=settings)
        report = solve(system, SolverConfig(cfg.solver.residual_tolerance))
        field = SolutionField(mesh, report.solution, plan, basis, settings)
        h = rectangle_hydro(field, omega, p.beam, p.draft, p.rho, p.amplitude, drift=p.mean_force)
        rows.append(_row(cfg, n_p=n_p, omega2B_2g=nd, a33_nd=h.a33_nd, b33_nd=h.b33_nd,
                         fbar_nd=h.fbar_nd, residual=report.residual,
                         seconds=setup + time.perf_counter() - t1))
    return rows


def run_case(cfg: CaseConfig) -> list[dict]:
    """Rows for one configuration (one per frequency for the rectangle)."""
    if cfg.case == "flat_plate":
        return run_plate(cfg)
    return run_rectangle(cfg)


def with_axis_value(cfg: CaseConfig, axis: str, value, reference: float | None = None) -> CaseConfig:
    data = cfg.model_dump()
    data["sweep"] = {}
    if axis == "delta_h":
        data["mesh"]["delta_h"] = value
    elif axis == "r_enri":
        data["enrichment"]["r_enri"] = value
    elif axis == "n_terms":
        data["enrichment"]["n_terms"] = int(value)
    elif axis == "l_x":
        data["mesh"]["lx_over_lambda"] = value
    elif axis == "omega":
        phys = data["physics"]
        # one computational domain for the whole frequency sweep
        phys["reference_omega2B_2g"] = phys["reference_omega2B_2g"] or reference or value
        phys["omega2B_2g"] = [value]
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    return CaseConfig.model_validate(data)


def fit_slope(x, y):
    """Least-squares slope of log(y) against log(x); None if fewer than 3 points."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 3:
        warnings.warn("fewer than 3 sweep points; slope fit skipped", stacklevel=2)
        return None
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def run_convergence_sweep(cfg: CaseConfig, axis: str, values=None, workers: int = 1):
    """Rows for every axis value (in axis order) and fitted slopes.

    Slopes are reported for the ``delta_h`` axis: ``l2_error`` and the
    added-mass error ``|a33_nd - 1|`` of the plate.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = list(values if values is not None else cfg.sweep.get(axis, []))
    if not values:
        raise ConfigError(f"no values given for sweep axis {axis!r}")
    ref = min(values) if axis == "omega" else None
    configs = [with_axis_value(cfg, axis, v, ref) for v in values]
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_case, configs))
    else:
        results = [run_case(c) for c in configs]
    rows = [r for rs in results for r in rs]
    slopes = {}
    if axis == "delta_h":
        if len(values) < 3:
            warnings.warn("fewer than 3 sweep points; slope fit skipped", stacklevel=2)
        else:
            if all(r["l2_error"] is not None for r in rows):
                slopes["l2_error"] = fit_slope(values, [r["l2_error"] for r in rows])
            if cfg.case == "flat_plate":
                slopes["added_mass"] = fit_slope(values, [r["a33_nd"] - 1.0 for r in rows])
    return rows, slopes


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows, out_dir, stem: str, cfg: CaseConfig, extra: dict | None = None):
    """Write ``<stem>.csv`` and ``<stem>.json``; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in COLUMNS])
    json_path = out / f"{stem}.json"
    payload = {"config": cfg.model_dump(), "columns": list(COLUMNS), "rows": rows}
    if extra:
        payload.update(extra)
    json_path.write_text(json.dumps(payload, indent=2))
    return csv_path, json_path
