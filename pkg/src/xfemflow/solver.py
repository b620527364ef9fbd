"""Sparse direct solve with a residual check."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import NumericError, SolverRankError


@dataclass(frozen=True)
class SolverConfig:
    residual_tolerance: float = 1e-10
    refinement_steps: int = 3


@dataclass
class SolveReport:
    solution: np.ndarray
    residual: float
    stats: dict = field(default_factory=dict)


def _residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r


def solve(system, config: SolverConfig | None = None) -> SolveReport:
    """Solve ``system.matrix x = system.rhs`` by sparse LU.

    ``system`` may be an AssembledSystem or a ``(matrix, rhs)`` pair.  A few
    steps of iterative refinement are taken if the first residual misses the
    tolerance.
    """
    cfg = config or SolverConfig()
    if isinstance(system, tuple):
        A, b = system
        kind = "complex" if np.iscomplexobj(A) or np.iscomplexobj(b) else "real"
    else:
        A, b, kind = system.matrix, system.rhs, system.scalar_kind
    A = sp.csc_matrix(A)
    b = np.asarray(b)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise NumericError(f"system is not square/consistent: {A.shape} vs rhs {b.shape}")
    dtype = complex if kind == "complex" else float
    A = A.astype(dtype)
    b = b.astype(dtype)
    t0 = time.perf_counter()
    try:
        lu = splu(A)
    except RuntimeError as exc:
        raise SolverRankError(
            "matrix is singular; an all-Neumann real system without a Dirichlet anchor "
            f"has the constants in its null space ({exc})") from None
    t1 = time.perf_counter()
    x = lu.solve(b)
    res = _residual(A, x, b)
    steps = 0
    while res > cfg.residual_tolerance and steps < cfg.refinement_steps:
        x = x + lu.solve(b - A @ x)
        res = _residual(A, x, b)
        steps += 1
    if not np.all(np.isfinite(x)):
        raise SolverRankError("solution is not finite; the matrix is numerically singular")
    if res > cfg.residual_tolerance:
        raise NumericError(f"relative residual {res:.3e} exceeds {cfg.residual_tolerance:.1e}")
    stats = {"factor_seconds": t1 - t0, "solve_seconds": time.perf_counter() - t1,
             "refinement_steps": steps, "nnz_lu": int(lu.L.nnz + lu.U.nnz), "n": A.shape[0]}
    return SolveReport(x, float(res), stats)
