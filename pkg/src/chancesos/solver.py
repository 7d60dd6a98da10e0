"""Conic solve layer: equality rows + PSD blocks, with dual extraction.

Adapts a ConicProblem (maximize a linear functional of the moment variables)
to native conic solvers. Two backends:

  * clarabel: interior point, high accuracy; its direct KKT factorization
    holds a dense matrix per PSD cone, so memory grows with the fourth power
    of the largest block side. Default for small and medium blocks.
  * scs: first-order ADMM; per-iteration eigendecompositions keep memory
    linear in the problem data. Default for large blocks, at reduced
    accuracy.

Both solve  min q'v  s.t.  A v + s = b,  s in {0} x PSD x ...  The equality
dual vector is returned with the sign convention that its inner product with
the equality right-hand sides equals the (maximization) dual objective, so
the multipliers of the moment-matching rows are directly the coefficients of
the dual certificate polynomial.
"""
from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np
from scipy import sparse

from .program import ConicProblem, VarKey

_SQRT2 = math.sqrt(2.0)


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near-optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical-failure"

    def usable(self) -> bool:
        return self in (SolveStatus.OPTIMAL, SolveStatus.NEAR_OPTIMAL)


@dataclass(frozen=True)
class SolverConfig:
    """Backend selection and termination tolerances."""

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    scs_max_iter: int = 400_000
    backend: str = "auto"  # auto | clarabel | scs
    large_block_threshold: int = 120
    verbose: bool = False
    time_limit: float | None = None
    dump_path: str | None = None

    def __post_init__(self):
        if self.feas_tol <= 0 or self.gap_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.backend not in ("auto", "clarabel", "scs"):
            raise ValueError(f"unknown backend {self.backend!r}")

    def resolve_backend(self, problem: ConicProblem) -> str:
        if self.backend != "auto":
            return self.backend
        largest = max((b.size for b in problem.psd_blocks), default=0)
        return "clarabel" if largest <= self.large_block_threshold else "scs"


@dataclass
class ResidualReport:
    max_eq_residual: float
    min_psd_eigenvalue: float
    primal_objective: float
    dual_objective: float
    relative_gap: float

    def within(self, cfg: SolverConfig) -> bool:
        return (self.max_eq_residual <= cfg.feas_tol
                and self.min_psd_eigenvalue >= -cfg.feas_tol
                and self.relative_gap <= cfg.gap_tol)


@dataclass
class ConicSolution:
    status: SolveStatus
    objective: float
    dual_objective: float
    primal: Dict[VarKey, float]
    eq_duals: np.ndarray
    residuals: ResidualReport
    backend: str
    iterations: int
    wall_time: float
    solver_status: str = ""


# ---------------------------------------------------------------------------
# standard form


def _standard_form(problem: ConicProblem, lower_triangle: bool):
    """Triplet data for  A v + s = b  with a zero cone then PSD cones.

    PSD slices use scaled vectorization (off-diagonal entries times sqrt(2)),
    upper triangle column-major for clarabel, lower for scs.
    """
    var_index = {k: i for i, k in enumerate(problem.variables())}
    nvar = len(var_index)
    rows_i: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    b: List[float] = []
    r = 0
    for lf, rhs in problem.eq_rows:
        for key, c in lf.items():
            rows_i.append(r)
            cols.append(var_index[key])
            vals.append(c)
        b.append(rhs - lf.constant)
        r += 1
    m_eq = r
    block_sizes = []
    for blk in problem.psd_blocks:
        s = blk.size
        block_sizes.append(s)
        if lower_triangle:
            order = ((i, j) for j in range(s) for i in range(j, s))
        else:
            order = ((i, j) for j in range(s) for i in range(j + 1))
        for i, j in order:
            scale = 1.0 if i == j else _SQRT2
            for key, c in blk.entries.get((min(i, j), max(i, j)), ()):
                rows_i.append(r)
                cols.append(var_index[key])
                vals.append(-scale * c)
            b.append(0.0)
            r += 1
    A = sparse.csc_matrix((vals, (rows_i, cols)), shape=(r, nvar))
    q = np.zeros(nvar)
    for key, c in problem.objective.items():
        q[var_index[key]] = -c
    return A, np.asarray(b), q, m_eq, block_sizes, var_index


# ---------------------------------------------------------------------------
# backends


def _solve_clarabel(problem: ConicProblem, cfg: SolverConfig):
    import clarabel

    A, b, q, m_eq, sizes, var_index = _standard_form(problem, lower_triangle=False)
    cones = [clarabel.ZeroConeT(m_eq)] + [clarabel.PSDTriangleConeT(s) for s in sizes]
    P = sparse.csc_matrix((len(q), len(q)))
    settings = clarabel.DefaultSettings()
    settings.verbose = cfg.verbose
    settings.max_iter = cfg.max_iter
    settings.tol_gap_abs = cfg.gap_tol
    settings.tol_gap_rel = cfg.gap_tol
    settings.tol_feas = cfg.feas_tol
    if cfg.time_limit:
        settings.time_limit = cfg.time_limit
    solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
    sol = solver.solve()
    name = str(sol.status)
    if name in ("Solved",):
        status = SolveStatus.OPTIMAL
    elif name in ("AlmostSolved", "MaxIterations", "MaxTime", "InsufficientProgress"):
        status = SolveStatus.NEAR_OPTIMAL
    elif name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        status = SolveStatus.INFEASIBLE
    elif name in ("DualInfeasible", "AlmostDualInfeasible"):
        status = SolveStatus.UNBOUNDED
    else:
        status = SolveStatus.NUMERICAL_FAILURE
    x = np.asarray(sol.x)
    duals = np.asarray(sol.z[:m_eq])
    return status, x, duals, int(sol.iterations), name, var_index


def _solve_scs(problem: ConicProblem, cfg: SolverConfig):
    import scs

    A, b, q, m_eq, sizes, var_index = _standard_form(problem, lower_triangle=True)
    data = dict(A=A, b=b, c=q)
    cone = dict(z=m_eq, s=sizes)
    eps = max(cfg.feas_tol, cfg.gap_tol)
    kwargs = dict(verbose=cfg.verbose, eps_abs=eps, eps_rel=eps,
                  max_iters=cfg.scs_max_iter)
    if cfg.time_limit:
        kwargs["time_limit_secs"] = float(cfg.time_limit)
    sol = scs.solve(data, cone, **kwargs)
    info = sol["info"]
    name = info["status"]
    if name == "solved":
        status = SolveStatus.OPTIMAL
    elif name.startswith("solved"):
        status = SolveStatus.NEAR_OPTIMAL
    elif "infeasible" in name:
        status = SolveStatus.INFEASIBLE
    elif "unbounded" in name:
        status = SolveStatus.UNBOUNDED
    else:
        status = SolveStatus.NUMERICAL_FAILURE
    x = np.asarray(sol["x"])
    duals = np.asarray(sol["y"][:m_eq])
    return status, x, duals, int(info["iter"]), name, var_index


def solve(problem: ConicProblem, cfg: SolverConfig = SolverConfig()) -> ConicSolution:
    """Solve the conic problem; statuses are carried in-band, never raised."""
    if not problem.eq_rows and not problem.psd_blocks:
        raise ValueError("problem has no constraints")
    if cfg.dump_path:
        write_sdpa(problem, cfg.dump_path)
    backend = cfg.resolve_backend(problem)
    t0 = time.perf_counter()
    if backend == "clarabel":
        status, x, duals, iters, name, var_index = _solve_clarabel(problem, cfg)
    else:
        status, x, duals, iters, name, var_index = _solve_scs(problem, cfg)
    wall = time.perf_counter() - t0

    primal = {k: float(x[i]) for k, i in var_index.items()}
    solution = ConicSolution(
        status=status,
        objective=float(sum(c * primal[k] for k, c in problem.objective.items())
                        + problem.objective.constant),
        dual_objective=float(np.dot(duals, [rhs for _, rhs in problem.eq_rows])),
        primal=primal,
        eq_duals=duals,
        residuals=ResidualReport(np.inf, -np.inf, 0.0, 0.0, np.inf),
        backend=backend,
        iterations=iters,
        wall_time=wall,
        solver_status=name,
    )
    if status.usable():
        solution.residuals = check_solution(problem, solution)
        if status is SolveStatus.OPTIMAL and not solution.residuals.within(cfg):
            solution.status = SolveStatus.NEAR_OPTIMAL
    return solution


def check_solution(problem: ConicProblem, solution: ConicSolution) -> ResidualReport:
    """Recompute residuals from the raw data, independent of the backend."""
    primal = solution.primal
    max_eq = 0.0
    for lf, rhs in problem.eq_rows:
        max_eq = max(max_eq, abs(lf.value(primal) - rhs))
    min_eig = np.inf
    for blk in problem.psd_blocks:
        m = blk.evaluate(primal)
        w = np.linalg.eigvalsh(m)
        min_eig = min(min_eig, float(w[0]))
    if not problem.psd_blocks:
        min_eig = 0.0
    pobj = (sum(c * primal[k] for k, c in problem.objective.items())
            + problem.objective.constant)
    dobj = float(np.dot(solution.eq_duals, [rhs for _, rhs in problem.eq_rows]))
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    return ResidualReport(max_eq, float(min_eig), float(pobj), dobj, gap)


# ---------------------------------------------------------------------------
# SDPA sparse interchange dump


def write_sdpa(problem: ConicProblem, path: str) -> None:
    """Dump in SDPA sparse format (.dat-s) for cross-checking with other solvers.

    Encodes  min c'v  s.t.  sum_i v_i F_i^k - F_0^k  PSD per block, with the
    equality rows expressed as a paired-inequality diagonal block.
    """
    var_list = problem.variables()
    var_index = {k: i for i, k in enumerate(var_list)}
    nvar = len(var_list)
    m_eq = len(problem.eq_rows)
    lines = []
    lines.append("\"moment relaxation dump\"")
    lines.append(f"{nvar} = mDIM")
    lines.append(f"{len(problem.psd_blocks) + 1} = nBLOCK")
    sizes = [str(b.size) for b in problem.psd_blocks] + [str(-2 * m_eq)]
    lines.append(" ".join(sizes) + " = bLOCKsTRUCT")
    c = np.zeros(nvar)
    for key, coef in problem.objective.items():
        c[var_index[key]] = -coef  # SDPA minimizes
    lines.append(" ".join(f"{v:.17g}" for v in c))
    ents: List[str] = []

    def emit(mat: int, blk: int, i: int, j: int, v: float):
        if v != 0.0:
            ents.append(f"{mat} {blk} {i + 1} {j + 1} {v:.17g}")

    for bi, blk in enumerate(problem.psd_blocks, start=1):
        for i, j, terms in blk.upper_items():
            for key, coef in terms:
                emit(var_index[key] + 1, bi, i, j, coef)
    diag_blk = len(problem.psd_blocks) + 1
    for r, (lf, rhs) in enumerate(problem.eq_rows):
        emit(0, diag_blk, 2 * r, 2 * r, rhs - lf.constant)
        emit(0, diag_blk, 2 * r + 1, 2 * r + 1, -(rhs - lf.constant))
        for key, coef in lf.items():
            emit(var_index[key] + 1, diag_blk, 2 * r, 2 * r, coef)
            emit(var_index[key] + 1, diag_blk, 2 * r + 1, 2 * r + 1, -coef)
    lines.extend(ents)
    _atomic_write(path, "\n".join(lines) + "\n")


def _atomic_write(path: str, content: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-sdpa-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
