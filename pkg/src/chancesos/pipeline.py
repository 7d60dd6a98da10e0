"""End-to-end pipelines: volume bounds, outer and inner set approximations.

The outer pipeline solves the order-d relaxation of the dominated-measure
problem over (x, omega), reads the dual multipliers of the moment-matching
rows as the coefficients of a joint certificate polynomial, and integrates
the disturbance out to get a univariate-in-x membership polynomial h_d with
h_d(x) >= Prob[(x, omega) feasible] for every x. Level sets {h_d >= 1 - eps}
then contain the true chance-constrained set.

Inner approximations run the same machinery on a user-supplied decomposition
of the complement and subtract: with u_i an upper bound on the complement
piece probabilities, 1 - sum u_i under-estimates the feasible probability.

Domains are affinely mapped to [-1, 1] boxes before assembly (moment
matrices on lopsided boxes are badly conditioned) and all reported
polynomials are mapped back to user coordinates.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .measures import BoxDomain, MeasureSpec, integrate_out_omega
from .polynomials import Polynomial
from .program import (AssemblyOptions, ConicProblem, SemiAlgebraicSet,
                      assemble_chance_relaxation, assemble_volume_relaxation)
from .solver import ConicSolution, ResidualReport, SolveStatus, SolverConfig, solve


class PipelineError(RuntimeError):
    pass


class SolveFailedError(PipelineError):
    """A relaxation did not produce a usable solution."""

    def __init__(self, status: SolveStatus, detail: str, d: int, stokes: bool):
        self.status = status
        self.d = d
        self.stokes = stokes
        super().__init__(f"solve failed at d={d} (stokes={stokes}): {status.value} ({detail})")


class MonotonicityError(PipelineError):
    pass


@dataclass(frozen=True)
class ChanceProblem:
    """Instance data: decision box X, disturbance box Omega, constraints on
    the joint space, reference measures, and probability levels."""

    n: int
    p: int
    x_box: BoxDomain
    omega_box: BoxDomain
    constraints: SemiAlgebraicSet
    lam: MeasureSpec
    mu: MeasureSpec
    epsilons: Tuple[float, ...] = ()
    complement: Tuple[SemiAlgebraicSet, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "complement", tuple(self.complement))
        if self.x_box.dimension != self.n or self.omega_box.dimension != self.p:
            raise ValueError("box dimensions must match (n, p)")
        if self.constraints.nvars != self.n + self.p:
            raise ValueError("constraints must live on the joint (x, omega) space")
        if self.lam.dimension != self.n or self.mu.dimension != self.p:
            raise ValueError("measure dimensions must match (n, p)")
        for e in self.epsilons:
            if not 0.0 <= e < 1.0:
                raise ValueError(f"epsilon must lie in [0, 1), got {e}")
        if not self.mu.is_probability():
            raise ValueError("mu must be a probability measure on Omega "
                             "(use MeasureSpec.uniform or normalize=True)")
        for piece in self.complement:
            if piece.nvars != self.n + self.p:
                raise ValueError("complement pieces must live on the joint space")


@dataclass
class ApproximationResult:
    """One hierarchy level: certified bound, membership polynomial, diagnostics."""

    d: int
    rho: float
    h: Polynomial
    stokes: bool
    status: SolveStatus
    residuals: ResidualReport
    wall_time: float
    backend: str = ""
    p_joint: Polynomial | None = None
    qualified: bool = False
    warnings: List[str] = field(default_factory=list)
    consistency_residual: float = 0.0

    def members(self, xs: np.ndarray, eps: float) -> np.ndarray:
        """Outer membership h(x) >= 1 - eps on an array of points (rows)."""
        vals = np.array([self.h(tuple(row)) for row in np.atleast_2d(xs)])
        return vals >= 1.0 - eps


@dataclass
class VolumeBound:
    d: int
    rho: float
    stokes: bool
    status: SolveStatus
    residuals: ResidualReport
    wall_time: float
    backend: str
    solution: ConicSolution
    problem: ConicProblem


# ---------------------------------------------------------------------------
# frames


def _to_internal_set(K: SemiAlgebraicSet, joint: BoxDomain) -> SemiAlgebraicSet:
    return K.substitute_affine(joint.centers, joint.halfwidths)


def _poly_to_user(h: Polynomial, box: BoxDomain) -> Polynomial:
    shift = tuple(-c / r for c, r in zip(box.centers, box.halfwidths))
    scale = tuple(1.0 / r for r in box.halfwidths)
    return h.substitute_affine(shift, scale)


def _joint_box(x_box: BoxDomain, omega_box: BoxDomain) -> BoxDomain:
    return BoxDomain(x_box.lows + omega_box.lows, x_box.highs + omega_box.highs)


# ---------------------------------------------------------------------------
# volume pipeline


def compute_volume_bound(K: SemiAlgebraicSet, lam: MeasureSpec, d: int,
                         stokes: bool = True,
                         config: SolverConfig = SolverConfig(),
                         options: AssemblyOptions = AssemblyOptions(),
                         scale: bool = True) -> VolumeBound:
    """Upper bound on lam(K) from the order-d relaxation.

    Lebesgue and uniform measures are worked in unit-box coordinates unless
    `scale` is off; density measures skip the frame change so that
    homogeneity-based Stokes rows stay valid in the original frame.
    """
    t0 = time.perf_counter()
    use_scale = scale and lam.kind in ("lebesgue-on-box", "uniform-probability-on-box") \
        and not lam.box.is_unit()
    if use_scale:
        K_in = _to_internal_set(K, lam.box)
        lam_in = lam.pushforward_to_unit()
    else:
        K_in, lam_in = K, lam
    cp = assemble_volume_relaxation(K_in, lam_in, d, stokes, options)
    sol = solve(cp, config)
    if not sol.status.usable():
        raise SolveFailedError(sol.status, sol.solver_status, d, stokes)
    return VolumeBound(d=d, rho=sol.dual_objective, stokes=stokes, status=sol.status,
                       residuals=sol.residuals, wall_time=time.perf_counter() - t0,
                       backend=sol.backend, solution=sol, problem=cp)


# ---------------------------------------------------------------------------
# chance pipelines


def _solve_chance(problem: ChanceProblem, K: SemiAlgebraicSet, d: int, stokes: bool,
                  config: SolverConfig, options: AssemblyOptions, scale: bool):
    joint = _joint_box(problem.x_box, problem.omega_box)
    use_scale = scale and not joint.is_unit()
    if use_scale:
        K_in = _to_internal_set(K, joint)
        lam_in = problem.lam.pushforward_to_unit()
        mu_in = problem.mu.pushforward_to_unit()
    else:
        K_in, lam_in, mu_in = K, problem.lam, problem.mu
    cp = assemble_chance_relaxation(problem.n, problem.p, K_in, lam_in, mu_in,
                                    d, stokes, options)
    sol = solve(cp, config)
    if not sol.status.usable():
        raise SolveFailedError(sol.status, sol.solver_status, d, stokes)
    mcount = cp.meta.moment_row_count
    if len(sol.eq_duals) < mcount:
        raise PipelineError("backend returned no duals for the moment rows")
    p_in = Polynomial(problem.n + problem.p,
                      dict(zip(cp.meta.basis, sol.eq_duals[:mcount])))
    h_in = integrate_out_omega(p_in, mu_in)
    if use_scale:
        h_user = _poly_to_user(h_in, problem.x_box)
        p_user = _poly_to_user(p_in, joint)
    else:
        h_user, p_user = h_in, p_in
    rho = sol.dual_objective
    consistency = abs(rho - problem.lam.apply_to(h_user))
    return cp, sol, h_user, p_user, rho, consistency


def compute_outer(problem: ChanceProblem, d: int, stokes: bool = True,
                  config: SolverConfig = SolverConfig(),
                  options: AssemblyOptions = AssemblyOptions(),
                  scale: bool = True) -> ApproximationResult:
    """Outer approximation at order d: {x : h_d(x) >= 1 - eps} contains the
    feasible set, up to solver residuals."""
    t0 = time.perf_counter()
    cp, sol, h_user, p_user, rho, consistency = _solve_chance(
        problem, problem.constraints, d, stokes, config, options, scale)
    return ApproximationResult(
        d=d, rho=rho, h=h_user, stokes=stokes, status=sol.status,
        residuals=sol.residuals, wall_time=time.perf_counter() - t0,
        backend=sol.backend, p_joint=p_user,
        qualified=sol.status is SolveStatus.NEAR_OPTIMAL,
        warnings=list(cp.meta.warnings),
        consistency_residual=consistency)


def check_complement_overlap(problem: ChanceProblem, samples: int = 100_000,
                             seed: int = 0, max_fraction: float = 1e-3) -> float:
    """Monte-Carlo spot check that complement pieces overlap on a null set."""
    rng = np.random.default_rng(seed)
    joint = _joint_box(problem.x_box, problem.omega_box)
    pts = rng.uniform(joint.lows, joint.highs, size=(samples, joint.dimension))
    member = np.zeros(samples, dtype=int)
    for piece in problem.complement:
        inside = np.ones(samples, dtype=bool)
        for g in piece.constraints:
            inside &= _vals(g, pts) >= 0.0
        member += inside
    frac = float(np.mean(member > 1))
    if frac >= max_fraction:
        raise PipelineError(
            f"complement pieces overlap on ~{frac:.2%} of the sample "
            f"(limit {max_fraction:.2%}); the decomposition must be almost disjoint")
    return frac


def _vals(g: Polynomial, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(pts.shape[0])
    for a, c in g.terms.items():
        v = np.full(pts.shape[0], c)
        for i, e in enumerate(a):
            if e:
                v = v * pts[:, i] ** e
        out += v
    return out


def compute_inner(problem: ChanceProblem, d: int, stokes: bool = True,
                  config: SolverConfig = SolverConfig(),
                  options: AssemblyOptions = AssemblyOptions(),
                  scale: bool = True, overlap_seed: int = 0) -> ApproximationResult:
    """Inner approximation via the complement decomposition.

    Each complement piece gets an outer run; the returned h is one minus the
    sum of the piece bounds, so {h >= 1 - eps} lies inside the feasible set
    (equivalently: the summed complement probability bound stays below eps).
    """
    if not problem.complement:
        raise PipelineError(
            "inner approximation needs a complement decomposition: supply "
            "basic semi-algebraic pieces covering the infeasible region "
            "(their pairwise overlaps must have measure zero)")
    t0 = time.perf_counter()
    check_complement_overlap(problem, seed=overlap_seed)
    h = Polynomial.constant(problem.n, 1.0)
    rho = problem.lam.moment((0,) * problem.n)
    worst = ResidualReport(0.0, 0.0, 0.0, 0.0, 0.0)
    qualified = False
    warnings: List[str] = []
    status = SolveStatus.OPTIMAL
    backend = ""
    for i, piece in enumerate(problem.complement):
        cp, sol, u_i, _, rho_i, _ = _solve_chance(
            problem, piece, d, stokes, config, options, scale)
        h = h - u_i
        rho -= rho_i
        worst = ResidualReport(
            max(worst.max_eq_residual, sol.residuals.max_eq_residual),
            min(worst.min_psd_eigenvalue, sol.residuals.min_psd_eigenvalue),
            worst.primal_objective + sol.residuals.primal_objective,
            worst.dual_objective + sol.residuals.dual_objective,
            max(worst.relative_gap, sol.residuals.relative_gap))
        qualified = qualified or sol.status is SolveStatus.NEAR_OPTIMAL
        if sol.status is SolveStatus.NEAR_OPTIMAL:
            status = SolveStatus.NEAR_OPTIMAL
        warnings.extend(f"piece {i}: {w}" for w in cp.meta.warnings)
        backend = sol.backend
    consistency = abs(rho - problem.lam.apply_to(h))
    return ApproximationResult(
        d=d, rho=rho, h=h, stokes=stokes, status=status, residuals=worst,
        wall_time=time.perf_counter() - t0, backend=backend, p_joint=None,
        qualified=qualified, warnings=warnings, consistency_residual=consistency)


# ---------------------------------------------------------------------------
# level sets and hierarchy


@dataclass
class IntervalUnion:
    intervals: List[Tuple[float, float]]
    degenerate: bool = False

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)


def extract_intervals_1d(h: Polynomial, level: float, box: BoxDomain,
                         scan_points: int = 2048, refine_tol: float = 1e-10
                         ) -> IntervalUnion:
    """Disjoint intervals of {x in [a, b] : h(x) >= level} for univariate h.

    Sign changes are located on a dense scan and refined by bisection.
    A polynomial identically equal to the level returns the whole box,
    flagged degenerate.
    """
    if h.nvars != 1:
        raise ValueError("extract_intervals_1d needs a univariate polynomial")
    lo, hi = box.lows[0], box.highs[0]
    shifted = h - Polynomial.constant(1, level)
    if shifted.is_zero():
        return IntervalUnion([(lo, hi)], degenerate=True)
    xs = np.linspace(lo, hi, scan_points)
    vals = np.array([shifted((x,)) for x in xs])
    above = vals >= 0.0

    def refine(a: float, b: float, target_sign_at_b: bool) -> float:
        # invariant: membership differs between a and b
        fa = shifted((a,)) >= 0.0
        for _ in range(200):
            if b - a <= refine_tol:
                break
            m = 0.5 * (a + b)
            if (shifted((m,)) >= 0.0) == fa:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    intervals: List[Tuple[float, float]] = []
    i = 0
    while i < scan_points:
        if above[i]:
            j = i
            while j + 1 < scan_points and above[j + 1]:
                j += 1
            left = xs[i] if i == 0 else refine(xs[i - 1], xs[i], True)
            right = xs[j] if j == scan_points - 1 else refine(xs[j], xs[j + 1], False)
            intervals.append((left, right))
            i = j + 1
        else:
            i += 1
    return IntervalUnion(intervals)


@dataclass
class HierarchyLevel:
    d: int
    result: ApproximationResult | None
    error: str | None = None


def run_hierarchy(problem: ChanceProblem, d_min: int, d_max: int,
                  stokes: bool = True,
                  config: SolverConfig = SolverConfig(),
                  options: AssemblyOptions = AssemblyOptions(),
                  scale: bool = True,
                  monotone_slack: float = 1e-6) -> List[HierarchyLevel]:
    """Outer runs for d in [d_min, d_max]; failures are recorded, not raised.

    The certified bounds must be non-increasing in d; a violation beyond the
    slack indicates a broken relaxation and raises MonotonicityError.
    """
    if d_min > d_max:
        return []
    levels: List[HierarchyLevel] = []
    last_rho: float | None = None
    for d in range(d_min, d_max + 1):
        try:
            res = compute_outer(problem, d, stokes, config, options, scale)
        except PipelineError as exc:
            levels.append(HierarchyLevel(d, None, str(exc)))
            continue
        if last_rho is not None and res.rho > last_rho + monotone_slack * max(1.0, abs(last_rho)):
            raise MonotonicityError(
                f"bound increased along the hierarchy: rho_{d} = {res.rho:.9g} "
                f"> rho_{d-1} = {last_rho:.9g}")
        last_rho = res.rho
        levels.append(HierarchyLevel(d, res))
    return levels
