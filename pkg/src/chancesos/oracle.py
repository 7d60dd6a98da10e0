"""Independent ground truth at desk scale.

Everything here is deliberately decoupled from the relaxation machinery:
section probabilities come from root isolation (one disturbance dimension)
or tensor-grid quadrature of the indicator, never from the SDP side, so the
two routes can check each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate as _integrate

from .measures import BoxDomain, MeasureSpec, LEBESGUE, UNIFORM
from .pipeline import ChanceProblem
from .polynomials import Polynomial


@dataclass(frozen=True)
class GridSpec:
    """Deterministic quadrature / sampling parameters.

    resolution: points per axis for indicator grids (>= 16).
    rule: 'midpoint' or 'gauss' node placement for indicator quadrature.
    mc_samples / seed: Monte-Carlo cross checks; the seed is mandatory so
    that no golden value can silently depend on entropy.
    """

    resolution: int = 256
    rule: str = "midpoint"
    mc_samples: int = 100_000
    seed: int | None = None

    def __post_init__(self):
        if self.resolution < 16:
            raise ValueError("grid resolution must be >= 16")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError(f"unknown integration rule {self.rule!r}")

    def require_seed(self) -> int:
        if self.seed is None:
            raise ValueError("Monte-Carlo use requires an explicit RNG seed")
        return self.seed

    def nodes_weights(self, lo: float, hi: float) -> Tuple[np.ndarray, np.ndarray]:
        n = self.resolution
        if self.rule == "midpoint":
            edges = np.linspace(lo, hi, n + 1)
            nodes = 0.5 * (edges[:-1] + edges[1:])
            weights = np.full(n, (hi - lo) / n)
        else:
            x, w = np.polynomial.legendre.leggauss(n)
            nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * x
            weights = 0.5 * (hi - lo) * w
        return nodes, weights


# ---------------------------------------------------------------------------
# section probabilities


def _section_poly_coeffs(g: Polynomial, x: Sequence[float], n: int, j: int,
                         fixed_omega: Sequence[float] | None = None) -> np.ndarray:
    """Coefficients (ascending) of omega_j -> g(x, omega) with other omegas fixed."""
    deg = max((a[n + j] for a in g.terms), default=0)
    coeffs = np.zeros(deg + 1)
    for a, c in g.terms.items():
        v = c
        for i in range(n):
            if a[i]:
                v *= x[i] ** a[i]
        for k in range(len(a) - n):
            if k == j:
                continue
            if a[n + k]:
                v *= fixed_omega[k] ** a[n + k]
        coeffs[a[n + j]] += v
    return coeffs


def _feasible_intervals_1d(polys: List[np.ndarray], lo: float, hi: float,
                           tol: float = 1e-12) -> List[Tuple[float, float]]:
    """Subintervals of [lo, hi] where every polynomial (ascending coeffs) is >= 0."""
    breaks = {lo, hi}
    for c in polys:
        c = np.trim_zeros(c, "b")
        if c.size <= 1:
            if c.size == 1 and c[0] < 0:
                return []
            continue
        roots = np.polynomial.polynomial.polyroots(c)
        for r in roots:
            if abs(r.imag) < 1e-9 and lo < r.real < hi:
                breaks.add(float(r.real))
    pts = sorted(breaks)
    out: List[Tuple[float, float]] = []
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        ok = True
        for c in polys:
            val = float(np.polynomial.polynomial.polyval(mid, c)) if c.size else 0.0
            if val < -tol:
                ok = False
                break
        if ok:
            if out and abs(out[-1][1] - a) < 1e-14:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def _measure_of_intervals(mu: MeasureSpec, intervals: List[Tuple[float, float]]) -> float:
    if mu.kind in (LEBESGUE, UNIFORM):
        total = sum(b - a for a, b in intervals)
        w = mu.weight if mu.kind == LEBESGUE else 1.0 / mu.box.volume
        return total * w
    total = 0.0
    nodes, wts = np.polynomial.legendre.leggauss(96)
    for a, b in intervals:
        xs = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        dens = np.array([_density_value(mu, x) for x in xs])
        total += 0.5 * (b - a) * float(np.dot(wts, dens))
    return total * mu.weight


def _density_value(mu: MeasureSpec, x: float) -> float:
    v = mu.density((x,))
    return float(np.exp(v)) if mu.kind == "exp-polynomial-density" else v


def mu_Kx(problem: ChanceProblem, x: Sequence[float],
          grid: GridSpec = GridSpec()) -> float:
    """Probability that (x, omega) is feasible, for a fixed decision x.

    One disturbance dimension: the feasible omega set is isolated exactly via
    polynomial roots (well past the 1e-8 target near sign changes). Higher
    dimensions: indicator quadrature on the grid rule, error O(1/resolution).
    Points with g exactly zero count as feasible.
    """
    n, p = problem.n, problem.p
    if len(x) != n:
        raise ValueError(f"x has length {len(x)}, expected {n}")
    if p == 1:
        polys = [_section_poly_coeffs(g, x, n, 0) for g in problem.constraints.constraints]
        lo, hi = problem.omega_box.lows[0], problem.omega_box.highs[0]
        return _measure_of_intervals(problem.mu, _feasible_intervals_1d(polys, lo, hi))
    axes = [grid.nodes_weights(lo, hi)
            for lo, hi in zip(problem.omega_box.lows, problem.omega_box.highs)]
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    wts = np.ones(pts.shape[0])
    for wm in wmesh:
        wts = wts * wm.ravel()
    full = np.concatenate([np.tile(np.asarray(x, dtype=float), (pts.shape[0], 1)), pts], axis=1)
    inside = np.ones(pts.shape[0], dtype=bool)
    for g in problem.constraints.constraints:
        inside &= _eval_points(g, full) >= 0.0
    if problem.mu.kind in (LEBESGUE, UNIFORM):
        dens = np.ones(pts.shape[0]) * (1.0 / problem.mu.box.volume
                                        if problem.mu.kind == UNIFORM else problem.mu.weight)
    else:
        dens = _eval_points(problem.mu.density, pts)
        if problem.mu.kind == "exp-polynomial-density":
            dens = np.exp(dens)
        dens = dens * problem.mu.weight
    return float(np.dot(wts[inside], dens[inside]))


def mu_Kx_mc(problem: ChanceProblem, x: Sequence[float], grid: GridSpec
             ) -> Tuple[float, float]:
    """Monte-Carlo estimate of the section probability and its standard error.

    Cross-check only; golden values must come from the deterministic route.
    """
    rng = np.random.default_rng(grid.require_seed())
    if not problem.mu.kind in (LEBESGUE, UNIFORM):
        raise ValueError("MC cross check supports uniform-type mu only")
    m = grid.mc_samples
    pts = rng.uniform(problem.omega_box.lows, problem.omega_box.highs,
                      size=(m, problem.p))
    full = np.concatenate([np.tile(np.asarray(x, dtype=float), (m, 1)), pts], axis=1)
    inside = np.ones(m, dtype=bool)
    for g in problem.constraints.constraints:
        inside &= _eval_points(g, full) >= 0.0
    frac = float(np.mean(inside))
    stderr = float(np.sqrt(max(frac * (1 - frac), 1e-12) / m))
    scale = 1.0 if problem.mu.kind == UNIFORM else problem.mu.weight * problem.omega_box.volume
    return frac * scale, stderr * scale


def _eval_points(g: Polynomial, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(pts.shape[0])
    for a, c in g.terms.items():
        v = np.full(pts.shape[0], c)
        for i, e in enumerate(a):
            if e:
                v = v * pts[:, i] ** e
        out += v
    return out


# ---------------------------------------------------------------------------
# reference mass and set measures


def reference_rho(problem: ChanceProblem, grid: GridSpec = GridSpec(),
                  order: str = "x-first") -> float:
    """Reference value of the total feasible mass, integral of mu(K_x) d lam.

    'x-first' integrates the section probability over X (adaptive when
    n == 1, grid rule otherwise); 'omega-first' swaps the roles, which is
    exact-in-sections when n == 1 and provides the order-swap self check.
    """
    if order not in ("x-first", "omega-first"):
        raise ValueError("order must be 'x-first' or 'omega-first'")
    if order == "x-first":
        if problem.n == 1:
            lo, hi = problem.x_box.lows[0], problem.x_box.highs[0]
            w = problem.lam.weight if problem.lam.kind == LEBESGUE else 1.0 / problem.lam.box.volume
            val, _ = _integrate.quad(lambda t: mu_Kx(problem, (t,), grid), lo, hi,
                                     limit=400, epsabs=1e-10, epsrel=1e-10)
            return val * w
        axes = [grid.nodes_weights(lo, hi)
                for lo, hi in zip(problem.x_box.lows, problem.x_box.highs)]
        mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        wts = np.ones(pts.shape[0])
        for wm in wmesh:
            wts = wts * wm.ravel()
        lam_w = problem.lam.weight if problem.lam.kind == LEBESGUE else 1.0 / problem.lam.box.volume
        vals = np.array([mu_Kx(problem, tuple(r), grid) for r in pts])
        return float(np.dot(wts, vals)) * lam_w
    swapped = _swap_roles(problem)
    return reference_rho(swapped, grid, order="x-first") * _mass_fixup(problem)


def _swap_roles(problem: ChanceProblem) -> ChanceProblem:
    n, p = problem.n, problem.p
    perm = list(range(n, n + p)) + list(range(n))
    swapped_constraints = tuple(g.extend(n + p, perm) for g in problem.constraints.constraints)
    from .program import SemiAlgebraicSet
    return ChanceProblem(
        n=p, p=n, x_box=problem.omega_box, omega_box=problem.x_box,
        constraints=SemiAlgebraicSet(n + p, swapped_constraints),
        lam=problem.mu, mu=_as_probability(problem.lam),
        epsilons=problem.epsilons)


def _as_probability(m: MeasureSpec) -> MeasureSpec:
    if m.kind == UNIFORM:
        return m
    if m.kind == LEBESGUE:
        return MeasureSpec.uniform(m.box)
    raise ValueError("order swap supports uniform-type measures only")


def _mass_fixup(problem: ChanceProblem) -> float:
    # the swap normalizes lam to a probability; restore its true mass
    if problem.lam.kind == UNIFORM:
        return 1.0
    return problem.lam.weight * problem.lam.box.volume


def _x_grid(problem: ChanceProblem, grid: GridSpec):
    axes = [grid.nodes_weights(lo, hi)
            for lo, hi in zip(problem.x_box.lows, problem.x_box.highs)]
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    wts = np.ones(pts.shape[0])
    for wm in wmesh:
        wts = wts * wm.ravel()
    lam_w = problem.lam.weight if problem.lam.kind == LEBESGUE else 1.0 / problem.lam.box.volume
    return pts, wts * lam_w


def membership_grids(h: Polynomial, eps: float, problem: ChanceProblem,
                     grid: GridSpec, oracle: Callable[[Sequence[float]], float] | None = None
                     ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Points, lam-weights, and the two membership indicators on the X grid."""
    pts, wts = _x_grid(problem, grid)
    hvals = _eval_points(h, pts)
    approx = hvals >= 1.0 - eps
    f = oracle or (lambda x: mu_Kx(problem, x, grid))
    truth = np.array([f(tuple(r)) for r in pts]) >= 1.0 - eps
    return pts, wts, approx, truth


def symdiff_measure(h: Polynomial, eps: float, problem: ChanceProblem,
                    grid: GridSpec = GridSpec(),
                    oracle: Callable[[Sequence[float]], float] | None = None
                    ) -> Tuple[float, float]:
    """lam-measure of the symmetric difference between {h >= 1-eps} and the
    true set, with a one-cell resolution error bar."""
    pts, wts, approx, truth = membership_grids(h, eps, problem, grid, oracle)
    value = float(np.sum(wts[approx != truth]))
    cell = float(np.max(wts)) if wts.size else 0.0
    boundary = int(np.sum(_boundary_cells(approx) | _boundary_cells(truth)))
    return value, cell * boundary


def excess_measure(h: Polynomial, eps: float, problem: ChanceProblem,
                   grid: GridSpec = GridSpec(),
                   oracle: Callable[[Sequence[float]], float] | None = None) -> float:
    """lam-measure of {h >= 1-eps} minus the true set (grid estimate)."""
    _, wts, approx, truth = membership_grids(h, eps, problem, grid, oracle)
    return float(np.sum(wts[approx & ~truth]))


def _boundary_cells(mask: np.ndarray) -> np.ndarray:
    flat = mask.ravel()
    out = np.zeros_like(flat, dtype=bool)
    out[:-1] |= flat[:-1] != flat[1:]
    out[1:] |= flat[:-1] != flat[1:]
    return out


def reference_volume(K, lam: MeasureSpec, grid: GridSpec = GridSpec()) -> float:
    """Quadrature of K's indicator against lam over lam's box."""
    axes = [grid.nodes_weights(lo, hi)
            for lo, hi in zip(lam.box.lows, lam.box.highs)]
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    wts = np.ones(pts.shape[0])
    for wm in wmesh:
        wts = wts * wm.ravel()
    inside = np.ones(pts.shape[0], dtype=bool)
    for g in K.constraints:
        inside &= _eval_points(g, pts) >= 0.0
    if lam.kind in (LEBESGUE, UNIFORM):
        dens = np.full(pts.shape[0], lam.weight if lam.kind == LEBESGUE
                       else 1.0 / lam.box.volume)
    else:
        dens = _eval_points(lam.density, pts)
        if lam.kind == "exp-polynomial-density":
            dens = np.exp(dens)
        dens = dens * lam.weight
    return float(np.dot(wts[inside], dens[inside]))


def l1_gap(h: Polynomial, problem: ChanceProblem, grid: GridSpec = GridSpec()) -> float:
    """Integral of (h - mu(K_x)) d lam, the hierarchy's L1 convergence gap."""
    if problem.n == 1:
        lo, hi = problem.x_box.lows[0], problem.x_box.highs[0]
        w = problem.lam.weight if problem.lam.kind == LEBESGUE else 1.0 / problem.lam.box.volume
        val, _ = _integrate.quad(lambda t: h((t,)) - mu_Kx(problem, (t,), grid), lo, hi,
                                 limit=400, epsabs=1e-10, epsrel=1e-10)
        return val * w
    pts, wts = _x_grid(problem, grid)
    vals = _eval_points(h, pts) - np.array([mu_Kx(problem, tuple(r), grid) for r in pts])
    return float(np.dot(wts, vals))
