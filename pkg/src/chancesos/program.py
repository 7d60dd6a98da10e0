"""Assembly of moment relaxations as backend-agnostic conic problems.

The decision variables are two pseudo-moment sequences, group "y" for the
dominated measure and group "z" for its complement, both truncated at total
degree 2d. A ConicProblem is a maximization of a linear functional subject to
equality rows and entrywise-linear PSD blocks.

Stokes acceleration appends extra equality rows built from polynomials whose
partial derivatives integrate to zero over the feasible region. Generated row
families can be linearly dependent modulo the moment-matching rows; assembly
prunes them to an independent set with a deterministic rank-revealing QR,
which leaves the feasible set unchanged but keeps the KKT systems
well-posed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import linalg as _sla

from .measures import BoxDomain, MeasureSpec, LEBESGUE, UNIFORM, POLY_DENSITY, EXP_POLY_DENSITY
from .polynomials import BasisIndexer, MultiIndex, Polynomial, monomial_basis

GROUP_MAIN = "y"
GROUP_COMP = "z"

VarKey = Tuple[str, MultiIndex]


class AssemblyError(ValueError):
    """Structural problem while building a relaxation."""


class DegreeBudgetError(AssemblyError):
    """A localizing block does not fit the moment budget at this order."""

    def __init__(self, constraint: Polynomial, d: int, required: int):
        self.constraint = constraint
        self.d = d
        self.required = required
        super().__init__(
            f"constraint {constraint.format()} of half-degree {required - 0} "
            f"needs relaxation order d >= {required}, got d = {d}")


@dataclass(frozen=True)
class SemiAlgebraicSet:
    """Basic closed set {t : g_j(t) >= 0 for all j}."""

    nvars: int
    constraints: Tuple[Polynomial, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValueError("a semi-algebraic set needs at least one constraint")
        for g in self.constraints:
            if g.nvars != self.nvars:
                raise ValueError("all constraints must share the ambient variable count")

    def half_degrees(self) -> Tuple[int, ...]:
        return tuple(math.ceil(g.degree() / 2) for g in self.constraints)

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(g(point) >= -tol for g in self.constraints)

    def substitute_affine(self, shift: Sequence[float], scale: Sequence[float]) -> "SemiAlgebraicSet":
        return SemiAlgebraicSet(
            self.nvars, tuple(g.substitute_affine(shift, scale) for g in self.constraints))


class LinearForm:
    """Sparse linear functional over moment variables, plus a constant."""

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Dict[VarKey, float] | None = None, constant: float = 0.0):
        self.coeffs = {k: float(v) for k, v in (coeffs or {}).items() if v != 0.0}
        self.constant = float(constant)

    @staticmethod
    def from_poly(group: str, p: Polynomial) -> "LinearForm":
        return LinearForm({(group, a): c for a, c in p.terms.items()})

    def items(self):
        return self.coeffs.items()

    def value(self, assignment: Dict[VarKey, float]) -> float:
        return self.constant + sum(c * assignment[k] for k, c in self.coeffs.items())

    def __eq__(self, other):
        return (isinstance(other, LinearForm) and self.coeffs == other.coeffs
                and self.constant == other.constant)

    def __repr__(self):
        return f"LinearForm({self.coeffs}, {self.constant})"


@dataclass
class PsdBlock:
    """Symmetric matrix of linear forms, stored as its upper triangle."""

    name: str
    size: int
    # (i, j) with i <= j  ->  tuple of ((group, monomial), coefficient)
    entries: Dict[Tuple[int, int], Tuple[Tuple[VarKey, float], ...]]

    def form(self, i: int, j: int) -> LinearForm:
        key = (i, j) if i <= j else (j, i)
        return LinearForm(dict(self.entries.get(key, ())))

    def upper_items(self):
        for j in range(self.size):
            for i in range(j + 1):
                yield i, j, self.entries.get((i, j), ())

    def evaluate(self, assignment: Dict[VarKey, float]) -> np.ndarray:
        m = np.zeros((self.size, self.size))
        for (i, j), terms in self.entries.items():
            v = sum(c * assignment[k] for k, c in terms)
            m[i, j] = v
            m[j, i] = v
        return m


@dataclass
class ProblemMeta:
    nvars: int
    n: int
    p: int
    d: int
    stokes: bool
    basis: List[MultiIndex]
    moment_row_count: int
    warnings: List[str] = field(default_factory=list)


@dataclass
class ConicProblem:
    """max objective  s.t.  eq_rows hold and every psd block is PSD."""

    objective: LinearForm
    eq_rows: List[Tuple[LinearForm, float]]
    psd_blocks: List[PsdBlock]
    meta: ProblemMeta

    def variables(self) -> List[VarKey]:
        out = [(GROUP_MAIN, m) for m in self.meta.basis]
        out += [(GROUP_COMP, m) for m in self.meta.basis]
        return out

    @property
    def num_vars(self) -> int:
        return 2 * len(self.meta.basis)


# ---------------------------------------------------------------------------
# blocks


def moment_matrix_block(group: str, nvars: int, d: int, name: str | None = None) -> PsdBlock:
    """M_d: entry (alpha, beta) is the single moment variable at alpha + beta."""
    base = monomial_basis(nvars, d)
    entries = {}
    for j in range(len(base)):
        for i in range(j + 1):
            m = tuple(a + b for a, b in zip(base[i], base[j]))
            entries[(i, j)] = (((group, m), 1.0),)
    return PsdBlock(name or f"moment({group},d={d})", len(base), entries)


def localizing_matrix_block(g: Polynomial, group: str, d_minus_dj: int,
                            name: str | None = None) -> PsdBlock:
    """M(g.): entry (alpha, beta) is sum_gamma g_gamma * m_{alpha+beta+gamma}."""
    if d_minus_dj < 0:
        raise ValueError("localizing block order must be >= 0")
    base = monomial_basis(g.nvars, d_minus_dj)
    entries = {}
    for j in range(len(base)):
        for i in range(j + 1):
            acc: Dict[VarKey, float] = {}
            for gm, gc in g.terms.items():
                m = tuple(a + b + c for a, b, c in zip(base[i], base[j], gm))
                key = (group, m)
                acc[key] = acc.get(key, 0.0) + gc
            entries[(i, j)] = tuple((k, v) for k, v in acc.items() if v != 0.0)
    return PsdBlock(name or f"localizing({g.format()},{group})", len(base), entries)


# ---------------------------------------------------------------------------
# Stokes rows


def _dedupe(rows: Iterable[Polynomial]) -> List[Polynomial]:
    seen = set()
    out = []
    for r in rows:
        key = tuple(sorted(r.terms.items()))
        if key and key not in seen:
            seen.add(key)
            out.append(r)
    return out


def stokes_volume_rows(h: Polynomial, d: int,
                       density: MeasureSpec | None = None) -> List[Polynomial]:
    """Row polynomials theta with integral zero over {h-bounded region}.

    `h` must vanish on the boundary of the region (caller's responsibility).
    Lebesgue case: theta = d/dx_i (x^alpha h) for |alpha| <= 2d - deg h.
    Density f*dLambda with f homogeneous of degree df uses the radial field:
    theta = (n + df) x^alpha h + <x, grad(x^alpha h)>; the exp(f) variant
    replaces (n + df) by (n + df*f) and loses df more degrees of budget.
    Rows are deduplicated; the returned list is empty when nothing fits.
    """
    n = h.nvars
    degh = h.degree()
    rows: List[Polynomial] = []
    if density is None or density.kind in (LEBESGUE, UNIFORM):
        cap = 2 * d - degh
        if cap < 0:
            return []
        for alpha in monomial_basis(n, cap):
            xah = Polynomial.monomial(n, alpha) * h
            for i in range(n):
                rows.append(xah.diff(i))
        return _dedupe(rows)
    if density.kind not in (POLY_DENSITY, EXP_POLY_DENSITY):
        raise ValueError(f"unsupported density kind {density.kind!r}")
    f = density.density
    degs = {sum(a) for a in f.terms}
    if len(degs) != 1:
        raise ValueError("density polynomial must be homogeneous for Stokes rows")
    df = degs.pop()
    cap = 2 * d - degh - (df if density.kind == EXP_POLY_DENSITY else 0)
    if cap < 0:
        return []
    for alpha in monomial_basis(n, cap):
        xah = Polynomial.monomial(n, alpha) * h
        radial = Polynomial.zero(n)
        for i in range(n):
            radial = radial + Polynomial.variable(n, i) * xah.diff(i)
        if density.kind == POLY_DENSITY:
            rows.append(xah.scale(n + df) + radial)
        else:
            rows.append(xah.scale(n) + xah * f.scale(df) + radial)
    return _dedupe(rows)


def omega_face_polynomials(omega_box: BoxDomain, n: int) -> List[Tuple[int, Polynomial]]:
    """Linear polynomials vanishing on each face of the omega box, in joint space."""
    p = omega_box.dimension
    nv = n + p
    out = []
    for j in range(p):
        w = Polynomial.variable(nv, n + j)
        lo = Polynomial.constant(nv, omega_box.lows[j])
        hi = Polynomial.constant(nv, omega_box.highs[j])
        out.append((j, w - lo))
        out.append((j, hi - w))
    return out


def touched_omega_faces(K: SemiAlgebraicSet, x_box: BoxDomain, omega_box: BoxDomain,
                        resolution: int = 33, tol: float = 1e-9) -> List[int]:
    """Indices into omega_face_polynomials of the faces that K's closure meets.

    Sampled on a deterministic grid of each face; conservative (a touching
    face is only missed below grid resolution, and extra factors are sound).
    """
    n = x_box.dimension
    p = omega_box.dimension
    touched = []
    for face_idx in range(2 * p):
        j, on_low = face_idx // 2, face_idx % 2 == 0
        axes = []
        for i in range(n):
            axes.append(np.linspace(x_box.lows[i], x_box.highs[i], resolution))
        for k in range(p):
            if k == j:
                axes.append(np.array([omega_box.lows[k] if on_low else omega_box.highs[k]]))
            else:
                axes.append(np.linspace(omega_box.lows[k], omega_box.highs[k], resolution))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        inside = np.ones(pts.shape[0], dtype=bool)
        for g in K.constraints:
            vals = _poly_on_points(g, pts)
            inside &= vals >= -tol
            if not inside.any():
                break
        if inside.any():
            touched.append(face_idx)
    return touched


def _poly_on_points(g: Polynomial, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(pts.shape[0])
    for a, c in g.terms.items():
        v = np.full(pts.shape[0], c)
        for i, e in enumerate(a):
            if e:
                v = v * pts[:, i] ** e
        out += v
    return out


@dataclass
class StokesChanceRows:
    y_rows: List[Polynomial]
    z_rows: List[Polynomial]
    f1: Polynomial
    f2: Polynomial
    warnings: List[str] = field(default_factory=list)


def stokes_chance_rows(K: SemiAlgebraicSet, x_box: BoxDomain, omega_box: BoxDomain,
                       d: int, face_resolution: int = 33) -> StokesChanceRows:
    """Stokes row polynomials for the chance relaxation over (x, omega).

    Both families differentiate omega-monomial multiples of a polynomial that
    vanishes on the relevant section boundaries: f1 covers sections of K (the
    constraint product, times the omega-box face factors that K's closure
    touches) and f2 covers their complements in the omega box (constraint
    product times all face factors). Degree caps keep every row inside the
    2d moment budget: |alpha + beta| <= 2d + 1 - deg(f_k).
    """
    n = x_box.dimension
    p = omega_box.dimension
    if K.nvars != n + p:
        raise ValueError("constraint set must live on the joint (x, omega) space")
    faces = omega_face_polynomials(omega_box, n)
    gprod = Polynomial.constant(n + p, 1.0)
    for g in K.constraints:
        gprod = gprod * g
    touched = touched_omega_faces(K, x_box, omega_box, resolution=face_resolution)
    f1 = gprod
    for idx in touched:
        f1 = f1 * faces[idx][1]
    f2 = gprod
    for _, face in faces:
        f2 = f2 * face
    warnings = []
    out = {}
    for tag, fk in (("y", f1), ("z", f2)):
        rows: List[Polynomial] = []
        cap = 2 * d + 1 - fk.degree()
        if cap < 0:
            warnings.append(f"stokes {tag}-rows skipped: 2d+1 < deg f = {fk.degree()}")
            out[tag] = rows
            continue
        for ab in monomial_basis(n + p, cap):
            alpha, beta = ab[:n], ab[n:]
            wbeta = Polynomial.monomial(n + p, (0,) * n + beta)
            base = wbeta * fk
            xalpha = Polynomial.monomial(n + p, alpha + (0,) * p)
            for j in range(p):
                theta = base.diff(n + j)
                if not theta.is_zero():
                    rows.append(xalpha * theta)
        out[tag] = _dedupe(rows)
        if not out[tag]:
            warnings.append(f"stokes {tag}-row family is empty at d={d}")
    return StokesChanceRows(out["y"], out["z"], f1, f2, warnings)


# ---------------------------------------------------------------------------
# row pruning


def prune_stokes_rows(y_rows: Sequence[Polynomial], z_rows: Sequence[Polynomial],
                      indexer: BasisIndexer, tol: float = 1e-10
                      ) -> Tuple[List[Polynomial], List[Polynomial]]:
    """Maximal linearly independent subset, modulo the moment-matching rows.

    Because every monomial has a row y_m + z_m = const, a z-family row equals
    a y-family row with flipped sign up to constants; rank is therefore
    decided on the single-group coefficient vectors. Deterministic: pivoted
    QR on the stacked normalized rows, keeping earlier rows first.
    """
    cands = [("y", r) for r in y_rows] + [("z", r) for r in z_rows]
    if not cands:
        return [], []
    m = np.zeros((len(cands), indexer.size))
    for i, (_, r) in enumerate(cands):
        for a, c in r.terms.items():
            m[i, indexer.index(a)] = c
    norms = np.linalg.norm(m, axis=1)
    norms[norms == 0] = 1.0
    _, rdiag, piv = _sla.qr((m / norms[:, None]).T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(rdiag))
    if diag.size == 0:
        return [], []
    rank = int((diag > max(tol, diag[0] * len(cands) * np.finfo(float).eps)).sum())
    keep = sorted(piv[:rank])
    y_out = [cands[i][1] for i in keep if cands[i][0] == "y"]
    z_out = [cands[i][1] for i in keep if cands[i][0] == "z"]
    return y_out, z_out


# ---------------------------------------------------------------------------
# assemblers


@dataclass(frozen=True)
class AssemblyOptions:
    """Knobs for the relaxation structure.

    auto_ball: append a redundant ball constraint on the main measure when no
        constraint already bounds a ball (keeps the quadratic module
        archimedean).
    z_support: localize the complement measure on the ambient box with
        per-axis quadratic factors. Off, the complement is only constrained
        through its moment matrix.
    prune_stokes: drop linearly dependent Stokes rows (recommended; dependent
        rows leave the feasible set unchanged but break interior-point KKT
        systems).
    """

    auto_ball: bool = True
    z_support: bool = True
    prune_stokes: bool = True
    face_resolution: int = 33


def _is_ball_like(g: Polynomial) -> bool:
    """True when g has the shape c0 + linear - c*sum(t_i^2), c > 0."""
    nv = g.nvars
    c = None
    for i in range(nv):
        e = tuple(2 if j == i else 0 for j in range(nv))
        ci = g.terms.get(e, 0.0)
        if ci >= 0:
            return False
        if c is None:
            c = ci
        elif not math.isclose(ci, c, rel_tol=1e-12, abs_tol=0.0):
            return False
    for a in g.terms:
        if sum(a) > 2:
            return False
        if sum(a) == 2 and 2 not in a:  # cross term
            return False
    return c is not None


def ball_polynomial(box: BoxDomain) -> Polynomial:
    """M - |t - center|^2 over the box's circumscribing ball."""
    nv = box.dimension
    M = sum(r * r for r in box.halfwidths)
    out = Polynomial.constant(nv, M)
    for i in range(nv):
        ti = Polynomial.variable(nv, i)
        ci = Polynomial.constant(nv, box.centers[i])
        diff = ti - ci
        out = out - diff * diff
    return out


def axis_box_polynomials(box: BoxDomain) -> List[Polynomial]:
    """(t_j - lo_j)(hi_j - t_j) >= 0 for each axis."""
    nv = box.dimension
    out = []
    for j in range(nv):
        t = Polynomial.variable(nv, j)
        lo = Polynomial.constant(nv, box.lows[j])
        hi = Polynomial.constant(nv, box.highs[j])
        out.append((t - lo) * (hi - t))
    return out


def _joint_box(x_box: BoxDomain, omega_box: BoxDomain | None) -> BoxDomain:
    if omega_box is None:
        return x_box
    return BoxDomain(x_box.lows + omega_box.lows, x_box.highs + omega_box.highs)


def _moment_rows(indexer: BasisIndexer, rhs_of) -> List[Tuple[LinearForm, float]]:
    rows = []
    for m in indexer.monomials:
        lf = LinearForm({(GROUP_MAIN, m): 1.0, (GROUP_COMP, m): 1.0})
        rows.append((lf, rhs_of(m)))
    return rows


def _common_blocks(K: SemiAlgebraicSet, d: int, joint_box: BoxDomain,
                   options: AssemblyOptions, warnings: List[str]) -> List[PsdBlock]:
    nv = K.nvars
    blocks = [moment_matrix_block(GROUP_MAIN, nv, d),
              moment_matrix_block(GROUP_COMP, nv, d)]
    for g, dj in zip(K.constraints, K.half_degrees()):
        if d - dj < 0:
            raise DegreeBudgetError(g, d, dj)
        blocks.append(localizing_matrix_block(g, GROUP_MAIN, d - dj))
    if options.auto_ball and not any(_is_ball_like(g) for g in K.constraints):
        ball = ball_polynomial(joint_box)
        blocks.append(localizing_matrix_block(ball, GROUP_MAIN, d - 1, name="ball(y)"))
    if options.z_support:
        for j, bx in enumerate(axis_box_polynomials(joint_box)):
            blocks.append(localizing_matrix_block(bx, GROUP_COMP, d - 1, name=f"box{j}(z)"))
    return blocks


def assemble_volume_relaxation(K: SemiAlgebraicSet, lam: MeasureSpec, d: int,
                               stokes: bool,
                               options: AssemblyOptions = AssemblyOptions()
                               ) -> ConicProblem:
    """Order-d relaxation of sup {phi(K) : phi <= lam} for K in lam's box."""
    n = K.nvars
    if lam.dimension != n:
        raise AssemblyError("measure dimension must match the constraint space")
    if d < 1:
        raise AssemblyError("relaxation order must be >= 1")
    indexer = BasisIndexer(n, 2 * d)
    warnings: List[str] = []
    rows = _moment_rows(indexer, lam.moment)

    stokes_polys: List[Polynomial] = []
    if stokes:
        h = Polynomial.constant(n, 1.0)
        for g in K.constraints:
            h = h * g
        density = lam if lam.kind in (POLY_DENSITY, EXP_POLY_DENSITY) else None
        stokes_polys = stokes_volume_rows(h, d, density=density)
        if not stokes_polys:
            warnings.append(f"no Stokes rows fit the budget at d={d} (deg h = {h.degree()})")
        if options.prune_stokes:
            stokes_polys, _ = prune_stokes_rows(stokes_polys, [], indexer)

    for r in stokes_polys:
        rows.append((LinearForm.from_poly(GROUP_MAIN, r), 0.0))

    blocks = _common_blocks(K, d, lam.box, options, warnings)
    objective = LinearForm({(GROUP_MAIN, (0,) * n): 1.0})
    meta = ProblemMeta(nvars=n, n=n, p=0, d=d, stokes=stokes,
                       basis=indexer.monomials, moment_row_count=indexer.size,
                       warnings=warnings)
    return ConicProblem(objective, rows, blocks, meta)


def assemble_chance_relaxation(n: int, p: int, K: SemiAlgebraicSet,
                               lam: MeasureSpec, mu: MeasureSpec, d: int,
                               stokes: bool,
                               options: AssemblyOptions = AssemblyOptions()
                               ) -> ConicProblem:
    """Order-d relaxation of sup {phi(K) : phi <= lam x mu} over (x, omega)."""
    if K.nvars != n + p:
        raise AssemblyError("constraint set must live on the joint (x, omega) space")
    if lam.dimension != n or mu.dimension != p:
        raise AssemblyError("measure dimensions must match (n, p)")
    if d < 1:
        raise AssemblyError("relaxation order must be >= 1")
    indexer = BasisIndexer(n + p, 2 * d)
    warnings: List[str] = []

    def rhs(m: MultiIndex) -> float:
        return lam.moment(m[:n]) * mu.moment(m[n:])

    rows = _moment_rows(indexer, rhs)

    y_rows: List[Polynomial] = []
    z_rows: List[Polynomial] = []
    if stokes:
        if mu.kind not in (UNIFORM, LEBESGUE):
            raise AssemblyError(
                "chance Stokes rows assume a (scaled) Lebesgue disturbance measure")
        sk = stokes_chance_rows(K, lam.box, mu.box, d,
                                face_resolution=options.face_resolution)
        warnings.extend(sk.warnings)
        y_rows, z_rows = sk.y_rows, sk.z_rows
        if options.prune_stokes:
            y_rows, z_rows = prune_stokes_rows(y_rows, z_rows, indexer)

    for r in y_rows:
        rows.append((LinearForm.from_poly(GROUP_MAIN, r), 0.0))
    for r in z_rows:
        rows.append((LinearForm.from_poly(GROUP_COMP, r), 0.0))

    blocks = _common_blocks(K, d, _joint_box(lam.box, mu.box), options, warnings)
    objective = LinearForm({(GROUP_MAIN, (0,) * (n + p)): 1.0})
    meta = ProblemMeta(nvars=n + p, n=n, p=p, d=d, stokes=stokes,
                       basis=indexer.monomials, moment_row_count=indexer.size,
                       warnings=warnings)
    return ConicProblem(objective, rows, blocks, meta)
