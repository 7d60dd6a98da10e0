"""Boxes and moment oracles for the reference measures.

A MeasureSpec answers moment queries m_alpha = integral of x^alpha against
the measure. Supported variants: Lebesgue on a box, uniform probability on a
box, and (exp-)polynomial densities against Lebesgue on a box. Moments of
density variants come from tensor Gauss-Legendre quadrature with enough nodes
to be exact for polynomial integrands (absolute target 1e-12 for the
exponential variant, which is smooth but not polynomial).

Specs are immutable; moment lookup caches behind a dict, which is safe for
concurrent readers under the GIL.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from .polynomials import MultiIndex, Polynomial

LEBESGUE = "lebesgue-on-box"
UNIFORM = "uniform-probability-on-box"
POLY_DENSITY = "polynomial-density"
EXP_POLY_DENSITY = "exp-polynomial-density"

_MIN_QUAD_NODES = 64


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, lower < upper on every axis."""

    lows: Tuple[float, ...]
    highs: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lows", tuple(float(v) for v in self.lows))
        object.__setattr__(self, "highs", tuple(float(v) for v in self.highs))
        if len(self.lows) != len(self.highs):
            raise ValueError("lows and highs must have equal length")
        if not self.lows:
            raise ValueError("box must have at least one axis")
        for lo, hi in zip(self.lows, self.highs):
            if not lo < hi:
                raise ValueError(f"box bounds must satisfy lower < upper, got [{lo}, {hi}]")

    @property
    def dimension(self) -> int:
        return len(self.lows)

    @property
    def volume(self) -> float:
        v = 1.0
        for lo, hi in zip(self.lows, self.highs):
            v *= hi - lo
        return v

    @property
    def centers(self) -> Tuple[float, ...]:
        return tuple(0.5 * (lo + hi) for lo, hi in zip(self.lows, self.highs))

    @property
    def halfwidths(self) -> Tuple[float, ...]:
        return tuple(0.5 * (hi - lo) for lo, hi in zip(self.lows, self.highs))

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        return all(lo - tol <= x <= hi + tol
                   for x, lo, hi in zip(point, self.lows, self.highs))

    def is_unit(self) -> bool:
        return all(lo == -1.0 and hi == 1.0 for lo, hi in zip(self.lows, self.highs))

    @staticmethod
    def unit(dimension: int) -> "BoxDomain":
        return BoxDomain((-1.0,) * dimension, (1.0,) * dimension)


def _leg_nodes(count: int, cache: Dict[int, tuple] = {}) -> tuple:
    if count not in cache:
        cache[count] = np.polynomial.legendre.leggauss(count)
    return cache[count]


@dataclass(frozen=True)
class MeasureSpec:
    """Moment oracle for a measure on a box.

    `weight` is a constant factor applied to every moment; it carries the mass
    of pushforwards and density normalizations. Uniform variants always have
    weight 1 and total mass exactly 1.
    """

    kind: str
    box: BoxDomain
    density: Polynomial | None = None
    weight: float = 1.0
    _cache: Dict[MultiIndex, float] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in (LEBESGUE, UNIFORM, POLY_DENSITY, EXP_POLY_DENSITY):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind in (POLY_DENSITY, EXP_POLY_DENSITY):
            if self.density is None:
                raise ValueError(f"{self.kind} requires a density polynomial")
            if self.density.nvars != self.box.dimension:
                raise ValueError("density variable count must match box dimension")
            degs = {sum(a) for a in self.density.terms}
            if len(degs) > 1:
                raise ValueError(
                    f"density must be homogeneous; found term degrees {sorted(degs)}")
            if self.kind == POLY_DENSITY:
                self._check_density_nonnegative()
        elif self.density is not None:
            raise ValueError(f"{self.kind} does not take a density")
        if self.kind == UNIFORM and self.weight != 1.0:
            raise ValueError("uniform probability measures cannot carry extra weight")

    def _check_density_nonnegative(self, per_axis: int = 33) -> None:
        grids = [np.linspace(lo, hi, per_axis)
                 for lo, hi in zip(self.box.lows, self.box.highs)]
        mesh = np.meshgrid(*grids, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        vals = _eval_on_points(self.density, pts)
        if vals.min() < -1e-9:
            raise ValueError(
                f"polynomial density is negative on the box (min {vals.min():.3g} on sample grid)")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def lebesgue(box: BoxDomain, weight: float = 1.0) -> "MeasureSpec":
        return MeasureSpec(LEBESGUE, box, weight=weight)

    @staticmethod
    def uniform(box: BoxDomain) -> "MeasureSpec":
        return MeasureSpec(UNIFORM, box)

    @staticmethod
    def polynomial_density(box: BoxDomain, density: Polynomial,
                           normalize: bool = False) -> "MeasureSpec":
        spec = MeasureSpec(POLY_DENSITY, box, density=density)
        if normalize:
            mass = spec.moment((0,) * box.dimension)
            if mass <= 0:
                raise ValueError("cannot normalize a density with nonpositive mass")
            spec = MeasureSpec(POLY_DENSITY, box, density=density, weight=1.0 / mass)
        return spec

    @staticmethod
    def exp_polynomial_density(box: BoxDomain, density: Polynomial,
                               normalize: bool = False) -> "MeasureSpec":
        spec = MeasureSpec(EXP_POLY_DENSITY, box, density=density)
        if normalize:
            mass = spec.moment((0,) * box.dimension)
            spec = MeasureSpec(EXP_POLY_DENSITY, box, density=density, weight=1.0 / mass)
        return spec

    # -- moments -------------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.box.dimension

    def is_probability(self, tol: float = 1e-9) -> bool:
        return abs(self.moment((0,) * self.dimension) - 1.0) <= tol

    def moment(self, alpha: MultiIndex) -> float:
        """Integral of x^alpha against the measure."""
        a = tuple(int(e) for e in alpha)
        if len(a) != self.dimension:
            raise ValueError(f"multi-index length {len(a)} != dimension {self.dimension}")
        if any(e < 0 for e in a):
            raise ValueError(f"negative exponent in {a}")
        hit = self._cache.get(a)
        if hit is not None:
            return hit
        val = self.weight * self._raw_moment(a)
        self._cache[a] = val
        return val

    def _raw_moment(self, a: MultiIndex) -> float:
        if self.kind in (LEBESGUE, UNIFORM):
            v = 1.0
            for e, lo, hi in zip(a, self.box.lows, self.box.highs):
                v *= (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)
            if self.kind == UNIFORM:
                v /= self.box.volume
            return v
        return self._quadrature_moment(a)

    def _quadrature_moment(self, a: MultiIndex) -> float:
        ddeg = self.density.degree()
        vals_by_axis = []
        weights_by_axis = []
        for e, lo, hi in zip(a, self.box.lows, self.box.highs):
            # exact for polynomial integrands of degree e + ddeg per axis
            count = max(_MIN_QUAD_NODES, (e + ddeg) // 2 + 1)
            nodes, w = _leg_nodes(count)
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            vals_by_axis.append(mid + half * nodes)
            weights_by_axis.append(w * half)
        mesh = np.meshgrid(*vals_by_axis, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        wmesh = np.meshgrid(*weights_by_axis, indexing="ij")
        wts = np.ones(pts.shape[0])
        for wm in wmesh:
            wts = wts * wm.ravel()
        dens = _eval_on_points(self.density, pts)
        if self.kind == EXP_POLY_DENSITY:
            dens = np.exp(dens)
        mono = np.ones(pts.shape[0])
        for i, e in enumerate(a):
            if e:
                mono = mono * pts[:, i] ** e
        return float(np.dot(wts, mono * dens))

    def apply_to(self, p: Polynomial) -> float:
        """Riesz functional: sum of coefficient times moment over the terms of p."""
        if p.nvars != self.dimension:
            raise ValueError("polynomial variable count must match measure dimension")
        return sum(c * self.moment(a) for a, c in p.terms.items())

    # -- frame changes -------------------------------------------------------

    def pushforward_to_unit(self) -> "MeasureSpec":
        """The same measure expressed in unit-box coordinates u, x = c + r*u.

        Total mass is preserved; Lebesgue picks up the Jacobian as weight.
        """
        dim = self.dimension
        unit = BoxDomain.unit(dim)
        jac = 1.0
        for r in self.box.halfwidths:
            jac *= r
        if self.kind == UNIFORM:
            return MeasureSpec.uniform(unit)
        if self.kind == LEBESGUE:
            return MeasureSpec.lebesgue(unit, weight=self.weight * jac)
        dens = self.density.substitute_affine(self.box.centers, self.box.halfwidths)
        if self.kind == POLY_DENSITY:
            # composed density is generally inhomogeneous; keep moments exact by
            # bypassing the constructor's homogeneity contract via direct call
            return _InhomogeneousDensity(POLY_DENSITY, unit, dens, self.weight * jac)
        return _InhomogeneousDensity(EXP_POLY_DENSITY, unit, dens, self.weight * jac)


class _InhomogeneousDensity(MeasureSpec):
    """Internal pushforward result; skips the homogeneity check."""

    def __init__(self, kind: str, box: BoxDomain, density: Polynomial, weight: float):
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "_cache", {})


def _eval_on_points(p: Polynomial, pts: np.ndarray) -> np.ndarray:
    out = np.zeros(pts.shape[0])
    for a, c in p.terms.items():
        v = np.full(pts.shape[0], c)
        for i, e in enumerate(a):
            if e:
                v = v * pts[:, i] ** e
        out += v
    return out


def product_moment(lam: MeasureSpec, mu: MeasureSpec,
                   alpha: MultiIndex, beta: MultiIndex) -> float:
    """Moment of the product measure: lam_alpha * mu_beta."""
    return lam.moment(alpha) * mu.moment(beta)


def integrate_out_omega(p: Polynomial, mu: MeasureSpec) -> Polynomial:
    """Partial integration of a joint polynomial in (x, omega) against mu(d omega).

    The last mu.dimension variables of p are the omega block; each term
    x^alpha * omega^beta maps to x^alpha * mu_beta.
    """
    pdim = mu.dimension
    n = p.nvars - pdim
    if n < 1:
        raise ValueError("polynomial must have x variables beyond the omega block")
    terms: Dict[MultiIndex, float] = {}
    for a, c in p.terms.items():
        xa, wb = a[:n], a[n:]
        m = mu.moment(wb)
        if m != 0.0:
            terms[xa] = terms.get(xa, 0.0) + c * m
    return Polynomial(n, terms)
