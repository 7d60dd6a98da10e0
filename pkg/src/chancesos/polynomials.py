"""Sparse multivariate polynomials over exponent-vector keys.

A monomial x1^a1 * ... * xn^an is keyed by its exponent tuple (a1, ..., an).
All values are immutable after construction; operations return new objects.
"""
from __future__ import annotations

import math
from typing import Dict, Iterable, Mapping, Sequence, Tuple

MultiIndex = Tuple[int, ...]


def basis_size(nvars: int, degree: int) -> int:
    """Number of monomials of total degree <= degree in nvars variables."""
    return math.comb(nvars + degree, nvars)


def monomial_basis(nvars: int, degree: int) -> list[MultiIndex]:
    """All exponent tuples with |alpha| <= degree, in graded lexicographic order.

    Within each total degree, tuples are ordered with earlier variables
    carrying higher exponents first: (2,0), (1,1), (0,2).
    """
    if nvars < 1:
        raise ValueError(f"nvars must be >= 1, got {nvars}")
    if degree < 0:
        raise ValueError(f"degree must be >= 0, got {degree}")
    out: list[MultiIndex] = []

    def fill(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for e in range(remaining, -1, -1):
            fill(prefix + [e], remaining - e, slots - 1)

    for total in range(degree + 1):
        fill([], total, nvars)
    return out


class BasisIndexer:
    """Bijection between the graded-lex monomial basis and 0..size-1."""

    def __init__(self, nvars: int, degree: int):
        self.nvars = nvars
        self.degree = degree
        self.monomials = monomial_basis(nvars, degree)
        self._index = {m: i for i, m in enumerate(self.monomials)}

    @property
    def size(self) -> int:
        return len(self.monomials)

    def index(self, alpha: MultiIndex) -> int:
        try:
            return self._index[tuple(alpha)]
        except KeyError:
            raise KeyError(f"{alpha} not in basis (nvars={self.nvars}, degree={self.degree})")

    def unindex(self, i: int) -> MultiIndex:
        return self.monomials[i]

    def __len__(self) -> int:
        return len(self.monomials)


def _check_index(alpha: Iterable[int], nvars: int) -> MultiIndex:
    t = tuple(int(e) for e in alpha)
    if len(t) != nvars:
        raise ValueError(f"exponent tuple {t} has length {len(t)}, expected {nvars}")
    if any(e < 0 for e in t):
        raise ValueError(f"negative exponent in {t}")
    return t


class Polynomial:
    """Immutable sparse polynomial: map from exponent tuple to float coefficient.

    Zero coefficients are never stored; the zero polynomial has an empty map.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[MultiIndex, float] | None = None):
        if nvars < 1:
            raise ValueError(f"nvars must be >= 1, got {nvars}")
        clean: Dict[MultiIndex, float] = {}
        if terms:
            for a, c in terms.items():
                c = float(c)
                if c != 0.0:
                    clean[_check_index(a, nvars)] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, *args):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Polynomial":
        return Polynomial(nvars, {})

    @staticmethod
    def constant(nvars: int, value: float) -> "Polynomial":
        return Polynomial(nvars, {(0,) * nvars: value})

    @staticmethod
    def variable(nvars: int, i: int) -> "Polynomial":
        if not 0 <= i < nvars:
            raise ValueError(f"variable index {i} out of range for nvars={nvars}")
        e = tuple(1 if j == i else 0 for j in range(nvars))
        return Polynomial(nvars, {e: 1.0})

    @staticmethod
    def monomial(nvars: int, alpha: MultiIndex, coef: float = 1.0) -> "Polynomial":
        return Polynomial(nvars, {tuple(alpha): coef})

    # -- structure ---------------------------------------------------------

    def degree(self) -> int:
        """Total degree; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(a) for a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, alpha: MultiIndex) -> float:
        return self.terms.get(tuple(alpha), 0.0)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Polynomial) and self.nvars == other.nvars
                and self.terms == other.terms)

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    # -- arithmetic --------------------------------------------------------

    def _require_same_space(self, other: "Polynomial") -> None:
        if self.nvars != other.nvars:
            raise ValueError(f"variable count mismatch: {self.nvars} != {other.nvars}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._require_same_space(other)
        t = dict(self.terms)
        for a, c in other.terms.items():
            t[a] = t.get(a, 0.0) + c
        return Polynomial(self.nvars, t)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return self.scale(-1.0)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.nvars, {a: c * v for a, v in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._require_same_space(other)
        t: Dict[MultiIndex, float] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                a = tuple(x + y for x, y in zip(a1, a2))
                t[a] = t.get(a, 0.0) + c1 * c2
        return Polynomial(self.nvars, t)

    def diff(self, var: int) -> "Polynomial":
        """Formal partial derivative with respect to variable `var`."""
        if not 0 <= var < self.nvars:
            raise ValueError(f"variable index {var} out of range for nvars={self.nvars}")
        t: Dict[MultiIndex, float] = {}
        for a, c in self.terms.items():
            if a[var] > 0:
                b = list(a)
                b[var] -= 1
                t[tuple(b)] = t.get(tuple(b), 0.0) + c * a[var]
        return Polynomial(self.nvars, t)

    def __call__(self, point: Sequence[float]) -> float:
        if len(point) != self.nvars:
            raise ValueError(f"point has length {len(point)}, expected {self.nvars}")
        total = 0.0
        for a, c in self.terms.items():
            v = c
            for x, e in zip(point, a):
                if e:
                    v *= x ** e
            total += v
        return total

    # -- substitutions -----------------------------------------------------

    def substitute_affine(self, shift: Sequence[float], scale: Sequence[float]) -> "Polynomial":
        """Substitute x_i -> shift_i + scale_i * t_i; returns a polynomial in t."""
        if len(shift) != self.nvars or len(scale) != self.nvars:
            raise ValueError("shift/scale length must equal nvars")
        out = Polynomial.zero(self.nvars)
        axis_powers: list[list[Polynomial]] = []
        for i in range(self.nvars):
            lin = Polynomial(self.nvars, {
                (0,) * self.nvars: shift[i],
                tuple(1 if j == i else 0 for j in range(self.nvars)): scale[i],
            })
            axis_powers.append([Polynomial.constant(self.nvars, 1.0), lin])
        for a, c in self.terms.items():
            term = Polynomial.constant(self.nvars, c)
            for i, e in enumerate(a):
                while len(axis_powers[i]) <= e:
                    axis_powers[i].append(axis_powers[i][-1] * axis_powers[i][1])
                term = term * axis_powers[i][e]
            out = out + term
        return out

    def extend(self, nvars: int, positions: Sequence[int]) -> "Polynomial":
        """Embed into a larger variable space; positions[i] is the new slot of old variable i."""
        if len(positions) != self.nvars:
            raise ValueError("positions length must equal nvars")
        t: Dict[MultiIndex, float] = {}
        for a, c in self.terms.items():
            b = [0] * nvars
            for i, e in enumerate(a):
                b[positions[i]] = e
            t[tuple(b)] = t.get(tuple(b), 0.0) + c
        return Polynomial(nvars, t)

    # -- display -----------------------------------------------------------

    def format(self, var_names: Sequence[str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = var_names or [f"x{i+1}" for i in range(self.nvars)]
        parts = []
        for a in sorted(self.terms, key=lambda m: (sum(m), tuple(-e for e in m))):
            c = self.terms[a]
            mono = "*".join(
                names[i] if e == 1 else f"{names[i]}^{e}"
                for i, e in enumerate(a) if e
            )
            if not mono:
                parts.append(repr(c))
            elif c == 1.0:
                parts.append(mono)
            elif c == -1.0:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{repr(c)}*{mono}")
        s = " + ".join(parts)
        return s.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"Polynomial({self.nvars}, {self.format()})"
