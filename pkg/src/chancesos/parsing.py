"""Recursive-descent parser for polynomial expressions.

Grammar (whitespace ignored):

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*      division by numeric literals only
    factor   := ('+' | '-')* atom ('^' integer)?
    atom     := number | variable | '(' expr ')'

Coefficients are accumulated exactly as fractions and converted to float
once, when the final Polynomial is built.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Sequence, Tuple

from .polynomials import MultiIndex, Polynomial


class ParseError(ValueError):
    """Syntax or semantic error in a polynomial expression."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.message = message
        self.line = line
        self.col = col


_OPS = set("+-*/^()")


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind  # 'num' | 'name' | op character | 'end'
        self.text = text
        self.line = line
        self.col = col


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch in _OPS:
            tokens.append(_Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            seen_dot = False
            while j < len(src) and (src[j].isdigit() or (src[j] == "." and not seen_dot)):
                if src[j] == ".":
                    seen_dot = True
                j += 1
            # scientific notation: e[+-]digits
            if j < len(src) and src[j] in "eE":
                k = j + 1
                if k < len(src) and src[k] in "+-":
                    k += 1
                if k < len(src) and src[k].isdigit():
                    j = k
                    while j < len(src) and src[j].isdigit():
                        j += 1
            text = src[i:j]
            if text == ".":
                raise ParseError("malformed number", line, col)
            tokens.append(_Token("num", text, line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(_Token("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


_FracPoly = Dict[MultiIndex, Fraction]


def _fp_add(p: _FracPoly, q: _FracPoly) -> _FracPoly:
    r = dict(p)
    for m, c in q.items():
        r[m] = r.get(m, Fraction(0)) + c
    return {m: c for m, c in r.items() if c}


def _fp_scale(p: _FracPoly, c: Fraction) -> _FracPoly:
    if not c:
        return {}
    return {m: v * c for m, v in p.items()}


def _fp_mul(p: _FracPoly, q: _FracPoly) -> _FracPoly:
    r: _FracPoly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = tuple(a + b for a, b in zip(m1, m2))
            r[m] = r.get(m, Fraction(0)) + c1 * c2
    return {m: c for m, c in r.items() if c}


def _fp_pow(p: _FracPoly, e: int, nvars: int) -> _FracPoly:
    result: _FracPoly = {(0,) * nvars: Fraction(1)}
    for _ in range(e):
        result = _fp_mul(result, p)
    return result


class _Parser:
    def __init__(self, tokens: list[_Token], var_names: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.var_names = list(var_names)
        self.var_index = {v: i for i, v in enumerate(var_names)}
        self.nvars = len(var_names)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text or 'end of input'!r}", t.line, t.col)
        return self.next()

    # grammar rules -------------------------------------------------------

    def expr(self) -> _FracPoly:
        p = self.term()
        while self.peek().kind in "+-":
            op = self.next().kind
            q = self.term()
            p = _fp_add(p, q if op == "+" else _fp_scale(q, Fraction(-1)))
        return p

    def term(self) -> _FracPoly:
        p = self.factor()
        while self.peek().kind in "*/":
            op = self.next().kind
            if op == "*":
                p = _fp_mul(p, self.factor())
            else:
                divisor = self.literal_factor()
                if divisor == 0:
                    t = self.tokens[self.pos - 1]
                    raise ParseError("division by zero", t.line, t.col)
                p = _fp_scale(p, Fraction(1) / divisor)
        return p

    def literal_factor(self) -> Fraction:
        """Divisor: a numeric literal with optional sign and integer exponent."""
        sign = Fraction(1)
        while self.peek().kind in "+-":
            if self.next().kind == "-":
                sign = -sign
        t = self.peek()
        if t.kind != "num":
            raise ParseError("division is only allowed by numeric literals", t.line, t.col)
        self.next()
        value = _number_to_fraction(t)
        if self.peek().kind == "^":
            self.next()
            e = self.integer_exponent()
            value = value ** e
        return sign * value

    def factor(self) -> _FracPoly:
        sign = 1
        while self.peek().kind in "+-":
            if self.next().kind == "-":
                sign = -sign
        base = self.atom()
        if self.peek().kind == "^":
            self.next()
            e = self.integer_exponent()
            base = _fp_pow(base, e, self.nvars)
        return _fp_scale(base, Fraction(sign))

    def integer_exponent(self) -> int:
        t = self.peek()
        if t.kind != "num" or not t.text.isdigit():
            raise ParseError("exponent must be a non-negative integer", t.line, t.col)
        self.next()
        return int(t.text)

    def atom(self) -> _FracPoly:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return {(0,) * self.nvars: _number_to_fraction(t)}
        if t.kind == "name":
            self.next()
            if t.text not in self.var_index:
                raise ParseError(
                    f"unknown variable {t.text!r} (expected one of {', '.join(self.var_names)})",
                    t.line, t.col)
            i = self.var_index[t.text]
            e = tuple(1 if j == i else 0 for j in range(self.nvars))
            return {e: Fraction(1)}
        if t.kind == "(":
            self.next()
            p = self.expr()
            self.expect(")")
            return p
        raise ParseError(f"expected a number, variable or '(', found {t.text or 'end of input'!r}",
                         t.line, t.col)


def _number_to_fraction(t: _Token) -> Fraction:
    try:
        return Fraction(t.text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"malformed number {t.text!r}", t.line, t.col)


def parse_polynomial(src: str, var_names: Sequence[str]) -> Polynomial:
    """Parse an expression over the given variable names into a Polynomial.

    Coefficients are exact until the final conversion to float.
    """
    if not var_names:
        raise ValueError("var_names must be nonempty")
    parser = _Parser(_tokenize(src), var_names)
    p = parser.expr()
    end = parser.peek()
    if end.kind != "end":
        raise ParseError(f"unexpected trailing input {end.text!r}", end.line, end.col)
    return Polynomial(len(var_names), {m: float(c) for m, c in p.items()})


def format_polynomial(p: Polynomial, var_names: Sequence[str]) -> str:
    """Inverse of parse_polynomial on canonical forms."""
    return p.format(var_names)
