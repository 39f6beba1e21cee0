"""Exact multivariate polynomials over the rationals.

Monomials are exponent tuples of fixed length ``nvars``.  Ordering is graded
lexicographic: lower total degree first, then larger leading exponents.
"""
from __future__ import annotations

from fractions import Fraction
from functools import reduce
from itertools import combinations_with_replacement
from math import gcd, lcm
from typing import Dict, Iterable, Iterator, Mapping, Sequence, Tuple, Union

Monomial = Tuple[int, ...]
Number = Union[int, Fraction]


def mono_degree(m: Monomial) -> int:
    return sum(m)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def grlex_key(m: Monomial):
    return (sum(m), tuple(-e for e in m))


def unit_monomial(nvars: int) -> Monomial:
    return (0,) * nvars


def monomials_upto(nvars: int, degree: int) -> list[Monomial]:
    """All monomials of total degree <= ``degree``, in grlex order.

    There are C(nvars + degree, degree) of them.
    """
    out: list[Monomial] = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return sorted(set(out), key=grlex_key)


def mono_str(m: Monomial, names: Sequence[str]) -> str:
    parts = []
    for name, e in zip(names, m):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def frac_str(c: Fraction) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


class Polynomial:
    """Immutable polynomial with :class:`Fraction` coefficients."""

    __slots__ = ("nvars", "_terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[Monomial, Number] | None = None):
        self.nvars = nvars
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if len(m) != nvars:
                    raise ValueError(f"monomial {m} has wrong arity for {nvars} variables")
                c = Fraction(c)
                if c:
                    clean[tuple(m)] = clean.get(tuple(m), Fraction(0)) + c
                    if not clean[tuple(m)]:
                        del clean[tuple(m)]
        self._terms = clean
        self._hash = None

    # construction helpers
    @classmethod
    def const(cls, nvars: int, c: Number) -> "Polynomial":
        return cls(nvars, {unit_monomial(nvars): c})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Polynomial":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def from_monomial(cls, m: Monomial, c: Number = 1) -> "Polynomial":
        return cls(len(m), {m: c})

    # access
    @property
    def terms(self) -> Dict[Monomial, Fraction]:
        return dict(self._terms)

    def items(self) -> Iterator[Tuple[Monomial, Fraction]]:
        for m in self.monomials():
            yield m, self._terms[m]

    def monomials(self) -> list[Monomial]:
        return sorted(self._terms, key=grlex_key)

    def coeff(self, m: Monomial) -> Fraction:
        return self._terms.get(tuple(m), Fraction(0))

    def is_zero(self) -> bool:
        return not self._terms

    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self._terms)

    def constant(self) -> Fraction:
        return self.coeff(unit_monomial(self.nvars))

    def variables(self) -> set[int]:
        return {i for m in self._terms for i, e in enumerate(m) if e}

    # arithmetic
    def _lift(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("arity mismatch")
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.const(self.nvars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        t = dict(self._terms)
        for m, c in other._terms.items():
            t[m] = t.get(m, Fraction(0)) + c
        return Polynomial(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        t: Dict[Monomial, Fraction] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = mono_mul(m1, m2)
                t[m] = t.get(m, Fraction(0)) + c1 * c2
        return Polynomial(self.nvars, t)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def scale(self, c: Number) -> "Polynomial":
        c = Fraction(c)
        return Polynomial(self.nvars, {m: v * c for m, v in self._terms.items()})

    # evaluation / composition
    def evaluate(self, values: Sequence[Number]) -> Fraction:
        total = Fraction(0)
        for m, c in self._terms.items():
            v = c
            for x, e in zip(values, m):
                if e:
                    v *= Fraction(x) ** e
            total += v
        return total

    __call__ = evaluate

    def compose(self, polys: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute ``polys[i]`` for variable i."""
        if len(polys) != self.nvars:
            raise ValueError("compose needs one polynomial per variable")
        if not polys:
            return self
        n = polys[0].nvars
        cache: Dict[Tuple[int, int], Polynomial] = {}

        def power(i: int, e: int) -> Polynomial:
            key = (i, e)
            if key not in cache:
                cache[key] = polys[i] ** e
            return cache[key]

        out = Polynomial(n)
        for m, c in self._terms.items():
            term = Polynomial.const(n, c)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def primitive(self) -> Tuple[Fraction, "Polynomial"]:
        """Return ``(k, q)`` with ``k > 0`` and ``self == k * q``.

        ``q`` has coprime integer coefficients.
        """
        if self.is_zero():
            return Fraction(1), self
        den = reduce(lcm, (c.denominator for c in self._terms.values()), 1)
        nums = [int(c * den) for c in self._terms.values()]
        g = reduce(gcd, (abs(v) for v in nums))
        k = Fraction(g, den)
        return k, self.scale(1 / k)

    # identity
    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.const(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    def to_str(self, names: Sequence[str]) -> str:
        if self.is_zero():
            return "0"
        pieces = []
        for m in reversed(self.monomials()):
            c = self._terms[m]
            mono = mono_str(m, names)
            mag = abs(c)
            if mono == "1":
                body = frac_str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{frac_str(mag)}*{mono}"
            pieces.append(("-" if c < 0 else "+", body))
        first_sign, first = pieces[0]
        s = ("-" if first_sign == "-" else "") + first
        for sign, body in pieces[1:]:
            s += f" {sign} {body}"
        return s

    def __repr__(self):
        return f"Polynomial({self.to_str([f'x{i}' for i in range(self.nvars)])})"


def sum_polys(nvars: int, polys: Iterable[Polynomial]) -> Polynomial:
    out = Polynomial(nvars)
    for p in polys:
        out = out + p
    return out
