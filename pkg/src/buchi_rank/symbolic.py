"""Expressions over unknown coefficients and polynomials with symbolic coefficients.

A :class:`QExpr` is a polynomial of degree at most two in named unknowns.
Multiplying past degree two raises :class:`DegreeError`; the encoders must
introduce auxiliary unknowns instead.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

from .poly import Monomial, Polynomial, frac_str, grlex_key, mono_mul, mono_str, unit_monomial

Key = Tuple[str, ...]
MAX_DEGREE = 2


class DegreeError(ValueError):
    pass


class QExpr:
    __slots__ = ("_t", "_hash")

    def __init__(self, terms: Optional[Mapping[Key, Union[int, Fraction]]] = None):
        t: Dict[Key, Fraction] = {}
        if terms:
            for k, c in terms.items():
                c = Fraction(c)
                if c:
                    k = tuple(sorted(k))
                    if len(k) > MAX_DEGREE:
                        raise DegreeError(f"term {k} exceeds degree {MAX_DEGREE}")
                    v = t.get(k, Fraction(0)) + c
                    if v:
                        t[k] = v
                    else:
                        t.pop(k, None)
        self._t = t
        self._hash = None

    @classmethod
    def var(cls, name: str) -> "QExpr":
        return cls({(name,): 1})

    @classmethod
    def const(cls, c) -> "QExpr":
        return cls({(): c})

    @property
    def terms(self) -> Dict[Key, Fraction]:
        return dict(self._t)

    def items(self):
        return sorted(self._t.items())

    def is_zero(self) -> bool:
        return not self._t

    def is_constant(self) -> bool:
        return all(not k for k in self._t)

    def constant(self) -> Fraction:
        return self._t.get((), Fraction(0))

    def degree(self) -> int:
        return max((len(k) for k in self._t), default=0)

    def variables(self) -> set:
        return {v for k in self._t for v in k}

    def _lift(self, o) -> "QExpr":
        if isinstance(o, QExpr):
            return o
        if isinstance(o, (int, Fraction)):
            return QExpr.const(o)
        return NotImplemented

    def __add__(self, o):
        o = self._lift(o)
        if o is NotImplemented:
            return o
        t = dict(self._t)
        for k, c in o._t.items():
            t[k] = t.get(k, Fraction(0)) + c
        return QExpr(t)

    __radd__ = __add__

    def __neg__(self):
        return QExpr({k: -c for k, c in self._t.items()})

    def __sub__(self, o):
        o = self._lift(o)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        o = self._lift(o)
        if o is NotImplemented:
            return o
        if self.degree() + o.degree() > MAX_DEGREE:
            raise DegreeError("product of coefficient expressions exceeds degree 2")
        t: Dict[Key, Fraction] = {}
        for k1, c1 in self._t.items():
            for k2, c2 in o._t.items():
                k = tuple(sorted(k1 + k2))
                t[k] = t.get(k, Fraction(0)) + c1 * c2
        return QExpr(t)

    __rmul__ = __mul__

    def scale(self, c) -> "QExpr":
        c = Fraction(c)
        return QExpr({k: v * c for k, v in self._t.items()})

    def evaluate(self, model: Mapping[str, Fraction]) -> Fraction:
        total = Fraction(0)
        for k, c in self._t.items():
            v = c
            for name in k:
                v *= model[name]
            total += v
        return total

    def substitute(self, model: Mapping[str, Fraction]) -> "QExpr":
        t: Dict[Key, Fraction] = {}
        for k, c in self._t.items():
            rest = []
            for name in k:
                if name in model:
                    c = c * model[name]
                else:
                    rest.append(name)
            t[tuple(rest)] = t.get(tuple(rest), Fraction(0)) + c
        return QExpr(t)

    def normalized(self) -> "QExpr":
        """Scale so that the first term (in key order) has coefficient 1."""
        if not self._t:
            return self
        first = self.items()[0][1]
        return self.scale(1 / first)

    def __eq__(self, o):
        if isinstance(o, (int, Fraction)):
            o = QExpr.const(o)
        return isinstance(o, QExpr) and self._t == o._t

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._t.items()))
        return self._hash

    def __str__(self):
        if not self._t:
            return "0"
        parts = []
        for k, c in self.items():
            mono = "*".join(k)
            if not k:
                parts.append(frac_str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append(f"-{mono}")
            else:
                parts.append(f"{frac_str(c)}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    __repr__ = __str__


class SymPoly:
    """Polynomial in program variables whose coefficients are :class:`QExpr`."""

    __slots__ = ("nvars", "_t")

    def __init__(self, nvars: int, terms: Optional[Mapping[Monomial, QExpr]] = None):
        self.nvars = nvars
        t: Dict[Monomial, QExpr] = {}
        if terms:
            for m, e in terms.items():
                if not isinstance(e, QExpr):
                    e = QExpr.const(e)
                if not e.is_zero():
                    t[tuple(m)] = t[tuple(m)] + e if tuple(m) in t else e
                    if t[tuple(m)].is_zero():
                        del t[tuple(m)]
        self._t = t

    @classmethod
    def from_poly(cls, p: Polynomial) -> "SymPoly":
        return cls(p.nvars, {m: QExpr.const(c) for m, c in p.terms.items()})

    @classmethod
    def template(cls, nvars: int, basis: Sequence[Monomial], names: Sequence[str]) -> "SymPoly":
        return cls(nvars, {m: QExpr.var(n) for m, n in zip(basis, names)})

    def monomials(self):
        return sorted(self._t, key=grlex_key)

    def items(self):
        return [(m, self._t[m]) for m in self.monomials()]

    def coeff(self, m: Monomial) -> QExpr:
        return self._t.get(tuple(m), QExpr())

    def is_zero(self) -> bool:
        return not self._t

    def degree(self) -> int:
        return max((sum(m) for m in self._t), default=0)

    def coeff_degree(self) -> int:
        return max((e.degree() for e in self._t.values()), default=0)

    def is_concrete(self) -> bool:
        return all(e.is_constant() for e in self._t.values())

    def to_poly(self) -> Polynomial:
        if not self.is_concrete():
            raise ValueError("polynomial still has unknown coefficients")
        return Polynomial(self.nvars, {m: e.constant() for m, e in self._t.items()})

    def unknowns(self) -> set:
        out = set()
        for e in self._t.values():
            out |= e.variables()
        return out

    def _lift(self, o):
        if isinstance(o, SymPoly):
            return o
        if isinstance(o, Polynomial):
            return SymPoly.from_poly(o)
        if isinstance(o, (int, Fraction)):
            return SymPoly(self.nvars, {unit_monomial(self.nvars): QExpr.const(o)})
        if isinstance(o, QExpr):
            return SymPoly(self.nvars, {unit_monomial(self.nvars): o})
        return NotImplemented

    def __add__(self, o):
        o = self._lift(o)
        if o is NotImplemented:
            return o
        t = dict(self._t)
        for m, e in o._t.items():
            t[m] = t[m] + e if m in t else e
        return SymPoly(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return SymPoly(self.nvars, {m: -e for m, e in self._t.items()})

    def __sub__(self, o):
        o = self._lift(o)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        return symbolic_multiply(self, o)

    __rmul__ = __mul__

    def compose(self, update: Sequence[Polynomial]) -> "SymPoly":
        """``self(U(x))`` for concrete polynomial updates."""
        acc: Dict[Monomial, QExpr] = {}
        cache: Dict[Monomial, Polynomial] = {}
        for m, e in self._t.items():
            if m not in cache:
                cache[m] = Polynomial.from_monomial(m).compose(update)
            for mm, c in cache[m].terms.items():
                acc[mm] = acc[mm] + e.scale(c) if mm in acc else e.scale(c)
        return SymPoly(self.nvars, acc)

    def evaluate_at(self, values: Sequence) -> QExpr:
        total = QExpr()
        for m, e in self._t.items():
            v = Fraction(1)
            for x, k in zip(values, m):
                if k:
                    v *= Fraction(x) ** k
            total = total + e.scale(v)
        return total

    def substitute(self, model: Mapping[str, Fraction]) -> "SymPoly":
        return SymPoly(self.nvars, {m: e.substitute(model) for m, e in self._t.items()})

    def instantiate(self, model: Mapping[str, Fraction]) -> Polynomial:
        return Polynomial(self.nvars, {m: e.evaluate(model) for m, e in self._t.items()})

    def __eq__(self, o):
        o = self._lift(o)
        return isinstance(o, SymPoly) and self.nvars == o.nvars and self._t == o._t

    def __hash__(self):
        return hash((self.nvars, frozenset(self._t.items())))

    def to_str(self, names: Sequence[str]) -> str:
        if not self._t:
            return "0"
        return " + ".join(f"({e})*{mono_str(m, names)}" if any(m) else f"({e})" for m, e in self.items())

    def __repr__(self):
        return f"SymPoly({self.to_str([f'x{i}' for i in range(self.nvars)])})"


def symbolic_multiply(a: SymPoly, b) -> SymPoly:
    """Product of symbolic polynomials; raises if unknown-degree exceeds two."""
    if not isinstance(b, SymPoly):
        b = a._lift(b)
        if b is NotImplemented:
            raise TypeError("cannot multiply")
    if a.coeff_degree() + b.coeff_degree() > MAX_DEGREE:
        raise DegreeError("symbolic product exceeds coefficient degree 2")
    t: Dict[Monomial, QExpr] = {}
    for m1, e1 in a._t.items():
        for m2, e2 in b._t.items():
            m = mono_mul(m1, m2)
            t[m] = t[m] + e1 * e2 if m in t else e1 * e2
    return SymPoly(a.nvars, t)


@dataclass(frozen=True)
class SymAtom:
    """``poly >= 0`` or ``poly > 0`` with possibly symbolic coefficients."""

    poly: SymPoly
    strict: bool = False

    def negate(self) -> "SymAtom":
        return SymAtom(-self.poly, not self.strict)

    @classmethod
    def of(cls, atom) -> "SymAtom":
        if isinstance(atom, SymAtom):
            return atom
        return cls(SymPoly.from_poly(atom.poly), atom.strict)

    def is_concrete(self) -> bool:
        return self.poly.is_concrete()

    def concrete(self):
        from .ir import Atom
        return Atom(self.poly.to_poly(), self.strict)

    def closed(self, eps: Fraction) -> "SymAtom":
        """Strict ``p > 0`` becomes ``p - eps >= 0``."""
        if not self.strict:
            return self
        p = self.poly
        if p.is_concrete():
            # integer-valued on the grid after scaling, keeping the rewrite exact there
            _, q = p.to_poly().primitive()
            p = SymPoly.from_poly(q)
        return SymAtom(p - SymPoly.from_poly(Polynomial.const(p.nvars, eps)), False)

    def holds(self, values: Sequence, model: Mapping[str, Fraction]) -> bool:
        v = self.poly.instantiate(model).evaluate(values)
        return v > 0 if self.strict else v >= 0

    def to_str(self, names) -> str:
        return f"{self.poly.to_str(names)} {'>' if self.strict else '>='} 0"
