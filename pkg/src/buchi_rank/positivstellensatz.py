"""Putinar-style reduction of entailments to quadratic constraints.

For an entailment ``g_1 >= 0 /\\ ... /\\ g_m >= 0 => g_0 >= 0`` we require the
polynomial identity ``sigma_0 + sum_i sigma_i * g_i == g_0`` with every
``sigma`` a sum of squares template, matched monomial by monomial.

Two multiplier shapes are available:

``diagonal``
    ``sigma = sum_m lam_m * m^2`` with ``lam_m >= 0`` (linear in unknowns).
``squares``
    ``sigma = sum_j h_j^2`` for ``s`` polynomial templates ``h_j``.  When the
    matching ``g_i`` has unknown coefficients, the coefficients of ``sigma``
    become auxiliary unknowns tied to the squares by quadratic equalities.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence

from .ir import ConfigError, Lit, Pred, evaluate
from .poly import Monomial, mono_mul, monomials_upto, grlex_key
from .symbolic import QExpr, SymPoly
from .witness import ConstraintSet, Entailment, GroundAtom, mono_key


class EncodingDegreeError(ConfigError):
    pass


@dataclass
class SosConfig:
    mode: str = "diagonal"  # or "squares"
    degree: Optional[int] = None  # half-degree d_h of every multiplier; None picks per entailment
    squares: int = 2

    def __post_init__(self):
        if self.mode not in ("diagonal", "squares"):
            raise ConfigError(f"unknown SOS mode {self.mode!r}")
        if self.degree is not None and self.degree < 0:
            raise ConfigError("multiplier degree must be non-negative")
        if self.squares < 1:
            raise ConfigError("need at least one square")


@dataclass
class QpSystem:
    """Unknowns with sorts and constraints over them (``Pred`` trees of ``GroundAtom``)."""

    sorts: Dict[str, str] = field(default_factory=dict)
    constraints: List[Pred] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    def declare(self, name: str, sort: str = "Real") -> None:
        if self.sorts.get(name, sort) != sort:
            raise ConfigError(f"unknown {name} declared with two sorts")
        self.sorts.setdefault(name, sort)

    def add(self, c: Pred) -> None:
        for a in _ground_atoms(c):
            for v in a.expr.variables():
                self.sorts.setdefault(v, "Real")
        self.constraints.append(c)

    def eq(self, e: QExpr) -> None:
        self.add(Lit(GroundAtom(e, "==")))

    def ge(self, e: QExpr) -> None:
        self.add(Lit(GroundAtom(e, ">=")))

    def max_degree(self) -> int:
        return max((a.expr.degree() for c in self.constraints for a in _ground_atoms(c)), default=0)

    def holds(self, model: Mapping[str, Fraction]) -> bool:
        full = {v: Fraction(model.get(v, 0)) for v in self.sorts}
        for name, sort in self.sorts.items():
            if sort == "Int" and full[name].denominator != 1:
                return False
        return all(_eval_ground(c, full) for c in self.constraints)

    def violated(self, model: Mapping[str, Fraction]) -> List[Pred]:
        full = {v: Fraction(model.get(v, 0)) for v in self.sorts}
        return [c for c in self.constraints if not _eval_ground(c, full)]


def _ground_atoms(p: Pred):
    from .ir import pred_atoms
    return pred_atoms(p)


def _eval_ground(p: Pred, model) -> bool:
    from .ir import And, FalseP, Not, Or, TrueP
    if isinstance(p, TrueP):
        return True
    if isinstance(p, FalseP):
        return False
    if isinstance(p, Lit):
        return p.atom.holds(model)
    if isinstance(p, Not):
        return not _eval_ground(p.arg, model)
    if isinstance(p, And):
        return all(_eval_ground(a, model) for a in p.args)
    if isinstance(p, Or):
        return any(_eval_ground(a, model) for a in p.args)
    raise TypeError(p)


def _half_degrees(ent: Entailment, cfg: SosConfig) -> List[int]:
    """Half-degree of sigma_0 and of each sigma_i."""
    degs = [a.poly.degree() for a in ent.lhs]
    target = max([ent.rhs.poly.degree()] + degs)
    if cfg.degree is not None:
        d = cfg.degree
        reach = max([2 * d] + [2 * d + g for g in degs])
        if reach < ent.rhs.poly.degree():
            raise EncodingDegreeError(
                f"multipliers of half-degree {d} cannot reach degree {ent.rhs.poly.degree()} "
                f"of the conclusion ({ent.origin}); increase the multiplier degree")
        return [d] * (len(degs) + 1)
    return [target // 2] + [max(0, (target - g) // 2) for g in degs]


def _diag_sigma(qp: QpSystem, nvars: int, d: int, tag: str) -> SymPoly:
    terms: Dict[Monomial, QExpr] = {}
    for j, m in enumerate(monomials_upto(nvars, d)):
        name = f"{tag}[{j}]"
        qp.declare(name)
        qp.ge(QExpr.var(name))
        sq = mono_mul(m, m)
        terms[sq] = terms.get(sq, QExpr()) + QExpr.var(name)
    return SymPoly(nvars, terms)


def _squares_sigma(qp: QpSystem, nvars: int, d: int, s: int, tag: str, linear: bool) -> SymPoly:
    """Sum of ``s`` squares; with ``linear`` the coefficients are fresh unknowns."""
    basis = monomials_upto(nvars, d)
    raw: Dict[Monomial, QExpr] = {}
    for j in range(s):
        h = {m: QExpr.var(f"{tag}h[{j}][{mono_key(m)}]") for m in basis}
        for a in range(len(basis)):
            for b in range(len(basis)):
                m = mono_mul(basis[a], basis[b])
                raw[m] = raw.get(m, QExpr()) + h[basis[a]] * h[basis[b]]
    for e in raw.values():
        for v in e.variables():
            qp.declare(v)
    if not linear:
        return SymPoly(nvars, raw)
    terms: Dict[Monomial, QExpr] = {}
    for m in sorted(raw, key=grlex_key):
        name = f"{tag}s[{mono_key(m)}]"
        qp.declare(name)
        qp.eq(QExpr.var(name) - raw[m])
        terms[m] = QExpr.var(name)
    return SymPoly(nvars, terms)


def putinar_encode(ent: Entailment, qp: QpSystem, tag: str, cfg: SosConfig = SosConfig()) -> List[QExpr]:
    """Add multipliers and coefficient-matching equalities for one entailment.

    Returns the equalities (each ``== 0``) in grlex order of the monomial.
    """
    n = ent.rhs.poly.nvars
    halves = _half_degrees(ent, cfg)
    gs = [SymPoly(n, {(0,) * n: QExpr.const(1)})] + [a.poly for a in ent.lhs]
    total = SymPoly(n)
    for i, (g, d) in enumerate(zip(gs, halves)):
        mtag = f"lam[{tag}][{i}]"
        if cfg.mode == "diagonal":
            sigma = _diag_sigma(qp, n, d, mtag)
        else:
            sigma = _squares_sigma(qp, n, d, cfg.squares, f"sos[{tag}][{i}]", linear=not g.is_concrete())
        total = total + sigma * g
    diff = total - ent.rhs.poly
    eqs = []
    for m in diff.monomials():
        e = diff.coeff(m)
        if e.is_constant():
            if e.constant() != 0:
                # the identity is impossible: keep it as an unsatisfiable constraint
                qp.eq(e)
                eqs.append(e)
            continue
        qp.eq(e)
        eqs.append(e)
    return eqs


def encode(cs: ConstraintSet, cfg: SosConfig = SosConfig(), qp: Optional[QpSystem] = None,
           tag_prefix: str = "e") -> QpSystem:
    """Reduce a whole constraint set to a QP."""
    qp = qp or QpSystem()
    ints = set(cs.int_vars)
    for v in cs.int_vars:
        qp.declare(v, "Int")
    for v in cs.extra_vars:
        qp.declare(v, "Int" if v in ints else "Real")
    for k, ent in enumerate(cs.entailments):
        for a in (ent.rhs, *ent.lhs):
            for u in sorted(a.poly.unknowns()):
                qp.declare(u, "Int" if u in ints else "Real")
        putinar_encode(ent, qp, f"{tag_prefix}{k}", cfg)
    for g in cs.ground:
        qp.add(g)
    return qp
