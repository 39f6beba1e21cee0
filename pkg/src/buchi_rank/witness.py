"""Büchi ranking function templates, entailment generation and witness checking."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .ir import (
    TRUE, Atom, ConfigError, Lit, Pred, State, Transition, atoms_infeasible, dnf, evaluate,
)
from .poly import Monomial, Polynomial, frac_str, monomials_upto
from .product import ProductSystem
from .symbolic import QExpr, SymAtom, SymPoly

DEFAULT_EPS = Fraction(1, 1000)


def mono_key(m: Monomial) -> str:
    return ",".join(str(e) for e in m)


def parse_mono_key(s: str) -> Monomial:
    return tuple(int(x) for x in s.split(","))


# ---------------------------------------------------------------------------
# templates


@dataclass
class Templates:
    degree: int
    nvars: int
    basis: List[Monomial]
    names: Dict[str, List[str]]  # location -> coefficient names, aligned with basis
    fixed: Dict[str, Polynomial] = field(default_factory=dict)  # locations pinned to a constant

    def symbolic(self, loc: str) -> SymPoly:
        return SymPoly.template(self.nvars, self.basis, self.names[loc])

    def f(self, loc: str) -> SymPoly:
        if loc in self.fixed:
            return SymPoly.from_poly(self.fixed[loc])
        return self.symbolic(loc)

    def all_unknowns(self) -> List[str]:
        return [n for loc in self.names for n in self.names[loc]]

    def instantiate(self, model: Mapping[str, Fraction]) -> Dict[str, Polynomial]:
        out = {}
        for loc in self.names:
            if loc in self.fixed:
                out[loc] = self.fixed[loc]
            else:
                out[loc] = self.symbolic(loc).instantiate(model)
        return out


def coeff_name(prefix: str, loc: str, m: Monomial) -> str:
    return f"{prefix}[{loc}][{mono_key(m)}]"


def build_templates(ps: ProductSystem, degree: int, prefix: str = "c",
                    pin_hopeless: bool = True) -> Templates:
    if degree < 0:
        raise ConfigError("template degree must be non-negative")
    n = ps.ts.nvars
    basis = monomials_upto(n, degree)
    names = {l: [coeff_name(prefix, l, m) for m in basis] for l in ps.locations}
    fixed = {}
    if pin_hopeless:
        for l in ps.hopeless():
            fixed[l] = Polynomial.const(n, -1)
    return Templates(degree, n, basis, names, fixed)


# ---------------------------------------------------------------------------
# entailments


@dataclass(frozen=True)
class Entailment:
    """``/\\ lhs >= 0  =>  rhs >= 0`` over all program valuations (closed atoms)."""

    lhs: Tuple[SymAtom, ...]
    rhs: SymAtom
    origin: str = ""

    def holds_at(self, values: Sequence, model: Mapping[str, Fraction]) -> bool:
        if all(a.holds(values, model) for a in self.lhs):
            return self.rhs.holds(values, model)
        return True


@dataclass(frozen=True)
class GroundAtom:
    """A constraint on unknowns alone: ``expr rel 0``."""

    expr: QExpr
    rel: str  # ">=", ">", "=="

    def negate(self):
        if self.rel == ">=":
            return GroundAtom(-self.expr, ">")
        if self.rel == ">":
            return GroundAtom(-self.expr, ">=")
        raise ValueError("cannot negate an equality into a single atom")

    def holds(self, model: Mapping[str, Fraction]) -> bool:
        v = self.expr.evaluate(model)
        return v >= 0 if self.rel == ">=" else v > 0 if self.rel == ">" else v == 0


@dataclass
class ConstraintSet:
    entailments: List[Entailment] = field(default_factory=list)
    ground: List[Pred] = field(default_factory=list)  # Pred trees over GroundAtom
    int_vars: List[str] = field(default_factory=list)
    extra_vars: List[str] = field(default_factory=list)
    notes: Dict[str, object] = field(default_factory=dict)


class EncodingBlowup(ConfigError):
    pass


MAX_ENTAILMENTS = 20000


def _clean(conj: Sequence[SymAtom], eps: Fraction) -> Optional[List[SymAtom]]:
    """Close strict atoms, drop trivial ones, and detect syntactic contradictions."""
    out: List[SymAtom] = []
    seen = set()
    concrete: List[Atom] = []
    for a in conj:
        if a.is_concrete():
            t = a.concrete().constant_truth()
            if t is True:
                continue
            if t is False:
                return None
            concrete.append(a.concrete())
        c = a.closed(eps)
        if c.is_concrete():
            ct = c.concrete().constant_truth()
            if ct is True:
                continue
            if ct is False:
                return None
        if c not in seen:
            seen.add(c)
            out.append(c)
    if concrete and atoms_infeasible(concrete):
        return None
    return out


def _pred_dnf(p: Pred) -> List[List[SymAtom]]:
    return [[SymAtom.of(a) for a in c] for c in dnf(p)]


def _bound_atoms(nvars: int, radius: Optional[Fraction]) -> List[SymAtom]:
    if radius is None:
        return []
    r = Polynomial.const(nvars, Fraction(radius) ** 2)
    for i in range(nvars):
        r = r - Polynomial.var(nvars, i) ** 2
    return [SymAtom(SymPoly.from_poly(r))]


def _rank_atoms(t: Transition, templates: Templates, buchi_src: bool) -> List[SymAtom]:
    f_dst = templates.f(t.dst).compose(t.update)
    atoms = [SymAtom(f_dst)]
    if not buchi_src:
        atoms.append(SymAtom(templates.f(t.src) - f_dst - 1))
    return atoms


def _lhs_base(ps: ProductSystem, loc: str, templates: Templates, extra: Mapping[str, Sequence[SymAtom]]):
    return _pred_dnf(ps.ts.invariant(loc)), list(extra.get(loc, ()))


def gen_ebrf_constraints(ps: ProductSystem, templates: Templates, eps: Fraction = DEFAULT_EPS,
                         extra_lhs: Mapping[str, Sequence[SymAtom]] = {},
                         bound_radius: Optional[Fraction] = None,
                         group_letters: bool = True) -> ConstraintSet:
    """Entailments for the existential condition at every product location.

    Per location the disjunction over outgoing transitions is rewritten as
    ``(phi /\\ ~psi_1 /\\ ... /\\ ~psi_{k-1}) => psi_k`` with the last-declared
    transition as ``psi_k``.  Transitions are grouped by automaton letter
    first; letters partition the valuations so the rewrite stays equivalent.
    """
    cs = ConstraintSet()
    bounds = _bound_atoms(ps.ts.nvars, bound_radius)
    for loc in ps.locations:
        if loc in templates.fixed:
            continue
        outs = ps.outgoing(loc)
        if not outs:
            raise ConfigError(f"location {loc} has no outgoing transition")
        groups: Dict[object, List[Transition]] = {}
        for t in outs:
            key = t.letter if group_letters else None
            groups.setdefault(key, []).append(t)
        theta, extra = _lhs_base(ps, loc, templates, extra_lhs)
        f_here = SymAtom(templates.f(loc))
        for key, trans in groups.items():
            letter = [SymAtom.of(a) for a in key] if (group_letters and key) else []
            psis: List[List[SymAtom]] = []
            for t in trans:
                guard = t.guard
                if group_letters and key:
                    # the letter is already part of the premise
                    guard = _strip_letter(t.guard, key)
                rank = _rank_atoms(t, templates, loc in ps.buchi)
                if any(a.is_concrete() and a.concrete().constant_truth() is False for a in rank):
                    continue
                for g in _pred_dnf(guard):
                    psis.append(g + rank)
            premise_base = [th + extra + bounds + letter + [f_here] for th in theta]
            if not psis:
                conclusions = [SymAtom(SymPoly.from_poly(Polynomial.const(ps.ts.nvars, -1)))]
                negs: List[List[SymAtom]] = []
            else:
                conclusions = psis[-1]
                negs = [[a.negate() for a in psi] for psi in psis[:-1]]
            lhs_list = _expand(premise_base, negs, eps)
            for lhs in lhs_list:
                for c in conclusions:
                    rhs = _clean([c], eps)
                    if rhs is None:
                        rhs_atom = SymAtom(SymPoly.from_poly(Polynomial.const(ps.ts.nvars, -1)))
                    elif not rhs:
                        continue
                    else:
                        rhs_atom = rhs[0]
                    if rhs_atom in lhs:
                        continue
                    cs.entailments.append(Entailment(tuple(lhs), rhs_atom, f"ebrf {loc}"))
                    if len(cs.entailments) > MAX_ENTAILMENTS:
                        raise EncodingBlowup("existential encoding exceeds the entailment bound")
    cs.notes["kind"] = "EBRF"
    return cs


def _strip_letter(guard: Pred, letter: Tuple[Atom, ...]) -> Pred:
    from .ir import And
    if isinstance(guard, And):
        keep = tuple(a for a in guard.args if not (isinstance(a, Lit) and a.atom in letter))
        if not keep:
            return TRUE
        return keep[0] if len(keep) == 1 else And(keep)
    if isinstance(guard, Lit) and guard.atom in letter:
        return TRUE
    return guard


def _expand(bases: List[List[SymAtom]], negs: List[List[SymAtom]], eps) -> List[List[SymAtom]]:
    """DNF of ``base /\\ (\\/ neg_1) /\\ ... `` with contradictory branches pruned early."""
    out: List[List[SymAtom]] = []
    for base in bases:
        start = _clean(base, eps)
        if start is None:
            continue
        frontier = [start]
        for choice in negs:
            nxt = []
            for partial in frontier:
                for a in choice:
                    c = _clean(partial + [a], eps)
                    if c is not None:
                        nxt.append(c)
                    if len(nxt) > MAX_ENTAILMENTS:
                        raise EncodingBlowup("existential premise DNF exceeds the entailment bound")
            frontier = _dedupe(nxt)
            if not frontier:
                break
        out.extend(frontier)
    return _dedupe(out)


def _dedupe(conjs: List[List[SymAtom]]) -> List[List[SymAtom]]:
    seen = set()
    out = []
    for c in conjs:
        k = frozenset(c)
        if k not in seen:
            seen.add(k)
            out.append(c)
    # a premise containing another one is implied by it; keep the weaker premise only
    keys = [frozenset(c) for c in out]
    return [c for c, k in zip(out, keys) if not any(o < k for o in keys)]


def gen_ubrf_constraints(ps: ProductSystem, templates: Templates, eps: Fraction = DEFAULT_EPS,
                         extra_lhs: Mapping[str, Sequence[SymAtom]] = {},
                         bound_radius: Optional[Fraction] = None) -> ConstraintSet:
    """Entailments for the universal condition, one family per transition."""
    cs = ConstraintSet()
    bounds = _bound_atoms(ps.ts.nvars, bound_radius)
    for loc in ps.locations:
        if loc in templates.fixed:
            continue
        theta, extra = _lhs_base(ps, loc, templates, extra_lhs)
        f_here = SymAtom(templates.f(loc))
        for t in ps.outgoing(loc):
            rank = _rank_atoms(t, templates, loc in ps.buchi)
            for th in theta:
                for g in _pred_dnf(t.guard):
                    lhs = _clean(th + extra + bounds + g + [f_here], eps)
                    if lhs is None:
                        continue
                    for a in rank:
                        rhs = _clean([a], eps)
                        if rhs is None:
                            rhs_atom = SymAtom(SymPoly.from_poly(Polynomial.const(ps.ts.nvars, -1)))
                        elif not rhs:
                            continue
                        else:
                            rhs_atom = rhs[0]
                        cs.entailments.append(Entailment(tuple(lhs), rhs_atom, f"ubrf {t.src}->{t.dst}"))
    # every initial state must start with a non-negative value
    f_init = SymAtom(templates.f(ps.init))
    for th in _pred_dnf(ps.ts.init_cond):
        lhs = _clean(th + list(extra_lhs.get(ps.init, ())) + bounds, eps)
        if lhs is None:
            continue
        rhs = _clean([f_init], eps)
        if rhs is None:
            rhs_atom = SymAtom(SymPoly.from_poly(Polynomial.const(ps.ts.nvars, -1)))
        elif not rhs:
            continue
        else:
            rhs_atom = rhs[0]
        cs.entailments.append(Entailment(tuple(lhs), rhs_atom, "ubrf init"))
    cs.notes["kind"] = "UBRF"
    return cs


def init_valuation_constraint(ps: ProductSystem, templates: Templates, integer: bool = False,
                              prefix: str = "t") -> ConstraintSet:
    """Existential initial condition over fresh valuation unknowns.

    Monomials of the valuation are represented by auxiliary unknowns linked by
    quadratic equalities, so ``f(t) >= 0`` stays of degree two.
    """
    n = ps.ts.nvars
    names = ps.ts.variables
    cs = ConstraintSet()
    tvars = [f"{prefix}[{v}]" for v in names]
    max_deg = max([templates.degree] + [a.poly.degree() for c in dnf(ps.ts.init_cond) for a in c])
    mono_var: Dict[Monomial, QExpr] = {}
    zero = (0,) * n
    mono_var[zero] = QExpr.const(1)
    for i in range(n):
        e = [0] * n
        e[i] = 1
        mono_var[tuple(e)] = QExpr.var(tvars[i])
    cs.extra_vars.extend(tvars)
    if integer:
        cs.int_vars.extend(tvars)
    for m in monomials_upto(n, max_deg):
        if sum(m) < 2:
            continue
        i = next(k for k, e in enumerate(m) if e)
        prev = tuple(e - (1 if k == i else 0) for k, e in enumerate(m))
        name = f"{prefix}m[{mono_key(m)}]"
        cs.extra_vars.append(name)
        if integer:
            cs.int_vars.append(name)
        cs.ground.append(Lit(GroundAtom(QExpr.var(name) - mono_var[prev] * mono_var[tuple(
            1 if k == i else 0 for k in range(n))], "==")))
        mono_var[m] = QExpr.var(name)

    def lin(p: Polynomial) -> QExpr:
        out = QExpr()
        for m, c in p.terms.items():
            out = out + mono_var[m].scale(c)
        return out

    from .ir import map_atoms
    theta = map_atoms(ps.ts.init_cond, lambda a: GroundAtom(lin(a.poly), ">" if a.strict else ">="))
    cs.ground.append(theta)
    f = templates.f(ps.init)
    val = QExpr()
    for m, e in f.items():
        val = val + e * mono_var[m]
    cs.ground.append(Lit(GroundAtom(val, ">=")))
    cs.notes["init_vars"] = tvars
    return cs


def pin_constraints(templates: Templates) -> List[Pred]:
    """Equalities fixing the coefficients of pinned locations."""
    out = []
    for loc, p in templates.fixed.items():
        for m, name in zip(templates.basis, templates.names[loc]):
            out.append(Lit(GroundAtom(QExpr.var(name) - QExpr.const(p.coeff(m)), "==")))
    return out


# ---------------------------------------------------------------------------
# concrete witnesses


@dataclass
class ConcreteWitness:
    kind: str  # "EBRF" or "UBRF"
    degree: int
    variables: List[str]
    functions: Dict[str, Polynomial]
    init_valuation: Optional[Tuple[Fraction, ...]] = None

    def value(self, state: State) -> Fraction:
        p = self.functions.get(state.loc)
        if p is None:
            return Fraction(-1)
        return p.evaluate(state.vals)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "degree": self.degree,
            "variables": list(self.variables),
            "functions": {loc: {mono_key(m): frac_str(c) for m, c in p.items()}
                          for loc, p in self.functions.items()},
            "init_valuation": None if self.init_valuation is None
            else [frac_str(v) for v in self.init_valuation],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: Union[str, dict]) -> "ConcreteWitness":
        if isinstance(data, str):
            data = json.loads(data)
        n = len(data["variables"])
        funcs = {loc: Polynomial(n, {parse_mono_key(k): Fraction(v) for k, v in coeffs.items()})
                 for loc, coeffs in data["functions"].items()}
        iv = data.get("init_valuation")
        return cls(data["kind"], int(data["degree"]), list(data["variables"]), funcs,
                   None if iv is None else tuple(Fraction(v) for v in iv))


@dataclass
class TabularWitness:
    """A witness given by explicit values on finitely many states (-1 elsewhere)."""

    kind: str
    values: Dict[State, Fraction]
    init_state: Optional[State] = None

    def value(self, state: State) -> Fraction:
        return self.values.get(state, Fraction(-1))


@dataclass
class CheckResult:
    ok: bool
    reason: str = ""
    state: Optional[State] = None

    def __bool__(self):
        return self.ok


def box_states(ps: ProductSystem, lo: int, hi: int) -> Iterable[State]:
    n = ps.ts.nvars
    for loc in ps.locations:
        for vals in iproduct(range(lo, hi + 1), repeat=n):
            yield State(loc, tuple(Fraction(v) for v in vals))


def _ranked(ps: ProductSystem, w, s1: State, s2: State) -> bool:
    f1, f2 = w.value(s1), w.value(s2)
    if ps.is_buchi(s1.loc):
        return f1 < 0 or f2 >= 0
    return f1 < 0 or (0 <= f2 <= f1 - 1)


def check_witness(ps: ProductSystem, w, domain: Optional[Iterable[State]] = None, *,
                  box: Optional[Tuple[int, int]] = None, respect_invariants: bool = True,
                  init_domain: Optional[Iterable[Tuple]] = None) -> CheckResult:
    """Exact validation of a ranking witness on a finite set of states.

    States outside their location invariant are skipped when
    ``respect_invariants`` is set.  Tabular witnesses default to their own
    support as the domain.
    """
    if domain is None:
        if box is not None:
            domain = box_states(ps, *box)
        elif isinstance(w, TabularWitness):
            domain = list(w.values)
        else:
            raise ConfigError("check_witness needs a domain or a box")
    domain = list(domain)
    kind = w.kind
    # initial condition
    if kind == "EBRF":
        if isinstance(w, TabularWitness):
            s0 = w.init_state
        else:
            if w.init_valuation is None:
                return CheckResult(False, "missing initial valuation")
            s0 = State(ps.init, tuple(Fraction(v) for v in w.init_valuation))
        if s0 is None or s0.loc != ps.init or not ps.ts.initial(s0.vals):
            return CheckResult(False, "initial valuation violates the precondition", s0)
        if w.value(s0) < 0:
            return CheckResult(False, "witness is negative on the chosen initial state", s0)
    else:
        inits = init_domain
        if inits is None:
            inits = [s.vals for s in domain if s.loc == ps.init]
        for vals in inits:
            s0 = State(ps.init, tuple(Fraction(v) for v in vals))
            if ps.ts.initial(s0.vals) and w.value(s0) < 0:
                return CheckResult(False, "witness is negative on an initial state", s0)
    for s in domain:
        if respect_invariants and not evaluate(ps.ts.invariant(s.loc), s.vals):
            continue
        if w.value(s) < 0:
            continue
        succs = [s2 for _, s2 in ps.successors(s)]
        if not succs:
            return CheckResult(False, "state without successors", s)
        if kind == "EBRF":
            if not any(_ranked(ps, w, s, s2) for s2 in succs):
                return CheckResult(False, "no Büchi-ranked successor", s)
        else:
            for s2 in succs:
                if not _ranked(ps, w, s, s2):
                    return CheckResult(False, f"successor {s2} is not Büchi-ranked", s)
    return CheckResult(True)
