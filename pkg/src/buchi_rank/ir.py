"""Polynomial transition systems: atoms, predicates, transitions, states."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .poly import Polynomial


class ConfigError(Exception):
    """Raised for malformed inputs or option combinations."""


# ---------------------------------------------------------------------------
# atoms


@dataclass(frozen=True)
class Atom:
    """``poly >= 0`` (closed) or ``poly > 0`` (strict)."""

    poly: Polynomial
    strict: bool = False

    def holds(self, values: Sequence) -> bool:
        v = self.poly.evaluate(values)
        return v > 0 if self.strict else v >= 0

    def negate(self) -> "Atom":
        return Atom(-self.poly, not self.strict)

    def canonical(self) -> "Atom":
        _, q = self.poly.primitive()
        return Atom(q, self.strict)

    def proposition(self) -> Tuple["Atom", bool]:
        """Closed canonical atom ``q >= 0`` plus polarity.

        Every atom is either ``q >= 0`` or its negation for a unique ``q``.
        """
        if self.strict:
            return Atom((-self.poly).primitive()[1], False), False
        return Atom(self.poly.primitive()[1], False), True

    def constant_truth(self) -> Optional[bool]:
        if not self.poly.is_constant():
            return None
        c = self.poly.constant()
        return c > 0 if self.strict else c >= 0

    def substitute(self, update: Sequence[Polynomial]) -> "Atom":
        return Atom(self.poly.compose(update), self.strict)

    def to_str(self, names: Sequence[str]) -> str:
        return f"{self.poly.to_str(names)} {'>' if self.strict else '>='} 0"


# ---------------------------------------------------------------------------
# predicates (the leaves may be any object exposing ``negate``)


class Pred:
    __slots__ = ()


@dataclass(frozen=True)
class TrueP(Pred):
    pass


@dataclass(frozen=True)
class FalseP(Pred):
    pass


@dataclass(frozen=True)
class Lit(Pred):
    atom: object


@dataclass(frozen=True)
class And(Pred):
    args: Tuple[Pred, ...]


@dataclass(frozen=True)
class Or(Pred):
    args: Tuple[Pred, ...]


@dataclass(frozen=True)
class Not(Pred):
    arg: Pred


TRUE = TrueP()
FALSE = FalseP()


def conj(*preds: Pred) -> Pred:
    args: list[Pred] = []
    for p in preds:
        if isinstance(p, TrueP):
            continue
        if isinstance(p, FalseP):
            return FALSE
        if isinstance(p, And):
            args.extend(p.args)
        else:
            args.append(p)
    if not args:
        return TRUE
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(*preds: Pred) -> Pred:
    args: list[Pred] = []
    for p in preds:
        if isinstance(p, FalseP):
            continue
        if isinstance(p, TrueP):
            return TRUE
        if isinstance(p, Or):
            args.extend(p.args)
        else:
            args.append(p)
    if not args:
        return FALSE
    return args[0] if len(args) == 1 else Or(tuple(args))


def negate(p: Pred) -> Pred:
    return nnf(Not(p))


def nnf(p: Pred, positive: bool = True) -> Pred:
    """Push negations into atoms by flipping the relation."""
    if isinstance(p, TrueP):
        return TRUE if positive else FALSE
    if isinstance(p, FalseP):
        return FALSE if positive else TRUE
    if isinstance(p, Lit):
        return p if positive else Lit(p.atom.negate())
    if isinstance(p, Not):
        return nnf(p.arg, not positive)
    if isinstance(p, And):
        parts = [nnf(a, positive) for a in p.args]
        return conj(*parts) if positive else disj(*parts)
    if isinstance(p, Or):
        parts = [nnf(a, positive) for a in p.args]
        return disj(*parts) if positive else conj(*parts)
    raise TypeError(p)


def dnf(p: Pred) -> List[List[object]]:
    """Disjunctive normal form as a list of atom conjunctions.

    ``[]`` is false, ``[[]]`` is true.
    """
    p = nnf(p)
    if isinstance(p, TrueP):
        return [[]]
    if isinstance(p, FalseP):
        return []
    if isinstance(p, Lit):
        return [[p.atom]]
    if isinstance(p, Or):
        out = []
        for a in p.args:
            out.extend(dnf(a))
        return out
    if isinstance(p, And):
        out = [[]]
        for a in p.args:
            part = dnf(a)
            out = [x + y for x in out for y in part]
        return out
    raise TypeError(p)


def cnf(p: Pred) -> List[List[object]]:
    """Conjunctive normal form as a list of atom clauses."""
    neg = dnf(Not(p))
    return [[a.negate() for a in clause] for clause in neg]


def pred_atoms(p: Pred) -> list:
    if isinstance(p, Lit):
        return [p.atom]
    if isinstance(p, Not):
        return pred_atoms(p.arg)
    if isinstance(p, (And, Or)):
        out = []
        for a in p.args:
            out.extend(pred_atoms(a))
        return out
    return []


def map_atoms(p: Pred, fn: Callable[[object], object]) -> Pred:
    if isinstance(p, Lit):
        return Lit(fn(p.atom))
    if isinstance(p, Not):
        return Not(map_atoms(p.arg, fn))
    if isinstance(p, And):
        return And(tuple(map_atoms(a, fn) for a in p.args))
    if isinstance(p, Or):
        return Or(tuple(map_atoms(a, fn) for a in p.args))
    return p


def evaluate(p: Pred, values: Sequence) -> bool:
    if isinstance(p, TrueP):
        return True
    if isinstance(p, FalseP):
        return False
    if isinstance(p, Lit):
        return p.atom.holds(values)
    if isinstance(p, Not):
        return not evaluate(p.arg, values)
    if isinstance(p, And):
        return all(evaluate(a, values) for a in p.args)
    if isinstance(p, Or):
        return any(evaluate(a, values) for a in p.args)
    raise TypeError(p)


def is_tautology(p: Pred, max_props: int = 16) -> bool:
    """Propositional validity, treating each canonical atom as a variable.

    Sound (a propositional tautology is valid over the reals) but not complete.
    """
    p = nnf(p)
    props: dict = {}
    for a in pred_atoms(p):
        if isinstance(a, Atom) and a.constant_truth() is None:
            props.setdefault(a.proposition()[0], len(props))
        elif not isinstance(a, Atom):
            return False
    if len(props) > max_props:
        return False

    def ev(q: Pred, assign) -> bool:
        if isinstance(q, TrueP):
            return True
        if isinstance(q, FalseP):
            return False
        if isinstance(q, Lit):
            t = q.atom.constant_truth()
            if t is not None:
                return t
            key, pos = q.atom.proposition()
            return assign[props[key]] == pos
        if isinstance(q, And):
            return all(ev(a, assign) for a in q.args)
        if isinstance(q, Or):
            return any(ev(a, assign) for a in q.args)
        raise TypeError(q)

    return all(ev(p, bits) for bits in iproduct((False, True), repeat=len(props)))


def atoms_infeasible(atoms: Sequence[Atom]) -> bool:
    """Cheap syntactic unsatisfiability check for a conjunction of concrete atoms.

    Detects false constants and pairs ``p >= 0, q >= 0`` with ``p + l*q`` a
    negative constant for some ``l > 0``.
    """
    nonconst = []
    for a in atoms:
        t = a.constant_truth()
        if t is False:
            return True
        if t is None:
            nonconst.append(a)
    for i in range(len(nonconst)):
        a = nonconst[i]
        pa = a.poly
        lead = next(m for m in reversed(pa.monomials()) if sum(m) > 0)
        for b in nonconst[i + 1:]:
            qb = b.poly.coeff(lead)
            if qb == 0:
                continue
            lam = -pa.coeff(lead) / qb
            if lam <= 0:
                continue
            s = pa + b.poly.scale(lam)
            if s.is_constant():
                k = s.constant()
                if k < 0 or (k == 0 and (a.strict or b.strict)):
                    return True
    return False


def pred_to_str(p: Pred, names: Sequence[str]) -> str:
    if isinstance(p, TrueP):
        return "true"
    if isinstance(p, FalseP):
        return "false"
    if isinstance(p, Lit):
        return p.atom.to_str(names)
    if isinstance(p, Not):
        return f"!({pred_to_str(p.arg, names)})"
    if isinstance(p, And):
        return " && ".join(f"({pred_to_str(a, names)})" for a in p.args)
    if isinstance(p, Or):
        return " || ".join(f"({pred_to_str(a, names)})" for a in p.args)
    raise TypeError(p)


# ---------------------------------------------------------------------------
# transition systems


class State(NamedTuple):
    loc: str
    vals: Tuple[Fraction, ...]


@dataclass
class Transition:
    src: str
    dst: str
    guard: Pred
    update: Tuple[Polynomial, ...]
    letter: Optional[Tuple[Atom, ...]] = None  # set on product transitions

    def fires(self, vals: Sequence) -> bool:
        return evaluate(self.guard, vals)

    def apply(self, vals: Sequence) -> Tuple[Fraction, ...]:
        return tuple(u.evaluate(vals) for u in self.update)


def identity_update(nvars: int) -> Tuple[Polynomial, ...]:
    return tuple(Polynomial.var(nvars, i) for i in range(nvars))


def is_identity(update: Sequence[Polynomial]) -> bool:
    n = len(update)
    return all(u == Polynomial.var(n, i) for i, u in enumerate(update))


@dataclass
class TransitionSystem:
    variables: List[str]
    locations: List[str]
    init: str
    init_cond: Pred
    transitions: List[Transition]
    terminal: Optional[str] = None
    invariants: Dict[str, Pred] = field(default_factory=dict)
    assertions: Dict[str, Pred] = field(default_factory=dict)
    _out: Optional[Dict[str, List[Transition]]] = field(default=None, init=False, repr=False, compare=False)

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def outgoing(self, loc: str) -> List[Transition]:
        if self._out is None or sum(map(len, self._out.values())) != len(self.transitions):
            idx: Dict[str, List[Transition]] = {}
            for t in self.transitions:
                idx.setdefault(t.src, []).append(t)
            self._out = idx
        return list(self._out.get(loc, ()))

    def invariant(self, loc: str) -> Pred:
        return self.invariants.get(loc, TRUE)

    def successors(self, state: State) -> List[Tuple[Transition, State]]:
        out = []
        for t in self.outgoing(state.loc):
            if t.fires(state.vals):
                out.append((t, State(t.dst, t.apply(state.vals))))
        return out

    def initial(self, vals: Sequence) -> bool:
        return evaluate(self.init_cond, vals)

    def validate(self) -> None:
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise ConfigError("duplicate location names")
        if self.init not in locs:
            raise ConfigError(f"unknown initial location {self.init}")
        for t in self.transitions:
            if t.src not in locs or t.dst not in locs:
                raise ConfigError(f"transition {t.src}->{t.dst} uses an unknown location")
            if len(t.update) != self.nvars:
                raise ConfigError("update arity does not match the variable count")
            for u in t.update:
                if u.nvars != self.nvars:
                    raise ConfigError("update polynomial arity mismatch")

    def complete_totality(self) -> "TransitionSystem":
        """Add a fall-through edge to the terminal location where needed.

        A location is left alone when the disjunction of its guards is a
        propositional tautology.  Idempotent.
        """
        ts = TransitionSystem(
            list(self.variables), list(self.locations), self.init, self.init_cond,
            list(self.transitions), self.terminal, dict(self.invariants), dict(self.assertions))
        if ts.terminal is None:
            ts.terminal = "l_t"
            if ts.terminal not in ts.locations:
                ts.locations.append(ts.terminal)
        ident = identity_update(ts.nvars)
        if not any(t.src == ts.terminal and t.dst == ts.terminal for t in ts.transitions):
            ts.transitions.append(Transition(ts.terminal, ts.terminal, TRUE, ident))
        for loc in ts.locations:
            guards = [t.guard for t in ts.transitions if t.src == loc]
            whole = disj(*guards)
            if is_tautology(whole):
                continue
            ts.transitions.append(Transition(loc, ts.terminal, negate(whole), ident))
        return ts

    def is_total_syntactically(self) -> bool:
        return all(is_tautology(disj(*[t.guard for t in self.outgoing(l)])) for l in self.locations)
