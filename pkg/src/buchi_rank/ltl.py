"""LTL over location and polynomial-constraint propositions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

from .ir import Atom, ConfigError, State
from .parser import ParseError, _Parser, _collect_vars, to_poly


# ---------------------------------------------------------------------------
# propositions


@dataclass(frozen=True)
class AtLoc:
    loc: str

    def __str__(self):
        return f"at({self.loc})"


@dataclass(frozen=True)
class Prop:
    """A closed canonical constraint ``q >= 0``."""

    atom: Atom

    def __str__(self):
        n = self.atom.poly.nvars
        return self.atom.to_str([f"x{i}" for i in range(n)])


AP = Union[AtLoc, Prop]


@dataclass(frozen=True)
class Letter:
    """One explicit letter: which location holds and which constraints are true."""

    loc: Optional[str]
    props: FrozenSet[Atom]

    def holds(self, ap: AP) -> bool:
        if isinstance(ap, AtLoc):
            return self.loc == ap.loc
        return ap.atom in self.props


# ---------------------------------------------------------------------------
# formulas


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class LTrue(Formula):
    pass


@dataclass(frozen=True)
class LFalse(Formula):
    pass


@dataclass(frozen=True)
class LAP(Formula):
    ap: object


@dataclass(frozen=True)
class LNot(Formula):
    arg: Formula


@dataclass(frozen=True)
class LAnd(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class LOr(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class LX(Formula):
    arg: Formula


@dataclass(frozen=True)
class LF(Formula):
    arg: Formula


@dataclass(frozen=True)
class LG(Formula):
    arg: Formula


@dataclass(frozen=True)
class LU(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class LR(Formula):
    left: Formula
    right: Formula


def constraint_literal(atom: Atom) -> Formula:
    """The literal for an arbitrary atom over canonical propositions."""
    t = atom.constant_truth()
    if t is not None:
        return LTrue() if t else LFalse()
    key, pos = atom.proposition()
    lit = LAP(Prop(key))
    return lit if pos else LNot(lit)


def to_nnf(f: Formula, positive: bool = True) -> Formula:
    if isinstance(f, LTrue):
        return LTrue() if positive else LFalse()
    if isinstance(f, LFalse):
        return LFalse() if positive else LTrue()
    if isinstance(f, LAP):
        return f if positive else LNot(f)
    if isinstance(f, LNot):
        return to_nnf(f.arg, not positive)
    if isinstance(f, LAnd):
        a, b = to_nnf(f.left, positive), to_nnf(f.right, positive)
        return LAnd(a, b) if positive else LOr(a, b)
    if isinstance(f, LOr):
        a, b = to_nnf(f.left, positive), to_nnf(f.right, positive)
        return LOr(a, b) if positive else LAnd(a, b)
    if isinstance(f, LX):
        return LX(to_nnf(f.arg, positive))
    if isinstance(f, LF):
        return LF(to_nnf(f.arg, True)) if positive else LG(to_nnf(f.arg, False))
    if isinstance(f, LG):
        return LG(to_nnf(f.arg, True)) if positive else LF(to_nnf(f.arg, False))
    if isinstance(f, LU):
        a, b = to_nnf(f.left, positive), to_nnf(f.right, positive)
        return LU(a, b) if positive else LR(a, b)
    if isinstance(f, LR):
        a, b = to_nnf(f.left, positive), to_nnf(f.right, positive)
        return LR(a, b) if positive else LU(a, b)
    raise TypeError(f)


def negate_nnf(f: Formula) -> Formula:
    return to_nnf(f, False)


def is_nnf(f: Formula) -> bool:
    if isinstance(f, LNot):
        return isinstance(f.arg, LAP)
    if isinstance(f, (LTrue, LFalse, LAP)):
        return True
    if isinstance(f, (LX, LF, LG)):
        return is_nnf(f.arg)
    return is_nnf(f.left) and is_nnf(f.right)


def subformulas(f: Formula) -> List[Formula]:
    out: List[Formula] = []
    seen = set()

    def go(g):
        if g in seen:
            return
        seen.add(g)
        for c in _children(g):
            go(c)
        out.append(g)

    go(f)
    return out


def _children(f: Formula) -> Tuple[Formula, ...]:
    if isinstance(f, (LNot, LX, LF, LG)):
        return (f.arg,)
    if isinstance(f, (LAnd, LOr, LU, LR)):
        return (f.left, f.right)
    return ()


def aps_of(f: Formula) -> List[AP]:
    seen: Dict = {}
    for g in subformulas(f):
        if isinstance(g, LAP):
            seen.setdefault(g.ap, None)
    return list(seen)


def depth(f: Formula) -> int:
    kids = _children(f)
    return 0 if not kids else 1 + max(depth(k) for k in kids)


def formula_str(f: Formula, names: Optional[Sequence[str]] = None) -> str:
    def ap_str(ap):
        if isinstance(ap, AtLoc):
            return str(ap)
        nv = ap.atom.poly.nvars
        ns = names if names is not None else [f"x{i}" for i in range(nv)]
        return f"{ap.atom.poly.to_str(ns)} >= 0"

    def go(g):
        if isinstance(g, LTrue):
            return "true"
        if isinstance(g, LFalse):
            return "false"
        if isinstance(g, LAP):
            return ap_str(g.ap) if isinstance(g.ap, AtLoc) else f"({ap_str(g.ap)})"
        if isinstance(g, LNot):
            return f"!{go(g.arg)}"
        if isinstance(g, LX):
            return f"X {go(g.arg)}"
        if isinstance(g, LF):
            return f"F {go(g.arg)}"
        if isinstance(g, LG):
            return f"G {go(g.arg)}"
        op = {LAnd: "&&", LOr: "||", LU: "U", LR: "R"}[type(g)]
        return f"({go(g.left)} {op} {go(g.right)})"

    return go(f)


# ---------------------------------------------------------------------------
# parsing


class _LTLParser(_Parser):
    def __init__(self, src: str, names: Sequence[str]):
        super().__init__(src)
        self.names = list(names)
        self.toks = [t for t in self.toks if t.kind != "sep"]

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.at("op", "->"):
            self.next()
            right = self.formula()
            return LOr(LNot(left), right)
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.at("op", "||"):
            self.next()
            f = LOr(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.until()
        while self.at("op", "&&"):
            self.next()
            f = LAnd(f, self.until())
        return f

    def until(self) -> Formula:
        f = self.unary_f()
        if self.at("ident", "U"):
            self.next()
            return LU(f, self.until())
        return f

    def unary_f(self) -> Formula:
        if self.at("op", "!"):
            self.next()
            return LNot(self.unary_f())
        for op, cls in (("X", LX), ("F", LF), ("G", LG)):
            if self.at("ident", op):
                self.next()
                return cls(self.unary_f())
        return self.atomic()

    def atomic(self) -> Formula:
        if self.at("kw", "true"):
            self.next()
            return LTrue()
        if self.at("kw", "false"):
            self.next()
            return LFalse()
        if self.at("ident", "at") and self.at("op", "(", 1):
            self.next()
            self.next()
            name = self.expect("ident").text
            self.expect("op", ")")
            return LAP(AtLoc(name))
        if self.at("op", "("):
            save = self.i
            try:
                return self.constraint()
            except ParseError:
                self.i = save
            self.next()
            f = self.formula()
            self.expect("op", ")")
            return f
        return self.constraint()

    def constraint(self) -> Formula:
        cmp = self.comparison()
        _, op, l, r = cmp
        for e in (l, r):
            seen: dict = {}
            _collect_vars(e, seen)
            acc = set(seen)
            bad = acc - set(self.names) - {"U", "X", "F", "G"}
            if bad:
                raise ParseError(f"unknown variables {sorted(bad)} in formula")
            if acc & {"U", "X", "F", "G"}:
                raise ParseError("temporal operator inside a constraint")
        a, b = to_poly(l, self.names), to_poly(r, self.names)
        if op == ">=":
            return constraint_literal(Atom(a - b))
        if op == ">":
            return constraint_literal(Atom(a - b, True))
        if op == "<=":
            return constraint_literal(Atom(b - a))
        if op == "<":
            return constraint_literal(Atom(b - a, True))
        return LAnd(constraint_literal(Atom(a - b)), constraint_literal(Atom(b - a)))


def parse_ltl(text: str, names: Sequence[str] = ()) -> Formula:
    p = _LTLParser(text, names)
    f = p.formula()
    p.expect("eof")
    return f


# ---------------------------------------------------------------------------
# semantics on lassos


def _holds(ap: AP, elem) -> bool:
    if isinstance(elem, Letter):
        return elem.holds(ap)
    if isinstance(elem, State):
        if isinstance(ap, AtLoc):
            return elem.loc == ap.loc
        return ap.atom.holds(elem.vals)
    raise TypeError(f"cannot evaluate propositions on {type(elem).__name__}")


def eval_trace(f: Formula, stem: Sequence, cycle: Sequence, position: int = 0) -> bool:
    """Truth of ``f`` on the lasso ``stem . cycle^omega`` (states or letters)."""
    if not cycle:
        raise ConfigError("lasso cycle must be non-empty")
    word = list(stem) + list(cycle)
    n = len(word)
    loop = len(stem)
    succ = [i + 1 if i + 1 < n else loop for i in range(n)]
    memo: Dict[Formula, List[bool]] = {}

    def sat(g: Formula) -> List[bool]:
        if g in memo:
            return memo[g]
        if isinstance(g, LTrue):
            r = [True] * n
        elif isinstance(g, LFalse):
            r = [False] * n
        elif isinstance(g, LAP):
            r = [_holds(g.ap, w) for w in word]
        elif isinstance(g, LNot):
            r = [not v for v in sat(g.arg)]
        elif isinstance(g, LAnd):
            a, b = sat(g.left), sat(g.right)
            r = [x and y for x, y in zip(a, b)]
        elif isinstance(g, LOr):
            a, b = sat(g.left), sat(g.right)
            r = [x or y for x, y in zip(a, b)]
        elif isinstance(g, LX):
            a = sat(g.arg)
            r = [a[succ[i]] for i in range(n)]
        elif isinstance(g, (LU, LF)):
            a = [True] * n if isinstance(g, LF) else sat(g.left)
            b = sat(g.arg if isinstance(g, LF) else g.right)
            r = [False] * n
            changed = True
            while changed:
                changed = False
                for i in reversed(range(n)):
                    v = b[i] or (a[i] and r[succ[i]])
                    if v != r[i]:
                        r[i] = v
                        changed = True
        elif isinstance(g, (LR, LG)):
            a = [False] * n if isinstance(g, LG) else sat(g.left)
            b = sat(g.arg if isinstance(g, LG) else g.right)
            r = [True] * n
            changed = True
            while changed:
                changed = False
                for i in reversed(range(n)):
                    v = b[i] and (a[i] or r[succ[i]])
                    if v != r[i]:
                        r[i] = v
                        changed = True
        else:
            raise TypeError(g)
        memo[g] = r
        return r

    return sat(f)[position]
