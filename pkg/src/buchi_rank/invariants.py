"""Location invariants: user annotations and template co-synthesis."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .ir import FALSE, TRUE, Atom, ConfigError, Lit, Pred, State, TransitionSystem, conj, dnf, evaluate
from .parser import parse_pred
from .poly import Polynomial, monomials_upto
from .product import ProductSystem
from .symbolic import SymAtom, SymPoly
from .witness import ConstraintSet, Entailment, _clean, coeff_name, DEFAULT_EPS

InvariantMap = Dict[str, Pred]


def load_invariants(annotations: Mapping[str, Union[str, Pred]], ts: TransitionSystem) -> InvariantMap:
    """Map every location to its annotated predicate, ``true`` by default."""
    out: InvariantMap = {l: TRUE for l in ts.locations}
    for loc, p in annotations.items():
        if loc not in out:
            raise ConfigError(f"invariant for unknown location {loc}")
        out[loc] = parse_pred(p, ts.variables) if isinstance(p, str) else p
    return out


@dataclass
class InductivenessReport:
    checked: int = 0
    violations: List[Tuple[str, State, State]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_inductive(ts: TransitionSystem, inv: Mapping[str, Pred], samples: int = 1000,
                    lo: int = -8, hi: int = 7, seed: int = 0) -> InductivenessReport:
    """Sample integer states and test initiation and consecution."""
    rng = random.Random(seed)
    rep = InductivenessReport()
    entry_only = not any(t.dst == ts.init for t in ts.transitions)

    def get(l):
        # without incoming edges the entry location only ever holds initial states
        if l == ts.init and entry_only:
            return conj(inv.get(l, TRUE), ts.init_cond)
        return inv.get(l, TRUE)
    tries = 0
    while rep.checked < samples and tries < 50 * samples:
        tries += 1
        vals = tuple(Fraction(rng.randint(lo, hi)) for _ in ts.variables)
        loc = rng.choice(ts.locations)
        s = State(loc, vals)
        if loc == ts.init and ts.initial(vals) and not evaluate(get(loc), vals):
            rep.violations.append(("initiation", s, s))
        if not evaluate(get(loc), vals):
            continue
        rep.checked += 1
        for t in ts.outgoing(loc):
            if t.fires(vals):
                nxt = State(t.dst, t.apply(vals))
                if not evaluate(get(t.dst), nxt.vals):
                    rep.violations.append(("consecution", s, nxt))
    return rep


@dataclass
class InvariantTemplates:
    degree: int
    width: int
    basis: list
    names: Dict[str, List[List[str]]]
    nvars: int

    def atoms(self, loc: str) -> List[SymAtom]:
        return [SymAtom(SymPoly.template(self.nvars, self.basis, ns)) for ns in self.names[loc]]

    def all_unknowns(self) -> List[str]:
        return [n for loc in self.names for ns in self.names[loc] for n in ns]

    def instantiate(self, model: Mapping[str, Fraction]) -> Dict[str, List[Polynomial]]:
        return {loc: [a.poly.instantiate(model) for a in self.atoms(loc)] for loc in self.names}


def cosynthesize_invariants(ps: ProductSystem, degree: int, width: int = 1, prefix: str = "inv",
                            eps: Fraction = DEFAULT_EPS):
    """Template invariants with initiation and consecution entailments.

    Returns ``(templates, constraints, extra_lhs)``; ``extra_lhs`` feeds the
    ranking-constraint generators so both are solved in one system.
    """
    if degree < 1:
        raise ConfigError("invariant degree must be at least 1")
    n = ps.ts.nvars
    basis = monomials_upto(n, degree)
    names = {loc: [[coeff_name(f"{prefix}{k}", loc, m) for m in basis] for k in range(width)]
             for loc in ps.locations}
    it = InvariantTemplates(degree, width, basis, names, n)
    cs = ConstraintSet()
    for conj in dnf(ps.ts.init_cond):
        lhs = _clean([SymAtom.of(a) for a in conj], eps)
        if lhs is None:
            continue
        for a in it.atoms(ps.init):
            cs.entailments.append(Entailment(tuple(lhs), a, "invariant initiation"))
    for t in ps.ts.transitions:
        src = it.atoms(t.src)
        for conj in dnf(t.guard):
            lhs = _clean(src + [SymAtom.of(a) for a in conj], eps)
            if lhs is None:
                continue
            for a in it.atoms(t.dst):
                rhs = SymAtom(a.poly.compose(t.update))
                cs.entailments.append(Entailment(tuple(lhs), rhs, f"invariant {t.src}->{t.dst}"))
    extra = {loc: it.atoms(loc) for loc in ps.locations}
    return it, cs, extra


def inductive_under(ts: TransitionSystem, polys: Mapping[str, Sequence[Polynomial]], **kw) -> InductivenessReport:
    """Sampling check for instantiated co-synthesized invariants."""
    from .ir import Atom, Lit, conj
    inv = {loc: conj(*[Lit(Atom(p, False)) for p in ps]) for loc, ps in polys.items()}
    return check_inductive(ts, inv, **kw)


# ---------------------------------------------------------------------------
# interval analysis
#
# Bounds are Fractions or +-math.inf.  A box is a tuple of (lo, hi) pairs, or
# None for the empty set.

INF = math.inf
Box = Optional[Tuple[Tuple[object, object], ...]]


def _emul(a, b):
    if a == 0 or b == 0:
        return Fraction(0)
    return a * b


def _imul(x, y):
    c = [_emul(a, b) for a in x for b in y]
    return (min(c), max(c))


def _ipow(x, e: int):
    lo, hi = x
    if e == 0:
        return (Fraction(1), Fraction(1))
    if e % 2 == 1 or lo >= 0:
        return (lo ** e, hi ** e)
    if hi <= 0:
        return (hi ** e, lo ** e)
    return (Fraction(0), max(lo ** e, hi ** e))


def interval_eval(p: Polynomial, box) -> Tuple[object, object]:
    lo = hi = Fraction(0)
    for m, c in p.items():
        iv = (Fraction(1), Fraction(1))
        for i, e in enumerate(m):
            if e:
                iv = _imul(iv, _ipow(box[i], e))
        a, b = _emul(c, iv[0]), _emul(c, iv[1])
        lo, hi = lo + min(a, b), hi + max(a, b)
    return lo, hi


def _tighten(box: list, i: int, lo=None, hi=None, integer: bool = False) -> bool:
    cur_lo, cur_hi = box[i]
    if lo is not None and lo != -INF:
        lo = Fraction(math.ceil(lo)) if integer else Fraction(lo)
        if lo > cur_lo:
            cur_lo = lo
    if hi is not None and hi != INF:
        hi = Fraction(math.floor(hi)) if integer else Fraction(hi)
        if hi < cur_hi:
            cur_hi = hi
    changed = (cur_lo, cur_hi) != box[i]
    box[i] = (cur_lo, cur_hi)
    return changed


def _refine_atom(box: list, poly: Polynomial, integer: bool) -> bool:
    """Narrow ``box`` by ``poly >= 0``; returns whether anything changed."""
    changed = False
    for i in sorted(poly.variables()):
        mons = [m for m in poly.monomials() if m[i]]
        if len(mons) != 1 or any(e for j, e in enumerate(mons[0]) if j != i):
            continue
        m = mons[0]
        a, e = poly.coeff(m), m[i]
        rest = poly - Polynomial.from_monomial(m, a)
        rh = interval_eval(rest, box)[1]
        if rh == INF:
            continue
        if e == 1:
            # a*x >= -rest for the largest admissible rest
            if a > 0:
                changed |= _tighten(box, i, lo=-rh / a, integer=integer)
            else:
                changed |= _tighten(box, i, hi=rh / -a, integer=integer)
        elif e == 2 and a < 0:
            r = rh / -a
            if r < 0:
                box[i] = (Fraction(1), Fraction(0))
                return True
            root = math.isqrt(math.floor(r))
            bound = Fraction(root) if integer or root * root == r else Fraction(root + 1)
            changed |= _tighten(box, i, lo=-bound, hi=bound, integer=integer)
    return changed


def refine(box: Box, atoms: Sequence[Atom], integer: bool = True, rounds: int = 4) -> Box:
    """Narrow ``box`` by a conjunction; ``None`` when it becomes empty.

    Strict atoms become ``q - 1 >= 0`` on the integer grid and are relaxed to
    ``q >= 0`` otherwise, so the result always contains every model.
    """
    if box is None:
        return None
    polys = []
    for a in atoms:
        if integer:
            q = a.poly.primitive()[1]
            polys.append(q - 1 if a.strict else q)
        else:
            polys.append(a.poly)
    b = list(box)
    for _ in range(rounds):
        changed = False
        for p in polys:
            if interval_eval(p, b)[1] < 0:
                return None
            changed |= _refine_atom(b, p, integer)
            if any(lo > hi for lo, hi in b):
                return None
        if not changed:
            break
    return tuple(b)


def _join(a: Box, b: Box) -> Box:
    if a is None:
        return b
    if b is None:
        return a
    return tuple((min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(a, b))


def _widen(old: Box, new: Box) -> Box:
    if old is None:
        return new
    return tuple((x[0] if y[0] >= x[0] else -INF, x[1] if y[1] <= x[1] else INF)
                 for x, y in zip(old, new))


def _post(ts: TransitionSystem, boxes: Dict[str, Box], integer: bool) -> Dict[str, Box]:
    top = tuple((-INF, INF) for _ in ts.variables)
    out: Dict[str, Box] = {l: None for l in ts.locations}
    for c in dnf(ts.init_cond):
        out[ts.init] = _join(out[ts.init], refine(top, c, integer))
    for t in ts.transitions:
        b = boxes.get(t.src)
        if b is None:
            continue
        for c in dnf(t.guard):
            g = refine(b, c, integer)
            if g is not None:
                img = tuple(interval_eval(u, g) for u in t.update)
                out[t.dst] = _join(out[t.dst], img)
    return out


def interval_boxes(ts: TransitionSystem, integer: bool = True, widen_after: int = 3,
                   narrow: int = 3, max_rounds: int = 200) -> Dict[str, Box]:
    """Per-location boxes over-approximating the reachable states.

    Kleene iteration with widening after ``widen_after`` growing rounds, then
    ``narrow`` decreasing rounds.
    """
    boxes: Dict[str, Box] = {l: None for l in ts.locations}
    grown = {l: 0 for l in ts.locations}
    for _ in range(max_rounds):
        new = _post(ts, boxes, integer)
        stable = True
        for l in ts.locations:
            j = _join(boxes[l], new[l])
            if j != boxes[l]:
                stable = False
                grown[l] += 1
                boxes[l] = _widen(boxes[l], j) if grown[l] > widen_after else j
        if stable:
            break
    else:
        boxes = {l: tuple((-INF, INF) for _ in ts.variables) for l in ts.locations}
    for _ in range(narrow):
        new = _post(ts, boxes, integer)
        boxes = {l: _meet(boxes[l], new[l]) for l in ts.locations}
    return boxes


def _meet(a: Box, b: Box) -> Box:
    if a is None or b is None:
        return None
    out = tuple((max(x[0], y[0]), min(x[1], y[1])) for x, y in zip(a, b))
    return None if any(lo > hi for lo, hi in out) else out


def box_pred(box: Box, nvars: int) -> Pred:
    if box is None:
        return FALSE
    lits = []
    for i, (lo, hi) in enumerate(box):
        x = Polynomial.var(nvars, i)
        if lo != -INF:
            lits.append(Lit(Atom(x - lo, False)))
        if hi != INF:
            lits.append(Lit(Atom(-x + hi, False)))
    return conj(*lits)


def interval_invariants(ts: TransitionSystem, integer: bool = True, **kw) -> InvariantMap:
    """Interval invariants as predicates; unreachable locations map to ``false``."""
    return {l: box_pred(b, ts.nvars) for l, b in interval_boxes(ts, integer, **kw).items()}
