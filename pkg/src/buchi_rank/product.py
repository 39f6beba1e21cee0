"""Synchronous product of a transition system with a Büchi automaton."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .automata import AutomatonError, BuchiAutomaton
from .ir import (
    Atom, ConfigError, Lit, State, Transition, TransitionSystem, atoms_infeasible, conj, dnf,
)
from .ltl import AtLoc, Letter, Prop


def product_name(loc: str, q: str) -> str:
    return f"{loc}.{q}"


@dataclass
class ProductSystem:
    ts: TransitionSystem
    buchi: Set[str]
    pair: Dict[str, Tuple[str, str]]
    base: TransitionSystem
    automaton: BuchiAutomaton
    letter_of: Dict[int, Letter] = field(default_factory=dict)

    @property
    def init(self) -> str:
        return self.ts.init

    @property
    def locations(self) -> List[str]:
        return self.ts.locations

    def successors(self, state: State):
        return self.ts.successors(state)

    def outgoing(self, loc: str) -> List[Transition]:
        return self.ts.outgoing(loc)

    def is_buchi(self, loc: str) -> bool:
        return loc in self.buchi

    def to_dot(self) -> str:
        names = self.ts.variables
        from .ir import pred_to_str
        lines = ["digraph product {"]
        for l in self.ts.locations:
            shape = "doublecircle" if l in self.buchi else "ellipse"
            style = ", style=bold" if l == self.ts.init else ""
            lines.append(f'  "{l}" [shape={shape}{style}];')
        for t in self.ts.transitions:
            upd = ", ".join(u.to_str(names) for u in t.update)
            label = f"{pred_to_str(t.guard, names)} / ({upd})".replace('"', "'")
            lines.append(f'  "{t.src}" -> "{t.dst}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines)

    def hopeless(self) -> Set[str]:
        """Locations from which no Büchi location on a cycle is reachable."""
        succ: Dict[str, Set[str]] = {l: set() for l in self.ts.locations}
        for t in self.ts.transitions:
            succ[t.src].add(t.dst)
        good = set()
        for b in self.buchi:
            stack = list(succ[b])
            seen = set(stack)
            while stack:
                m = stack.pop()
                if m == b:
                    good.add(b)
                    break
                for x in succ[m]:
                    if x not in seen:
                        seen.add(x)
                        stack.append(x)
        pred: Dict[str, Set[str]] = {l: set() for l in self.ts.locations}
        for s, ts in succ.items():
            for t in ts:
                pred[t].add(s)
        alive = set(good)
        stack = list(good)
        while stack:
            m = stack.pop()
            for p in pred[m]:
                if p not in alive:
                    alive.add(p)
                    stack.append(p)
        return set(self.ts.locations) - alive


def letter_atoms(letter: Letter, aps) -> Tuple[Atom, ...]:
    """Constraint part of a letter as a conjunction of atoms."""
    out = []
    for ap in aps:
        if isinstance(ap, Prop):
            out.append(ap.atom if ap.atom in letter.props else ap.atom.negate())
    return tuple(out)


def build_product(ts: TransitionSystem, nbw: BuchiAutomaton, prune_infeasible: bool = True) -> ProductSystem:
    """Build ``ts x nbw`` restricted to locations reachable in the location graph.

    Product transitions whose guard is syntactically contradictory are dropped
    when ``prune_infeasible`` is set; they can never fire.
    """
    ts_locs = set(ts.locations)
    for ap in nbw.aps:
        if isinstance(ap, AtLoc) and ap.loc not in ts_locs:
            raise ConfigError(f"proposition at({ap.loc}) names a location not in the program")
        if isinstance(ap, Prop) and ap.atom.poly.nvars != ts.nvars:
            raise ConfigError("constraint proposition arity differs from the program")
    letter_locs = {a.loc for a in nbw.letters}
    if None not in letter_locs and not ts_locs <= letter_locs:
        raise AutomatonError(
            "automaton alphabet does not cover every program location; build it over all locations")
    aut = nbw.with_sink()
    by_loc: Dict[Optional[str], List[Letter]] = {}
    for a in aut.letters:
        by_loc.setdefault(a.loc, []).append(a)

    init = product_name(ts.init, aut.init)
    pair = {init: (ts.init, aut.init)}
    order = [init]
    queue = deque([init])
    trans: List[Transition] = []
    letter_of: Dict[int, Letter] = {}
    while queue:
        name = queue.popleft()
        l, q = pair[name]
        letters = by_loc.get(l, []) + by_loc.get(None, [])
        for t in ts.outgoing(l):
            for a in letters:
                la = letter_atoms(a, aut.aps)
                guard = conj(t.guard, *[Lit(x) for x in la])
                if prune_infeasible and all(atoms_infeasible(c) for c in dnf(guard)):
                    continue
                for r in sorted(aut.succ(q, a)):
                    dst = product_name(t.dst, r)
                    if dst not in pair:
                        pair[dst] = (t.dst, r)
                        order.append(dst)
                        queue.append(dst)
                    pt = Transition(name, dst, guard, t.update, letter=la)
                    letter_of[id(pt)] = a
                    trans.append(pt)
    invariants = {}
    base_inv = dict(ts.invariants)
    if ts.init not in base_inv and not any(t.dst == ts.init for t in ts.transitions):
        # the initial location is only ever occupied by initial states
        base_inv[ts.init] = ts.init_cond
    for name in order:
        inv = base_inv.get(pair[name][0])
        if inv is not None:
            invariants[name] = inv
    pts = TransitionSystem(list(ts.variables), order, init, ts.init_cond, trans, None, invariants)
    buchi = {n for n in order if pair[n][1] in aut.accepting}
    return ProductSystem(pts, buchi, pair, ts, aut, letter_of)
