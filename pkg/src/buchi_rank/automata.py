"""Nondeterministic Büchi automata over explicit letters.

Translation is an on-the-fly tableau: a state is a set of NNF obligations,
each letter expands it into covers (next obligations, postponed eventualities),
dominated covers are dropped, and the resulting generalized automaton is
degeneralized with a level counter.  A bisimulation quotient and dead-state
removal keep the automata small.
"""
from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .ir import Atom, ConfigError
from .ltl import (
    AP, AtLoc, Formula, LAP, LAnd, LF, LFalse, LG, LNot, LOr, LR, LTrue, LU, LX,
    Letter, Prop, aps_of, parse_ltl, subformulas, to_nnf,
)

MAX_CONSTRAINT_APS = 12


class AutomatonError(ConfigError):
    pass


def alphabet(aps: Sequence[AP]) -> List[Letter]:
    """All letters over ``aps``: exactly one ``at`` proposition per letter."""
    locs = [ap.loc for ap in aps if isinstance(ap, AtLoc)]
    props = [ap.atom for ap in aps if isinstance(ap, Prop)]
    if len(set(locs)) != len(locs) or len(set(props)) != len(props):
        raise AutomatonError("duplicate propositions")
    if len(props) > MAX_CONSTRAINT_APS:
        raise AutomatonError(
            f"{len(props)} constraint propositions exceed the explosion bound of {MAX_CONSTRAINT_APS}")
    loc_choices: List[Optional[str]] = locs if locs else [None]
    letters = []
    for loc in loc_choices:
        for bits in iproduct((False, True), repeat=len(props)):
            letters.append(Letter(loc, frozenset(p for p, b in zip(props, bits) if b)))
    return letters


@dataclass
class BuchiAutomaton:
    states: List[str]
    init: str
    accepting: Set[str]
    letters: List[Letter]
    delta: Dict[Tuple[str, Letter], FrozenSet[str]]
    aps: List[AP] = field(default_factory=list)

    def succ(self, q: str, a: Letter) -> FrozenSet[str]:
        return self.delta.get((q, a), frozenset())

    def is_deterministic(self) -> bool:
        return all(len(v) <= 1 for v in self.delta.values())

    def is_complete(self) -> bool:
        return all(self.succ(q, a) for q in self.states for a in self.letters)

    def num_transitions(self) -> int:
        return sum(len(v) for v in self.delta.values())

    def accepts_lasso(self, stem: Sequence[Letter], cycle: Sequence[Letter]) -> bool:
        word = list(stem) + list(cycle)
        n = len(word)
        if not cycle:
            raise ConfigError("lasso cycle must be non-empty")
        loop = len(stem)
        nxt = lambda i: i + 1 if i + 1 < n else loop  # noqa: E731

        def edges(node):
            q, i = node
            return [(r, nxt(i)) for r in self.succ(q, word[i])]

        start = (self.init, 0)
        seen = {start}
        todo = [start]
        while todo:
            for m in edges(todo.pop()):
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        for node in seen:
            if node[0] not in self.accepting:
                continue
            stack = list(edges(node))
            visited = set(stack)
            while stack:
                m = stack.pop()
                if m == node:
                    return True
                for k in edges(m):
                    if k not in visited:
                        visited.add(k)
                        stack.append(k)
        return False

    def with_sink(self, name: str = "sink") -> "BuchiAutomaton":
        """Complete the automaton with a non-accepting sink."""
        if self.is_complete():
            return self
        while name in self.states:
            name += "_"
        delta = dict(self.delta)
        for q in self.states:
            for a in self.letters:
                if not delta.get((q, a)):
                    delta[(q, a)] = frozenset([name])
        for a in self.letters:
            delta[(name, a)] = frozenset([name])
        return BuchiAutomaton(self.states + [name], self.init, set(self.accepting),
                              list(self.letters), delta, list(self.aps))

    def to_dot(self) -> str:
        lines = ["digraph nbw {", "  rankdir=LR;"]
        for q in self.states:
            shape = "doublecircle" if q in self.accepting else "circle"
            lines.append(f'  "{q}" [shape={shape}];')
        grouped: Dict[Tuple[str, str], List[Letter]] = {}
        for (q, a), rs in self.delta.items():
            for r in rs:
                grouped.setdefault((q, r), []).append(a)
        for (q, r), ls in sorted(grouped.items()):
            lines.append(f'  "{q}" -> "{r}" [label="{len(ls)} letters"];')
        lines.append("}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# translation


def _covers(obligations: FrozenSet[Formula], letter: Letter):
    results: Set[Tuple[FrozenSet[Formula], FrozenSet[Formula]]] = set()

    def go(todo: List[Formula], done: FrozenSet[Formula], nxt: FrozenSet, pend: FrozenSet):
        while todo:
            f = todo[-1]
            todo = todo[:-1]
            if f in done:
                continue
            done = done | {f}
            if isinstance(f, LTrue):
                continue
            if isinstance(f, LFalse):
                return
            if isinstance(f, LAP):
                if not letter.holds(f.ap):
                    return
                continue
            if isinstance(f, LNot):
                if letter.holds(f.arg.ap):
                    return
                continue
            if isinstance(f, LAnd):
                todo = todo + [f.right, f.left]
                continue
            if isinstance(f, LX):
                nxt = nxt | {f.arg}
                continue
            if isinstance(f, LG):
                todo = todo + [f.arg]
                nxt = nxt | {f}
                continue
            if isinstance(f, LOr):
                go(todo + [f.left], done, nxt, pend)
                go(todo + [f.right], done, nxt, pend)
                return
            if isinstance(f, LF):
                go(todo + [f.arg], done, nxt, pend)
                go(todo, done, nxt | {f}, pend | {f})
                return
            if isinstance(f, LU):
                go(todo + [f.right], done, nxt, pend)
                go(todo + [f.left], done, nxt | {f}, pend | {f})
                return
            if isinstance(f, LR):
                go(todo + [f.left, f.right], done, nxt, pend)
                go(todo + [f.right], done, nxt | {f}, pend)
                return
            raise TypeError(f)
        results.add((nxt, pend))

    go(sorted(obligations, key=repr), frozenset(), frozenset(), frozenset())
    # drop dominated covers: fewer obligations and fewer postponements win
    keep = []
    for c in results:
        if not any(d != c and d[0] <= c[0] and d[1] <= c[1] for d in results):
            keep.append(c)
    return sorted(keep, key=lambda c: (sorted(map(repr, c[0])), sorted(map(repr, c[1]))))


def ltl_to_nbw(phi: Formula, aps: Optional[Sequence[AP]] = None, *, quotient: bool = True) -> BuchiAutomaton:
    """Translate ``phi`` into a Büchi automaton over the letters of ``aps``."""
    phi = to_nnf(phi)
    used = aps_of(phi)
    if aps is None:
        aps = used
    missing = [a for a in used if a not in set(aps)]
    if missing:
        raise AutomatonError(f"formula uses propositions outside the AP set: {missing}")
    letters = alphabet(aps)
    untils = [g for g in subformulas(phi) if isinstance(g, (LU, LF))]
    k = len(untils)

    start = (frozenset([phi]), 0)
    index: Dict = {start: 0}
    order = [start]
    accepting: Set[int] = set()
    delta: Dict[Tuple[int, Letter], Set[int]] = {}
    queue = deque([start])
    cover_cache: Dict = {}
    while queue:
        node = queue.popleft()
        obligations, lvl = node
        src = index[node]
        if k == 0 or lvl == k:
            accepting.add(src)
        for a in letters:
            key = (obligations, a)
            if key not in cover_cache:
                cover_cache[key] = _covers(obligations, a)
            for nxt, pend in cover_cache[key]:
                j = 0 if lvl == k else lvl
                while j < k and untils[j] not in pend:
                    j += 1
                tgt = (nxt, j if k else 0)
                if tgt not in index:
                    index[tgt] = len(order)
                    order.append(tgt)
                    queue.append(tgt)
                delta.setdefault((src, a), set()).add(index[tgt])
    n = len(order)
    aut = _finish(n, 0, accepting, letters, delta, list(aps))
    if quotient:
        aut = quotient_bisim(aut)
    return aut


def _finish(n: int, init: int, accepting: Set[int], letters, delta, aps) -> BuchiAutomaton:
    live = _live_states(n, init, accepting, letters, delta)
    if init not in live:
        return BuchiAutomaton(["q0"], "q0", set(), letters, {}, aps)
    # renumber in BFS order from the initial state
    names: Dict[int, str] = {init: "q0"}
    queue = deque([init])
    while queue:
        s = queue.popleft()
        for a in letters:
            for t in sorted(delta.get((s, a), ())):
                if t in live and t not in names:
                    names[t] = f"q{len(names)}"
                    queue.append(t)
    new_delta: Dict[Tuple[str, Letter], FrozenSet[str]] = {}
    for (s, a), ts in delta.items():
        if s in names:
            tgt = frozenset(names[t] for t in ts if t in names)
            if tgt:
                new_delta[(names[s], a)] = tgt
    states = sorted(names.values(), key=lambda q: int(q[1:]))
    return BuchiAutomaton(states, "q0", {names[s] for s in accepting if s in names}, letters,
                          new_delta, aps)


def _live_states(n, init, accepting, letters, delta) -> Set[int]:
    """States from which an accepting cycle is reachable."""
    succ: Dict[int, Set[int]] = {s: set() for s in range(n)}
    for (s, _a), ts in delta.items():
        succ[s] |= set(ts)
    on_cycle = set()
    for f in accepting:
        stack = list(succ[f])
        seen = set(stack)
        while stack:
            m = stack.pop()
            if m == f:
                on_cycle.add(f)
                break
            for x in succ[m]:
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
    pred: Dict[int, Set[int]] = {s: set() for s in range(n)}
    for s, ts in succ.items():
        for t in ts:
            pred[t].add(s)
    live = set(on_cycle)
    stack = list(on_cycle)
    while stack:
        m = stack.pop()
        for p in pred[m]:
            if p not in live:
                live.add(p)
                stack.append(p)
    return live


def quotient_bisim(aut: BuchiAutomaton) -> BuchiAutomaton:
    """Merge bisimilar states (same acceptance and same successor blocks)."""
    block = {q: (q in aut.accepting) for q in aut.states}
    while True:
        sig = {}
        for q in aut.states:
            sig[q] = (block[q],) + tuple(
                frozenset(block[r] for r in aut.succ(q, a)) for a in aut.letters)
        ids: Dict = {}
        new_block = {q: ids.setdefault(sig[q], len(ids)) for q in aut.states}
        if len(set(new_block.values())) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    nb = len(set(block.values()))
    rep = {}
    for q in aut.states:
        rep.setdefault(block[q], q)
    delta: Dict[Tuple[int, Letter], Set[int]] = {}
    for b, q in rep.items():
        for a in aut.letters:
            ts = {block[r] for r in aut.succ(q, a)}
            if ts:
                delta[(b, a)] = ts
    acc = {block[q] for q in aut.accepting}
    return _finish(nb, block[aut.init], acc, aut.letters, delta, aut.aps)


def from_ltl_text(text: str, variables: Sequence[str] = (), locations: Sequence[str] = ()) -> BuchiAutomaton:
    phi = parse_ltl(text, variables)
    aps = [AtLoc(l) for l in locations] + [a for a in aps_of(phi) if isinstance(a, Prop)]
    return ltl_to_nbw(phi, aps)


# ---------------------------------------------------------------------------
# HOA v1 (state-based Büchi only)


class HoaError(AutomatonError):
    pass


def _hoa_label(text: str):
    toks = re.findall(r"\d+|[!&|()tf]", text.replace(" ", ""))
    pos = [0]

    def peek():
        return toks[pos[0]] if pos[0] < len(toks) else None

    def eat():
        pos[0] += 1
        return toks[pos[0] - 1]

    def disj():
        e = conj()
        while peek() == "|":
            eat()
            r = conj()
            e = ("or", e, r)
        return e

    def conj():
        e = neg()
        while peek() == "&":
            eat()
            r = neg()
            e = ("and", e, r)
        return e

    def neg():
        t = eat()
        if t == "!":
            return ("not", neg())
        if t == "(":
            e = disj()
            if eat() != ")":
                raise HoaError("unbalanced parentheses in HOA label")
            return e
        if t == "t":
            return ("t",)
        if t == "f":
            return ("f",)
        if t is not None and t.isdigit():
            return ("ap", int(t))
        raise HoaError(f"bad HOA label {text!r}")

    e = disj()
    if peek() is not None:
        raise HoaError(f"trailing tokens in HOA label {text!r}")
    return e


def _eval_label(e, truth) -> bool:
    tag = e[0]
    if tag == "t":
        return True
    if tag == "f":
        return False
    if tag == "ap":
        return truth[e[1]]
    if tag == "not":
        return not _eval_label(e[1], truth)
    if tag == "and":
        return _eval_label(e[1], truth) and _eval_label(e[2], truth)
    return _eval_label(e[1], truth) or _eval_label(e[2], truth)


def read_hoa(text: str, variables: Sequence[str] = (), locations: Sequence[str] = ()) -> BuchiAutomaton:
    """Read a HOA v1 automaton with state-based Büchi acceptance.

    AP strings are parsed as LTL atoms (``at(l)`` or constraints over
    ``variables``).  ``locations`` extends the alphabet with every program
    location, as the product requires.
    """
    header, sep, body = text.partition("--BODY--")
    if not sep:
        raise HoaError("missing --BODY--")
    if not header.lstrip().startswith("HOA: v1"):
        raise HoaError("not a HOA v1 file")
    hdr = _hoa_header(header)
    if "--END--" not in body:
        raise HoaError("missing --END--")
    body = body.split("--END--")[0]
    acc = hdr.get("Acceptance", "")
    if not re.fullmatch(r"1\s+Inf\(\s*0\s*\)", acc.strip()):
        raise HoaError(f"only Büchi acceptance 'Inf(0)' is supported, got {acc!r}")
    starts = hdr.get("Start", [])
    if len(starts) != 1 or "&" in starts[0]:
        raise HoaError("exactly one initial state is required")
    n = int(hdr["States"]) if "States" in hdr else None
    ap_names = re.findall(r'"((?:[^"\\]|\\.)*)"', hdr.get("AP", ""))
    ap_count = int(hdr.get("AP", "0").split()[0]) if hdr.get("AP") else 0
    if ap_count != len(ap_names):
        raise HoaError("AP count does not match the listed names")
    hoa_aps: List[Tuple[AP, bool]] = []
    for s in ap_names:
        f = parse_ltl(s, variables)
        if isinstance(f, LAP):
            hoa_aps.append((f.ap, True))
        elif isinstance(f, LNot) and isinstance(f.arg, LAP):
            hoa_aps.append((f.arg.ap, False))
        else:
            raise HoaError(f"HOA AP {s!r} is not a single proposition")
    aps: List[AP] = [AtLoc(l) for l in locations]
    for ap, _ in hoa_aps:
        if ap not in aps:
            aps.append(ap)
    letters = alphabet(aps)

    accepting: Set[int] = set()
    edges: List[Tuple[int, object, int]] = []
    cur: Optional[int] = None
    for raw in body.splitlines():
        line = raw.strip()
        if not line:
            continue
        m = re.match(r"State:\s*(\[[^\]]*\])?\s*(\d+)\s*(\"[^\"]*\")?\s*(\{[^}]*\})?\s*$", line)
        if m:
            if m.group(1):
                raise HoaError("state labels are not supported")
            cur = int(m.group(2))
            if m.group(4):
                sets = m.group(4).strip("{}").split()
                if sets and sets != ["0"]:
                    raise HoaError("unknown acceptance set on state")
                if sets:
                    accepting.add(cur)
            continue
        m = re.match(r"\[([^\]]*)\]\s*(\d+)\s*(\{[^}]*\})?\s*$", line)
        if m and cur is not None:
            if m.group(3):
                raise HoaError("transition-based acceptance is not supported")
            edges.append((cur, _hoa_label(m.group(1)), int(m.group(2))))
            continue
        raise HoaError(f"unsupported HOA body line {line!r}")
    if n is None:
        n = 1 + max([e[0] for e in edges] + [e[2] for e in edges] + [int(starts[0])])
    delta: Dict[Tuple[int, Letter], Set[int]] = {}
    for a in letters:
        truth = [a.holds(ap) == pos for ap, pos in hoa_aps]
        for s, lab, t in edges:
            if _eval_label(lab, truth):
                delta.setdefault((s, a), set()).add(t)
    names = {i: f"q{i}" for i in range(n)}
    return BuchiAutomaton([names[i] for i in range(n)], names[int(starts[0])],
                          {names[i] for i in accepting}, letters,
                          {(names[s], a): frozenset(names[t] for t in ts) for (s, a), ts in delta.items()},
                          aps)


def _hoa_header(header: str) -> Dict:
    out: Dict = {}
    for line in header.splitlines():
        m = re.match(r"\s*([A-Za-z][\w-]*):\s*(.*)$", line)
        if not m:
            continue
        key, val = m.group(1), m.group(2).strip()
        if key == "Start":
            out.setdefault("Start", []).append(val)
        else:
            out[key] = val
    return out


def write_hoa(aut: BuchiAutomaton, ap_names: Sequence[str]) -> str:
    """Serialize an automaton over letters whose APs are given by name."""
    idx = {q: i for i, q in enumerate(aut.states)}
    lines = ["HOA: v1", f"States: {len(aut.states)}", f"Start: {idx[aut.init]}",
             f"AP: {len(ap_names)} " + " ".join(f'"{n}"' for n in ap_names),
             "acc-name: Buchi", "Acceptance: 1 Inf(0)", "--BODY--"]
    for q in aut.states:
        lines.append(f"State: {idx[q]}" + (" {0}" if q in aut.accepting else ""))
        for a in aut.letters:
            bits = []
            for i, ap in enumerate(aut.aps):
                bits.append(str(i) if a.holds(ap) else f"!{i}")
            for r in sorted(aut.succ(q, a)):
                lines.append(f"[{' & '.join(bits) or 't'}] {idx[r]}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"
