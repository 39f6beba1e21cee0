"""Explicit-state ground truth on bounded integer grids.

The graph is the exact successor relation of a product system restricted to
the states reachable from integer initial states inside a box; it is an error
for a successor to leave the box, since truncating it would change the answer.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .ir import ConfigError, State
from .product import ProductSystem
from .witness import TabularWitness


class OracleInapplicable(ConfigError):
    def __init__(self, msg: str, state: Optional[State] = None):
        super().__init__(msg)
        self.state = state


class OracleError(RuntimeError):
    """Internal inconsistency between the decision procedures."""


@dataclass
class StateGraph:
    nodes: List[State]
    succ: List[List[int]]
    init: List[int]
    buchi: Set[int]
    index: Dict[State, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.nodes)

    def to_dot(self) -> str:
        lines = ["digraph states {"]
        for i, s in enumerate(self.nodes):
            vals = ",".join(str(v) for v in s.vals)
            shape = "doublecircle" if i in self.buchi else "circle"
            lines.append(f'  n{i} [label="{s.loc} ({vals})", shape={shape}];')
        for i, ss in enumerate(self.succ):
            for j in ss:
                lines.append(f"  n{i} -> n{j};")
        lines.append("}")
        return "\n".join(lines)


def build_graph(ps: ProductSystem, lo: int, hi: int, max_nodes: int = 200000) -> StateGraph:
    if lo > hi:
        raise ConfigError("empty oracle box")
    nodes: List[State] = []
    index: Dict[State, int] = {}
    succ: List[List[int]] = []

    def add(s: State) -> int:
        k = index.get(s)
        if k is None:
            if len(nodes) >= max_nodes:
                raise OracleInapplicable(f"state graph exceeds {max_nodes} nodes")
            k = len(nodes)
            index[s] = k
            nodes.append(s)
            succ.append([])
            queue.append(k)
        return k

    queue: deque = deque()
    init = []
    for vals in iproduct(range(lo, hi + 1), repeat=ps.ts.nvars):
        v = tuple(Fraction(x) for x in vals)
        if ps.ts.initial(v):
            init.append(add(State(ps.init, v)))
    while queue:
        k = queue.popleft()
        s = nodes[k]
        out = []
        for _t, s2 in ps.successors(s):
            for x in s2.vals:
                if x.denominator != 1:
                    raise OracleInapplicable(f"successor {s2} of {s} leaves the integer grid", s2)
                if not lo <= x <= hi:
                    raise OracleInapplicable(f"successor {s2} of {s} leaves the box [{lo},{hi}]", s2)
            j = add(s2)
            if j not in out:
                out.append(j)
        if not out:
            raise OracleInapplicable(f"state {s} has no successor", s)
        succ[k] = out
    buchi = {k for k, s in enumerate(nodes) if ps.is_buchi(s.loc)}
    return StateGraph(nodes, succ, init, buchi, index)


def sccs(n: int, succ: Sequence[Sequence[int]], alive: Optional[Set[int]] = None) -> List[List[int]]:
    """Tarjan's algorithm, iterative; restricted to ``alive`` nodes when given."""
    ok = (lambda v: True) if alive is None else (lambda v: v in alive)
    idx = [-1] * n
    low = [0] * n
    on = [False] * n
    stack: List[int] = []
    out: List[List[int]] = []
    counter = 0
    for root in range(n):
        if idx[root] != -1 or not ok(root):
            continue
        work = [(root, 0)]
        idx[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on[root] = True
        while work:
            v, i = work[-1]
            nxt = [w for w in succ[v] if ok(w)]
            if i < len(nxt):
                work[-1] = (v, i + 1)
                w = nxt[i]
                if idx[w] == -1:
                    idx[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, 0))
                elif on[w]:
                    low[v] = min(low[v], idx[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == idx[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    out.append(comp)
    return out


def _cyclic(comp: List[int], succ, alive=None) -> bool:
    if len(comp) > 1:
        return True
    v = comp[0]
    return v in succ[v] and (alive is None or v in alive)


def reachable(g: StateGraph) -> Set[int]:
    seen = set(g.init)
    todo = list(g.init)
    while todo:
        for w in g.succ[todo.pop()]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return seen


def decide_eb(g: StateGraph) -> bool:
    """Some run visits the Büchi set infinitely often."""
    alive = reachable(g)
    for comp in sccs(len(g), g.succ, alive):
        if _cyclic(comp, g.succ, alive) and any(v in g.buchi for v in comp):
            return True
    return False


def decide_ub(g: StateGraph) -> bool:
    """Every run visits the Büchi set infinitely often."""
    rest = reachable(g) - g.buchi
    for comp in sccs(len(g), g.succ, rest):
        if _cyclic(comp, g.succ, rest):
            return False
    return True


def _bfs_path(g: StateGraph, sources: Sequence[int], target, allowed=None) -> Optional[List[int]]:
    prev = {s: None for s in sources}
    queue = deque(sources)
    while queue:
        v = queue.popleft()
        if target(v):
            path = [v]
            while prev[path[-1]] is not None:
                path.append(prev[path[-1]])
            return path[::-1]
        for w in g.succ[v]:
            if w not in prev and (allowed is None or w in allowed):
                prev[w] = v
                queue.append(w)
    return None


def cycle_decomposition(traj: Sequence) -> Tuple[List[Tuple[List, List]], List]:
    """Stack-based decomposition of a trajectory.

    Returns ``(cycles, rest)`` where each cycle is paired with the stack below
    it at extraction time, and ``rest`` is the remaining acyclic trajectory.
    """
    stack: List = []
    pos: Dict = {}
    cycles = []
    for s in traj:
        if s in pos:
            i = pos[s]
            cyc = stack[i:]
            for t in stack[i + 1:]:
                del pos[t]
            del stack[i + 1:]
            cycles.append((list(stack[:i]), cyc))
        else:
            pos[s] = len(stack)
            stack.append(s)
    return cycles, stack


def find_lasso(g: StateGraph) -> Optional[Tuple[List[int], List[int]]]:
    """A memoryless Büchi lasso ``(stem, cycle)`` of node ids, or ``None``."""
    for comp in sccs(len(g), g.succ):
        if not (_cyclic(comp, g.succ) and any(v in g.buchi for v in comp)):
            continue
        members = set(comp)
        b = min(v for v in comp if v in g.buchi)
        stem = _bfs_path(g, g.init, lambda v: v == b)
        if stem is None:
            continue
        loop = _bfs_path(g, [w for w in g.succ[b] if w in members], lambda v: v == b, members)
        cycle = [b] + loop[:-1]
        traj = stem[:-1] + cycle + cycle + [b]
        parts, _ = cycle_decomposition(traj)
        for below, cyc in parts:
            if any(v in g.buchi for v in cyc):
                return below, cyc
    return None


def _check_memoryless(stem: Sequence[int], cycle: Sequence[int]) -> None:
    seq = list(stem) + list(cycle)
    if len(set(seq)) != len(seq):
        raise ConfigError("lasso is not memoryless: a state repeats with divergent successors")


def build_ebrf_dist(g: StateGraph, lasso: Optional[Tuple[Sequence[int], Sequence[int]]] = None) -> TabularWitness:
    """Distance to the next Büchi visit along a memoryless lasso, -1 elsewhere."""
    if lasso is None:
        lasso = find_lasso(g)
        if lasso is None:
            raise ConfigError("no Büchi lasso: the existential question is negative")
    stem, cycle = list(lasso[0]), list(lasso[1])
    _check_memoryless(stem, cycle)
    seq = stem + cycle
    for a, b in zip(seq, seq[1:] + [cycle[0]]):
        if b not in g.succ[a]:
            raise ConfigError("lasso uses a non-edge")
    if not any(v in g.buchi for v in cycle):
        raise ConfigError("lasso cycle avoids the Büchi set")
    dist: Dict[int, int] = {}
    k = len(cycle)
    # on the cycle, walk backwards twice to settle the wrap-around
    nxt = None
    for i in range(2 * k - 1, -1, -1):
        v = cycle[i % k]
        if v in g.buchi:
            nxt = 0
        elif nxt is not None:
            nxt += 1
        if nxt is not None and i < k:
            dist[v] = nxt
    d = dist[cycle[0]]
    for v in reversed(stem):
        d = 0 if v in g.buchi else d + 1
        dist[v] = d
    values = {g.nodes[v]: Fraction(x) for v, x in dist.items()}
    start = stem[0] if stem else cycle[0]
    return TabularWitness("EBRF", values, g.nodes[start])


def build_ubrf_d(g: StateGraph) -> TabularWitness:
    """Longest distance to the Büchi set; fails when a cycle avoids it."""
    d: Dict[int, int] = {v: 0 for v in g.buchi}
    state = {}  # 1 = on stack, 2 = done
    for root in range(len(g)):
        if root in d:
            continue
        work = [(root, iter(g.succ[root]))]
        state[root] = 1
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w in d:
                    continue
                if state.get(w) == 1:
                    raise OracleError("fixpoint diverges: a reachable cycle avoids the Büchi set")
                state[w] = 1
                work.append((w, iter(g.succ[w])))
                advanced = True
                break
            if not advanced:
                work.pop()
                d[v] = 1 + max(d[w] for w in g.succ[v])
                state[v] = 2
    return TabularWitness("UBRF", {g.nodes[v]: Fraction(x) for v, x in d.items()})


def brute_force_eb(g: StateGraph, max_len: int = 12) -> bool:
    """Exhaustive lasso search: some path from an initial node closes a cycle through B."""
    for s0 in g.init:
        stack = [[s0]]
        while stack:
            path = stack.pop()
            v = path[-1]
            for w in g.succ[v]:
                if w in path:
                    i = path.index(w)
                    if any(u in g.buchi for u in path[i:]):
                        return True
                elif len(path) < max_len:
                    stack.append(path + [w])
    return False


def brute_force_ub(g: StateGraph, max_len: int = 12) -> bool:
    """Exhaustive search for a simple cycle that avoids B on a reachable path."""
    for s0 in g.init:
        stack = [[s0]]
        while stack:
            path = stack.pop()
            v = path[-1]
            for w in g.succ[v]:
                if w in path:
                    i = path.index(w)
                    if not any(u in g.buchi for u in path[i:]):
                        return False
                elif len(path) < max_len:
                    stack.append(path + [w])
    return True
