from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from buchi_rank import corpus
from buchi_rank.automata import from_ltl_text
from buchi_rank.ir import ConfigError, State
from buchi_rank.oracle import (
    OracleError, OracleInapplicable, StateGraph, brute_force_eb, brute_force_ub, build_ebrf_dist,
    build_graph, build_ubrf_d, cycle_decomposition, decide_eb, decide_ub, find_lasso, sccs,
)
from buchi_rank.parser import parse_ts
from buchi_rank.product import build_product


def test_squaring_leaves_a_small_box(figure2):
    with pytest.raises(OracleInapplicable) as exc:
        build_graph(figure2, 0, 3)
    assert not 0 <= exc.value.state.vals[0] <= 3


def test_terminal_only_program():
    ts = parse_ts("pre: x == 0\nskip")
    aut = from_ltl_text("G F at(l_t)", ts.variables, ts.locations)
    assert aut.is_deterministic()
    g = build_graph(build_product(ts, aut), -1, 1)
    assert len(g.init) == 1
    assert decide_eb(g) and decide_ub(g)


def test_trivial_verdicts_on_a_counter():
    ts = corpus.load("countdown")
    for text, eb, ub in (("G F at(l_t)", True, True), ("G F at(l1)", False, False)):
        ps = build_product(ts, from_ltl_text(text, ts.variables, ts.locations))
        g = build_graph(ps, *corpus.DEFAULT_BOUNDS)
        assert (decide_eb(g), decide_ub(g)) == (eb, ub)


def _graph(n, edges, init, buchi):
    succ = [[] for _ in range(n)]
    for a, b in edges:
        if b not in succ[a]:
            succ[a].append(b)
    for v in range(n):
        if not succ[v]:
            succ[v].append(v)
    nodes = [State(f"v{v}", ()) for v in range(n)]
    return StateGraph(nodes, succ, sorted(set(init)), set(buchi), {s: i for i, s in enumerate(nodes)})


graphs = st.integers(1, 7).flatmap(lambda n: st.builds(
    _graph, st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n),
    st.lists(st.integers(0, n - 1), min_size=1, max_size=2),
    st.sets(st.integers(0, n - 1), max_size=n)))


@given(graphs)
@settings(max_examples=300, deadline=None)
def test_scc_decisions_match_brute_force(g):
    assert decide_eb(g) == brute_force_eb(g, max_len=2 * len(g) + 2)
    assert decide_ub(g) == brute_force_ub(g, max_len=2 * len(g) + 2)


@given(graphs)
@settings(max_examples=200, deadline=None)
def test_scc_partition(g):
    comps = sccs(len(g), g.succ)
    flat = sorted(v for c in comps for v in c)
    assert flat == list(range(len(g)))


class _Tab:
    """Minimal product stand-in to run check_witness on an explicit graph."""

    def __init__(self, g):
        self.g = g
        self.init = "v0"
        from buchi_rank.ir import TRUE

        class _T:
            def invariant(self, loc):
                return TRUE

            def initial(self, vals):
                return True
        self.ts = _T()

    def successors(self, s):
        return [(None, self.g.nodes[j]) for j in self.g.succ[self.g.index[s]]]

    def is_buchi(self, loc):
        return self.g.index[State(loc, ())] in self.g.buchi


@given(graphs)
@settings(max_examples=200, deadline=None)
def test_tabular_witnesses_from_graphs(g):
    from buchi_rank.witness import check_witness
    check_ps = _Tab(g)
    if decide_eb(g):
        w = build_ebrf_dist(g)
        stem, cycle = find_lasso(g)
        assert all(w.values[g.nodes[v]] >= 0 for v in stem + cycle)
        check_ps.init = w.init_state.loc
        assert check_witness(check_ps, w, list(g.nodes)).ok
    else:
        assert find_lasso(g) is None
    reach_ub = decide_ub(_graph(len(g), [(a, b) for a in range(len(g)) for b in g.succ[a]],
                                list(range(len(g))), g.buchi))
    if reach_ub:
        w = build_ubrf_d(g)
        assert check_witness(check_ps, w, list(g.nodes)).ok


def test_dist_on_a_stem_and_cycle():
    # 0 -> 1 -> 2 -> 3 -> 1, Büchi at 3
    g = _graph(4, [(0, 1), (1, 2), (2, 3), (3, 1)], [0], {3})
    w = build_ebrf_dist(g, ([0], [1, 2, 3]))
    assert [w.values[g.nodes[v]] for v in range(4)] == [3, 2, 1, 0]


def test_d_on_a_chain():
    k = 5
    g = _graph(k + 1, [(i, i + 1) for i in range(k)] + [(k, k)], [0], {k})
    w = build_ubrf_d(g)
    assert [w.values[g.nodes[v]] for v in range(k + 1)] == list(range(k, -1, -1))


def test_d_fails_on_a_bad_cycle():
    g = _graph(2, [(0, 1), (1, 0)], [0], set())
    with pytest.raises(OracleError):
        build_ubrf_d(g)


def test_dist_rejects_bad_lassos():
    g = _graph(3, [(0, 1), (1, 2), (2, 1)], [0], {2})
    with pytest.raises(ConfigError):
        build_ebrf_dist(g, ([0], [2, 0]))
    with pytest.raises(ConfigError):
        build_ebrf_dist(_graph(2, [(0, 1), (1, 0)], [0], set()), ([], [0, 1]))


def test_cycle_decomposition_rebuilds_the_trajectory():
    traj = ["a", "b", "c", "b", "d", "a", "e"]
    cycles, rest = cycle_decomposition(traj)
    assert [c for _below, c in cycles] == [["b", "c"], ["a", "b", "d"]]
    assert rest == ["a", "e"]
    assert sum(len(c) for _below, c in cycles) + len(rest) == len(traj)
    for _below, cyc in cycles:
        assert len(set(cyc)) == len(cyc)
