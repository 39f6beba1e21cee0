"""End-to-end verification and refutation routes."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .automata import AutomatonError, BuchiAutomaton, ltl_to_nbw, read_hoa
from .invariants import check_inductive, cosynthesize_invariants, inductive_under, interval_invariants
from .ir import Atom, ConfigError, Lit, TransitionSystem, TrueP, conj
from .ltl import AtLoc, Formula, LNot, Prop, aps_of, formula_str, parse_ltl
from .oracle import OracleInapplicable, StateGraph, build_graph, decide_eb, decide_ub
from .positivstellensatz import EncodingDegreeError, SosConfig, encode
from .product import ProductSystem, build_product
from .solver import emit_smtlib, rationalize, reconstruct_witness, run_portfolio, DEFAULT_TIMEOUT
from .symbolic import QExpr
from .witness import (
    DEFAULT_EPS, CheckResult, ConcreteWitness, ConstraintSet, EncodingBlowup, GroundAtom,
    box_states, build_templates, check_witness, gen_ebrf_constraints, gen_ubrf_constraints,
    init_valuation_constraint, pin_constraints,
)

MODES = ("verify", "refute", "exists")


@dataclass
class RunConfig:
    mode: str = "verify"
    degree: Optional[int] = None  # a fixed template degree; None climbs 1..degree_max
    degree_max: int = 2
    sos: Tuple[str, ...] = ("diagonal", "squares")
    multiplier_degree: Optional[int] = None
    squares: int = 2
    solvers: Optional[List[str]] = None
    timeout: float = DEFAULT_TIMEOUT
    oracle_bounds: Optional[Tuple[int, int]] = None
    check_bounds: Tuple[int, int] = (-8, 7)
    out_dir: Optional[str] = None
    eps: Optional[Fraction] = None  # None: 1 on the integer grid, DEFAULT_EPS otherwise
    integer: bool = True
    invariant_degree: int = 0
    bound_radius: Optional[Fraction] = None
    strict_invariants: bool = False
    intervals: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if self.degree is not None and self.degree < 0:
            raise ConfigError("degree must be non-negative")
        if self.degree_max < 0:
            raise ConfigError("degree-max must be non-negative")
        for m in self.sos:
            SosConfig(m)

    @property
    def epsilon(self) -> Fraction:
        if self.eps is not None:
            return Fraction(self.eps)
        # on integers a primitive p > 0 is exactly p >= 1
        return Fraction(1) if self.integer else DEFAULT_EPS

    def degrees(self) -> List[int]:
        if self.degree is not None:
            return [self.degree]
        return list(range(1, self.degree_max + 1)) or [0]


@dataclass
class Attempt:
    kind: str
    degree: int
    sos: str
    invariant_degree: int
    status: str
    seconds: float
    detail: str = ""

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class Synthesis:
    witness: Optional[ConcreteWitness]
    check: Optional[CheckResult]
    attempts: List[Attempt]
    invariants: Optional[Dict[str, list]] = None


@dataclass
class Report:
    verdict: str  # Proved | Refuted | Unknown
    route: str
    formula: str
    witness: Optional[ConcreteWitness] = None
    check: Optional[CheckResult] = None
    oracle: Optional[dict] = None
    timings: Dict[str, float] = field(default_factory=dict)
    attempts: List[Attempt] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    invariants: Optional[Dict[str, list]] = None
    annotations_inductive: Optional[bool] = None
    # (attempt, ConstraintSet, exact model) for every sat answer; not serialized
    evidence: List[tuple] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "route": self.route, "formula": self.formula,
               "timings": {k: round(v, 4) for k, v in self.timings.items()},
               "attempts": [a.to_json() for a in self.attempts], "notes": list(self.notes)}
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.check is not None:
            out["check"] = {"ok": self.check.ok, "reason": self.check.reason}
        if self.oracle is not None:
            out["oracle"] = self.oracle
        if self.invariants:
            out["invariants"] = self.invariants
        if self.annotations_inductive is not None:
            out["annotations_inductive"] = self.annotations_inductive
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def automaton_for(phi: Formula, ts: TransitionSystem) -> BuchiAutomaton:
    aps = [AtLoc(l) for l in ts.locations] + [a for a in aps_of(phi) if isinstance(a, Prop)]
    return ltl_to_nbw(phi, aps)


def _merge(a: ConstraintSet, b: ConstraintSet) -> ConstraintSet:
    a.entailments.extend(b.entailments)
    a.ground.extend(b.ground)
    a.int_vars.extend(v for v in b.int_vars if v not in a.int_vars)
    a.extra_vars.extend(v for v in b.extra_vars if v not in a.extra_vars)
    for k, v in b.notes.items():
        a.notes.setdefault(k, v)
    return a


def _with_invariants(ps: ProductSystem, polys: Dict[str, list]) -> ProductSystem:
    """Copy of ``ps`` whose location invariants also carry the synthesized atoms."""
    from dataclasses import replace
    inv = dict(ps.ts.invariants)
    for loc, ps_ in polys.items():
        inv[loc] = conj(ps.ts.invariant(loc), *[Lit(Atom(p, False)) for p in ps_])
    ts = replace(ps.ts, invariants=inv)
    return replace(ps, ts=ts)


def with_intervals(ps: ProductSystem, integer: bool = True) -> ProductSystem:
    """Strengthen the product's location invariants with interval invariants."""
    from dataclasses import replace
    inv = dict(ps.ts.invariants)
    for loc, p in interval_invariants(ps.ts, integer).items():
        if not isinstance(p, TrueP):
            inv[loc] = conj(ps.ts.invariant(loc), p)
    return replace(ps, ts=replace(ps.ts, invariants=inv))


class Synthesizer:
    """Degree ladder over templates, multiplier shapes and invariant co-synthesis."""

    def __init__(self, cfg: RunConfig, graph_of=None):
        self.cfg = cfg
        self.graph_of = graph_of or (lambda ps: None)
        self.counter = 0
        self.evidence: List[tuple] = []

    def _artifact(self, name: str, text: str) -> None:
        if self.cfg.out_dir:
            os.makedirs(self.cfg.out_dir, exist_ok=True)
            with open(os.path.join(self.cfg.out_dir, name), "w") as fh:
                fh.write(text)

    def constraints(self, ps: ProductSystem, kind: str, degree: int, inv_degree: int = 0):
        cfg = self.cfg
        tp = build_templates(ps, degree)
        extra = {}
        inv = None
        inv_cs = None
        if inv_degree:
            inv, inv_cs, extra = cosynthesize_invariants(ps, inv_degree, eps=cfg.epsilon)
        if kind == "EBRF":
            cs = gen_ebrf_constraints(ps, tp, cfg.epsilon, extra, cfg.bound_radius)
            ic = init_valuation_constraint(ps, tp, integer=cfg.integer)
            if cfg.oracle_bounds is not None:
                lo, hi = cfg.oracle_bounds
                for v in ic.notes["init_vars"]:
                    ic.ground.append(Lit(GroundAtom(QExpr.var(v) - lo, ">=")))
                    ic.ground.append(Lit(GroundAtom(QExpr.const(hi) - QExpr.var(v), ">=")))
            _merge(cs, ic)
            if cfg.integer:
                # integer coefficients give integer values on the grid, where the
                # epsilon rewrite of strict atoms is exact; scaling keeps generality
                cs.int_vars.extend(tp.all_unknowns())
        else:
            cs = gen_ubrf_constraints(ps, tp, cfg.epsilon, extra, cfg.bound_radius)
        cs.ground.extend(pin_constraints(tp))
        if inv_cs is not None:
            _merge(cs, inv_cs)
        return tp, cs, inv

    def check(self, ps: ProductSystem, w, base: Optional[ProductSystem] = None) -> CheckResult:
        g = self.graph_of(base or ps)
        if g is not None:
            return check_witness(ps, w, g.nodes, init_domain=[g.nodes[i].vals for i in g.init])
        return check_witness(ps, w, box=self.cfg.check_bounds)

    def run(self, ps: ProductSystem, kind: str, tag: str = "") -> Synthesis:
        cfg = self.cfg
        attempts: List[Attempt] = []
        inv_degrees = [0] + ([cfg.invariant_degree] if cfg.invariant_degree else [])
        for degree in cfg.degrees():
            for inv_degree in inv_degrees:
                t0 = time.monotonic()
                try:
                    tp, cs, inv = self.constraints(ps, kind, degree, inv_degree)
                except EncodingBlowup as exc:
                    attempts.append(Attempt(kind, degree, "-", inv_degree, "blowup",
                                            time.monotonic() - t0, str(exc)))
                    continue
                for mode in cfg.sos:
                    t1 = time.monotonic()
                    a = Attempt(kind, degree, mode, inv_degree, "", 0.0)
                    attempts.append(a)
                    try:
                        qp = encode(cs, SosConfig(mode, cfg.multiplier_degree, cfg.squares))
                    except EncodingDegreeError as exc:
                        a.status, a.detail = "degree", str(exc)
                        continue
                    smt = emit_smtlib(qp)
                    self.counter += 1
                    self._artifact(f"{tag}{kind.lower()}_D{degree}_{mode}_inv{inv_degree}.smt2", smt)
                    res = run_portfolio(smt, cfg.solvers, cfg.timeout)
                    a.seconds = time.monotonic() - t1
                    a.status = res.status
                    if res.status != "sat":
                        continue
                    exact = rationalize(res.model, qp)
                    if exact is None:
                        a.status, a.detail = "unknown", "model failed exact re-validation"
                        continue
                    self.evidence.append((a, cs, exact))
                    init_vars = cs.notes.get("init_vars") if kind == "EBRF" else None
                    w = reconstruct_witness(kind, tp, exact, ps.ts.variables, init_vars)
                    target = ps
                    inv_polys = None
                    if inv is not None:
                        inv_polys = inv.instantiate(exact)
                        target = _with_invariants(ps, inv_polys)
                        rep = inductive_under(ps.ts, inv_polys, samples=1000)
                        if not rep.ok:
                            a.status, a.detail = "unknown", f"invariant not inductive at {rep.violations[0][1]}"
                            continue
                    chk = self.check(target, w, ps)
                    if not chk.ok:
                        a.status, a.detail = "unknown", f"witness check failed: {chk.reason} at {chk.state}"
                        continue
                    a.detail = "witness checked"
                    self._artifact(f"{tag}{kind.lower()}_witness.json", w.dumps())
                    shown = None
                    if inv_polys:
                        shown = {l: [p.to_str(ps.ts.variables) for p in v] for l, v in inv_polys.items()}
                    return Synthesis(w, chk, attempts, shown)
        return Synthesis(None, None, attempts)


def oracle_truth(ts: TransitionSystem, phi: Formula, bounds: Tuple[int, int]) -> dict:
    """Ground truth for ``phi`` on the integer box, or a note that it does not apply."""
    lo, hi = bounds
    try:
        g_neg = build_graph(build_product(ts, automaton_for(LNot(phi), ts)), lo, hi)
        g_pos = build_graph(build_product(ts, automaton_for(phi, ts)), lo, hi)
    except OracleInapplicable as exc:
        return {"applicable": False, "reason": str(exc)}
    return {"applicable": True, "all_runs_satisfy": not decide_eb(g_neg),
            "some_run_satisfies": decide_eb(g_pos), "states": len(g_neg) + len(g_pos)}


def _agrees(verdict: str, route: str, truth: dict) -> Optional[bool]:
    if not truth.get("applicable"):
        return None
    if verdict == "Proved" and route == "universal":
        return truth["all_runs_satisfy"]
    if verdict == "Refuted":
        return not truth["all_runs_satisfy"]
    if verdict == "Proved" and route == "existential":
        return truth["some_run_satisfies"]
    return True


def run(cfg: RunConfig, ts: TransitionSystem, ltl: str, hoa: Optional[str] = None) -> Report:
    """Decide ``ltl`` on ``ts`` along the route selected by ``cfg.mode``."""
    timings: Dict[str, float] = {}
    t0 = time.monotonic()
    phi = parse_ltl(ltl, ts.variables)
    text = formula_str(phi, ts.variables)
    graphs: Dict[int, Optional[StateGraph]] = {}

    def graph_of(ps):
        if cfg.oracle_bounds is None:
            return None
        if id(ps) not in graphs:
            try:
                graphs[id(ps)] = build_graph(ps, *cfg.oracle_bounds)
            except OracleInapplicable:
                graphs[id(ps)] = None
        return graphs[id(ps)]

    syn = Synthesizer(cfg, graph_of)
    report = Report("Unknown", cfg.mode, text)
    timings["parse"] = time.monotonic() - t0

    def product(aut: BuchiAutomaton, tag: str) -> ProductSystem:
        ps = build_product(ts, aut)
        if cfg.intervals:
            ps = with_intervals(ps, cfg.integer)
        syn._artifact(f"{tag}product.dot", ps.to_dot())
        return ps

    if cfg.mode == "verify":
        t1 = time.monotonic()
        if hoa is not None:
            dbw = read_hoa(hoa, ts.variables, ts.locations)
            if not dbw.is_deterministic():
                raise AutomatonError("the universal route needs a deterministic automaton; "
                                     "the supplied HOA automaton is not deterministic")
        else:
            dbw = automaton_for(phi, ts)
        timings["automaton"] = time.monotonic() - t1
        if dbw.is_deterministic():
            t1 = time.monotonic()
            ps = product(dbw, "pos_")
            res = syn.run(ps, "UBRF", "pos_")
            timings["universal"] = time.monotonic() - t1
            report.attempts += res.attempts
            if res.witness is not None:
                report.verdict, report.route = "Proved", "universal"
                report.witness, report.check, report.invariants = res.witness, res.check, res.invariants
        else:
            report.notes.append("universal route inapplicable: no deterministic automaton for the formula")
        if report.verdict == "Unknown":
            t1 = time.monotonic()
            ps = product(automaton_for(LNot(phi), ts), "neg_")
            res = syn.run(ps, "EBRF", "neg_")
            timings["refutation"] = time.monotonic() - t1
            report.attempts += res.attempts
            if res.witness is not None:
                report.verdict, report.route = "Refuted", "refutation"
                report.witness, report.check, report.invariants = res.witness, res.check, res.invariants
    else:
        negate = cfg.mode == "refute"
        t1 = time.monotonic()
        aut = automaton_for(LNot(phi) if negate else phi, ts)
        ps = product(aut, "neg_" if negate else "pos_")
        timings["automaton"] = time.monotonic() - t1
        t1 = time.monotonic()
        res = syn.run(ps, "EBRF", "neg_" if negate else "pos_")
        timings["existential"] = time.monotonic() - t1
        report.attempts += res.attempts
        if res.witness is not None:
            report.verdict = "Refuted" if negate else "Proved"
            report.route = "refutation" if negate else "existential"
            report.witness, report.check, report.invariants = res.witness, res.check, res.invariants
    if ts.invariants:
        lo, hi = cfg.oracle_bounds or cfg.check_bounds
        rep = check_inductive(ts, ts.invariants, samples=1000, lo=lo, hi=hi)
        report.annotations_inductive = rep.ok
        if not rep.ok:
            what, s1, s2 = rep.violations[0]
            report.notes.append(f"annotated invariants fail {what} ({s1} -> {s2}); "
                                "the verdict is relative to the annotations")
            if cfg.strict_invariants and report.verdict != "Unknown":
                report.notes.append(f"{report.verdict} withheld: strict invariants requested")
                report.verdict = "Unknown"
    if cfg.oracle_bounds is not None:
        t1 = time.monotonic()
        truth = oracle_truth(ts, phi, cfg.oracle_bounds)
        truth["agrees"] = _agrees(report.verdict, report.route, truth)
        report.oracle = truth
        timings["oracle"] = time.monotonic() - t1
    timings["total"] = time.monotonic() - t0
    report.timings = timings
    report.evidence = syn.evidence
    if cfg.out_dir:
        syn._artifact("report.json", report.dumps())
    return report
