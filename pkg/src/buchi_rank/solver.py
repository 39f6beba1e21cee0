"""SMT-LIB emission, external solver portfolio and model reconstruction."""
from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .ir import And, ConfigError, FalseP, Lit, Not, Or, Pred, TrueP
from .positivstellensatz import QpSystem
from .symbolic import QExpr
from .witness import ConcreteWitness, GroundAtom, Templates

DEFAULT_SOLVERS = ["z3 -smt2 {file}"]
DEFAULT_TIMEOUT = 1800.0
ENV_SOLVERS = "BUCHI_RANK_SOLVERS"


# ---------------------------------------------------------------------------
# emission


def _sym(name: str) -> str:
    if "|" in name or "\\" in name:
        raise ConfigError(f"unknown name {name!r} cannot be quoted in SMT-LIB")
    return f"|{name}|"


def _num(c: Fraction) -> str:
    c = Fraction(c)
    mag = abs(c)
    body = f"{mag.numerator}.0" if mag.denominator == 1 else f"(/ {mag.numerator}.0 {mag.denominator}.0)"
    return f"(- {body})" if c < 0 else body


def _expr(e: QExpr, sorts: Mapping[str, str]) -> str:
    def var(v):
        return f"(to_real {_sym(v)})" if sorts.get(v) == "Int" else _sym(v)

    parts = []
    for key, c in e.items():
        if not key:
            parts.append(_num(c))
            continue
        factors = [var(v) for v in key]
        if c == 1:
            parts.append(factors[0] if len(factors) == 1 else f"(* {' '.join(factors)})")
        else:
            parts.append(f"(* {_num(c)} {' '.join(factors)})")
    if not parts:
        return "0.0"
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _pred(p: Pred, sorts) -> str:
    if isinstance(p, TrueP):
        return "true"
    if isinstance(p, FalseP):
        return "false"
    if isinstance(p, Lit):
        a: GroundAtom = p.atom
        op = {">=": ">=", ">": ">", "==": "="}[a.rel]
        return f"({op} {_expr(a.expr, sorts)} 0.0)"
    if isinstance(p, Not):
        return f"(not {_pred(p.arg, sorts)})"
    if isinstance(p, And):
        return f"(and {' '.join(_pred(a, sorts) for a in p.args)})"
    if isinstance(p, Or):
        return f"(or {' '.join(_pred(a, sorts) for a in p.args)})"
    raise TypeError(p)


def emit_smtlib(qp: QpSystem) -> str:
    """Deterministic SMT-LIB2 text for ``qp``."""
    has_int = any(s == "Int" for s in qp.sorts.values())
    lines = [f"(set-logic {'QF_NIRA' if has_int else 'QF_NRA'})"]
    for name in sorted(qp.sorts):
        lines.append(f"(declare-fun {_sym(name)} () {qp.sorts[name]})")
    for c in qp.constraints:
        lines.append(f"(assert {_pred(c, qp.sorts)})")
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# s-expressions and models


def parse_sexprs(text: str) -> list:
    out: list = []
    stack: List[list] = [out]
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "(":
            stack.append([])
            i += 1
        elif ch == ")":
            if len(stack) == 1:
                raise ValueError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
            i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            stack[-1].append(("sym", text[i + 1:j]))
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n and not (text[j] == '"' and (j + 1 >= n or text[j + 1] != '"')):
                j += 2 if text[j] == '"' else 1
            stack[-1].append(("str", text[i + 1:j]))
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();|":
                j += 1
            stack[-1].append(text[i:j])
            i = j
    if len(stack) != 1:
        raise ValueError("unbalanced '(' in solver output")
    return out


class Algebraic:
    """A real algebraic number ``root-obj`` kept as polynomial plus root index."""

    def __init__(self, sexpr, index: int):
        self.sexpr = sexpr
        self.index = index

    def approximations(self):
        import sympy
        x = sympy.Symbol("x")
        expr = _sexpr_to_sympy(self.sexpr, x)
        roots = sympy.Poly(expr, x).real_roots()
        r = roots[self.index - 1]
        val = sympy.Rational(str(sympy.N(r, 60)))
        exact = Fraction(int(val.p), int(val.q))
        for k in range(1, 16):
            yield exact.limit_denominator(10 ** k)


def _sexpr_to_sympy(e, x):
    import sympy
    if isinstance(e, str):
        if e == "x":
            return x
        return sympy.Rational(e)
    if isinstance(e, tuple):
        return x
    head, *args = e
    vals = [_sexpr_to_sympy(a, x) for a in args]
    if head == "+":
        return sum(vals)
    if head == "*":
        out = 1
        for v in vals:
            out *= v
        return out
    if head == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - sum(vals[1:])
    if head == "^":
        return vals[0] ** int(args[1])
    if head == "/":
        return vals[0] / vals[1]
    raise ValueError(f"unsupported operator {head} in algebraic number")


def _value(e):
    """Exact value of a model term, or an :class:`Algebraic`."""
    if isinstance(e, str):
        if e in ("true", "false"):
            raise ValueError("boolean value in a real model")
        return Fraction(e)
    if isinstance(e, list) and e:
        head = e[0]
        if head == "-" and len(e) == 2:
            v = _value(e[1])
            if isinstance(v, Algebraic):
                return Algebraic(["*", "-1", v.sexpr], v.index)  # not expected in practice
            return -v
        if head == "-" and len(e) > 2:
            return _value(e[1]) - sum(_value(a) for a in e[2:])
        if head == "/" and len(e) == 3:
            return _value(e[1]) / _value(e[2])
        if head == "+":
            return sum(_value(a) for a in e[1:])
        if head == "*":
            out = Fraction(1)
            for a in e[1:]:
                out *= _value(a)
            return out
        if head == "root-obj":
            return Algebraic(e[1], int(e[2]))
        if head == "to_real" and len(e) == 2:
            return _value(e[1])
    raise ValueError(f"unsupported model value {e!r}")


def parse_model(text: str) -> Dict[str, object]:
    items = parse_sexprs(text)
    model: Dict[str, object] = {}

    def walk(node):
        if isinstance(node, list):
            if node and node[0] == "define-fun" and len(node) == 5:
                name = node[1][1] if isinstance(node[1], tuple) else node[1]
                model[name] = _value(node[4])
                return
            for sub in node:
                walk(sub)

    for it in items:
        walk(it)
    return model


def rationalize(model: Mapping[str, object], qp: QpSystem) -> Optional[Dict[str, Fraction]]:
    """Turn a solver model into an exact rational model that satisfies ``qp``.

    Irrational values are replaced by continued-fraction approximations of
    increasing precision.  Returns ``None`` when no candidate validates.
    """
    exact = {k: v for k, v in model.items() if isinstance(v, Fraction)}
    alg = {k: v for k, v in model.items() if isinstance(v, Algebraic)}
    if not alg:
        return exact if qp.holds(exact) else None
    gens = {k: list(v.approximations()) for k, v in alg.items()}
    depth = max(len(g) for g in gens.values())
    for i in range(depth):
        cand = dict(exact)
        for k, g in gens.items():
            cand[k] = g[min(i, len(g) - 1)]
        if qp.holds(cand):
            return cand
    return None


# ---------------------------------------------------------------------------
# portfolio


@dataclass
class SolverResult:
    status: str  # "sat" | "unsat" | "unknown" | "timeout" | "error"
    model: Optional[Dict[str, object]] = None
    solver: Optional[str] = None
    elapsed: float = 0.0
    details: List[str] = field(default_factory=list)


def configured_solvers(solvers: Optional[Sequence[str]] = None) -> List[str]:
    if solvers:
        cmds = list(solvers)
    elif os.environ.get(ENV_SOLVERS):
        cmds = [c.strip() for c in os.environ[ENV_SOLVERS].split(";") if c.strip()]
    else:
        cmds = list(DEFAULT_SOLVERS)
    missing = []
    for c in cmds:
        exe = shlex.split(c)[0]
        if shutil.which(exe) is None:
            missing.append(exe)
    if missing:
        raise ConfigError(f"solver executables not found: {', '.join(missing)}")
    return cmds


def _command(template: str, path: str) -> List[str]:
    if "{file}" in template:
        return [part.replace("{file}", path) for part in shlex.split(template)]
    return shlex.split(template) + [path]


def _status_of(out: str) -> str:
    for line in out.splitlines():
        s = line.strip()
        if s in ("sat", "unsat", "unknown"):
            return s
        if s:
            return "error"
    return "error"


def run_portfolio(smt: str, solvers: Optional[Sequence[str]] = None,
                  timeout: float = DEFAULT_TIMEOUT, poll: float = 0.01) -> SolverResult:
    """Run solvers concurrently; the first definitive answer wins."""
    cmds = configured_solvers(solvers)
    t0 = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="buchi-rank-") as tmp:
        path = os.path.join(tmp, "query.smt2")
        with open(path, "w") as fh:
            fh.write(smt)
        procs = []
        try:
            for k, c in enumerate(cmds):
                out = open(os.path.join(tmp, f"out{k}.txt"), "w+")
                p = subprocess.Popen(_command(c, path), stdout=out, stderr=subprocess.STDOUT,
                                     stdin=subprocess.DEVNULL)
                procs.append((c, p, out))
            pending = list(procs)
            details = []
            while pending:
                if time.monotonic() - t0 > timeout:
                    return SolverResult("timeout", elapsed=time.monotonic() - t0, details=details)
                for item in list(pending):
                    c, p, out = item
                    if p.poll() is None:
                        continue
                    pending.remove(item)
                    out.flush()
                    out.seek(0)
                    text = out.read()
                    status = _status_of(text)
                    details.append(f"{c}: {status}")
                    if status == "sat":
                        try:
                            model = parse_model(text.split("sat", 1)[1])
                        except (ValueError, IndexError) as exc:
                            details.append(f"{c}: unreadable model ({exc})")
                            continue
                        return SolverResult("sat", model, c, time.monotonic() - t0, details)
                    if status == "unsat":
                        return SolverResult("unsat", None, c, time.monotonic() - t0, details)
                time.sleep(poll)
            return SolverResult("unknown", elapsed=time.monotonic() - t0, details=details)
        finally:
            for _c, p, out in procs:
                if p.poll() is None:
                    p.kill()
                p.wait()
                out.close()


def solve_qp(qp: QpSystem, solvers=None, timeout: float = DEFAULT_TIMEOUT) -> Tuple[SolverResult, Optional[Dict[str, Fraction]]]:
    """Solve and return an exactly validated rational model when one exists."""
    res = run_portfolio(emit_smtlib(qp), solvers, timeout)
    if res.status != "sat":
        return res, None
    exact = rationalize(res.model, qp)
    if exact is None:
        res.details.append("model failed exact re-validation")
    return res, exact


def reconstruct_witness(kind: str, templates: Templates, model: Mapping[str, Fraction],
                        variables: Sequence[str], init_vars: Optional[Sequence[str]] = None) -> ConcreteWitness:
    full = {k: Fraction(v) for k, v in model.items()}
    for n in templates.all_unknowns():
        full.setdefault(n, Fraction(0))
    funcs = templates.instantiate(full)
    init = None
    if init_vars is not None:
        init = tuple(full.get(v, Fraction(0)) for v in init_vars)
    return ConcreteWitness(kind, templates.degree, list(variables), funcs, init)
