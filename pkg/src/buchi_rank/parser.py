"""Parser and pretty-printer for the polynomial program language.

Grammar (statements separated by newlines or ``;``)::

    pre: <pred>
    invariant <label>: <pred>
    [<label>:] x = <poly> | skip | assert(<pred>) | assume(<pred>)
    [<label>:] while <pred> do <stmts> done
    [<label>:] if <pred> then <stmts> [else <stmts>] fi
    [<label>:] if * then <stmts> {elif * then <stmts>} else <stmts> fi

A trailing label names the terminal location.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .ir import (
    TRUE, And, Atom, ConfigError, FalseP, Lit, Not, Or, Pred, Transition,
    TransitionSystem, TrueP, conj, identity_update, is_identity, map_atoms, negate,
)
from .poly import Polynomial


class ParseError(ConfigError):
    pass


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<nl>\n)
  | (?P<num>\d+(\.\d+)?(/\d+)?)
  | (?P<op>>=|<=|==|!=|&&|\|\||->|[-+*^()<>=!;:/%,])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)

KEYWORDS = {"while", "do", "done", "if", "then", "else", "elif", "fi", "skip",
            "assert", "assume", "pre", "invariant", "true", "false", "mod", "div"}


@dataclass
class Tok:
    kind: str
    text: str
    line: int


def tokenize(src: str) -> List[Tok]:
    toks: List[Tok] = []
    pos, line = 0, 1
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if not m:
            raise ParseError(f"line {line}: unexpected character {src[pos]!r}")
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            toks.append(Tok("sep", "\n", line))
            line += 1
        elif kind == "op" and text == ";":
            toks.append(Tok("sep", ";", line))
        elif kind not in ("ws", "comment"):
            if kind == "ident" and text in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, text, line))
        pos = m.end()
    toks.append(Tok("eof", "", line))
    return toks


# ---------------------------------------------------------------------------
# raw syntax trees

Expr = tuple  # ('num', Fraction) | ('var', name) | (op, a, b) | ('neg', a) | ('pow', a, k)


@dataclass
class Stmt:
    label: Optional[str] = field(default=None, kw_only=True)


@dataclass
class Assign(Stmt):
    var: str
    expr: object


@dataclass
class Skip(Stmt):
    pass


@dataclass
class Assert(Stmt):
    pred: object


@dataclass
class Assume(Stmt):
    pred: object


@dataclass
class While(Stmt):
    cond: object
    body: List[Stmt]


@dataclass
class If(Stmt):
    cond: object  # None for nondeterministic choice
    branches: List[List[Stmt]]  # [then, else] or [then, elif..., else]


@dataclass
class Program:
    variables: List[str]
    pre: object
    invariants: Dict[str, object]
    body: List[Stmt]
    terminal_label: Optional[str] = None


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, kind: str, text: Optional[str] = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == kind and (text is None or t.text == text)

    def expect(self, kind: str, text: Optional[str] = None) -> Tok:
        t = self.peek()
        if not self.at(kind, text):
            want = text or kind
            raise ParseError(f"line {t.line}: expected {want!r}, found {t.text or t.kind!r}")
        return self.next()

    def skip_seps(self) -> None:
        while self.at("sep"):
            self.next()

    # expressions
    def poly(self) -> Expr:
        e = self.term()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.next().text
            e = ("add" if op == "+" else "sub", e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            if self.at("op", "*"):
                self.next()
                e = ("mul", e, self.unary())
            elif self.at("op", "/") or self.at("op", "%") or self.at("kw", "mod") or self.at("kw", "div"):
                raise ParseError(f"line {self.peek().line}: division and modulo are not supported")
            else:
                return e

    def unary(self) -> Expr:
        if self.at("op", "-"):
            self.next()
            return ("neg", self.unary())
        if self.at("op", "+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.at("op", "^"):
            self.next()
            t = self.expect("num")
            if not t.text.isdigit():
                raise ParseError(f"line {t.line}: exponent must be a natural number")
            return ("pow", base, int(t.text))
        return base

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return ("num", _number(t.text))
        if t.kind == "ident":
            self.next()
            return ("var", t.text)
        if self.at("op", "("):
            self.next()
            e = self.poly()
            self.expect("op", ")")
            return e
        if self.at("op", "*"):
            raise ParseError(f"line {t.line}: nondeterministic assignment is not supported")
        raise ParseError(f"line {t.line}: unexpected {t.text or t.kind!r} in expression")

    # predicates
    def pred(self):
        e = self.conj()
        while self.at("op", "||"):
            self.next()
            e = ("or", e, self.conj())
        return e

    def conj(self):
        e = self.neg()
        while self.at("op", "&&"):
            self.next()
            e = ("and", e, self.neg())
        return e

    def neg(self):
        if self.at("op", "!"):
            self.next()
            return ("not", self.neg())
        if self.at("kw", "true"):
            self.next()
            return ("true",)
        if self.at("kw", "false"):
            self.next()
            return ("false",)
        if self.at("op", "("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.next()
            p = self.pred()
            self.expect("op", ")")
            return p
        return self.comparison()

    def comparison(self):
        lhs = self.poly()
        t = self.peek()
        if t.kind == "op" and t.text in (">=", ">", "<=", "<", "=="):
            self.next()
            return ("cmp", t.text, lhs, self.poly())
        if t.kind == "op" and t.text == "!=":
            raise ParseError(f"line {t.line}: '!=' is not supported, use a disjunction")
        raise ParseError(f"line {t.line}: expected a comparison operator")

    # statements
    def label(self) -> Optional[str]:
        if self.at("ident") and self.at("op", ":", 1):
            name = self.next().text
            self.next()
            return name
        return None

    def block(self, stop: Sequence[str]) -> List[Stmt]:
        out: List[Stmt] = []
        self.skip_seps()
        while not (self.peek().kind == "kw" and self.peek().text in stop) and not self.at("eof"):
            out.append(self.stmt())
            self.skip_seps()
        return out

    def stmt(self) -> Stmt:
        lab = self.label()
        if lab:
            self.skip_seps()
        t = self.peek()
        if t.kind == "kw" and t.text == "while":
            self.next()
            c = self.pred()
            self.skip_seps()
            self.expect("kw", "do")
            body = self.block(("done",))
            self.expect("kw", "done")
            return While(c, body, label=lab)
        if t.kind == "kw" and t.text == "if":
            self.next()
            if self.at("op", "*"):
                self.next()
                self.skip_seps()
                self.expect("kw", "then")
                branches = [self.block(("elif", "else", "fi"))]
                while self.at("kw", "elif"):
                    self.next()
                    self.expect("op", "*")
                    self.skip_seps()
                    self.expect("kw", "then")
                    branches.append(self.block(("elif", "else", "fi")))
                self.expect("kw", "else")
                branches.append(self.block(("fi",)))
                self.expect("kw", "fi")
                return If(None, branches, label=lab)
            c = self.pred()
            self.skip_seps()
            self.expect("kw", "then")
            then = self.block(("else", "fi"))
            other: List[Stmt] = []
            if self.at("kw", "else"):
                self.next()
                other = self.block(("fi",))
            self.expect("kw", "fi")
            return If(c, [then, other], label=lab)
        if t.kind == "kw" and t.text == "skip":
            self.next()
            return Skip(label=lab)
        if t.kind == "kw" and t.text in ("assert", "assume"):
            self.next()
            self.expect("op", "(")
            p = self.pred()
            self.expect("op", ")")
            return (Assert if t.text == "assert" else Assume)(p, label=lab)
        if t.kind == "ident":
            name = self.next().text
            self.expect("op", "=")
            if self.at("op", "*"):
                raise ParseError(f"line {t.line}: nondeterministic assignment is not supported")
            return Assign(name, self.poly(), label=lab)
        raise ParseError(f"line {t.line}: unexpected {t.text or t.kind!r}")

    def program(self) -> Tuple[object, Dict[str, object], List[Stmt], Optional[str]]:
        self.skip_seps()
        pre = ("true",)
        invs: Dict[str, object] = {}
        while True:
            if self.at("kw", "pre"):
                self.next()
                self.expect("op", ":")
                pre = self.pred()
            elif self.at("kw", "invariant"):
                self.next()
                name = self.expect("ident").text
                self.expect("op", ":")
                invs[name] = self.pred()
            else:
                break
            self.skip_seps()
        body: List[Stmt] = []
        terminal = None
        while not self.at("eof"):
            if self.at("ident") and self.at("op", ":", 1):
                save = self.i
                lab = self.label()
                self.skip_seps()
                if self.at("eof"):
                    terminal = lab
                    break
                self.i = save
            body.append(self.stmt())
            self.skip_seps()
        return pre, invs, body, terminal


def _number(text: str) -> Fraction:
    if "/" in text:
        a, b = text.split("/")
        if int(b) == 0:
            raise ParseError("zero denominator in literal")
        return Fraction(Fraction(a), int(b))
    return Fraction(text)


# ---------------------------------------------------------------------------
# conversion to polynomials and predicates


def _collect_vars(node, acc: dict) -> None:
    if isinstance(node, tuple):
        if node and node[0] == "var":
            acc.setdefault(node[1])
            return
        for x in node[1:]:
            _collect_vars(x, acc)
    elif isinstance(node, list):
        for x in node:
            _collect_vars(x, acc)
    elif isinstance(node, Assign):
        acc.setdefault(node.var)
        _collect_vars(node.expr, acc)
    elif isinstance(node, (Assert, Assume)):
        _collect_vars(node.pred, acc)
    elif isinstance(node, While):
        _collect_vars(node.cond, acc)
        _collect_vars(node.body, acc)
    elif isinstance(node, If):
        if node.cond is not None:
            _collect_vars(node.cond, acc)
        for b in node.branches:
            _collect_vars(b, acc)


def to_poly(e: Expr, names: Sequence[str]) -> Polynomial:
    n = len(names)
    tag = e[0]
    if tag == "num":
        return Polynomial.const(n, e[1])
    if tag == "var":
        return Polynomial.var(n, list(names).index(e[1]))
    if tag == "neg":
        return -to_poly(e[1], names)
    if tag == "pow":
        return to_poly(e[1], names) ** e[2]
    a, b = to_poly(e[1], names), to_poly(e[2], names)
    return {"add": a + b, "sub": a - b, "mul": a * b}[tag]


def to_pred(p, names: Sequence[str]) -> Pred:
    if isinstance(p, Pred):
        return p
    tag = p[0]
    if tag == "true":
        return TRUE
    if tag == "false":
        return FalseP()
    if tag == "not":
        return Not(to_pred(p[1], names))
    if tag == "and":
        return And((to_pred(p[1], names), to_pred(p[2], names)))
    if tag == "or":
        return Or((to_pred(p[1], names), to_pred(p[2], names)))
    if tag == "cmp":
        _, op, l, r = p
        a, b = to_poly(l, names), to_poly(r, names)
        if op == ">=":
            return Lit(Atom(a - b))
        if op == ">":
            return Lit(Atom(a - b, True))
        if op == "<=":
            return Lit(Atom(b - a))
        if op == "<":
            return Lit(Atom(b - a, True))
        return And((Lit(Atom(a - b)), Lit(Atom(b - a))))
    raise TypeError(p)


def parse_expr(text: str, names: Sequence[str]) -> Polynomial:
    p = _Parser(text)
    e = p.poly()
    p.expect("eof")
    return to_poly(e, names)


def parse_pred(text: str, names: Sequence[str]) -> Pred:
    p = _Parser(text)
    e = p.pred()
    p.skip_seps()
    p.expect("eof")
    seen: dict = {}
    _collect_vars(e, seen)
    unknown = set(seen) - set(names)
    if unknown:
        raise ParseError(f"unknown variables {sorted(unknown)}")
    return to_pred(e, names)


def _resolve(stmts: List[Stmt], names: Sequence[str]) -> None:
    for s in stmts:
        if isinstance(s, Assign):
            s.expr = to_poly(s.expr, names)
        elif isinstance(s, (Assert, Assume)):
            s.pred = to_pred(s.pred, names)
        elif isinstance(s, While):
            s.cond = to_pred(s.cond, names)
            _resolve(s.body, names)
        elif isinstance(s, If):
            if s.cond is not None:
                s.cond = to_pred(s.cond, names)
            for b in s.branches:
                _resolve(b, names)


def parse_program(src: str) -> Program:
    pre, invs, body, terminal = _Parser(src).program()
    acc: dict = {}  # first occurrence order
    _collect_vars(pre, acc)
    for v in invs.values():
        _collect_vars(v, acc)
    _collect_vars(body, acc)
    names = list(acc)
    _resolve(body, names)
    prog = Program(names, to_pred(pre, names), {k: to_pred(v, names) for k, v in invs.items()},
                   body, terminal)
    _assign_labels(prog)
    return prog


# ---------------------------------------------------------------------------
# flattening


def _owns_location(s: Stmt) -> bool:
    # an unlabeled skip or nondeterministic branch is a pure join point
    return not isinstance(s, (If, Skip)) or s.label is not None


def _walk(stmts: List[Stmt]):
    for s in stmts:
        yield s
        if isinstance(s, While):
            yield from _walk(s.body)
        elif isinstance(s, If):
            for b in s.branches:
                yield from _walk(b)


def _assign_labels(prog: Program) -> None:
    used = {s.label for s in _walk(prog.body) if s.label}
    reserved = {"l_init", prog.terminal_label or "l_t"}
    clash = used & reserved
    if clash:
        raise ParseError(f"reserved location names used as labels: {sorted(clash)}")
    if len(used) != sum(1 for s in _walk(prog.body) if s.label):
        raise ParseError("duplicate statement labels")
    k = 1
    for s in _walk(prog.body):
        if s.label is None and _owns_location(s):
            while f"l{k}" in used or f"l{k}" in reserved:
                k += 1
            s.label = f"l{k}"
            used.add(s.label)


Entry = Tuple[Pred, str]


class _Flattener:
    def __init__(self, nvars: int):
        self.n = nvars
        self.ident = identity_update(nvars)
        self.transitions: List[Transition] = []
        self.locations: List[str] = []
        self.assertions: Dict[str, Pred] = {}

    def seq(self, stmts: List[Stmt], cont: List[Entry]) -> List[Entry]:
        for s in reversed(stmts):
            cont = self.stmt(s, cont)
        return cont

    def edges(self, src: str, guard: Pred, update, cont: List[Entry]) -> None:
        for g, dst in cont:
            if not is_identity(update):
                g = map_atoms(g, lambda a, u=update: a.substitute(u))
            g = conj(guard, g)
            if not isinstance(g, FalseP):
                self.transitions.append(Transition(src, dst, g, tuple(update)))

    def stmt(self, s: Stmt, cont: List[Entry]) -> List[Entry]:
        if isinstance(s, Assign):
            upd = list(self.ident)
            upd[self._names.index(s.var)] = s.expr
            self.edges(s.label, TRUE, upd, cont)
            return [(TRUE, s.label)]
        if isinstance(s, Skip):
            if s.label is None:
                return cont
            self.edges(s.label, TRUE, self.ident, cont)
            return [(TRUE, s.label)]
        if isinstance(s, Assert):
            self.assertions[s.label] = s.pred
            self.edges(s.label, TRUE, self.ident, cont)
            return [(TRUE, s.label)]
        if isinstance(s, Assume):
            self.edges(s.label, s.pred, self.ident, cont)
            return [(TRUE, s.label)]
        if isinstance(s, While):
            head = s.label
            body = self.seq(s.body, [(TRUE, head)])
            self.edges(head, s.cond, self.ident, body)
            self.edges(head, negate(s.cond), self.ident, cont)
            return [(TRUE, head)]
        if isinstance(s, If):
            entries: List[Entry] = []
            if s.cond is None:
                for b in s.branches:
                    entries.extend(self.seq(b, cont))
            else:
                then, other = s.branches
                entries.extend((conj(s.cond, g), t) for g, t in self.seq(then, cont))
                neg = negate(s.cond)
                entries.extend((conj(neg, g), t) for g, t in self.seq(other, cont))
            if s.label is not None:
                self.edges(s.label, TRUE, self.ident, entries)
                return [(TRUE, s.label)]
            return entries
        raise TypeError(s)


def program_to_ts(prog: Program, complete: bool = True) -> TransitionSystem:
    flat = _Flattener(len(prog.variables))
    flat._names = prog.variables
    term = prog.terminal_label or "l_t"
    entries = flat.seq(prog.body, [(TRUE, term)])
    flat.edges("l_init", TRUE, flat.ident, entries)
    locs = ["l_init"] + [s.label for s in _walk(prog.body) if _owns_location(s)] + [term]
    flat.transitions.append(Transition(term, term, TRUE, flat.ident))
    order = {l: i for i, l in enumerate(locs)}
    # stable sort by source keeps per-location declaration order
    trans = sorted(flat.transitions, key=lambda t: order[t.src])
    unknown = set(prog.invariants) - set(locs)
    if unknown:
        raise ParseError(f"invariant for unknown locations {sorted(unknown)}")
    ts = TransitionSystem(list(prog.variables), locs, "l_init", prog.pre, trans, term,
                          dict(prog.invariants), flat.assertions)
    ts.validate()
    return ts.complete_totality() if complete else ts


def parse_ts(src: str, complete: bool = True) -> TransitionSystem:
    return program_to_ts(parse_program(src), complete)


# ---------------------------------------------------------------------------
# pretty printing


def _pp_pred(p: Pred, names: Sequence[str]) -> str:
    if isinstance(p, TrueP):
        return "true"
    if isinstance(p, FalseP):
        return "false"
    if isinstance(p, Lit):
        a = p.atom
        return f"{a.poly.to_str(names)} {'>' if a.strict else '>='} 0"
    if isinstance(p, Not):
        return f"!({_pp_pred(p.arg, names)})"
    if isinstance(p, And):
        return " && ".join(f"({_pp_pred(a, names)})" for a in p.args)
    if isinstance(p, Or):
        return " || ".join(f"({_pp_pred(a, names)})" for a in p.args)
    raise TypeError(p)


def pretty(prog: Program) -> str:
    names = prog.variables
    out: List[str] = [f"pre: {_pp_pred(prog.pre, names)}"]
    for k, v in prog.invariants.items():
        out.append(f"invariant {k}: {_pp_pred(v, names)}")

    def lab(s: Stmt) -> str:
        return f"{s.label}: " if s.label else ""

    def block(stmts: List[Stmt], ind: int) -> None:
        pad = "  " * ind
        for s in stmts:
            if isinstance(s, Assign):
                out.append(f"{pad}{lab(s)}{s.var} = {s.expr.to_str(names)}")
            elif isinstance(s, Skip):
                out.append(f"{pad}{lab(s)}skip")
            elif isinstance(s, Assert):
                out.append(f"{pad}{lab(s)}assert({_pp_pred(s.pred, names)})")
            elif isinstance(s, Assume):
                out.append(f"{pad}{lab(s)}assume({_pp_pred(s.pred, names)})")
            elif isinstance(s, While):
                out.append(f"{pad}{lab(s)}while {_pp_pred(s.cond, names)} do")
                block(s.body, ind + 1)
                out.append(f"{pad}done")
            elif isinstance(s, If):
                if s.cond is None:
                    out.append(f"{pad}{lab(s)}if * then")
                    block(s.branches[0], ind + 1)
                    for b in s.branches[1:-1]:
                        out.append(f"{pad}elif * then")
                        block(b, ind + 1)
                else:
                    out.append(f"{pad}{lab(s)}if {_pp_pred(s.cond, names)} then")
                    block(s.branches[0], ind + 1)
                out.append(f"{pad}else")
                block(s.branches[-1], ind + 1)
                out.append(f"{pad}fi")

    block(prog.body, 0)
    if prog.terminal_label:
        out.append(f"{prog.terminal_label}:")
    return "\n".join(out) + "\n"


def load_program(path: str) -> TransitionSystem:
    with open(path) as fh:
        return parse_ts(fh.read())
