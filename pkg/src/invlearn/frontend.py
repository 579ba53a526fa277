"""Annotated-loop language: parsing, printing, transition formulas, Pre, Xi.

Concrete syntax::

    rat x, y;  bool b;
    pre { ... } while ( guard ) { stmt; stmt; ... } post { ... }

Statements are ``nop``, ``x := e``, ``x := nondet``, ``assume (p)`` and
``if (p) { ... } else { ... }``.  Expressions use ``+ - *`` (``*`` only with a
literal operand), Boolean formulas ``! && ||`` and ``< <= = != > >=``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from .logic import (
    FALSE,
    TRUE,
    Add,
    BoolVar,
    Const,
    Eq,
    Formula,
    Le,
    Lt,
    Mul,
    Sub,
    Term,
    Var,
    atoms_of,
    conj,
    disj,
    iff,
    implies,
    neg,
    shift,
    substitute,
    superscript,
    symbols,
    to_text,
)

RAT = "rat"
INT = "int"
BOOL = "bool"


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.line = line
        self.col = col


# ---------------------------------------------------------------- statements


@dataclass(frozen=True)
class Nop:
    pass


@dataclass(frozen=True)
class Assign:
    var: Union[Var, BoolVar]
    rhs: Union[Term, Formula]


@dataclass(frozen=True)
class Havoc:
    var: Union[Var, BoolVar]


@dataclass(frozen=True)
class Assume:
    cond: Formula


@dataclass(frozen=True)
class If:
    cond: Formula
    then: tuple
    els: tuple = ()


Statement = Union[Nop, Assign, Havoc, Assume, If]


@dataclass(frozen=True)
class AnnotatedLoop:
    decls: tuple  # ((name, sort), ...) in declaration order
    pre: Formula
    guard: Formula
    body: tuple
    post: Formula
    name: str = field(default="", compare=False)

    @property
    def variables(self) -> list:
        return [BoolVar(n) if s == BOOL else Var(n) for n, s in self.decls]

    @property
    def sorts(self) -> dict:
        return dict(self.decls)

    @property
    def integers(self) -> frozenset:
        """Names of integer-sorted variables."""
        return frozenset(n for n, s in self.decls if s == INT)


class FreshNames:
    """Per-problem generator of globally unique fresh symbols."""

    def __init__(self):
        self.counter = 0

    def like(self, s):
        self.counter += 1
        return type(s)(f"{s.name}#{self.counter}")


# ------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<num>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_#]*(?:@\d+)?)
  | (?P<op>:=|<=|>=|!=|&&|\|\||[-+*/<>=!(){};,])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"pre", "post", "while", "if", "else", "nop", "nondet", "assume", "true", "false", "rat", "int", "bool"}


def _tokenize(text: str):
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        val = m.group()
        if kind != "ws":
            toks.append((kind, val, line, col))
        nl = val.count("\n")
        if nl:
            line += nl
            col = len(val) - val.rfind("\n")
        else:
            col += len(val)
        pos = m.end()
    toks.append(("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str, sorts: dict | None = None):
        self.toks = _tokenize(text)
        self.i = 0
        self.sorts = dict(sorts or {})

    # -- helpers
    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, val):
        t = self.peek()
        return t[1] == val and t[0] in ("op", "ident")

    def error(self, msg):
        _, val, line, col = self.peek()
        return ParseError(f"{msg} (found {val!r})" if val else f"{msg} (found end of input)", line, col)

    def expect(self, val):
        if not self.at(val):
            raise self.error(f"expected {val!r}")
        self.i += 1

    def accept(self, val):
        if self.at(val):
            self.i += 1
            return True
        return False

    def ident(self):
        kind, val, line, col = self.peek()
        if kind != "ident" or val in _KEYWORDS:
            raise self.error("expected identifier")
        self.i += 1
        return val, line, col

    def symbol(self, raw, line, col):
        name, _, idx = raw.partition("@")
        base = name.split("#")[0]
        sort = self.sorts.get(base)
        if sort is None:
            raise ParseError(f"undeclared variable {name!r}", line, col)
        index = int(idx) if idx else None
        return BoolVar(name, index) if sort == BOOL else Var(name, index)

    # -- file
    def file(self) -> AnnotatedLoop:
        decls = []
        while self.at(RAT) or self.at(INT) or self.at(BOOL):
            sort = self.peek()[1]
            self.i += 1
            while True:
                name, line, col = self.ident()
                if name in self.sorts:
                    raise ParseError(f"duplicate declaration of {name!r}", line, col)
                self.sorts[name] = sort
                decls.append((name, sort))
                if not self.accept(","):
                    break
            self.expect(";")
        self.expect("pre")
        self.expect("{")
        pre = self.bexp()
        self.expect("}")
        self.expect("while")
        self.expect("(")
        guard = self.bexp()
        self.expect(")")
        self.expect("{")
        body = self.stmts()
        self.expect("}")
        self.expect("post")
        self.expect("{")
        post = self.bexp()
        self.expect("}")
        if self.peek()[0] != "eof":
            raise self.error("trailing input")
        if not body:
            body = (Nop(),)
        return AnnotatedLoop(tuple(decls), pre, guard, body, post)

    def stmts(self) -> tuple:
        out = []
        while not self.at("}"):
            s = self.stmt()
            out.append(s)
            # the terminator is optional after a braced block
            if isinstance(s, If):
                self.accept(";")
            else:
                self.expect(";")
        return tuple(out)

    def stmt(self):
        if self.accept("nop"):
            return Nop()
        if self.accept("assume"):
            self.expect("(")
            c = self.bexp()
            self.expect(")")
            return Assume(c)
        if self.accept("if"):
            self.expect("(")
            c = self.bexp()
            self.expect(")")
            self.expect("{")
            then = self.stmts()
            self.expect("}")
            els = ()
            if self.accept("else"):
                self.expect("{")
                els = self.stmts()
                self.expect("}")
            return If(c, then, els)
        raw, line, col = self.ident()
        v = self.symbol(raw, line, col)
        self.expect(":=")
        if self.accept("nondet"):
            return Havoc(v)
        if isinstance(v, BoolVar):
            return Assign(v, self.bexp())
        return Assign(v, self.exp())

    # -- boolean expressions
    def bexp(self) -> Formula:
        parts = [self.band()]
        while self.accept("||"):
            parts.append(self.band())
        return disj(*parts) if len(parts) > 1 else parts[0]

    def band(self) -> Formula:
        parts = [self.bunary()]
        while self.accept("&&"):
            parts.append(self.bunary())
        return conj(*parts) if len(parts) > 1 else parts[0]

    def bunary(self) -> Formula:
        if self.accept("!"):
            return neg(self.bunary())
        if self.accept("true"):
            return TRUE
        if self.accept("false"):
            return FALSE
        kind, val, line, col = self.peek()
        if kind == "ident" and val not in _KEYWORDS:
            s = self.symbol(val, line, col)
            if isinstance(s, BoolVar):
                self.i += 1
                return s
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            f = self.bexp()
            self.expect(")")
            return f
        return self.comparison()

    def comparison(self) -> Formula:
        left = self.exp()
        op = self.peek()[1]
        if op not in ("<", "<=", "=", "!=", ">", ">="):
            raise self.error("expected comparison operator")
        self.i += 1
        right = self.exp()
        if op == "<":
            return Lt(left, right)
        if op == "<=":
            return Le(left, right)
        if op == "=":
            return Eq(left, right)
        if op == "!=":
            return neg(Eq(left, right))
        if op == ">":
            return Lt(right, left)
        return Le(right, left)

    # -- arithmetic expressions
    def exp(self) -> Term:
        t = self.factor()
        while True:
            if self.accept("+"):
                t = Add(t, self.factor())
            elif self.accept("-"):
                t = Sub(t, self.factor())
            else:
                return t

    def literal(self):
        sign = -1 if self.accept("-") else 1
        kind, val, line, col = self.peek()
        if kind != "num":
            raise self.error("expected number")
        self.i += 1
        v = Fraction(int(val))
        if self.at("/") and self.peek(1)[0] == "num":
            self.i += 1
            v /= int(self.peek()[1])
            self.i += 1
        return sign * v

    def factor(self) -> Term:
        kind, val, line, col = self.peek()
        if kind == "num" or (val == "-" and self.peek(1)[0] == "num"):
            v = self.literal()
            if self.accept("*"):
                return Mul(v, self.factor())
            return Const(v)
        if self.at("("):
            save = self.i
            self.i += 1
            if self.peek()[1] == "-" and self.peek(1)[0] == "num" and self.peek(2)[1] == ")":
                v = self.literal()
                self.expect(")")
                if self.accept("*"):
                    return Mul(v, self.factor())
                return Const(v)
            if self.peek()[0] == "num" and self.peek(1)[1] == "/":
                v = self.literal()
                self.expect(")")
                return Const(v)
            try:
                t = self.exp()
                self.expect(")")
                return t
            except ParseError:
                self.i = save
                raise
        raw, line, col = self.ident()
        s = self.symbol(raw, line, col)
        if not isinstance(s, Var):
            raise ParseError(f"Boolean variable {raw!r} used in arithmetic", line, col)
        return s


def parse(text: str, name: str = "") -> AnnotatedLoop:
    """Parse an annotated loop; raises :class:`ParseError` with line/column."""
    loop = _Parser(text).file()
    if name:
        object.__setattr__(loop, "name", name)
    return loop


def parse_formula(text: str, sorts: dict) -> Formula:
    """Parse a standalone Boolean formula given ``{name: 'rat'|'int'|'bool'}``."""
    p = _Parser(text, sorts)
    f = p.bexp()
    if p.peek()[0] != "eof":
        raise p.error("trailing input")
    return f


def parse_term(text: str, sorts: dict) -> Term:
    p = _Parser(text, sorts)
    t = p.exp()
    if p.peek()[0] != "eof":
        raise p.error("trailing input")
    return t


def load(path) -> AnnotatedLoop:
    from pathlib import Path

    p = Path(path)
    return parse(p.read_text(encoding="utf-8"), name=p.stem)


# ------------------------------------------------------------------ printing


def _stmts_text(stmts, indent) -> list[str]:
    pad = "  " * indent
    lines = []
    for s in stmts:
        if isinstance(s, Nop):
            lines.append(f"{pad}nop;")
        elif isinstance(s, Assign):
            lines.append(f"{pad}{to_text(s.var)} := {to_text(s.rhs)};")
        elif isinstance(s, Havoc):
            lines.append(f"{pad}{to_text(s.var)} := nondet;")
        elif isinstance(s, Assume):
            lines.append(f"{pad}assume ({to_text(s.cond)});")
        elif isinstance(s, If):
            lines.append(f"{pad}if ({to_text(s.cond)}) {{")
            lines += _stmts_text(s.then, indent + 1)
            if s.els:
                lines.append(f"{pad}}} else {{")
                lines += _stmts_text(s.els, indent + 1)
            lines.append(f"{pad}}};")
    return lines


def to_source(loop: AnnotatedLoop) -> str:
    lines = []
    runs: list = []
    for n, sort in loop.decls:
        if runs and runs[-1][0] == sort:
            runs[-1][1].append(n)
        else:
            runs.append((sort, [n]))
    for sort, names in runs:
        lines.append(f"{sort} {', '.join(names)};")
    lines.append(f"pre {{ {to_text(loop.pre)} }}")
    lines.append(f"while ({to_text(loop.guard)}) {{")
    lines += _stmts_text(loop.body, 1)
    lines.append("}")
    lines.append(f"post {{ {to_text(loop.post)} }}")
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------ semantics


def _equal(a, b) -> Formula:
    if isinstance(a, Var):
        return Eq(a, b)
    return iff(a, b)


def _exec(stmts, state: dict, fresh: FreshNames, havocs: set):
    constraints = []
    for s in stmts:
        if isinstance(s, Nop):
            continue
        if isinstance(s, Assign):
            state = dict(state)
            state[s.var] = substitute(s.rhs, state)
        elif isinstance(s, Havoc):
            state = dict(state)
            h = fresh.like(s.var)
            havocs.add(h)
            state[s.var] = h
        elif isinstance(s, Assume):
            constraints.append(substitute(s.cond, state))
        elif isinstance(s, If):
            c = substitute(s.cond, state)
            c1, s1 = _exec(s.then, state, fresh, havocs)
            c2, s2 = _exec(s.els, state, fresh, havocs)
            merged = {}
            eq1, eq2 = [], []
            for v in state:
                if s1[v] == s2[v]:
                    merged[v] = s1[v]
                else:
                    m = fresh.like(v)
                    merged[v] = m
                    eq1.append(_equal(m, s1[v]))
                    eq2.append(_equal(m, s2[v]))
            constraints.append(disj(conj(c, c1, *eq1), conj(neg(c), c2, *eq2)))
            state = merged
        else:
            raise TypeError(f"unknown statement {s!r}")
    return conj(*constraints), state


def transition(stmt, variables: Sequence, fresh: FreshNames | None = None) -> Formula:
    """Transition formula over ``X<0>``, ``X<1>`` and fresh intermediate symbols.

    ``stmt`` may be a single statement or a list (a sequence).  Intermediate
    states are represented by fresh symbols that occur nowhere else, which is
    equisatisfiable with the existential reading of sequencing.
    """
    fresh = fresh or FreshNames()
    stmts = stmt if isinstance(stmt, (list, tuple)) else (stmt,)
    init = {v: type(v)(v.name, 0) for v in variables}
    havocs: set = set()
    c, state = _exec(stmts, init, fresh, havocs)
    used = symbols(c)
    for v in variables:
        if state[v] not in havocs:
            used |= symbols(state[v])
    eqs = []
    for v in variables:
        t = state[v]
        if t in havocs and t not in used and sum(1 for w in variables if state[w] == t) == 1:
            continue
        eqs.append(_equal(type(v)(v.name, 1), t))
    return conj(*eqs, c)


def pre_condition(theta: Formula, stmts, fresh: FreshNames | None = None) -> Formula:
    """Weakest precondition; havoc is Skolemized with fresh constants."""
    fresh = fresh or FreshNames()
    stmts = stmts if isinstance(stmts, (list, tuple)) else (stmts,)
    for s in reversed(stmts):
        if isinstance(s, Nop):
            continue
        if isinstance(s, Assign):
            theta = substitute(theta, {s.var: s.rhs})
        elif isinstance(s, Havoc):
            theta = substitute(theta, {s.var: fresh.like(s.var)})
        elif isinstance(s, Assume):
            theta = implies(s.cond, theta)
        elif isinstance(s, If):
            theta = conj(
                implies(s.cond, pre_condition(theta, s.then, fresh)),
                implies(neg(s.cond), pre_condition(theta, s.els, fresh)),
            )
        else:
            raise TypeError(f"unknown statement {s!r}")
    return theta


def xi_sequence(phi: Formula, body, psi: Formula, variables, fresh: FreshNames | None = None) -> list:
    """``[phi<0>, [[S1]]<0>, ..., [[Sm]]<m-1>, !psi<m>]``."""
    fresh = fresh or FreshNames()
    seq = [superscript(phi, 0)]
    for i, s in enumerate(body):
        seq.append(shift(transition(s, variables, fresh), i))
    seq.append(neg(superscript(psi, len(body))))
    return seq


def program_atoms(loop: AnnotatedLoop) -> set:
    """Atoms syntactically present in the annotations, guard and conditions."""
    out = atoms_of(loop.pre) | atoms_of(loop.guard) | atoms_of(loop.post)

    def walk(stmts):
        for s in stmts:
            if isinstance(s, Assume):
                out.update(atoms_of(s.cond))
            elif isinstance(s, If):
                out.update(atoms_of(s.cond))
                walk(s.then)
                walk(s.els)
            elif isinstance(s, Assign) and isinstance(s.var, BoolVar):
                out.update(atoms_of(s.rhs))

    walk(loop.body)
    return out
