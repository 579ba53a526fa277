"""SMT-LIB2 client for an external solver process.

The formula is printed as one script (declarations, one assertion,
``check-sat``, ``get-model``) and fed to the command on stdin, or through a
temporary file when the command template contains ``{file}``.
"""

from __future__ import annotations

import os
import re
import shlex
import subprocess
import tempfile
from fractions import Fraction

from .logic import (
    FALSE,
    TRUE,
    Add,
    And,
    BoolVar,
    Const,
    Eq,
    Formula,
    Le,
    Lt,
    Mul,
    Not,
    Or,
    Sub,
    Var,
    evaluate,
    linear_constraint,
    make_constraint,
    symbols,
)
from .solver import SatResult, SolverTimeout, is_integer_symbol


class ExternalSolverError(Exception):
    """The external process failed or answered something unparsable."""


def _num(v: Fraction) -> str:
    def nat(x):
        return f"{x}.0" if x.denominator == 1 else f"(/ {x.numerator}.0 {x.denominator}.0)"

    return nat(v) if v >= 0 else f"(- {nat(-v)})"


def _int(v: Fraction) -> str:
    return str(v.numerator) if v >= 0 else f"(- {-v.numerator})"


class _Printer:
    def __init__(self, f: Formula, integers):
        self.names: dict = {}
        self.sorts: dict = {}
        for i, s in enumerate(sorted(symbols(f), key=lambda s: (s.name, s.index if s.index is not None else -1))):
            name = f"|v{i}|"
            self.names[s] = name
            if isinstance(s, BoolVar):
                self.sorts[s] = "Bool"
            else:
                self.sorts[s] = "Int" if is_integer_symbol(s, integers) else "Real"
        kinds = set(self.sorts.values()) - {"Bool"}
        self.logic = "QF_LIRA" if kinds == {"Int", "Real"} else "QF_LIA" if kinds == {"Int"} else "QF_LRA"

    def term(self, t) -> str:
        if isinstance(t, Const):
            return _num(t.value)
        if isinstance(t, Var):
            return self._var(t)
        if isinstance(t, Add):
            return f"(+ {self.term(t.left)} {self.term(t.right)})"
        if isinstance(t, Sub):
            return f"(- {self.term(t.left)} {self.term(t.right)})"
        if isinstance(t, Mul):
            return f"(* {_num(t.coef)} {self.term(t.term)})"
        raise TypeError(f"not a term: {t!r}")

    def _var(self, v) -> str:
        name = self.names[v]
        return f"(to_real {name})" if self.sorts[v] == "Int" else name

    def formula(self, f) -> str:
        if f is TRUE:
            return "true"
        if f is FALSE:
            return "false"
        if isinstance(f, BoolVar):
            return self.names[f]
        if isinstance(f, Not):
            return f"(not {self.formula(f.arg)})"
        if isinstance(f, (And, Or)):
            op = "and" if isinstance(f, And) else "or"
            return f"({op} {' '.join(self.formula(a) for a in f.args)})"
        if isinstance(f, (Lt, Le, Eq)):
            syms = symbols(f)
            if syms and all(self.sorts[v] == "Int" for v in syms):
                return self._int_atom(f)
            return f"({f.op} {self.term(f.left)} {self.term(f.right)})"
        raise TypeError(f"not a formula: {f!r}")

    def _int_atom(self, f) -> str:
        # z3 can stall on to_real-wrapped integer constraints, so keep them in Int
        c = make_constraint(*linear_constraint(f))
        if c in (TRUE, FALSE):
            return self.formula(c)
        coeffs, const, op = linear_constraint(c)
        parts = [self.names[v] if a == 1 else f"(* {_int(a)} {self.names[v]})" for v, a in coeffs.items()]
        lhs = parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"
        return f"({op} {lhs} {_int(-const)})"

    def script(self, f: Formula) -> str:
        lines = [f"(set-logic {self.logic})", "(set-option :produce-models true)"]
        lines += [f"(declare-fun {self.names[s]} () {self.sorts[s]})" for s in self.names]
        lines += [f"(assert {self.formula(f)})", "(check-sat)", "(get-model)", "(exit)"]
        return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\s*(?:(\()|(\))|(\|[^|]*\|)|(\"(?:[^\"]|\"\")*\")|([^\s()|\"]+))")


def parse_sexprs(text: str) -> list:
    """All top-level s-expressions of ``text`` as nested lists of strings."""
    stack: list = [[]]
    pos = 0
    text = re.sub(r";[^\n]*", "", text)
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ExternalSolverError(f"cannot tokenize solver output at {text[pos:pos + 20]!r}")
            break
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise ExternalSolverError("unbalanced ')' in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(m.group(0).strip())
    if len(stack) != 1:
        raise ExternalSolverError("unbalanced '(' in solver output")
    return stack[0]


def _value(e):
    if isinstance(e, str):
        if e == "true":
            return True
        if e == "false":
            return False
        try:
            return Fraction(e)
        except ValueError:
            raise ExternalSolverError(f"unexpected model value {e!r}") from None
    if len(e) == 2 and e[0] == "-":
        return -_value(e[1])
    if len(e) == 3 and e[0] == "/":
        return _value(e[1]) / _value(e[2])
    if len(e) == 2 and e[0] == "to_real":
        return _value(e[1])
    raise ExternalSolverError(f"unexpected model value {e!r}")


def parse_model(sexprs: list) -> dict:
    """Map quoted symbol names to values from ``(model (define-fun ...) ...)`` or a bare list."""
    out = {}
    items = sexprs
    if items and items[0] == "model":
        items = items[1:]
    for d in items:
        if isinstance(d, list) and len(d) == 5 and d[0] == "define-fun" and d[2] == []:
            name = d[1] if d[1].startswith("|") else f"|{d[1]}|"
            out[name] = _value(d[4])
    return out


class ExternalSolver:
    def __init__(self, command: str, time_limit_ms: int = 30_000):
        self.command = command
        self.time_limit_ms = time_limit_ms

    def check_sat(self, f: Formula, time_limit_ms: int | None = None, integers=frozenset()) -> SatResult:
        limit = time_limit_ms or self.time_limit_ms
        printer = _Printer(f, integers)
        out = self._run(printer.script(f), limit)
        exprs = parse_sexprs(out)
        if not exprs:
            raise ExternalSolverError("empty solver output")
        verdict = exprs[0]
        if verdict == "unsat":
            return SatResult(False)
        errors = [e for e in exprs if isinstance(e, list) and e and e[0] == "error"]
        if errors:
            raise ExternalSolverError(f"solver reported {errors[0]!r}")
        if verdict == "unknown":
            raise SolverTimeout("external solver answered unknown")
        if verdict != "sat":
            raise ExternalSolverError(f"unexpected verdict {verdict!r}")
        values = parse_model(exprs[1]) if len(exprs) > 1 and isinstance(exprs[1], list) else {}
        model = {}
        for s, name in printer.names.items():
            default = False if isinstance(s, BoolVar) else Fraction(0)
            model[s] = values.get(name, default)
        assert evaluate(f, model), "external model does not satisfy the query"
        return SatResult(True, model)

    def _run(self, script: str, limit_ms: int) -> str:
        path = None
        try:
            if "{file}" in self.command:
                fd, path = tempfile.mkstemp(suffix=".smt2")
                with os.fdopen(fd, "w") as fh:
                    fh.write(script)
                argv = shlex.split(self.command.replace("{file}", shlex.quote(path)))
                stdin = None
            else:
                argv = shlex.split(self.command)
                stdin = script
            proc = subprocess.run(argv, input=stdin, capture_output=True, text=True, timeout=limit_ms / 1000)
        except subprocess.TimeoutExpired:
            raise SolverTimeout("external solver exceeded its time limit") from None
        except OSError as exc:
            raise ExternalSolverError(f"cannot run {self.command!r}: {exc}") from exc
        finally:
            if path is not None:
                os.unlink(path)
        if not proc.stdout.strip():
            raise ExternalSolverError(f"solver failed ({proc.returncode}): {proc.stdout.strip() or proc.stderr.strip()}")
        return proc.stdout
