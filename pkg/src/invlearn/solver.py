"""Satisfiability for quantifier-free linear rational arithmetic with Booleans.

The formula is put in negation normal form, where every arithmetic literal
occurs positively (``!(a <= b)`` becomes ``b < a``; a negated equality
becomes a disjunction of two strict inequalities), and then
Plaisted-Greenbaum encoded for a small CDCL search.  Because theory atoms
are monotone in the encoding, only atoms assigned true are sent to the
simplex; an atom decided false imposes nothing.  The simplex is consulted at
every propagation fixpoint and its Farkas explanations become learned
clauses.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .logic import (
    FALSE,
    TRUE,
    And,
    BoolVar,
    Eq,
    Formula,
    Le,
    Lt,
    Not,
    Or,
    Var,
    Const,
    _Cmp,
    conj,
    disj,
    evaluate,
    linear_constraint,
    make_constraint,
    neg,
    symbols,
)
from .simplex import Simplex


class SolverTimeout(Exception):
    pass


@dataclass
class SatResult:
    sat: bool
    model: dict | None = None
    core: frozenset | None = None

    def __bool__(self):
        return self.sat


@dataclass
class ValidityResult:
    valid: bool
    counterexample: dict | None = None

    def __bool__(self):
        return self.valid


@dataclass
class SolverConfig:
    backend: str = "builtin"
    command: str = "z3 -in -smt2"
    time_limit_ms: int = 30_000

    def __post_init__(self):
        if self.time_limit_ms <= 0:
            raise ValueError("time limit must be positive")
        if self.backend not in ("builtin", "external"):
            raise ValueError(f"unknown backend {self.backend!r}")


# ---------------------------------------------------------------- encoding

BRANCH_LIMIT = 200


def is_integer_symbol(s, integers) -> bool:
    return isinstance(s, Var) and s.name.split("#")[0] in integers


def tighten(coeffs: dict, const, op: str, integers=frozenset()):
    """Strengthen a constraint whose variables are all integers.

    ``c + sum a*x < 0`` becomes ``c + 1 + sum a*x <= 0`` and the constant is
    rounded after dividing by the coefficient gcd; both steps preserve the
    integer solutions exactly.
    """
    if not integers or not coeffs or not all(is_integer_symbol(v, integers) for v in coeffs):
        return coeffs, const, op
    c = make_constraint(coeffs, const, op)
    if c in (TRUE, FALSE):
        return {}, Fraction(0 if c == TRUE else 1), "<="
    coeffs, const, op = linear_constraint(c)
    g = 0
    for a in coeffs.values():
        g = math.gcd(g, int(a))
    k = int(const)
    if op == "=":
        if k % g:
            return {}, Fraction(1), "<="
        return {v: a / g for v, a in coeffs.items()}, Fraction(k // g), "="
    if op == "<":
        k += 1
    return {v: a / g for v, a in coeffs.items()}, Fraction(-((-k) // g)), "<="



class _Encoder:
    def __init__(self, sat: "_Sat", integers=frozenset()):
        self.sat = sat
        self.integers = integers
        self.memo: dict = {}
        self.bool_vars: dict = {}
        self.atoms: dict = {}  # canonical constraint formula -> sat var
        self.atom_forms: dict = {}  # sat var -> (coeffs, const, op)
        self.true_var = sat.new_var()
        sat.add_clause([self.true_var])

    def atom(self, f: _Cmp) -> int:
        c = make_constraint(*tighten(*linear_constraint(f), self.integers))
        if c == TRUE:
            return self.true_var
        if c == FALSE:
            return -self.true_var
        v = self.atoms.get(c)
        if v is None:
            v = self.sat.new_var()
            self.atoms[c] = v
            self.atom_forms[v] = linear_constraint(c)
        return v

    def encode(self, f: Formula, pol: bool = True) -> int:
        key = (f, pol)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        lit = self._encode(f, pol)
        self.memo[key] = lit
        return lit

    def _encode(self, f, pol):
        if f == TRUE:
            return self.true_var if pol else -self.true_var
        if f == FALSE:
            return -self.true_var if pol else self.true_var
        if isinstance(f, BoolVar):
            v = self.bool_vars.get(f)
            if v is None:
                v = self.sat.new_var()
                self.bool_vars[f] = v
            return v if pol else -v
        if isinstance(f, Not):
            return self.encode(f.arg, not pol)
        if isinstance(f, _Cmp):
            if pol:
                return self.atom(f)
            if isinstance(f, Le):
                return self.atom(Lt(f.right, f.left))
            if isinstance(f, Lt):
                return self.atom(Le(f.right, f.left))
            return self._gate_or([self.atom(Lt(f.left, f.right)), self.atom(Lt(f.right, f.left))])
        if isinstance(f, (And, Or)):
            kids = [self.encode(a, pol) for a in f.args]
            if isinstance(f, And) == pol:
                return self._gate_and(kids)
            return self._gate_or(kids)
        raise TypeError(f"cannot encode {f!r}")

    def _gate_and(self, kids):
        g = self.sat.new_var()
        for k in kids:
            self.sat.add_clause([-g, k])
        return g

    def _gate_or(self, kids):
        g = self.sat.new_var()
        self.sat.add_clause([-g] + kids)
        return g

    def assert_formula(self, f: Formula):
        parts = f.args if isinstance(f, And) else (f,)
        for p in parts:
            if isinstance(p, Or):
                self.sat.add_clause([self.encode(a) for a in p.args])
            else:
                self.sat.add_clause([self.encode(p)])


# --------------------------------------------------------------------- CDCL


class _Sat:
    def __init__(self):
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.value = [0]
        self.level = [0]
        self.reason: list = [None]
        self.activity = [0.0]
        self.phase = [-1]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.th_head = 0
        self.heap: list = []
        self.inc = 1.0
        self.unsat = False
        self.pending_units: list[int] = []
        self.conflicts = 0

    def new_var(self) -> int:
        self.value.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(-1)
        v = len(self.value) - 1
        self.watches[v] = []
        self.watches[-v] = []
        heapq.heappush(self.heap, (0.0, v))
        return v

    def lit_value(self, lit: int) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def add_clause(self, lits):
        lits = list(dict.fromkeys(lits))
        s = set(lits)
        if any(-l in s for l in lits):
            return
        if not lits:
            self.unsat = True
            return
        if len(lits) == 1:
            self.pending_units.append(lits[0])
            return
        self.clauses.append(lits)
        ci = len(self.clauses) - 1
        self.watches[lits[0]].append(ci)
        self.watches[lits[1]].append(ci)

    def enqueue(self, lit, reason):
        v = abs(lit)
        self.value[v] = 1 if lit > 0 else -1
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)

    def propagate(self):
        clauses = self.clauses
        value = self.value
        while self.qhead < len(self.trail):
            p = self.trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            ws = self.watches[false_lit]
            i = j = 0
            n = len(ws)
            while i < n:
                ci = ws[i]
                i += 1
                c = clauses[ci]
                if c[0] == false_lit:
                    c[0], c[1] = c[1], c[0]
                first = c[0]
                fv = value[abs(first)]
                if (fv if first > 0 else -fv) == 1:
                    ws[j] = ci
                    j += 1
                    continue
                moved = False
                for k in range(2, len(c)):
                    lk = c[k]
                    vk = value[abs(lk)]
                    if (vk if lk > 0 else -vk) != -1:
                        c[1], c[k] = lk, c[1]
                        self.watches[lk].append(ci)
                        moved = True
                        break
                if moved:
                    continue
                ws[j] = ci
                j += 1
                if (fv if first > 0 else -fv) == -1:
                    while i < n:
                        ws[j] = ws[i]
                        j += 1
                        i += 1
                    del ws[j:]
                    self.qhead = len(self.trail)
                    return ci
                self.enqueue(first, ci)
            del ws[j:]
        return None

    def bump(self, v):
        self.activity[v] += self.inc
        if self.activity[v] > 1e100:
            for i in range(1, len(self.activity)):
                self.activity[i] *= 1e-100
            self.inc *= 1e-100
            self.heap = [(-self.activity[u], u) for u in range(1, len(self.value)) if self.value[u] == 0]
            heapq.heapify(self.heap)
        if self.value[v] == 0:
            heapq.heappush(self.heap, (-self.activity[v], v))

    def analyze(self, confl):
        cur = len(self.trail_lim)
        seen = set()
        learnt = [0]
        counter = 0
        p = None
        idx = len(self.trail) - 1
        clause = self.clauses[confl]
        while True:
            for q in clause:
                if p is not None and q == p:
                    continue
                v = abs(q)
                if v not in seen and self.level[v] > 0:
                    seen.add(v)
                    self.bump(v)
                    if self.level[v] >= cur:
                        counter += 1
                    else:
                        learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            idx -= 1
            seen.discard(abs(p))
            counter -= 1
            if counter == 0:
                break
            clause = self.clauses[self.reason[abs(p)]]
        learnt[0] = -p
        bt = 0
        if len(learnt) > 1:
            best = max(range(1, len(learnt)), key=lambda i: self.level[abs(learnt[i])])
            learnt[1], learnt[best] = learnt[best], learnt[1]
            bt = self.level[abs(learnt[1])]
        self.inc /= 0.95
        return learnt, bt

    def backtrack(self, lvl, theory):
        if len(self.trail_lim) <= lvl:
            return
        lim = self.trail_lim[lvl]
        for lit in self.trail[lim:]:
            v = abs(lit)
            self.phase[v] = 1 if lit > 0 else -1
            self.value[v] = 0
            self.reason[v] = None
            heapq.heappush(self.heap, (-self.activity[v], v))
        del self.trail[lim:]
        theory.pop(len(self.trail_lim) - lvl)
        del self.trail_lim[lvl:]
        self.qhead = len(self.trail)
        self.th_head = min(self.th_head, len(self.trail))

    def pick(self):
        while self.heap:
            _, v = heapq.heappop(self.heap)
            if self.value[v] == 0:
                return v
        for v in range(1, len(self.value)):
            if self.value[v] == 0:
                return v
        return None


class _Search:
    """CDCL over the encoding with simplex checks at propagation fixpoints."""

    def __init__(self, enc: _Encoder, deadline: float):
        self.sat = enc.sat
        self.enc = enc
        self.deadline = deadline
        self.theory = Simplex()
        self.cid_of: dict[int, int] = {}
        self.var_of_cid: dict[int, int] = {}
        for v, (coeffs, const, op) in enc.atom_forms.items():
            cid = self.theory.register(coeffs, const, op)
            self.cid_of[v] = cid
            self.var_of_cid[cid] = v

    def _theory(self):
        sat = self.sat
        changed = False
        while sat.th_head < len(sat.trail):
            lit = sat.trail[sat.th_head]
            sat.th_head += 1
            if lit > 0:
                cid = self.cid_of.get(lit)
                if cid is not None:
                    changed = True
                    cert = self.theory.assert_constraint(cid)
                    if cert:
                        return self._conflict_clause(cert)
        if changed or self.theory.dirty:
            cert = self.theory.check()
            if cert:
                return self._conflict_clause(cert)
        return None

    def _conflict_clause(self, cert):
        sat = self.sat
        lits = [-self.var_of_cid[c] for c in cert]
        lits.sort(key=lambda l: -sat.level[abs(l)])
        top = sat.level[abs(lits[0])]
        if top < len(sat.trail_lim):
            sat.backtrack(top, self.theory)
        if top == 0:
            return "unsat"
        if len(lits) == 1:
            sat.clauses.append(lits)
            return len(sat.clauses) - 1
        sat.clauses.append(lits)
        ci = len(sat.clauses) - 1
        sat.watches[lits[0]].append(ci)
        sat.watches[lits[1]].append(ci)
        return ci

    def run(self) -> bool:
        sat = self.sat
        if sat.unsat:
            return False
        for u in sat.pending_units:
            val = sat.lit_value(u)
            if val == -1:
                return False
            if val == 0:
                sat.enqueue(u, None)
        restart_limit = 100
        since_restart = 0
        steps = 0
        while True:
            steps += 1
            if steps & 63 == 0 and time.monotonic() > self.deadline:
                raise SolverTimeout()
            confl = sat.propagate()
            if confl is None:
                confl = self._theory()
            if confl is not None:
                if confl == "unsat" or not sat.trail_lim:
                    return False
                sat.conflicts += 1
                since_restart += 1
                learnt, bt = sat.analyze(confl)
                sat.backtrack(bt, self.theory)
                if len(learnt) == 1:
                    sat.enqueue(learnt[0], None)
                else:
                    sat.clauses.append(learnt)
                    ci = len(sat.clauses) - 1
                    sat.watches[learnt[0]].append(ci)
                    sat.watches[learnt[1]].append(ci)
                    sat.enqueue(learnt[0], ci)
                continue
            if since_restart >= restart_limit:
                since_restart = 0
                restart_limit = int(restart_limit * 1.5)
                sat.backtrack(0, self.theory)
                continue
            v = sat.pick()
            if v is None:
                return True
            sat.trail_lim.append(len(sat.trail))
            self.theory.push()
            sat.enqueue(v * sat.phase[v], None)

    def model(self, wanted) -> dict:
        rats = self.theory.model()
        out = {}
        for s in wanted:
            if isinstance(s, BoolVar):
                v = self.enc.bool_vars.get(s)
                out[s] = v is not None and self.sat.value[v] == 1
            else:
                out[s] = rats.get(s, Fraction(0))
        return out


# ------------------------------------------------------------------- facade


class Solver:
    """Entry point for every satisfiability/validity query of one engine run.

    Instances are cheap and single-threaded; they keep query counters and an
    optional log of queried formulas for backend cross-checks.
    """

    def __init__(self, config: SolverConfig | None = None, log_queries: bool = False, integers=frozenset()):
        self.config = config or SolverConfig()
        self.integers = frozenset(integers)
        self.queries = 0
        self.log: list | None = [] if log_queries else None
        self.deadline: float | None = None
        self._external = None
        if self.config.backend == "external":
            from .smtlib import ExternalSolver

            self._external = ExternalSolver(self.config.command, self.config.time_limit_ms)

    def check_sat(self, f: Formula, time_limit_ms: int | None = None) -> SatResult:
        self.queries += 1
        if self.log is not None:
            self.log.append(f)
        limit = time_limit_ms or self.config.time_limit_ms
        if self.deadline is not None:
            left = int((self.deadline - time.monotonic()) * 1000)
            if left <= 0:
                raise SolverTimeout("run deadline reached")
            limit = min(limit, left)
        if self._external is not None:
            return self._external.check_sat(f, limit, self.integers)
        return check_sat(f, time_limit_ms=limit, integers=self.integers)

    def check_valid(self, f: Formula) -> ValidityResult:
        r = self.check_sat(neg(f))
        if r.sat:
            return ValidityResult(False, r.model)
        return ValidityResult(True)

    def is_sat(self, f: Formula) -> bool:
        return self.check_sat(f).sat

    def is_valid(self, f: Formula) -> bool:
        return self.check_valid(f).valid


def check_sat(f: Formula, time_limit_ms: int = 30_000, integers=frozenset()) -> SatResult:
    """Decide ``f`` with the builtin procedure; models cover every free symbol.

    Variables named in ``integers`` (and their indexed or fresh copies) range
    over the integers.  Integral models are sought by branch and bound; if
    the branch budget runs out the rational model found last is returned.
    """
    wanted = symbols(f)
    if f == TRUE:
        return SatResult(True, {s: False if isinstance(s, BoolVar) else Fraction(0) for s in wanted})
    if f == FALSE:
        return SatResult(False)
    deadline = time.monotonic() + time_limit_ms / 1000
    query = f
    model = None
    for _ in range(BRANCH_LIMIT):
        sat = _Sat()
        enc = _Encoder(sat, integers)
        enc.assert_formula(query)
        search = _Search(enc, deadline)
        if not search.run():
            return SatResult(False)
        model = search.model(wanted)
        frac = next(
            (s for s in sorted(wanted, key=_key) if is_integer_symbol(s, integers) and model[s].denominator != 1),
            None,
        )
        if frac is None:
            break
        v = model[frac]
        query = conj(query, disj(Le(frac, Const(math.floor(v))), Le(Const(math.ceil(v)), frac)))
    assert evaluate(f, model), "builtin solver produced a non-model"
    return SatResult(True, model)


def _key(s):
    return (s.name, -1 if s.index is None else s.index)


def check_valid(f: Formula, time_limit_ms: int = 30_000, integers=frozenset()) -> ValidityResult:
    r = check_sat(neg(f), time_limit_ms, integers)
    return ValidityResult(False, r.model) if r.sat else ValidityResult(True)
