"""Random generators and brute-force oracles shared by the test modules."""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from pathlib import Path

from invlearn.frontend import Assign, Assume, Havoc, Nop, load
from invlearn.logic import (
    Add,
    BoolVar,
    Const,
    Eq,
    Le,
    Lt,
    Mul,
    Not,
    conj,
    disj,
    evaluate,
    evaluate_term,
    symbols,
)
from invlearn.solver import SatResult, Solver

CORPUS = Path(__file__).resolve().parents[1] / "src" / "invlearn" / "corpus"
CORPUS_NAMES = ("intro", "tar", "parser", "ide-wait-ireason")

# Invariants checked by hand for each corpus loop.
KNOWN_INVARIANTS = {
    "intro": "x = y && x >= 0",
    "tar": "M + N <= copy + size && copy + size <= M + N",
    "parser": None,  # post || guard is inductive; built in corpus_invariant
    "ide-wait-ireason": "retries <= 100 && (!(retries = 100) || !cod || io) && (!(retries = 0) || (cod && !io))",
}


def corpus_loop(name):
    return load(CORPUS / f"{name}.loop")


def corpus_invariant(name):
    from invlearn.frontend import parse_formula

    loop = corpus_loop(name)
    text = KNOWN_INVARIANTS[name]
    if text is None:
        return loop, disj(loop.post, loop.guard)
    return loop, parse_formula(text, loop.sorts)


def rand_term(rng: random.Random, xs, coef=(-2, -1, 1, 2), consts=(-1, 0, 1, 2)):
    k = rng.randint(1, min(2, len(xs)))
    chosen = rng.sample(list(xs), k)
    t = None
    for x in chosen:
        c = rng.choice(coef)
        piece = x if c == 1 else Mul(c, x)
        t = piece if t is None else Add(t, piece)
    c = rng.choice(consts)
    if c:
        t = Add(t, Const(c))
    return t


def rand_atom(rng, xs, consts=(-1, 0, 1, 2)):
    cls = rng.choice((Lt, Le, Eq))
    left = rand_term(rng, xs, consts=consts)
    right = Const(rng.choice(consts)) if rng.random() < 0.6 else rand_term(rng, xs, consts=consts)
    return cls(left, right)


def rand_formula(rng, leaves, depth=2):
    """Random Boolean combination of the given leaf formulas."""
    if depth == 0 or rng.random() < 0.3:
        f = rng.choice(leaves)
        return Not(f) if rng.random() < 0.3 else f
    op = rng.choice((conj, disj, lambda a, b: Not(conj(a, b))))
    return op(rand_formula(rng, leaves, depth - 1), rand_formula(rng, leaves, depth - 1))


def grid_valuations(xs, values=(-1, 0, Fraction(1, 2), 1, 2)):
    for combo in itertools.product(values, repeat=len(xs)):
        yield {x: Fraction(v) for x, v in zip(xs, combo)}


# --------------------------------------------------- straight-line programs

VALUES = (0, 1, 2)


def rand_program(rng, xs, length=None):
    length = rng.randint(1, 3) if length is None else length
    out = []
    for _ in range(length):
        kind = rng.choice(("assign", "assign", "havoc", "assume", "nop"))
        x = rng.choice(xs)
        if kind == "assign":
            out.append(Assign(x, rand_term(rng, xs, coef=(-1, 1, 2), consts=(0, 1, 2))))
        elif kind == "havoc":
            out.append(Havoc(x))
        elif kind == "assume":
            out.append(Assume(rand_atom(rng, xs, consts=(0, 1, 2))))
        else:
            out.append(Nop())
    return out


def run_program(prog, state: dict, choices):
    """Execute with the given havoc choices; ``None`` if an assume blocks."""
    state = dict(state)
    choices = iter(choices)
    for s in prog:
        if isinstance(s, Assign):
            state[s.var] = evaluate_term(s.rhs, state)
        elif isinstance(s, Havoc):
            state[s.var] = Fraction(next(choices))
        elif isinstance(s, Assume):
            if not evaluate(s.cond, state):
                return None
    return state


def havoc_count(prog) -> int:
    return sum(isinstance(s, Havoc) for s in prog)


def executions(prog, state):
    """All final states reachable with havoc values drawn from ``VALUES``."""
    out = []
    for choices in itertools.product(VALUES, repeat=havoc_count(prog)):
        final = run_program(prog, state, choices)
        if final is not None:
            out.append(final)
    return out


def bool_env(names):
    return [BoolVar(n) for n in names]


def truth_table(f, bvars):
    return tuple(evaluate(f, dict(zip(bvars, bits))) for bits in itertools.product((False, True), repeat=len(bvars)))



def restrict_havocs(prog):
    """Follow every havoc with an assume pinning the variable to VALUES."""
    out = []
    for st in prog:
        out.append(st)
        if isinstance(st, Havoc):
            out.append(Assume(disj(*(Eq(st.var, Const(v)) for v in VALUES))))
    return out


def check_program_semantics(prog, xs, theta, solver):
    """Compare transition() and pre_condition() with the brute-force interpreter.

    Returns a list of violation descriptions (empty when both agree).
    """
    from invlearn.frontend import FreshNames, pre_condition, transition
    from invlearn.logic import symbols

    bad = []
    # the interpreter draws nondet values from VALUES; the symbolic relation
    # draws from all rationals, so compare against the restricted program
    rel = transition(restrict_havocs(prog), xs, FreshNames())
    post = pre_condition(theta, prog, FreshNames())
    skolems = sorted((s for s in symbols(post) if s not in xs), key=lambda s: s.name)
    for combo in itertools.product(VALUES, repeat=len(xs)):
        nu = {x: Fraction(v) for x, v in zip(xs, combo)}
        finals = executions(prog, nu)
        reach = {tuple(f[x] for x in xs) for f in finals}
        candidates = set(reach)
        for r in list(reach) + [combo]:
            for i in range(len(xs)):
                for d in (-1, 1):
                    c = list(r)
                    c[i] = Fraction(c[i]) + d
                    candidates.add(tuple(Fraction(v) for v in c))
        for cand in candidates:
            pins = conj(
                *(Eq(type(x)(x.name, 0), Const(v)) for x, v in zip(xs, combo)),
                *(Eq(type(x)(x.name, 1), Const(v)) for x, v in zip(xs, cand)),
            )
            got = solver.check_sat(conj(rel, pins)).sat
            if got != (tuple(Fraction(v) for v in cand) in reach):
                bad.append(("transition", combo, cand, got))
        # Pre: universally quantified Skolem constants over the nondet domain
        expect = all(evaluate(theta, f) for f in finals)
        got = all(
            evaluate(post, {**nu, **dict(zip(skolems, map(Fraction, sk)))})
            for sk in itertools.product(VALUES, repeat=len(skolems))
        )
        if got != expect:
            bad.append(("pre", combo, got, expect))
    return bad


# ------------------------------------------------------------ interpolation


def rand_inconsistent_pair(rng, solver, max_tries=200):
    """Random (A, B) with A & B unsat; A and B share x and y."""
    from invlearn.logic import Var

    x, y, a, c = Var("x"), Var("y"), Var("a"), Var("c")
    p, q = BoolVar("p"), BoolVar("q")
    for _ in range(max_tries):
        a_leaves = [rand_atom(rng, [x, y, a]) for _ in range(3)] + [p]
        b_leaves = [rand_atom(rng, [x, y, c]) for _ in range(3)] + [p, q]
        A = conj(rand_formula(rng, a_leaves, 2), *rng.sample(a_leaves[:3], 2))
        B = conj(rand_formula(rng, b_leaves, 2), *rng.sample(b_leaves[:3], 2))
        if solver.check_sat(A).sat and solver.check_sat(B).sat and not solver.check_sat(conj(A, B)).sat:
            return A, B
    raise RuntimeError("no inconsistent pair found")


def interpolant_violations(A, B, I, solver):
    from invlearn.logic import neg, symbols

    bad = []
    if solver.check_sat(conj(A, neg(I))).sat:
        bad.append("A does not imply I")
    if solver.check_sat(conj(I, B)).sat:
        bad.append("I & B satisfiable")
    if not symbols(I) <= symbols(A) & symbols(B):
        bad.append(f"foreign symbols {symbols(I) - (symbols(A) & symbols(B))}")
    return bad


def sequence_violations(thetas, lams, solver):
    """Inductive-interpolant conditions checked from scratch."""
    from invlearn.logic import FALSE, TRUE, neg, symbols

    bad = []
    m = len(thetas)
    if len(lams) != m + 1:
        return ["wrong length"]
    if lams[0] != TRUE or lams[m] != FALSE:
        bad.append("endpoints")
    for i in range(1, m + 1):
        if solver.check_sat(conj(lams[i - 1], thetas[i - 1], neg(lams[i]))).sat:
            bad.append(f"step {i}")
    for i in range(1, m):
        left = set().union(*(symbols(t) for t in thetas[:i]))
        right = set().union(*(symbols(t) for t in thetas[i:]))
        if not symbols(lams[i]) <= left & right:
            bad.append(f"symbols at {i}")
    return bad


def chain_symbol_violations(thetas, lams, variables):
    """For Xi sequences: lambda_i may only mention block X<i-1> (the state between
    theta_i and theta_{i+1})."""
    from invlearn.logic import is_fresh, symbols

    bad = []
    for i in range(1, len(lams) - 1):
        for s in symbols(lams[i]):
            if is_fresh(s) or s.index != i - 1 or s.name not in {v.name for v in variables}:
                bad.append((i, s))
    return bad


class PreferringSolver(Solver):
    """Solver that answers with a hand-picked model whenever one fits.

    Lets a test replay a narrative that depends on which model a solver
    happens to return; every preferred model is still checked with
    ``evaluate`` against the query.
    """

    def __init__(self, preferred, **kw):
        super().__init__(**kw)
        self.preferred = list(preferred)
        self.used = []

    def check_sat(self, f, time_limit_ms=None):
        syms = symbols(f)
        for nu in self.preferred:
            full = {s: nu.get(s, False if isinstance(s, BoolVar) else Fraction(0)) for s in syms}
            if evaluate(f, full):
                self.used.append(nu)
                return SatResult(True, full)
        return super().check_sat(f, time_limit_ms)
