"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The summary printed at the end of the pytest run lists every criterion.
"""

import io
import json
import random
import time

import pytest

import invlearn.predgen as predgen
from conftest import ENGINE_RUNS, record, run_engine
from helpers import (
    CORPUS_NAMES,
    PreferringSolver,
    chain_symbol_violations,
    check_program_semantics,
    corpus_invariant,
    corpus_loop,
    interpolant_violations,
    rand_atom,
    rand_inconsistent_pair,
    rand_program,
    sequence_violations,
)
from invlearn.abstraction import PredicateSet, alpha_star, canonical_predicate
from invlearn.engine import INVARIANT, EngineConfig
from invlearn.frontend import parse_formula, program_atoms, xi_sequence
from invlearn.interpolate import DEFAULT_DNF_CAP, binary_interpolant
from invlearn.learner import CounterExample
from invlearn.logic import FALSE, TRUE, Var, conj, neg
from invlearn.solver import Solver
from invlearn.teacher import NEGATIVE, POSITIVE, ConcretePair, Conflict, Teacher
from test_abstraction import run_lemma_suite
from test_learner import cdnf_exhaustive
from test_teacher import NU0, NU1

SEEDS = range(10)


def sweep(name, timeout_s, trace=False):
    """Run seeds 0-9; returns (results, traces)."""
    loop = corpus_loop(name)
    results, traces = [], []
    for seed in SEEDS:
        buf = io.StringIO() if trace else None
        results.append(run_engine(loop, EngineConfig(seed=seed, timeout_s=timeout_s, trace=buf)))
        traces.append(buf.getvalue() if trace else "")
    return loop, results, traces


def found(results, timeout_s):
    return [r for r in results if r.outcome == INVARIANT and r.time_ms <= timeout_s * 1000]


def times(results):
    return ",".join(f"{r.time_ms / 1000:.1f}" for r in results)


@pytest.mark.slow
def test_criterion_1_intro():
    loop, results, _ = sweep("intro", 60)
    ok_runs = found(results, 60)
    sample = Teacher(loop).check_invariant(parse_formula("x = y && x >= 0", loop.sorts))
    ok = len(ok_runs) >= 9 and bool(sample)
    record(1, ok, f"intro {len(ok_runs)}/10 within 60 s (s: {times(results)}); x = y && x >= 0 checks: {bool(sample)}")
    assert ok


@pytest.mark.slow
def test_criterion_2_tar():
    loop, results, _ = sweep("tar", 60)
    ok_runs = found(results, 60)
    known = Teacher(loop).check_invariant(parse_formula("M + N <= copy + size && copy + size <= M + N", loop.sorts))
    ok = len(ok_runs) >= 9 and bool(known)
    record(2, ok, f"tar {len(ok_runs)}/10 within 60 s (s: {times(results)}); known invariant checks: {bool(known)}")
    assert ok


def _generated_atoms(trace_text):
    out = set()
    for line in trace_text.splitlines():
        e = json.loads(line)
        if e["event"] == "predicates":
            out.update(e["atoms"])
    return out


@pytest.mark.slow
def test_criterion_3_parser_and_ide():
    _, parser_results, _ = sweep("parser", 300)
    parser_ok = found(parser_results, 300)

    ide, ide_results, traces = sweep("ide-wait-ireason", 300, trace=True)
    ide_ok = found(ide_results, 300)
    solver = Solver(integers=ide.integers)
    exit_claim = parse_formula("retries < 100", ide.sorts)
    implies_exit = all(
        not solver.check_sat(conj(r.invariant, neg(ide.guard), neg(exit_claim))).sat for r in ide_ok
    )
    text_atoms = {canonical_predicate(a) for a in program_atoms(ide)}
    novel = set()
    for r, tr in zip(ide_results, traces):
        if r.outcome == INVARIANT:
            for text in _generated_atoms(tr):
                if canonical_predicate(parse_formula(text, ide.sorts)) not in text_atoms:
                    novel.add(text)
    ok = len(parser_ok) >= 7 and len(ide_ok) >= 7 and implies_exit and bool(novel)
    record(
        3,
        ok,
        f"parser {len(parser_ok)}/10 (s: {times(parser_results)}); ide {len(ide_ok)}/10 (s: {times(ide_results)}); "
        f"exit implies retries < 100: {implies_exit}; atoms outside program text e.g. {sorted(novel)[:3]}",
    )
    assert ok


def test_criterion_4_lemmas():
    t = time.monotonic()
    failures = run_lemma_suite(520, seed=4)
    elapsed = time.monotonic() - t
    ok = not failures and elapsed < 120
    record(4, ok, f"520 instances, {len(failures)} violations, {elapsed:.1f} s")
    assert not failures, failures[:5]
    assert elapsed < 120


@pytest.mark.slow
def test_criterion_5_interpolation(monkeypatch):
    rng = random.Random(5)
    s = Solver()
    pair_bad = []
    for _ in range(200):
        A, B = rand_inconsistent_pair(rng, s)
        pair_bad += interpolant_violations(A, B, binary_interpolant(A, B, s), s)

    # every sequence the engine interpolates on the corpus, plus the Xi
    # sequences of the known invariants
    logged = []
    real = predgen.sequence_interpolant

    def logging(seq, solver=None, cap=DEFAULT_DNF_CAP, **kw):
        lams = real(seq, solver, cap, **kw)
        logged.append((list(seq), lams, solver))
        return lams

    monkeypatch.setattr(predgen, "sequence_interpolant", logging)
    seq_bad = []
    count = 0
    for name in CORPUS_NAMES:
        loop = corpus_loop(name)
        before = len(logged)
        seed = 1 if name == "ide-wait-ireason" else 0
        run_engine(loop, EngineConfig(seed=seed, timeout_s=300))
        lsolver = Solver(integers=loop.integers)
        for seq, lams, _ in logged[before:]:
            seq_bad += sequence_violations(seq, lams, lsolver)
            seq_bad += chain_symbol_violations(seq, lams, loop.variables)
            count += 1
        loop, inv = corpus_invariant(name)
        seq = xi_sequence(conj(inv, loop.guard), list(loop.body), inv, loop.variables)
        lams = real(seq, lsolver)
        seq_bad += sequence_violations(seq, lams, lsolver) + chain_symbol_violations(seq, lams, loop.variables)
        count += 1
    ok = not pair_bad and not seq_bad
    record(5, ok, f"200 pairs ({len(pair_bad)} violations); {count} corpus Xi sequences ({len(seq_bad)} violations)")
    assert not pair_bad and not seq_bad, (pair_bad[:3], seq_bad[:3])


def test_criterion_6_cdnf():
    t = time.monotonic()
    worst, failures = cdnf_exhaustive(3)
    elapsed = time.monotonic() - t
    ok = not failures and worst <= 200 and elapsed < 60
    record(6, ok, f"256 targets, {len(failures)} wrong, worst {worst} queries, {elapsed:.1f} s")
    assert ok


def test_criterion_7_semantics():
    rng = random.Random(7)
    s = Solver()
    bad = []
    n = 0
    while n < 320:
        xs = [Var(v) for v in ("x", "y", "z")[: rng.randint(1, 3)]]
        prog = rand_program(rng, xs)
        theta = rand_atom(rng, xs, consts=(0, 1, 2))
        bad += check_program_semantics(prog, xs, theta, s)
        n += 1
    record(7, not bad, f"{n} random programs, {len(bad)} violations")
    assert not bad, bad[:5]


def test_criterion_8_conflict_replay():
    loop = corpus_loop("intro")
    solver = PreferringSolver([NU0, NU1], integers=loop.integers)
    P = PredicateSet()
    P.add(parse_formula("y = 0", loop.sorts))
    t = Teacher(loop, P, solver=solver)
    first = t.resolve_equivalence(FALSE)
    second = None
    try:
        t.resolve_equivalence(TRUE)
    except Conflict as exc:
        second = exc.mu
    pair = t.find_conflict_pair()
    ok = (
        first == CounterExample((False,))
        and second == (False,)
        and [e.direction for e in t.cex] == [POSITIVE, NEGATIVE]
        and isinstance(pair, ConcretePair)
        and alpha_star(pair.nu, P) == alpha_star(pair.nu2, P)
    )
    record(8, ok, f"EQ(False) -> {first}; EQ(True) -> b=F then Conflict; pair {pair}")
    assert ok


def test_criterion_9_soundness_gate():
    # runs after every engine test in this module; earlier modules add theirs too
    unsound = [e for e in ENGINE_RUNS if e["unsound"]]
    checked = sum(e.get("outcome") == INVARIANT for e in ENGINE_RUNS)
    with_z3 = sum(bool(e.get("z3")) for e in ENGINE_RUNS)
    record(9, not unsound and checked > 0, f"{checked} invariants re-verified ({with_z3} also by z3), {len(unsound)} unsound")
    assert not unsound and checked > 0
