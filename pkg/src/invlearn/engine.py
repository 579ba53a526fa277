"""Main inference loop: learner, teacher, predicate generation and restarts."""

from __future__ import annotations

import json
import random
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path

from .abstraction import PredicateSet, gamma, to_bits
from .frontend import AnnotatedLoop, FreshNames, ParseError, load, pre_condition
from .interpolate import DEFAULT_DNF_CAP, DnfBlowup, InputSatisfiable
from .learner import CDNF, Equiv, LivelockDetected, Mem, Yes
from .logic import Formula, conj, neg, to_text
from .predgen import (
    CONFLICT,
    CONJECTURE,
    EXIT_UNDER,
    INITIAL,
    PLAIN_UNDER,
    NoInvariantPossible,
    initial_predicates,
    predicates_from_conflict,
    predicates_from_conjecture,
)
from .solver import Solver, SolverConfig, SolverTimeout
from .teacher import ConcretePair, Conflict, ExcessiveRandomAnswers, Teacher, threshold

INVARIANT = "invariant"
TIMEOUT = "timeout"
NO_INVARIANT = "no_invariant_possible"


class UnsoundResult(Exception):
    """An invariant claimed by the teacher failed independent re-verification."""


@dataclass
class EngineConfig:
    seed: int = 0
    max_restarts: int = 10_000
    timeout_s: float = 60.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    dnf_cap: int = DEFAULT_DNF_CAP
    under: str = EXIT_UNDER
    trace: object = None  # path or writable text stream for JSON-lines events

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.under not in (EXIT_UNDER, PLAIN_UNDER):
            raise ValueError(f"unknown under-approximation {self.under!r}")
        if self.max_restarts < 0:
            raise ValueError("max restarts must be non-negative")


@dataclass
class InferenceResult:
    example: str
    outcome: str
    invariant: Formula | None
    predicates: int
    mem: int
    eq: int
    restarts: int
    time_ms: int
    batches: dict

    def to_json(self) -> dict:
        return {
            "example": self.example,
            "outcome": self.outcome,
            "invariant": None if self.invariant is None else to_text(self.invariant),
            "P": self.predicates,
            "MEM": self.mem,
            "EQ": self.eq,
            "RE": self.restarts,
            "time_ms": self.time_ms,
            "batches": dict(self.batches),
        }


def verify_invariant(loop: AnnotatedLoop, theta: Formula, solver: Solver | None = None) -> bool:
    """Re-check the three invariant conditions through weakest preconditions.

    Deliberately independent of the teacher, which works on transition
    formulas instead.
    """
    solver = solver or Solver(integers=loop.integers)
    if solver.check_sat(conj(loop.pre, neg(theta))).sat:
        return False
    if solver.check_sat(conj(theta, neg(loop.guard), neg(loop.post))).sat:
        return False
    wp = pre_condition(theta, list(loop.body), FreshNames())
    return not solver.check_sat(conj(theta, loop.guard, neg(wp))).sat


class _Trace:
    def __init__(self, target):
        self._own = False
        self._out = None
        if isinstance(target, (str, Path)):
            self._out = open(target, "w", encoding="utf-8")
            self._own = True
        elif target is not None:
            self._out = target

    def __call__(self, event: str, **data):
        if self._out is not None:
            self._out.write(json.dumps({"event": event, **data}, default=str) + "\n")

    def close(self):
        if self._own:
            self._out.close()


def infer(loop: AnnotatedLoop, cfg: EngineConfig | None = None) -> InferenceResult:
    cfg = cfg or EngineConfig()
    trace = _Trace(cfg.trace)
    try:
        return _infer(loop, cfg, trace)
    finally:
        trace.close()


def _infer(loop: AnnotatedLoop, cfg: EngineConfig, trace) -> InferenceResult:
    start = time.monotonic()
    solver = Solver(cfg.solver, integers=loop.integers)
    solver.deadline = start + cfg.timeout_s
    rng = random.Random(cfg.seed)
    fresh = FreshNames()
    P = PredicateSet()
    batches = {INITIAL: 0, CONJECTURE: 0, CONFLICT: 0}
    teacher = None
    restarts = 0

    def result(outcome, invariant=None):
        return InferenceResult(
            example=loop.name,
            outcome=outcome,
            invariant=invariant,
            predicates=len(P),
            mem=teacher.mem_count if teacher else 0,
            eq=teacher.equiv_count if teacher else 0,
            restarts=restarts,
            time_ms=int((time.monotonic() - start) * 1000),
            batches=batches,
        )

    def merge(batch):
        added = P.extend(batch.atoms)
        batches[batch.origin] += added
        trace("predicates", origin=batch.origin, atoms=[to_text(a) for a in sorted(batch.atoms, key=to_text)], added=added)
        return added

    try:
        teacher = Teacher(loop, solver=solver, rng=rng, fresh=fresh, under=cfg.under)
        try:
            merge(initial_predicates(loop, solver, cfg.dnf_cap, cfg.under))
        except NoInvariantPossible:
            trace("outcome", outcome=NO_INVARIANT)
            return result(NO_INVARIANT)
        teacher.set_predicates(P)
        while True:
            assert teacher.tau == threshold(len(P))
            learner = CDNF(len(P))
            q = learner.start()
            try:
                while True:
                    if isinstance(q, Mem):
                        ans = teacher.resolve_membership(q.mu)
                        trace("mem", mu=to_bits(q.mu), answer=type(ans).__name__)
                    else:
                        ans = teacher.resolve_equivalence(q.beta)
                        trace("equiv", beta=to_text(q.beta), answer=_answer_text(ans))
                        if isinstance(ans, Yes):
                            theta = gamma(q.beta, P)
                            if not verify_invariant(loop, theta, Solver(cfg.solver, integers=loop.integers)):
                                raise UnsoundResult(to_text(theta))
                            trace("outcome", outcome=INVARIANT, invariant=to_text(theta))
                            return result(INVARIANT, theta)
                    q = learner.step(ans)
            except (Conflict, LivelockDetected) as exc:
                evidence = teacher.find_conflict_pair()
                trace("conflict", kind=type(exc).__name__, evidence=type(evidence).__name__)
                if isinstance(evidence, ConcretePair):
                    _guarded(merge, lambda: predicates_from_conflict(evidence.nu, evidence.nu2, P, solver, cfg.dnf_cap))
            except ExcessiveRandomAnswers as exc:
                trace("excessive", theta=to_text(exc.theta))
                _guarded(
                    merge,
                    lambda: predicates_from_conjecture(
                        exc.theta, loop, teacher.iota_under, teacher.iota_over, solver, fresh, cfg.dnf_cap
                    ),
                )
            restarts += 1
            trace("restart", count=restarts, predicates=len(P))
            if restarts > cfg.max_restarts:
                return result(TIMEOUT)
            teacher.set_predicates(P)
    except SolverTimeout:
        trace("outcome", outcome=TIMEOUT)
        return result(TIMEOUT)


def _guarded(merge, make):
    """Run one predicate-generation step; failures just restart without new atoms."""
    try:
        return merge(make())
    except (DnfBlowup, InputSatisfiable):
        return 0


def _answer_text(ans) -> str:
    mu = getattr(ans, "mu", None)
    return type(ans).__name__ if mu is None else to_bits(mu)


# ------------------------------------------------------------------- corpus


@dataclass
class CorpusRow:
    example: str
    runs: list

    def summary(self) -> dict:
        out = {"example": self.example, "runs": len(self.runs)}
        out["invariants"] = sum(r.outcome == INVARIANT for r in self.runs)
        for key, get in (("P", "predicates"), ("MEM", "mem"), ("EQ", "eq"), ("RE", "restarts"), ("time_ms", "time_ms")):
            vals = [getattr(r, get) for r in self.runs]
            out[key] = {"mean": statistics.fmean(vals), "min": min(vals), "max": max(vals)}
        return out


@dataclass
class CorpusReport:
    rows: list
    errors: list

    def to_json(self) -> dict:
        return {"rows": [r.summary() for r in self.rows], "errors": self.errors}


def run_corpus(paths, cfg: EngineConfig | None = None, runs: int = 1) -> CorpusReport:
    """Run every example ``runs`` times with seeds ``cfg.seed .. cfg.seed+runs-1``."""
    cfg = cfg or EngineConfig()
    rows, errors = [], []
    for path in paths:
        try:
            loop = load(path)
        except (ParseError, OSError) as exc:
            errors.append({"path": str(path), "error": str(exc)})
            continue
        results = []
        for k in range(runs):
            run_cfg = EngineConfig(
                seed=(cfg.seed + k) % 2**64,
                max_restarts=cfg.max_restarts,
                timeout_s=cfg.timeout_s,
                solver=cfg.solver,
                dnf_cap=cfg.dnf_cap,
                under=cfg.under,
            )
            results.append(infer(loop, run_cfg))
        rows.append(CorpusRow(loop.name, results))
    return CorpusReport(rows, errors)
