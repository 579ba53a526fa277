"""Mechanical teacher answering CDNF queries from loop annotations.

Validity of the consecution condition is checked on the transition formula
of the whole body (a path encoding) instead of the syntactic weakest
precondition, which would blow up exponentially with nested conditionals.
Both readings agree; the test suite cross-checks them.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .abstraction import PredicateSet, alpha_star, gamma, gamma_star, holds, to_bits
from .frontend import AnnotatedLoop, FreshNames, transition
from .learner import NO, YES, CounterExample
from .logic import BoolVar, Formula, conj, neg, superscript
from .predgen import approximations
from .solver import Solver

POSITIVE = "positive"
NEGATIVE = "negative"
DERIVED = "derived"
RANDOM = "random"
_RANDOM_DRAWS = 64
_ENUM_LIMIT = 20


class Conflict(Exception):
    """Two different classifications were derived for one abstract valuation."""

    def __init__(self, mu, msg=""):
        super().__init__(msg or f"conflicting classifications for {to_bits(mu)}")
        self.mu = mu


class ExcessiveRandomAnswers(Exception):
    def __init__(self, theta: Formula):
        super().__init__("too many random equivalence answers")
        self.theta = theta


@dataclass(frozen=True)
class CexEntry:
    nu: dict = field(hash=False)
    direction: str
    source: str


@dataclass(frozen=True)
class ConcretePair:
    nu: dict = field(hash=False)
    nu2: dict = field(hash=False)


class _RandomOnly:
    def __repr__(self):
        return "RandomOnly"


RANDOM_ONLY = _RandomOnly()


@dataclass(frozen=True)
class InvariantCheck:
    ok: bool
    clause: int | None = None
    model: dict | None = field(default=None, hash=False)

    def __bool__(self):
        return self.ok


def threshold(n_predicates: int) -> int:
    return math.ceil(Fraction(13, 10) ** n_predicates)


class Teacher:
    def __init__(
        self,
        loop: AnnotatedLoop,
        predicates: PredicateSet | None = None,
        solver: Solver | None = None,
        rng: random.Random | None = None,
        fresh: FreshNames | None = None,
        under: str = "exit",
    ):
        self.loop = loop
        self.solver = solver or Solver(integers=loop.integers)
        self.rng = rng or random.Random(0)
        self.fresh = fresh or FreshNames()
        self.variables = loop.variables
        self.iota_under, self.iota_over = approximations(loop, under)
        self.body_transition = transition(list(loop.body), self.variables, self.fresh)
        self.P = PredicateSet()
        self.tau = 1
        self.cex: list[CexEntry] = []
        self._cex_keys: set = set()
        self.cache: dict = {}
        self.r = 0
        self.mem_count = 0
        self.equiv_count = 0
        self.set_predicates(predicates if predicates is not None else PredicateSet())

    # ------------------------------------------------------------- state
    def set_predicates(self, P: PredicateSet):
        self.P = P
        self.tau = threshold(len(P))
        self.reset()

    def reset(self):
        """Forget abstract classifications; concrete witnesses stay valid."""
        self.cache = {}
        self.r = 0

    def _valuation(self, model: dict, index=None) -> dict:
        """Program-variable part of a solver model, zero-filled."""
        out = {}
        for v in self.variables:
            key = v if index is None else type(v)(v.name, index)
            val = model.get(key)
            if val is None:
                val = False if isinstance(v, BoolVar) else Fraction(0)
            out[v] = val
        return out

    def _record(self, nu, direction, source):
        key = (tuple(sorted((k.name, v) for k, v in nu.items())), direction)
        if key not in self._cex_keys:
            self._cex_keys.add(key)
            self.cex.append(CexEntry(nu, direction, source))

    def _cache_put(self, mu, value: bool, provenance: str):
        old = self.cache.get(mu)
        if old is not None:
            if old[0] != value:
                raise Conflict(mu)
            if old[1] == RANDOM and provenance == DERIVED:
                self.cache[mu] = (value, DERIVED)
            return
        self.cache[mu] = (value, provenance)

    def _step_formula(self, theta: Formula, target: Formula) -> Formula:
        """Satisfiable iff some state in theta and the guard steps outside target."""
        return conj(
            superscript(theta, 0), superscript(self.loop.guard, 0), self.body_transition, neg(superscript(target, 1))
        )

    # ------------------------------------------------------------ queries
    def check_invariant(self, theta: Formula) -> InvariantCheck:
        loop = self.loop
        r = self.solver.check_sat(conj(loop.pre, neg(theta)))
        if r.sat:
            return InvariantCheck(False, 1, self._valuation(r.model))
        r = self.solver.check_sat(conj(theta, neg(loop.guard), neg(loop.post)))
        if r.sat:
            return InvariantCheck(False, 2, self._valuation(r.model))
        r = self.solver.check_sat(self._step_formula(theta, theta))
        if r.sat:
            return InvariantCheck(False, 3, self._valuation(r.model, 0))
        return InvariantCheck(True)

    def resolve_membership(self, mu):
        self.mem_count += 1
        mu = tuple(mu)
        theta = gamma_star(mu, self.P)
        r = self.solver.check_sat(theta)
        if not r.sat:
            self._cache_put(mu, False, DERIVED)
            return NO
        below = self.solver.check_sat(conj(theta, neg(self.iota_under)))
        if not below.sat:
            self._record(self._valuation(r.model), POSITIVE, "mem")
            self._cache_put(mu, True, DERIVED)
            return YES
        above = self.solver.check_sat(conj(theta, neg(self.iota_over)))
        if above.sat:
            self._record(self._valuation(above.model), NEGATIVE, "mem")
            self._cache_put(mu, False, DERIVED)
            return NO
        hit = self.cache.get(mu)
        if hit is not None:
            return YES if hit[0] else NO
        value = self.rng.random() < 0.5
        self._cache_put(mu, value, RANDOM)
        return YES if value else NO

    def resolve_equivalence(self, beta: Formula):
        self.equiv_count += 1
        theta = gamma(beta, self.P)
        if self.check_invariant(theta):
            return YES
        r = self.solver.check_sat(conj(self.iota_under, neg(theta)))
        if r.sat:
            return self._concrete_cex(beta, self._valuation(r.model), POSITIVE, "under")
        r = self.solver.check_sat(conj(theta, neg(self.iota_over)))
        if r.sat:
            return self._concrete_cex(beta, self._valuation(r.model), NEGATIVE, "over")
        r = self.solver.check_sat(self._step_formula(theta, self.iota_over))
        if r.sat:
            return self._concrete_cex(beta, self._valuation(r.model, 0), NEGATIVE, "step")
        if self.r >= self.tau:
            raise ExcessiveRandomAnswers(theta)
        mu = self._random_counterexample(beta)
        if mu is None:
            raise ExcessiveRandomAnswers(theta)
        self.r += 1
        self._cache_put(mu, not holds(beta, mu), RANDOM)
        return CounterExample(mu)

    def _concrete_cex(self, beta, nu, direction, source):
        mu = alpha_star(nu, self.P)
        positive = direction == POSITIVE
        assert holds(beta, mu) != positive, "abstract counterexample does not refute the conjecture"
        self._record(nu, direction, source)
        self._cache_put(mu, positive, DERIVED)
        return CounterExample(mu)

    def _admissible(self, beta, mu) -> bool:
        hit = self.cache.get(mu)
        return hit is None or hit[0] != holds(beta, mu)

    def _random_counterexample(self, beta):
        n = len(self.P)
        for _ in range(_RANDOM_DRAWS):
            mu = tuple(self.rng.random() < 0.5 for _ in range(n))
            if self._admissible(beta, mu):
                return mu
        if n > _ENUM_LIMIT:
            return None
        pool = [mu for mu in itertools.product((False, True), repeat=n) if self._admissible(beta, mu)]
        return self.rng.choice(pool) if pool else None

    def find_conflict_pair(self):
        """A positive and a negative witness sharing one abstraction, if any."""
        groups: dict = {}
        for e in self.cex:
            groups.setdefault(alpha_star(e.nu, self.P), []).append(e)
        for entries in groups.values():
            pos = [e.nu for e in entries if e.direction == POSITIVE]
            neg_ = [e.nu for e in entries if e.direction == NEGATIVE]
            for a in pos:
                for b in neg_:
                    if a != b:
                        return ConcretePair(a, b)
        return RANDOM_ONLY
