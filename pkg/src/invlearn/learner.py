"""Bshouty's CDNF exact learner as a resumable query/answer state machine.

Abstract valuations are tuples of booleans; hypotheses are Boolean formulas
over the indicator variables of :mod:`invlearn.abstraction`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .abstraction import indicator
from .logic import TRUE, Formula, Not, conj, disj


@dataclass(frozen=True)
class Mem:
    mu: tuple


@dataclass(frozen=True)
class Equiv:
    beta: Formula


@dataclass(frozen=True)
class Yes:
    pass


@dataclass(frozen=True)
class No:
    pass


@dataclass(frozen=True)
class CounterExample:
    mu: tuple


@dataclass(frozen=True)
class Done:
    beta: Formula


YES = Yes()
NO = No()


class ProtocolError(Exception):
    pass


class LivelockDetected(Exception):
    """The same counterexample came back against an unchanged hypothesis."""

    def __init__(self, mu):
        super().__init__(f"repeated counterexample {mu}")
        self.mu = mu


def term(a: tuple, u: tuple) -> Formula:
    """Monotone term of ``u`` relative to basis ``a``."""
    return conj(*(indicator(j) if uj else Not(indicator(j)) for j, (aj, uj) in enumerate(zip(a, u)) if aj != uj))


def _term_holds(a, u, v) -> bool:
    return all(vj == uj for aj, uj, vj in zip(a, u, v) if aj != uj)


@dataclass
class Basis:
    a: tuple
    S: list = field(default_factory=list)

    def holds(self, v) -> bool:
        return any(_term_holds(self.a, u, v) for u in self.S)

    def formula(self) -> Formula:
        return disj(*(term(self.a, u) for u in self.S))


class CDNF:
    """Learner over ``n`` Boolean variables.

    Drive it with :meth:`start` and :meth:`step`; every step returns either
    the next :class:`Mem`/:class:`Equiv` query or :class:`Done`.
    """

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.bases: list[Basis] = []
        self.steps = 0
        self.mem_queries = 0
        self.equiv_queries = 0
        self.pending = None
        self.log: list = []
        self._seen: set = set()
        self._gen = self._run()

    def hypothesis(self) -> Formula:
        return conj(*(b.formula() for b in self.bases)) if self.bases else TRUE

    def _signature(self):
        return tuple((b.a, tuple(b.S)) for b in self.bases)

    def start(self):
        q = next(self._gen)
        return self._emit(q)

    def step(self, answer):
        if self.pending is None:
            raise ProtocolError("no pending query")
        if isinstance(self.pending, Mem) and not isinstance(answer, (Yes, No)):
            raise ProtocolError("membership query needs Yes/No")
        if isinstance(self.pending, Equiv) and not isinstance(answer, (Yes, CounterExample)):
            raise ProtocolError("equivalence query needs Yes/CounterExample")
        if isinstance(answer, CounterExample) and len(answer.mu) != self.n:
            raise ProtocolError("counterexample has the wrong width")
        self.log.append((self.pending, answer))
        self.steps += 1
        try:
            q = self._gen.send(answer)
        except StopIteration as stop:
            self.pending = None
            return Done(stop.value)
        return self._emit(q)

    def _emit(self, q):
        self.pending = q
        if isinstance(q, Mem):
            self.mem_queries += 1
        else:
            self.equiv_queries += 1
        return q

    def _run(self):
        while True:
            hyp = self.hypothesis()
            ans = yield Equiv(hyp)
            if isinstance(ans, Yes):
                return hyp
            v = tuple(ans.mu)
            key = (self._signature(), v)
            if key in self._seen:
                raise LivelockDetected(v)
            self._seen.add(key)
            violated = [b for b in self.bases if not b.holds(v)]
            if not violated:
                self.bases.append(Basis(v))
                continue
            for b in violated:
                u = yield from self._walk(v, b.a)
                if u not in b.S:
                    b.S.append(u)

    def _walk(self, v, a):
        u = list(v)
        moved = True
        while moved:
            moved = False
            for j in range(self.n):
                if u[j] == a[j]:
                    continue
                trial = list(u)
                trial[j] = a[j]
                ans = yield Mem(tuple(trial))
                if isinstance(ans, Yes):
                    u = trial
                    moved = True
                    break
        return tuple(u)


def learner_start(n: int):
    state = CDNF(n)
    return state, state.start()


def learner_step(state: CDNF, answer):
    out = state.step(answer)
    if isinstance(out, Done):
        return out
    return state, out
