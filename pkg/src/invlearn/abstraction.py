"""Predicate abstraction between formulas over atoms and Boolean formulas.

An abstract valuation is a tuple of booleans indexed like the predicate
list.  Boolean formulas reuse the logic node classes, with one indicator
:class:`BoolVar` per predicate whose name cannot clash with program symbols.
"""

from __future__ import annotations

import itertools

from .logic import (
    BoolVar,
    Formula,
    Le,
    Lt,
    Not,
    conj,
    disj,
    evaluate,
    normalize_atom,
    substitute,
    to_text,
)
from .solver import Solver, SolverTimeout

ALPHA_LIMIT = 16


def indicator(i: int) -> BoolVar:
    return BoolVar(f"b${i}")


def canonical_predicate(atom: Formula) -> Formula:
    """Normalized atom, with ``a < b`` stored as its complement ``b <= a``.

    An atom and its negation induce the same abstraction, so keeping one
    representative keeps ``P`` (and the learner's search space) smaller.
    """
    a = normalize_atom(atom)
    if isinstance(a, Lt):
        return normalize_atom(Le(a.right, a.left))
    return a


class PredicateSet:
    """Ordered, duplicate-free list of canonical atoms."""

    def __init__(self, atoms=()):
        self.atoms: list = []
        self._index: dict = {}
        self.extend(atoms)

    def add(self, atom: Formula) -> bool:
        a = canonical_predicate(atom)
        if a in self._index:
            return False
        self._index[a] = len(self.atoms)
        self.atoms.append(a)
        return True

    def extend(self, atoms) -> int:
        """Append new atoms in a deterministic order; returns how many were new."""
        return sum(self.add(a) for a in sorted(atoms, key=to_text))

    def __len__(self):
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __contains__(self, atom):
        return canonical_predicate(atom) in self._index

    def index(self, atom) -> int:
        return self._index[canonical_predicate(atom)]

    def var(self, atom) -> BoolVar:
        return indicator(self.index(atom))

    @property
    def bool_vars(self) -> list:
        return [indicator(i) for i in range(len(self.atoms))]

    def copy(self) -> "PredicateSet":
        p = PredicateSet()
        p.atoms = list(self.atoms)
        p._index = dict(self._index)
        return p


def gamma(beta: Formula, P: PredicateSet) -> Formula:
    return substitute(beta, {indicator(i): a for i, a in enumerate(P.atoms)})


def as_model(mu) -> dict:
    return {indicator(i): bool(v) for i, v in enumerate(mu)}


def holds(beta: Formula, mu) -> bool:
    """``mu |= beta`` for an abstract valuation."""
    return evaluate(beta, as_model(mu))


def alpha_star(nu: dict, P: PredicateSet) -> tuple:
    return tuple(evaluate(a, nu) for a in P.atoms)


def gamma_star(mu, P: PredicateSet) -> Formula:
    if len(mu) != len(P):
        raise ValueError("abstract valuation does not match the predicate set")
    return conj(*(a if v else Not(a) for a, v in zip(P.atoms, mu)))


def monomial(mu) -> Formula:
    return conj(*(indicator(i) if v else Not(indicator(i)) for i, v in enumerate(mu)))


def alpha(theta: Formula, P: PredicateSet, solver: Solver | None = None) -> Formula:
    """Disjunction of the canonical monomials consistent with ``theta``.

    Exponential in ``|P|``; meant for tests and diagnostics.
    """
    if len(P) > ALPHA_LIMIT:
        raise SolverTimeout(f"alpha refused for {len(P)} predicates")
    solver = solver or Solver()
    keep = []
    for mu in itertools.product((True, False), repeat=len(P)):
        if solver.check_sat(conj(theta, gamma_star(mu, P))).sat:
            keep.append(monomial(mu))
    return disj(*keep)


def to_bits(mu) -> str:
    return "".join("1" if v else "0" for v in mu)


def from_bits(s: str) -> tuple:
    if set(s) - {"0", "1"}:
        raise ValueError(f"not a bit string: {s!r}")
    return tuple(c == "1" for c in s)
