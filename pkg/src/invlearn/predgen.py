"""Predicate generation by interpolation.

Three sources feed the predicate set: the gap between the under- and
over-approximation, conjectures the teacher could not refute, and pairs of
concrete counterexamples that the current abstraction cannot tell apart.
"""

from __future__ import annotations

from dataclasses import dataclass

from .abstraction import PredicateSet, alpha_star, gamma_star
from .frontend import AnnotatedLoop, FreshNames, xi_sequence
from .interpolate import DEFAULT_DNF_CAP, binary_interpolant, sequence_interpolant
from .logic import Formula, atoms_of, conj, desuperscript, disj, gamma_of_valuation, neg
from .solver import Solver

INITIAL = "initial"
CONJECTURE = "conjecture"
CONFLICT = "conflict"


class NoInvariantPossible(Exception):
    """The under-approximation is not contained in the over-approximation."""

    def __init__(self, witness=None):
        super().__init__("under-approximation escapes the over-approximation")
        self.witness = witness


class PreconditionViolated(Exception):
    pass


@dataclass(frozen=True)
class PredicateBatch:
    atoms: frozenset
    origin: str

    def __len__(self):
        return len(self.atoms)


EXIT_UNDER = "exit"
PLAIN_UNDER = "plain"


def approximations(loop: AnnotatedLoop, under: str = EXIT_UNDER):
    """``(iota_under, iota_over)`` for a loop.

    The over-approximation is ``post | guard``.  The default
    under-approximation is ``pre | (post & !guard)``: every state it adds
    exits at once into the postcondition, so it can be joined to any
    invariant.  ``plain`` uses ``pre | post``, which may contain states that
    step out of every invariant.
    """
    over = disj(loop.post, loop.guard)
    if under == EXIT_UNDER:
        return disj(loop.pre, conj(loop.post, neg(loop.guard))), over
    if under == PLAIN_UNDER:
        return disj(loop.pre, loop.post), over
    raise ValueError(f"unknown under-approximation {under!r}")


def initial_predicates(
    loop: AnnotatedLoop, solver: Solver | None = None, cap: int = DEFAULT_DNF_CAP, under: str = EXIT_UNDER
) -> PredicateBatch:
    solver = solver or Solver(integers=loop.integers)
    under, over = approximations(loop, under)
    r = solver.check_sat(conj(under, neg(over)))
    if r.sat:
        raise NoInvariantPossible(r.model)
    return PredicateBatch(frozenset(atoms_of(binary_interpolant(under, neg(over), solver, cap))), INITIAL)


def _sequence_atoms(seq, solver, cap) -> set:
    lams = sequence_interpolant(seq, solver, cap)
    out = set()
    # lams[i] sits between seq[i-1] and seq[i], i.e. on state block i-1
    for i in range(1, len(lams) - 1):
        out |= atoms_of(desuperscript(lams[i], i - 1))
    return out


def predicates_from_conjecture(
    theta: Formula,
    loop: AnnotatedLoop,
    iota_under: Formula,
    iota_over: Formula,
    solver: Solver | None = None,
    fresh: FreshNames | None = None,
    cap: int = DEFAULT_DNF_CAP,
) -> PredicateBatch:
    solver = solver or Solver(integers=loop.integers)
    fresh = fresh or FreshNames()
    variables = loop.variables
    body = list(loop.body)
    seq = xi_sequence(conj(theta, loop.guard), body, iota_over, variables, fresh)
    assert not solver.check_sat(conj(*seq)).sat, "conjecture can step outside the over-approximation"
    atoms = _sequence_atoms(seq, solver, cap)
    seq2 = xi_sequence(conj(iota_under, loop.guard), body, theta, variables, fresh)
    if not solver.check_sat(conj(*seq2)).sat:
        atoms |= _sequence_atoms(seq2, solver, cap)
    return PredicateBatch(frozenset(atoms), CONJECTURE)


def predicates_from_conflict(
    nu: dict, nu2: dict, P: PredicateSet, solver: Solver | None = None, cap: int = DEFAULT_DNF_CAP
) -> PredicateBatch:
    if nu == nu2:
        raise PreconditionViolated("valuations must differ")
    mu = alpha_star(nu, P)
    if mu != alpha_star(nu2, P):
        raise PreconditionViolated("valuations must share their abstraction")
    solver = solver or Solver()
    x, x2 = gamma_of_valuation(nu), gamma_of_valuation(nu2)
    rho = gamma_star(mu, P)
    itp = binary_interpolant(x, disj(x2, neg(rho)), solver, cap)
    return PredicateBatch(frozenset(atoms_of(itp)), CONFLICT)
