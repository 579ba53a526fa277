import random
from fractions import Fraction

import pytest

from helpers import interpolant_violations, rand_inconsistent_pair, sequence_violations
from invlearn.frontend import parse_formula
from invlearn.interpolate import (
    DnfBlowup,
    InputSatisfiable,
    binary_interpolant,
    check_sequence,
    cube_interpolant,
    implicant,
    sequence_interpolant,
)
from invlearn.logic import FALSE, TRUE, BoolVar, Var, conj, evaluate, neg, symbols
from invlearn.solver import Solver

SORTS = {"x": "rat", "y": "rat", "z": "rat", "a": "rat", "c": "rat", "p": "bool"}


def f(text):
    return parse_formula(text, SORTS)


def test_cube_interpolant_simple_chain():
    a = [f("x <= y"), f("y <= z")]
    b = [f("z < x")]
    itp = cube_interpolant(a, b)
    assert symbols(itp) <= {Var("x"), Var("z")}
    s = Solver()
    assert interpolant_violations(conj(*a), conj(*b), itp, s) == []


def test_cube_interpolant_strict_and_equalities():
    a = [f("x = a + 1"), f("a = y")]
    b = [f("x <= y")]
    itp = cube_interpolant(a, b)
    assert interpolant_violations(conj(*a), conj(*b), itp, Solver()) == []


def test_cube_interpolant_with_disequality():
    a = [f("!(x = y)")]
    b = [f("x = c"), f("c = y")]
    itp = cube_interpolant(a, b)
    assert interpolant_violations(conj(*a), conj(*b), itp, Solver()) == []


def test_cube_interpolant_boolean_clash():
    assert cube_interpolant([BoolVar("p")], [neg(BoolVar("p"))]) == BoolVar("p")
    assert cube_interpolant([f("x < 0"), f("0 < x")], [f("y = 0")]) == FALSE
    assert cube_interpolant([f("y = 0")], [f("x < 0"), f("0 < x")]) == TRUE


def test_cube_interpolant_rejects_consistent_input():
    with pytest.raises(InputSatisfiable):
        cube_interpolant([f("x < 1")], [f("0 < x")])


def test_implicant_is_sound():
    phi = f("(x < 1 || p) && !(x = y)")
    model = {Var("x"): Fraction(0), Var("y"): Fraction(2), BoolVar("p"): False}
    lits = implicant(phi, model)
    assert all(evaluate(lit, model) for lit in lits)
    assert not Solver().check_sat(conj(*lits, neg(phi))).sat


def test_binary_interpolant_random_pairs():
    rng = random.Random(2)
    s = Solver()
    for _ in range(40):
        A, B = rand_inconsistent_pair(rng, s)
        I = binary_interpolant(A, B, s)
        assert interpolant_violations(A, B, I, s) == []


def test_binary_interpolant_rejects_sat_input():
    with pytest.raises(InputSatisfiable):
        binary_interpolant(f("x < 1"), f("x > 0"))


def test_dnf_cap_is_enforced():
    # many disjoint A-cubes, each needing its own B-cube
    parts_a = [f(f"x = {i}") for i in range(12)]
    from invlearn.logic import disj

    A = disj(*parts_a)
    B = conj(*(neg(p) for p in parts_a))
    with pytest.raises(DnfBlowup):
        binary_interpolant(A, B, Solver(), cap=3)
    I = binary_interpolant(A, B, Solver())
    assert interpolant_violations(A, B, I, Solver()) == []


def test_sequence_interpolant_chain():
    thetas = [f("x = 0"), f("y = x + 1"), f("z = y + 1"), f("z < 2")]
    lams = sequence_interpolant(thetas, Solver())
    assert sequence_violations(thetas, lams, Solver()) == []
    check_sequence(thetas, lams)


def test_sequence_interpolant_rejects_sat_sequence():
    with pytest.raises(InputSatisfiable):
        sequence_interpolant([f("x = 0"), f("y = x + 1")], Solver())
