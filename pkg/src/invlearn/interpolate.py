"""Craig interpolation for linear rational arithmetic with Boolean atoms.

Cube interpolants come from Farkas certificates: the multipliers of the
A-side constraints sum to a single linear constraint over shared symbols.
Arbitrary formulas are handled by enumerating the cubes of each side lazily
from solver models, which computes the same ``OR_i AND_j I(A_i, B_j)``
combination as full DNF expansion while only visiting cubes that matter.
"""

from __future__ import annotations

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
    _Cmp,
    conj,
    disj,
    evaluate,
    linear_constraint as _linear,
    make_constraint,
    neg,
    symbols,
)
from .simplex import check_certificate, farkas
from .solver import Solver, tighten

DEFAULT_DNF_CAP = 4096


class InputSatisfiable(Exception):
    """Raised when the formulas to separate are jointly satisfiable."""


class DnfBlowup(Exception):
    pass


def _literal_parts(lit: Formula):
    """Split a literal into ``(positive, atom)``."""
    if isinstance(lit, Not):
        return False, lit.arg
    return True, lit


def _arith_branches(lits, integers=frozenset()):
    """Constraint lists for every split of the negated equalities in ``lits``."""
    base, splits = [], []

    def linear_constraint(f):
        return tighten(*_linear(f), integers)

    for lit in lits:
        pos, atom = _literal_parts(lit)
        if isinstance(atom, BoolVar) or atom in (TRUE, FALSE):
            continue
        if pos:
            base.append(linear_constraint(atom))
        elif isinstance(atom, Le):
            base.append(linear_constraint(Lt(atom.right, atom.left)))
        elif isinstance(atom, Lt):
            base.append(linear_constraint(Le(atom.right, atom.left)))
        else:
            splits.append((linear_constraint(Lt(atom.left, atom.right)), linear_constraint(Lt(atom.right, atom.left))))
    out = [base]
    for lo, hi in splits:
        out = [b + [lo] for b in out] + [b + [hi] for b in out]
    return out


def _constant_truth(lits):
    """False if some literal is a constant falsehood, else True."""
    for lit in lits:
        pos, atom = _literal_parts(lit)
        if atom == (FALSE if pos else TRUE):
            return False
    return True


def _combine(cert, a_cons):
    coeffs: dict = {}
    const = Fraction(0)
    strict = False
    for i, k in cert.items():
        if i >= len(a_cons) or k == 0:
            continue
        c, c0, op = a_cons[i]
        for v, x in c.items():
            coeffs[v] = coeffs.get(v, 0) + k * x
        const += k * c0
        strict |= op == "<"
    # an inequality is enough even when only equalities were combined, and
    # the weaker half-space generalizes better than the equation
    return make_constraint(coeffs, const, "<" if strict else "<=")


def cube_interpolant(a_lits, b_lits, integers=frozenset()) -> Formula:
    """Interpolant of two conjunctions of literals (atoms or negated atoms).

    Atoms over variables named in ``integers`` are tightened first, so the
    result separates the integer solutions only.
    """
    a_lits, b_lits = list(a_lits), list(b_lits)
    if not _constant_truth(a_lits):
        return FALSE
    if not _constant_truth(b_lits):
        return TRUE
    a_bool = {(p, a) for p, a in map(_literal_parts, a_lits) if isinstance(a, BoolVar)}
    b_bool = {(p, a) for p, a in map(_literal_parts, b_lits) if isinstance(a, BoolVar)}
    for p, a in a_bool:
        if (not p, a) in a_bool:
            return FALSE
    for p, a in b_bool:
        if (not p, a) in b_bool:
            return TRUE
    for p, a in sorted(a_bool, key=lambda t: (t[1].name, t[1].index or 0, t[0])):
        if (not p, a) in b_bool:
            return a if p else Not(a)
    a_branches = _arith_branches(a_lits, integers)
    b_branches = _arith_branches(b_lits, integers)
    outer = []
    for ab in a_branches:
        inner = []
        for bb in b_branches:
            system = ab + bb
            cert = farkas(system)
            if cert is None:
                raise InputSatisfiable("cube pair is satisfiable")
            assert check_certificate(dict(enumerate(system)), cert), "invalid Farkas certificate"
            inner.append(_combine(cert, ab))
        outer.append(conj(*inner))
    return disj(*outer)


# ----------------------------------------------------------- cube extraction


def implicant(f: Formula, model: dict, pol: bool = True) -> list:
    """Literals true in ``model`` whose conjunction implies ``f`` (or its negation).

    Negated arithmetic literals are replaced by the positive comparison the
    model picks, so negated equalities never reach the Farkas stage.
    """
    if f == TRUE:
        if not pol:
            raise ValueError("model does not satisfy formula")
        return []
    if f == FALSE:
        if pol:
            raise ValueError("model does not satisfy formula")
        return []
    if isinstance(f, Not):
        return implicant(f.arg, model, not pol)
    if isinstance(f, BoolVar):
        if bool(model.get(f, False)) != pol:
            raise ValueError("model does not satisfy formula")
        return [f if pol else Not(f)]
    if isinstance(f, _Cmp):
        if evaluate(f, model) != pol:
            raise ValueError("model does not satisfy formula")
        if pol:
            return [f]
        if isinstance(f, Le):
            return [Lt(f.right, f.left)]
        if isinstance(f, Lt):
            return [Le(f.right, f.left)]
        lt = Lt(f.left, f.right)
        return [lt if evaluate(lt, model) else Lt(f.right, f.left)]
    if isinstance(f, (And, Or)):
        if isinstance(f, And) == pol:
            out = []
            for a in f.args:
                out.extend(implicant(a, model, pol))
            return out
        for a in f.args:
            if evaluate(a, model) == pol:
                return implicant(a, model, pol)
        raise ValueError("model does not satisfy formula")
    raise TypeError(f"unexpected node {f!r}")


def _complete(model: dict, f: Formula) -> dict:
    m = dict(model)
    for s in symbols(f):
        if s not in m:
            m[s] = False if isinstance(s, BoolVar) else Fraction(0)
    return m


def binary_interpolant(a: Formula, b: Formula, solver: Solver | None = None, cap: int = DEFAULT_DNF_CAP) -> Formula:
    """``I`` with ``A => I``, ``I & B`` unsatisfiable and only shared symbols."""
    solver = solver or Solver()
    result = FALSE
    a_cubes = 0
    b_cubes = 0
    b_seen: list = []
    while True:
        r = solver.check_sat(conj(a, neg(result)))
        if not r.sat:
            break
        a_cubes += 1
        if a_cubes > cap:
            raise DnfBlowup(f"more than {cap} cubes on the A side")
        cube_a = implicant(a, _complete(r.model, a))
        part = TRUE
        # Reuse B cubes from earlier rounds before asking the solver for more.
        for cube_b in b_seen:
            if solver.check_sat(conj(part, *cube_b)).sat:
                part = conj(part, cube_interpolant(cube_a, cube_b, solver.integers))
        while True:
            rb = solver.check_sat(conj(part, b))
            if not rb.sat:
                break
            cube_b = implicant(b, _complete(rb.model, b))
            b_cubes += 1
            if b_cubes > cap:
                raise DnfBlowup(f"more than {cap} cubes on the B side")
            b_seen.append(cube_b)
            part = conj(part, cube_interpolant(cube_a, cube_b, solver.integers))
        result = disj(result, part)
    return result


def sequence_interpolant(thetas, solver: Solver | None = None, cap: int = DEFAULT_DNF_CAP, verify: bool = True) -> list:
    """Inductive interpolant ``[l0, ..., lm]`` of an inconsistent sequence."""
    solver = solver or Solver()
    thetas = list(thetas)
    m = len(thetas)
    lams = [TRUE]
    for i in range(1, m):
        lams.append(binary_interpolant(conj(lams[-1], thetas[i - 1]), conj(*thetas[i:]), solver, cap))
    if m:
        lams.append(FALSE)
        if solver.check_sat(conj(lams[m - 1], thetas[m - 1])).sat:
            raise InputSatisfiable("sequence is satisfiable")
    if verify:
        check_sequence(thetas, lams, solver)
    return lams


def check_sequence(thetas, lams, solver: Solver | None = None) -> None:
    """Assert the inductive-interpolant conditions; raises AssertionError."""
    solver = solver or Solver()
    m = len(thetas)
    assert len(lams) == m + 1 and lams[0] == TRUE and lams[-1] == FALSE
    for i in range(1, m + 1):
        assert not solver.check_sat(conj(lams[i - 1], thetas[i - 1], neg(lams[i]))).sat, f"step {i} not inductive"
    for i in range(1, m):
        pre = set().union(*(symbols(t) for t in thetas[:i]))
        post = set().union(*(symbols(t) for t in thetas[i:]))
        assert symbols(lams[i]) <= pre & post, f"position {i} mentions non-shared symbols"
