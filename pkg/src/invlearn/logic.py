"""Quantifier-free formulas over linear rational arithmetic and Booleans.

Terms and formulas are immutable value objects with structural equality and
cached hashes.  Variables carry an optional integer index; ``x@k`` denotes
the copy of program variable ``x`` in the k-th state block.  Names containing
``#`` are reserved for fresh symbols (intermediate states, Skolem constants).
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Union


class EvalError(Exception):
    """Raised when a formula is evaluated under a valuation missing a symbol."""


class _Node:
    __slots__ = ("_hash",)

    def _key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return self._hash == other._hash and self._key() == other._key()

    def __hash__(self):
        return self._hash

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def __repr__(self):
        return f"{type(self).__name__}({to_text(self)!r})"

    def __str__(self):
        return to_text(self)


def _init(obj, **fields):
    for k, v in fields.items():
        object.__setattr__(obj, k, v)
    object.__setattr__(obj, "_hash", hash((type(obj).__name__,) + obj._key()))


# --------------------------------------------------------------------- terms


class Term(_Node):
    __slots__ = ()


class Const(Term):
    __slots__ = ("value",)

    def __init__(self, value):
        _init(self, value=Fraction(value))

    def _key(self):
        return (self.value,)


class Var(Term):
    """Rational-sorted variable."""

    __slots__ = ("name", "index")

    def __init__(self, name: str, index: int | None = None):
        _init(self, name=name, index=index)

    def _key(self):
        return (self.name, self.index)


class Add(Term):
    __slots__ = ("left", "right")

    def __init__(self, left: Term, right: Term):
        _init(self, left=left, right=right)

    def _key(self):
        return (self.left, self.right)


class Sub(Term):
    __slots__ = ("left", "right")

    def __init__(self, left: Term, right: Term):
        _init(self, left=left, right=right)

    def _key(self):
        return (self.left, self.right)


class Mul(Term):
    """Multiplication of a term by a rational literal."""

    __slots__ = ("coef", "term")

    def __init__(self, coef, term: Term):
        _init(self, coef=Fraction(coef), term=term)

    def _key(self):
        return (self.coef, self.term)


# ------------------------------------------------------------------ formulas


class Formula(_Node):
    __slots__ = ()


class _TrueF(Formula):
    __slots__ = ()

    def __init__(self):
        _init(self)

    def _key(self):
        return ()


class _FalseF(Formula):
    __slots__ = ()

    def __init__(self):
        _init(self)

    def _key(self):
        return ()


TRUE = _TrueF()
FALSE = _FalseF()


class BoolVar(Formula):
    """Boolean-sorted variable."""

    __slots__ = ("name", "index")

    def __init__(self, name: str, index: int | None = None):
        _init(self, name=name, index=index)

    def _key(self):
        return (self.name, self.index)


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        _init(self, arg=arg)

    def _key(self):
        return (self.arg,)


class And(Formula):
    __slots__ = ("args",)

    def __init__(self, args: Iterable[Formula]):
        _init(self, args=tuple(args))

    def _key(self):
        return self.args


class Or(Formula):
    __slots__ = ("args",)

    def __init__(self, args: Iterable[Formula]):
        _init(self, args=tuple(args))

    def _key(self):
        return self.args


class _Cmp(Formula):
    __slots__ = ("left", "right")
    op = "?"

    def __init__(self, left: Term, right: Term):
        if not isinstance(left, Term) or not isinstance(right, Term):
            raise TypeError(f"{type(self).__name__} expects rational terms")
        _init(self, left=left, right=right)

    def _key(self):
        return (self.left, self.right)


class Lt(_Cmp):
    __slots__ = ()
    op = "<"


class Le(_Cmp):
    __slots__ = ()
    op = "<="


class Eq(_Cmp):
    __slots__ = ()
    op = "="


Symbol = Union[Var, BoolVar]
Value = Union[Fraction, bool]
Valuation = Mapping[Symbol, Value]


# -------------------------------------------------------------- constructors


def conj(*fs: Formula) -> Formula:
    """Flattened conjunction with unit folding (``conj()`` is True)."""
    out: list[Formula] = []
    seen = set()
    for f in fs:
        parts = f.args if isinstance(f, And) else (f,)
        for p in parts:
            if p is FALSE or p == FALSE:
                return FALSE
            if p == TRUE or p in seen:
                continue
            seen.add(p)
            out.append(p)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(out)


def disj(*fs: Formula) -> Formula:
    """Flattened disjunction with unit folding (``disj()`` is False)."""
    out: list[Formula] = []
    seen = set()
    for f in fs:
        parts = f.args if isinstance(f, Or) else (f,)
        for p in parts:
            if p == TRUE:
                return TRUE
            if p == FALSE or p in seen:
                continue
            seen.add(p)
            out.append(p)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(out)


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return disj(conj(a, b), conj(neg(a), neg(b)))


def term_sum(terms: Iterable[Term]) -> Term:
    terms = list(terms)
    if not terms:
        return Const(0)
    return reduce(Add, terms)


def num(v) -> Const:
    return Const(v)


# ------------------------------------------------------------------ traversal


def symbols(node: _Node) -> set:
    """Free symbols (Var and BoolVar nodes) of a term or formula."""
    out: set = set()
    _collect_symbols(node, out)
    return out


def _collect_symbols(node, out):
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, (Var, BoolVar)):
            out.add(n)
        elif isinstance(n, (Add, Sub, _Cmp)):
            stack.append(n.left)
            stack.append(n.right)
        elif isinstance(n, Mul):
            stack.append(n.term)
        elif isinstance(n, Not):
            stack.append(n.arg)
        elif isinstance(n, (And, Or)):
            stack.extend(n.args)


def symbol_key(s: Symbol) -> tuple:
    return (s.name, -1 if s.index is None else s.index, isinstance(s, BoolVar))


def is_fresh(s: Symbol) -> bool:
    return "#" in s.name


def substitute(node: _Node, sigma: Mapping[Symbol, _Node]) -> _Node:
    """Simultaneous substitution of symbols by terms (Var) or formulas (BoolVar)."""
    for k, v in sigma.items():
        if isinstance(k, Var) and not isinstance(v, Term):
            raise TypeError(f"cannot substitute formula {v} for rational {k}")
        if isinstance(k, BoolVar) and not isinstance(v, Formula):
            raise TypeError(f"cannot substitute term {v} for Boolean {k}")
    if not sigma:
        return node
    return _subst(node, sigma, {})


def _subst(n, sigma, memo):
    hit = memo.get(id(n))
    if hit is not None:
        return hit[1]
    if isinstance(n, (Var, BoolVar)):
        r = sigma.get(n, n)
    elif isinstance(n, (Const, _TrueF, _FalseF)):
        r = n
    elif isinstance(n, Add):
        r = Add(_subst(n.left, sigma, memo), _subst(n.right, sigma, memo))
    elif isinstance(n, Sub):
        r = Sub(_subst(n.left, sigma, memo), _subst(n.right, sigma, memo))
    elif isinstance(n, Mul):
        r = Mul(n.coef, _subst(n.term, sigma, memo))
    elif isinstance(n, _Cmp):
        r = type(n)(_subst(n.left, sigma, memo), _subst(n.right, sigma, memo))
    elif isinstance(n, Not):
        r = neg(_subst(n.arg, sigma, memo))
    elif isinstance(n, And):
        r = conj(*(_subst(a, sigma, memo) for a in n.args))
    elif isinstance(n, Or):
        r = disj(*(_subst(a, sigma, memo) for a in n.args))
    else:
        raise TypeError(f"unknown node {n!r}")
    memo[id(n)] = (n, r)
    return r


def rename(node: _Node, fn) -> _Node:
    """Apply ``fn`` to every symbol; ``fn`` returns a replacement symbol."""
    sigma = {s: fn(s) for s in symbols(node)}
    sigma = {k: v for k, v in sigma.items() if v != k}
    return _subst(node, sigma, {}) if sigma else node


def superscript(node: _Node, k: int) -> _Node:
    """``e<k>``: index every unindexed program symbol with ``k``."""

    def f(s):
        if s.index is None and not is_fresh(s):
            return type(s)(s.name, k)
        return s

    return rename(node, f)


def shift(node: _Node, k: int) -> _Node:
    """Map block ``X<i>`` to ``X<i+k>`` for every indexed symbol."""
    if k == 0:
        return node

    def f(s):
        if s.index is not None:
            return type(s)(s.name, s.index + k)
        return s

    return rename(node, f)


def desuperscript(node: _Node, k: int) -> _Node:
    """Strip index ``k`` from every symbol; other indices are an error."""
    for s in symbols(node):
        if s.index != k:
            raise IndexError(f"symbol {to_text(s)} is not indexed {k}")
    return rename(node, lambda s: type(s)(s.name, None))


# ----------------------------------------------------------------- semantics


def linearize(t: Term) -> tuple[dict, Fraction]:
    """Return ``(coeffs, const)`` with ``t == const + sum(coeffs[v] * v)``."""
    coeffs: dict = {}
    const = _lin(t, Fraction(1), coeffs)
    return {v: c for v, c in coeffs.items() if c != 0}, const


def _lin(t, scale, coeffs):
    if isinstance(t, Const):
        return scale * t.value
    if isinstance(t, Var):
        coeffs[t] = coeffs.get(t, 0) + scale
        return Fraction(0)
    if isinstance(t, Add):
        return _lin(t.left, scale, coeffs) + _lin(t.right, scale, coeffs)
    if isinstance(t, Sub):
        return _lin(t.left, scale, coeffs) + _lin(t.right, -scale, coeffs)
    if isinstance(t, Mul):
        return _lin(t.term, scale * t.coef, coeffs)
    raise TypeError(f"not a term: {t!r}")


def evaluate_term(t: Term, nu: Valuation) -> Fraction:
    coeffs, const = linearize(t)
    total = const
    for v, c in coeffs.items():
        if v not in nu:
            raise EvalError(f"unbound variable {to_text(v)}")
        total += c * Fraction(nu[v])
    return total


def evaluate(f: Formula, nu: Valuation) -> bool:
    """``nu |= f`` over exact rationals."""
    if f is TRUE or isinstance(f, _TrueF):
        return True
    if isinstance(f, _FalseF):
        return False
    if isinstance(f, BoolVar):
        if f not in nu:
            raise EvalError(f"unbound variable {to_text(f)}")
        return bool(nu[f])
    if isinstance(f, Not):
        return not evaluate(f.arg, nu)
    if isinstance(f, And):
        return all(evaluate(a, nu) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, nu) for a in f.args)
    if isinstance(f, _Cmp):
        d = evaluate_term(f.left, nu) - evaluate_term(f.right, nu)
        if isinstance(f, Lt):
            return d < 0
        if isinstance(f, Le):
            return d <= 0
        return d == 0
    raise TypeError(f"not a formula: {f!r}")


def gamma_of_valuation(nu: Valuation) -> Formula:
    """Conjunction pinning every variable of ``nu`` to its value."""
    parts = []
    for s in sorted(nu, key=symbol_key):
        v = nu[s]
        if isinstance(s, BoolVar):
            parts.append(s if v else Not(s))
        else:
            parts.append(Eq(s, Const(v)))
    return conj(*parts)


# ------------------------------------------------------------------- atoms


def linear_constraint(f: _Cmp) -> tuple[dict, Fraction, str]:
    """``(coeffs, const, op)`` meaning ``const + sum coeffs*x  op  0``."""
    lc, lk = linearize(f.left)
    rc, rk = linearize(f.right)
    coeffs = dict(lc)
    for v, c in rc.items():
        coeffs[v] = coeffs.get(v, 0) - c
    coeffs = {v: c for v, c in coeffs.items() if c != 0}
    return coeffs, lk - rk, f.op


def _integralize(coeffs: dict, const: Fraction):
    den = 1
    for c in list(coeffs.values()) + [const]:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = {v: int(c * den) for v, c in coeffs.items()}
    k = int(const * den)
    g = 0
    for c in list(ints.values()) + [k]:
        g = math.gcd(g, c)
    if g > 1:
        ints = {v: c // g for v, c in ints.items()}
        k //= g
    return ints, k


def make_constraint(coeffs: Mapping, const, op: str) -> Formula:
    """Canonical formula for ``const + sum coeffs*x  op  0``.

    Coefficients become coprime integers; equalities additionally get a
    positive coefficient on their least variable.  The result places
    positive-coefficient variables on the left and negative ones on the
    right.  Variable-free constraints fold to TRUE/FALSE.
    """
    coeffs = {v: Fraction(c) for v, c in coeffs.items() if c != 0}
    const = Fraction(const)
    if not coeffs:
        ok = const < 0 if op == "<" else const <= 0 if op == "<=" else const == 0
        return TRUE if ok else FALSE
    ints, k = _integralize(coeffs, const)
    order = sorted(ints, key=symbol_key)
    if op == "=" and ints[order[0]] < 0:
        ints = {v: -c for v, c in ints.items()}
        k = -k
    lhs, rhs = [], []
    for v in order:
        c = ints[v]
        t = v if abs(c) == 1 else Mul(abs(c), v)
        (lhs if c > 0 else rhs).append(t)
    if k > 0:
        lhs.append(Const(k))
    elif k < 0:
        rhs.append(Const(-k))
    cls = {"<": Lt, "<=": Le, "=": Eq}[op]
    return cls(term_sum(lhs), term_sum(rhs))


def normalize_atom(f: Formula) -> Formula:
    if isinstance(f, BoolVar):
        return f
    if isinstance(f, _Cmp):
        return make_constraint(*linear_constraint(f))
    raise TypeError(f"not an atom: {f!r}")


def atom_key(f: Formula) -> tuple:
    """Hashable normal-form key: two atoms are equal iff their keys are."""
    if isinstance(f, BoolVar):
        return ("bool", f.name, f.index)
    a = normalize_atom(f)
    if not isinstance(a, _Cmp):
        return ("const", a == TRUE)
    coeffs, const, op = linear_constraint(a)
    return (op, tuple(sorted(((symbol_key(v), int(c)) for v, c in coeffs.items()))), int(const))


def is_atom(f: Formula) -> bool:
    return isinstance(f, (BoolVar, _Cmp))


def atoms_of(f: Formula) -> set:
    """Normalized atoms occurring in ``f``; constant comparisons are dropped."""
    out = set()
    stack = [f]
    while stack:
        n = stack.pop()
        if isinstance(n, BoolVar):
            out.add(n)
        elif isinstance(n, _Cmp):
            a = normalize_atom(n)
            if isinstance(a, _Cmp):
                out.add(a)
        elif isinstance(n, Not):
            stack.append(n.arg)
        elif isinstance(n, (And, Or)):
            stack.extend(n.args)
    return out


# ------------------------------------------------------------------ printing


def _fmt_symbol(s) -> str:
    return s.name if s.index is None else f"{s.name}@{s.index}"


def _fmt_const(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


def _term_text(t: Term, prec: int) -> str:
    # prec: 0 = sum context, 1 = right operand of '-' or operand of '*'
    if isinstance(t, Const):
        s = _fmt_const(t.value)
        return f"({s})" if (t.value < 0 or t.value.denominator != 1) and prec > 0 else s
    if isinstance(t, Var):
        return _fmt_symbol(t)
    if isinstance(t, Mul):
        return f"{_fmt_const(t.coef) if t.coef >= 0 else '(' + _fmt_const(t.coef) + ')'} * {_term_text(t.term, 1)}"
    if isinstance(t, (Add, Sub)):
        op = "+" if isinstance(t, Add) else "-"
        s = f"{_term_text(t.left, 0)} {op} {_term_text(t.right, 1)}"
        return f"({s})" if prec > 0 else s
    raise TypeError(t)


def _formula_text(f: Formula, prec: int) -> str:
    # prec: 0 = '||', 1 = '&&', 2 = unary
    if isinstance(f, _TrueF):
        return "true"
    if isinstance(f, _FalseF):
        return "false"
    if isinstance(f, BoolVar):
        return _fmt_symbol(f)
    if isinstance(f, _Cmp):
        s = f"{_term_text(f.left, 0)} {f.op} {_term_text(f.right, 0)}"
        return f"({s})" if prec > 2 else s
    if isinstance(f, Not):
        return "!" + _formula_text(f.arg, 3)
    if isinstance(f, (And, Or)):
        mine = 1 if isinstance(f, And) else 0
        sep = " && " if mine else " || "
        s = sep.join(_formula_text(a, mine + 1) for a in f.args)
        return f"({s})" if prec > mine else s
    raise TypeError(f)


def to_text(node: _Node) -> str:
    """Concrete syntax accepted by :func:`invlearn.frontend.parse_formula`."""
    if isinstance(node, (Var, BoolVar)):
        return _fmt_symbol(node)
    if isinstance(node, Term):
        return _term_text(node, 0)
    return _formula_text(node, 0)
