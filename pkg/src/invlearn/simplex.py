"""Incremental exact-rational simplex for conjunctions of linear constraints.

The tableau follows the general-simplex formulation used in DPLL(T)
solvers: every constraint ``const + sum c*x  op  0`` is turned into a bound
on a slack variable, bounds are asserted and retracted in a stack
discipline, and :meth:`Simplex.check` repairs the assignment with Bland's
rule.  Strict bounds use delta-rationals ``(a, b)`` standing for
``a + b*delta`` for an infinitesimal ``delta > 0``; plain tuples compare
lexicographically, which is exactly the delta order.

Conflicts come back as Farkas certificates: a map ``cid -> k`` such that
``sum k * (const + L)`` over the registered forms cancels every variable and
leaves a false constant constraint.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

from .logic import symbol_key

ZERO = Fraction(0)
_D0 = (ZERO, ZERO)


def _add(p, q):
    return (p[0] + q[0], p[1] + q[1])


def _sub(p, q):
    return (p[0] - q[0], p[1] - q[1])


def _scale(c, p):
    return (c * p[0], c * p[1])


class Simplex:
    def __init__(self):
        self.rows: dict[int, dict[int, Fraction]] = {}
        self.cols: dict[int, set] = defaultdict(set)
        self.val: list = []
        self.lo: list = []
        self.hi: list = []
        self.trail: list = []
        self.levels: list = []
        self.var_ids: dict = {}
        self.slacks: dict = {}
        self.cons: list = []  # cid -> (var, lead, op, rhs)
        self.forms: list = []  # cid -> (coeffs, const, op)
        self.pivots = 0
        # set when values may violate bounds; cleared by a successful check()
        self.dirty = False

    # ------------------------------------------------------------ variables
    def _new_var(self) -> int:
        self.val.append(_D0)
        self.lo.append(None)
        self.hi.append(None)
        return len(self.val) - 1

    def var(self, v) -> int:
        i = self.var_ids.get(v)
        if i is None:
            i = self._new_var()
            self.var_ids[v] = i
        return i

    def register(self, coeffs: dict, const, op: str) -> int:
        """Register ``const + sum coeffs*x  op  0`` and return its id."""
        if not coeffs:
            raise ValueError("constant constraints must be folded by the caller")
        const = Fraction(const)
        order = sorted(coeffs, key=symbol_key)
        lead = Fraction(coeffs[order[0]])
        form = tuple((symbol_key(v), Fraction(coeffs[v]) / lead) for v in order)
        if len(form) == 1:
            s = self.var(order[0])
        else:
            s = self.slacks.get(form)
            if s is None:
                s = self._new_var()
                row: dict[int, Fraction] = {}
                for v in order:
                    c = Fraction(coeffs[v]) / lead
                    x = self.var(v)
                    if x in self.rows:
                        for y, d in self.rows[x].items():
                            row[y] = row.get(y, ZERO) + c * d
                    else:
                        row[x] = row.get(x, ZERO) + c
                row = {y: d for y, d in row.items() if d != 0}
                self.rows[s] = row
                for y in row:
                    self.cols[y].add(s)
                self.val[s] = self._row_value(row)
                self.slacks[form] = s
        # lead * s  op  -const
        self.cons.append((s, lead, op, -const / lead))
        self.forms.append((dict(coeffs), const, op))
        return len(self.cons) - 1

    def _row_value(self, row):
        a = b = ZERO
        for y, d in row.items():
            va = self.val[y]
            a += d * va[0]
            b += d * va[1]
        return (a, b)

    # -------------------------------------------------------------- bounds
    def push(self):
        self.levels.append(len(self.trail))

    def pop(self, n: int = 1):
        if n <= 0:
            return
        target = self.levels[-n]
        del self.levels[-n:]
        while len(self.trail) > target:
            x, upper, old = self.trail.pop()
            (self.hi if upper else self.lo)[x] = old

    def assert_constraint(self, cid: int):
        """Assert a registered constraint; returns a certificate on conflict."""
        s, lead, op, rhs = self.cons[cid]
        w = 1 / abs(lead)
        if op == "=":
            return self._assert_upper(s, (rhs, ZERO), cid, w if lead > 0 else -w) or self._assert_lower(
                s, (rhs, ZERO), cid, -w if lead > 0 else w
            )
        strict = op == "<"
        if lead > 0:
            return self._assert_upper(s, (rhs, Fraction(-1) if strict else ZERO), cid, w)
        return self._assert_lower(s, (rhs, Fraction(1) if strict else ZERO), cid, w)

    def _assert_upper(self, x, c, cid, k):
        cur = self.hi[x]
        if cur is not None and cur[0] <= c:
            return None
        lo = self.lo[x]
        if lo is not None and c < lo[0]:
            return self._certificate([(cur_bound, 1) for cur_bound in ((c, cid, k), lo)])
        self.trail.append((x, True, cur))
        self.hi[x] = (c, cid, k)
        if x not in self.rows and self.val[x] > c:
            self._update(x, c)
        return None

    def _assert_lower(self, x, c, cid, k):
        cur = self.lo[x]
        if cur is not None and cur[0] >= c:
            return None
        hi = self.hi[x]
        if hi is not None and c > hi[0]:
            return self._certificate([(b, 1) for b in ((c, cid, k), hi)])
        self.trail.append((x, False, cur))
        self.lo[x] = (c, cid, k)
        if x not in self.rows and self.val[x] < c:
            self._update(x, c)
        return None

    def _update(self, x, v):
        self.dirty = True
        delta = _sub(v, self.val[x])
        for b in self.cols[x]:
            self.val[b] = _add(self.val[b], _scale(self.rows[b][x], delta))
        self.val[x] = v

    # --------------------------------------------------------------- check
    def check(self):
        """Restore feasibility; ``None`` when satisfiable, else a certificate."""
        self.dirty = True
        while True:
            bad = None
            for b in sorted(self.rows):
                v = self.val[b]
                lo, hi = self.lo[b], self.hi[b]
                if lo is not None and v < lo[0]:
                    bad = (b, True)
                    break
                if hi is not None and v > hi[0]:
                    bad = (b, False)
                    break
            if bad is None:
                self.dirty = False
                return None
            b, below = bad
            row = self.rows[b]
            pick = None
            for x in sorted(row):
                a = row[x]
                if below:
                    ok = (a > 0 and self._can_inc(x)) or (a < 0 and self._can_dec(x))
                else:
                    ok = (a < 0 and self._can_inc(x)) or (a > 0 and self._can_dec(x))
                if ok:
                    pick = x
                    break
            if pick is None:
                return self._row_conflict(b, below)
            target = self.lo[b][0] if below else self.hi[b][0]
            self._pivot_and_update(b, pick, target)

    def _can_inc(self, x):
        hi = self.hi[x]
        return hi is None or self.val[x] < hi[0]

    def _can_dec(self, x):
        lo = self.lo[x]
        return lo is None or self.val[x] > lo[0]

    def _row_conflict(self, b, below):
        row = self.rows[b]
        used = [(self.lo[b] if below else self.hi[b], Fraction(1))]
        for x, a in row.items():
            if below:
                used.append((self.hi[x] if a > 0 else self.lo[x], abs(a)))
            else:
                used.append((self.lo[x] if a > 0 else self.hi[x], abs(a)))
        return self._certificate(used)

    def _certificate(self, used):
        cert: dict[int, Fraction] = {}
        for bound, w in used:
            _, cid, k = bound
            cert[cid] = cert.get(cid, ZERO) + w * k
        return {c: k for c, k in cert.items() if k != 0}

    def _pivot_and_update(self, b, x, v):
        a = self.rows[b][x]
        theta = _scale(1 / a, _sub(v, self.val[b]))
        self.val[b] = v
        self.val[x] = _add(self.val[x], theta)
        for other in self.cols[x]:
            if other != b:
                self.val[other] = _add(self.val[other], _scale(self.rows[other][x], theta))
        self._pivot(b, x)

    def _pivot(self, b, x):
        self.pivots += 1
        row = self.rows.pop(b)
        a = row.pop(x)
        for y in row:
            self.cols[y].discard(b)
        self.cols[x].discard(b)
        inv = 1 / a
        new = {y: -d * inv for y, d in row.items()}
        new[b] = inv
        self.rows[x] = new
        for y in new:
            self.cols[y].add(x)
        for other in list(self.cols[x]):
            if other == x:
                continue
            orow = self.rows[other]
            c = orow.pop(x)
            self.cols[x].discard(other)
            for y, d in new.items():
                nd = orow.get(y, ZERO) + c * d
                if nd == 0:
                    if y in orow:
                        del orow[y]
                        self.cols[y].discard(other)
                else:
                    if y not in orow:
                        self.cols[y].add(other)
                    orow[y] = nd
        self.cols.pop(x, None)

    # --------------------------------------------------------------- model
    def model(self) -> dict:
        """Concrete rational values for the registered program variables."""
        delta = Fraction(1)
        for x, (a, b) in enumerate(self.val):
            lo, hi = self.lo[x], self.hi[x]
            if lo is not None:
                (la, lb) = lo[0]
                if la < a and lb > b:
                    delta = min(delta, (a - la) / (lb - b))
            if hi is not None:
                (ua, ub) = hi[0]
                if a < ua and b > ub:
                    delta = min(delta, (ua - a) / (b - ub))
        return {v: self.val[i][0] + delta * self.val[i][1] for v, i in self.var_ids.items()}


def check_certificate(forms, cert) -> bool:
    """Independent validation of a Farkas certificate over ``forms``.

    ``forms[cid] = (coeffs, const, op)``; the weighted sum must cancel every
    variable and yield a false constant constraint.
    """
    total: dict = {}
    const = ZERO
    strict = False
    for cid, k in cert.items():
        coeffs, c0, op = forms[cid]
        if op != "=" and k < 0:
            return False
        for v, c in coeffs.items():
            total[v] = total.get(v, ZERO) + k * c
        const += k * c0
        if op == "<" and k > 0:
            strict = True
    if any(c != 0 for c in total.values()):
        return False
    return const > 0 or (const == 0 and strict)


def farkas(constraints) -> dict | None:
    """Certificate for an infeasible list of ``(coeffs, const, op)``, else None.

    Variable-free constraints are accepted: a false one is its own
    certificate, a true one is ignored.
    """
    sx = Simplex()
    ids = {}
    for i, (coeffs, const, op) in enumerate(constraints):
        coeffs = {v: Fraction(c) for v, c in coeffs.items() if c != 0}
        const = Fraction(const)
        if not coeffs:
            false = not (const < 0 if op == "<" else const <= 0 if op == "<=" else const == 0)
            if false:
                if op == "=":
                    return {i: Fraction(1) if const > 0 else Fraction(-1)}
                return {i: Fraction(1)}
            continue
        ids[sx.register(coeffs, const, op)] = i
    for cid in ids:
        cert = sx.assert_constraint(cid)
        if cert:
            return {ids[c]: k for c, k in cert.items()}
    cert = sx.check()
    if cert is None:
        return None
    return {ids[c]: k for c, k in cert.items()}
