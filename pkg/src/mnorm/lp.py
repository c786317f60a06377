"""Linear programs over exact rationals.

``solve_feasible_vertex`` returns an extreme point together with a full-rank
set of tight rows.  Small programs go straight to an exact bounded-variable
simplex with Bland's rule.  Larger ones are first solved in floating point
by HiGHS; the float vertex is then rebuilt and checked in exact arithmetic,
with the exact simplex as the fallback whenever that check fails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

from .core import Number, frac

log = logging.getLogger(__name__)

RELATIONS = ("<=", "=", ">=")
TAGS = ("feasibility", "cardinality", "degree", "budget", "other")

# size (variables * rows) below which the exact simplex is used directly
EXACT_SIZE_LIMIT = 300
# float classification tolerance for the HiGHS warm start
FLOAT_TOL = 1e-7


class UnboundedLPError(RuntimeError):
    """The objective is unbounded on a polyhedron without box bounds."""


class NotAVertexError(RuntimeError):
    """A point claimed to be a vertex does not have a full tight basis."""


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[int, Fraction]
    rel: str
    rhs: Fraction
    tag: str = "other"

    def activity(self, x: Sequence[Fraction]) -> Fraction:
        return sum((a * x[j] for j, a in self.coeffs.items()), Fraction(0))

    def satisfied(self, x: Sequence[Fraction]) -> bool:
        v = self.activity(x)
        if self.rel == "<=":
            return v <= self.rhs
        if self.rel == ">=":
            return v >= self.rhs
        return v == self.rhs

    def tight(self, x: Sequence[Fraction]) -> bool:
        return self.activity(x) == self.rhs


@dataclass
class LinearProgram:
    lower: list[Fraction] = field(default_factory=list)
    upper: list[Fraction | None] = field(default_factory=list)
    names: list[Hashable] = field(default_factory=list)
    rows: list[Constraint] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.lower)

    def add_var(self, name: Hashable = None, lo: Number = 0, hi: Number | None = None) -> int:
        self.lower.append(frac(lo))
        self.upper.append(None if hi is None else frac(hi))
        self.names.append(len(self.names) if name is None else name)
        return len(self.lower) - 1

    def add_row(self, coeffs: Mapping[int, Number] | Iterable[tuple[int, Number]], rel: str,
                rhs: Number, tag: str = "other") -> int:
        if rel not in RELATIONS:
            raise ValueError(f"relation must be one of {RELATIONS}")
        if tag not in TAGS:
            raise ValueError(f"tag must be one of {TAGS}")
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        cs: dict[int, Fraction] = {}
        for j, a in items:
            if not 0 <= j < self.num_vars:
                raise ValueError(f"row references unknown variable {j}")
            a = frac(a)
            if a:
                cs[j] = cs.get(j, Fraction(0)) + a
        self.rows.append(Constraint({j: a for j, a in cs.items() if a}, rel, frac(rhs), tag))
        return len(self.rows) - 1

    def index_of(self, name: Hashable) -> int:
        return self.names.index(name)


# A tight row is ("row", i) for constraint i, or ("lb", j) / ("ub", j) for a bound.
RowRef = tuple[str, int]


@dataclass(frozen=True)
class VertexSolution:
    values: tuple[Fraction, ...]
    tight_rows: tuple[RowRef, ...]
    lower: tuple[Fraction, ...]
    upper: tuple[Fraction | None, ...]
    objective: Fraction | None = None

    def __getitem__(self, j: int) -> Fraction:
        return self.values[j]

    def is_fractional(self, j: int) -> bool:
        v = self.values[j]
        if v == self.lower[j]:
            return False
        u = self.upper[j]
        return u is None or v != u


@dataclass(frozen=True)
class Infeasible:
    reason: str = "infeasible"
    exact: bool = True


# --------------------------------------------------------------------------
# exact linear algebra helpers


class _Echelon:
    """Incrementally maintained reduced row echelon form over sparse rows."""

    def __init__(self) -> None:
        self.pivots: dict[int, dict[int, Fraction]] = {}

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def reduce(self, row: Mapping[int, Fraction]) -> dict[int, Fraction]:
        r = dict(row)
        for c in [c for c in r if c in self.pivots]:
            f = r.get(c)
            if not f:
                continue
            for k, v in self.pivots[c].items():
                nv = r.get(k, Fraction(0)) - f * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
        return r

    def add(self, row: Mapping[int, Fraction]) -> bool:
        """Add ``row`` if it is independent of the current span."""
        r = self.reduce(row)
        if not r:
            return False
        c = min(r)
        inv = 1 / r[c]
        r = {k: v * inv for k, v in r.items()}
        for p, prow in self.pivots.items():
            f = prow.get(c)
            if f:
                for k, v in r.items():
                    nv = prow.get(k, Fraction(0)) - f * v
                    if nv:
                        prow[k] = nv
                    else:
                        prow.pop(k, None)
        self.pivots[c] = r
        return True


def _row_vectors(lp: LinearProgram, x: Sequence[Fraction]) -> list[tuple[RowRef, dict[int, Fraction]]]:
    """Tight rows at x in canonical order: constraints first, then bounds."""
    out: list[tuple[RowRef, dict[int, Fraction]]] = []
    for i, row in enumerate(lp.rows):
        if row.coeffs and row.tight(x):
            out.append((("row", i), dict(row.coeffs)))
    one = Fraction(1)
    for j in range(lp.num_vars):
        if x[j] == lp.lower[j]:
            out.append((("lb", j), {j: one}))
        if lp.upper[j] is not None and x[j] == lp.upper[j]:
            out.append((("ub", j), {j: one}))
    return out


def tight_basis(lp: LinearProgram, x: Sequence[Fraction]) -> tuple[RowRef, ...]:
    """First linearly independent subset of the tight rows, of size = #variables.

    Raises NotAVertexError when the tight rows do not have full rank.
    """
    ech = _Echelon()
    chosen: list[RowRef] = []
    m = lp.num_vars
    if m == 0:
        return ()
    for ref, vec in _row_vectors(lp, x):
        if ech.add(vec):
            chosen.append(ref)
            if ech.rank == m:
                return tuple(chosen)
    raise NotAVertexError(f"tight rows have rank {ech.rank} < {m}")


def is_feasible_point(lp: LinearProgram, x: Sequence[Fraction]) -> bool:
    for j in range(lp.num_vars):
        if x[j] < lp.lower[j]:
            return False
        if lp.upper[j] is not None and x[j] > lp.upper[j]:
            return False
    return all(row.satisfied(x) for row in lp.rows)


def audit_vertex(lp: LinearProgram, sol: VertexSolution) -> bool:
    """Exact feasibility plus a full-rank, genuinely tight basis."""
    x = sol.values
    if len(x) != lp.num_vars or not is_feasible_point(lp, x):
        return False
    if len(sol.tight_rows) != lp.num_vars:
        return False
    ech = _Echelon()
    one = Fraction(1)
    for kind, i in sol.tight_rows:
        if kind == "row":
            row = lp.rows[i]
            if not row.tight(x):
                return False
            vec = dict(row.coeffs)
        elif kind == "lb":
            if x[i] != lp.lower[i]:
                return False
            vec = {i: one}
        else:
            if lp.upper[i] is None or x[i] != lp.upper[i]:
                return False
            vec = {i: one}
        if not ech.add(vec):
            return False
    return ech.rank == lp.num_vars


def _make_vertex(lp: LinearProgram, x: Sequence[Fraction],
                 objective: Mapping[int, Fraction] | None) -> VertexSolution:
    xs = tuple(x)
    obj = None
    if objective is not None:
        obj = sum((c * xs[j] for j, c in objective.items()), Fraction(0))
    return VertexSolution(xs, tight_basis(lp, xs), tuple(lp.lower), tuple(lp.upper), obj)


# --------------------------------------------------------------------------
# exact bounded-variable simplex


class _Simplex:
    def __init__(self, lp: LinearProgram) -> None:
        nv = lp.num_vars
        m = len(lp.rows)
        self.nv = nv
        self.m = m
        ub: list[Fraction | None] = []
        for j in range(nv):
            u = lp.upper[j]
            ub.append(None if u is None else u - lp.lower[j])
        slack_of: list[int | None] = []
        ns = 0
        for row in lp.rows:
            if row.rel == "=":
                slack_of.append(None)
            else:
                slack_of.append(nv + ns)
                ns += 1
        self.ns = ns
        ncols = nv + ns + m
        self.ncols = ncols
        ub.extend([None] * ns)
        ub.extend([None] * m)
        self.ub = ub
        self.art0 = nv + ns
        zero = Fraction(0)
        tab: list[list[Fraction]] = []
        rhs: list[Fraction] = []
        for i, row in enumerate(lp.rows):
            r = [zero] * ncols
            beta = row.rhs
            for j, a in row.coeffs.items():
                r[j] = a
                beta -= a * lp.lower[j]
            s = slack_of[i]
            if s is not None:
                r[s] = Fraction(1) if row.rel == "<=" else Fraction(-1)
            if beta < 0:
                r = [-v for v in r]
                beta = -beta
            r[self.art0 + i] = Fraction(1)
            tab.append(r)
            rhs.append(beta)
        self.tab = tab
        self.val = [zero] * ncols
        self.basis = [self.art0 + i for i in range(m)]
        self.is_basic = [False] * ncols
        for i in range(m):
            self.val[self.art0 + i] = rhs[i]
            self.is_basic[self.art0 + i] = True
        self.lower = lp.lower

    def _reduced_costs(self, cost: Mapping[int, Fraction]) -> list[Fraction]:
        d = [Fraction(0)] * self.ncols
        for j, c in cost.items():
            d[j] = c
        for i, b in enumerate(self.basis):
            cb = cost.get(b)
            if cb:
                for j, a in enumerate(self.tab[i]):
                    if a:
                        d[j] -= cb * a
        return d

    def _pivot(self, r: int, j: int, d: list[Fraction]) -> None:
        row = self.tab[r]
        inv = 1 / row[j]
        if inv != 1:
            row = [v * inv for v in row]
            self.tab[r] = row
        nz = [(k, v) for k, v in enumerate(row) if v]
        for i in range(self.m):
            if i == r:
                continue
            ri = self.tab[i]
            f = ri[j]
            if f:
                for k, v in nz:
                    ri[k] -= f * v
        f = d[j]
        if f:
            for k, v in nz:
                d[k] -= f * v
        old = self.basis[r]
        self.is_basic[old] = False
        self.is_basic[j] = True
        self.basis[r] = j

    def run(self, cost: Mapping[int, Fraction], max_iter: int = 200000) -> None:
        d = self._reduced_costs(cost)
        ub, val = self.ub, self.val
        for _ in range(max_iter):
            enter = -1
            direction = 0
            for j in range(self.ncols):
                if self.is_basic[j]:
                    continue
                dj = d[j]
                if dj < 0 and (ub[j] is None or val[j] < ub[j]):
                    enter, direction = j, 1
                    break
                if dj > 0 and val[j] > 0:
                    enter, direction = j, -1
                    break
            if enter < 0:
                return
            j = enter
            best: Fraction | None = None
            leave_row = -1  # -1 means the entering variable flips bounds
            leave_idx = -1
            if ub[j] is not None:
                best = ub[j]
                leave_idx = j
            for i in range(self.m):
                a = self.tab[i][j]
                if not a:
                    continue
                k = self.basis[i]
                rate = -direction * a
                if rate < 0:
                    lim = val[k] / -rate
                elif ub[k] is not None:
                    lim = (ub[k] - val[k]) / rate
                else:
                    continue
                if best is None or lim < best or (lim == best and k < leave_idx):
                    best, leave_row, leave_idx = lim, i, k
            if best is None:
                raise UnboundedLPError("objective unbounded and no box bound limits the ray")
            theta = best
            if theta:
                val[j] += direction * theta
                for i in range(self.m):
                    a = self.tab[i][j]
                    if a:
                        val[self.basis[i]] -= direction * a * theta
            if leave_row < 0:
                val[j] = ub[j] if direction > 0 else Fraction(0)
                continue
            k = self.basis[leave_row]
            # snap the leaving variable exactly onto the bound it reached
            rate = -direction * self.tab[leave_row][j]
            val[k] = Fraction(0) if rate < 0 else ub[k]
            self._pivot(leave_row, j, d)
            if k >= self.art0:
                ub[k] = Fraction(0)
        raise RuntimeError("simplex iteration limit reached")

    def phase_one(self) -> bool:
        cost = {self.art0 + i: Fraction(1) for i in range(self.m)}
        self.run(cost)
        if any(self.val[self.art0 + i] for i in range(self.m)):
            return False
        for i in range(self.m):
            self.ub[self.art0 + i] = Fraction(0)
        return True

    def point(self) -> list[Fraction]:
        return [self.val[j] + self.lower[j] for j in range(self.nv)]


def _solve_exact(lp: LinearProgram, objective: Mapping[int, Fraction] | None
                 ) -> list[Fraction] | Infeasible:
    sx = _Simplex(lp)
    if not sx.phase_one():
        return Infeasible("phase one ended with positive artificial mass", exact=True)
    if objective:
        sx.run(dict(objective))
    return sx.point()


# --------------------------------------------------------------------------
# floating-point warm start, rebuilt exactly


def _solve_highs(lp: LinearProgram, objective: Mapping[int, Fraction] | None):
    import numpy as np
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    nv = lp.num_vars
    c = np.zeros(nv)
    if objective:
        for j, a in objective.items():
            c[j] = float(a)
    ub_r, ub_c, ub_v, b_ub = [], [], [], []
    eq_r, eq_c, eq_v, b_eq = [], [], [], []
    for row in lp.rows:
        if not row.coeffs:
            continue
        if row.rel == "=":
            k = len(b_eq)
            for j, a in row.coeffs.items():
                eq_r.append(k); eq_c.append(j); eq_v.append(float(a))
            b_eq.append(float(row.rhs))
        else:
            s = 1.0 if row.rel == "<=" else -1.0
            k = len(b_ub)
            for j, a in row.coeffs.items():
                ub_r.append(k); ub_c.append(j); ub_v.append(s * float(a))
            b_ub.append(s * float(row.rhs))
    A_ub = coo_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), nv)).tocsr() if b_ub else None
    A_eq = coo_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), nv)).tocsr() if b_eq else None
    bounds = [(float(lp.lower[j]), None if lp.upper[j] is None else float(lp.upper[j]))
              for j in range(nv)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq, b_eq=b_eq or None,
                  bounds=bounds, method="highs-ds")
    return res


def _farkas_infeasible(lp: LinearProgram) -> bool:
    """Exact infeasibility proof from the duals of a float phase-1 solve.

    Row multipliers mu (mu >= 0 on >= rows, mu <= 0 on <= rows) give
    sum mu_r (a_r x - b_r) >= 0 for every feasible x; if its maximum over the
    box is negative there is no feasible x.  False means no proof was found.
    """
    rows = [r for r in lp.rows if r.coeffs]
    ph = LinearProgram(list(lp.lower), list(lp.upper), list(lp.names))
    viol = []
    for r in rows:
        v = ph.add_var(None, 0)
        viol.append(v)
        cs = dict(r.coeffs)
        if r.rel == "=":
            w = ph.add_var(None, 0)
            viol.append(w)
            cs[v], cs[w] = Fraction(1), Fraction(-1)
        else:
            cs[v] = Fraction(-1 if r.rel == "<=" else 1)
        ph.rows.append(Constraint(cs, r.rel, r.rhs, r.tag))
    res = _solve_highs(ph, {v: Fraction(1) for v in viol})
    if res.status != 0 or res.fun <= FLOAT_TOL:
        return False
    ub = iter(res.ineqlin.marginals if res.ineqlin is not None else ())
    eq = iter(res.eqlin.marginals if res.eqlin is not None else ())
    c: dict[int, Fraction] = {}
    const = Fraction(0)
    for r in rows:
        m = Fraction(float(next(eq) if r.rel == "=" else next(ub))).limit_denominator(10 ** 9)
        mu = -m if r.rel == ">=" else m
        if (r.rel == ">=" and mu < 0) or (r.rel == "<=" and mu > 0):
            mu = Fraction(0)
        if not mu:
            continue
        for j, a in r.coeffs.items():
            c[j] = c.get(j, Fraction(0)) + mu * a
        const -= mu * r.rhs
    top = const
    for j, a in c.items():
        if a > 0:
            if lp.upper[j] is None:
                return False
            top += a * lp.upper[j]
        elif a < 0:
            top += a * lp.lower[j]
    return top < 0


def _solve_linear_system(rows: list[tuple[dict[int, Fraction], Fraction]], unknowns: list[int]
                         ) -> dict[int, Fraction] | None:
    """Solve a square-or-overdetermined exact system; None unless the solution is unique."""
    if not unknowns:
        return {}
    ech_rows: dict[int, tuple[dict[int, Fraction], Fraction]] = {}
    for coeffs, b in rows:
        r = dict(coeffs)
        rb = b
        for c in [c for c in r if c in ech_rows]:
            f = r.get(c)
            if not f:
                continue
            prow, pb = ech_rows[c]
            for k, v in prow.items():
                nv = r.get(k, Fraction(0)) - f * v
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
            rb -= f * pb
        if not r:
            if rb != 0:
                return None
            continue
        c = min(r)
        inv = 1 / r[c]
        r = {k: v * inv for k, v in r.items()}
        rb *= inv
        for p, (prow, pb) in list(ech_rows.items()):
            f = prow.get(c)
            if f:
                for k, v in r.items():
                    nv = prow.get(k, Fraction(0)) - f * v
                    if nv:
                        prow[k] = nv
                    else:
                        prow.pop(k, None)
                ech_rows[p] = (prow, pb - f * rb)
        ech_rows[c] = (r, rb)
        if len(ech_rows) == len(unknowns):
            break
    if len(ech_rows) < len(unknowns):
        return None
    out: dict[int, Fraction] = {}
    for c, (prow, pb) in ech_rows.items():
        if len(prow) != 1:
            return None
        out[c] = pb
    return out


def _rebuild_exact(lp: LinearProgram, xf) -> list[Fraction] | None:
    nv = lp.num_vars
    x: list[Fraction | None] = [None] * nv
    unknown: list[int] = []
    for j in range(nv):
        lo, hi = lp.lower[j], lp.upper[j]
        if abs(xf[j] - float(lo)) <= FLOAT_TOL:
            x[j] = lo
        elif hi is not None and abs(xf[j] - float(hi)) <= FLOAT_TOL:
            x[j] = hi
        else:
            unknown.append(j)
    uset = set(unknown)
    system = []
    for row in lp.rows:
        if not row.coeffs:
            continue
        act = sum(float(a) * xf[j] for j, a in row.coeffs.items())
        if row.rel != "=" and abs(act - float(row.rhs)) > FLOAT_TOL * (1 + abs(float(row.rhs))):
            continue
        coeffs = {j: a for j, a in row.coeffs.items() if j in uset}
        b = row.rhs - sum((a * x[j] for j, a in row.coeffs.items() if j not in uset), Fraction(0))
        if coeffs:
            system.append((coeffs, b))
        elif b != 0:
            return None
    sol = _solve_linear_system(system, unknown)
    if sol is None:
        return None
    for j, v in sol.items():
        x[j] = v
    if any(v is None for v in x):
        return None
    return x  # type: ignore[return-value]


def solve_feasible_vertex(lp: LinearProgram, objective: Mapping[int, Number] | None = None,
                          method: str = "auto") -> VertexSolution | Infeasible:
    """Return a vertex of the polyhedron of ``lp`` (minimising ``objective`` if given).

    ``method`` is "exact", "highs" or "auto".  Every returned vertex has been
    checked in exact arithmetic: feasibility with zero tolerance and a
    full-rank set of tight rows.
    """
    for j in range(lp.num_vars):
        if lp.upper[j] is not None and lp.upper[j] < lp.lower[j]:
            return Infeasible(f"variable {lp.names[j]!r} has empty bounds")
    for row in lp.rows:
        if not row.coeffs and not row.satisfied([]):
            return Infeasible("a constant row is violated")
    obj = None if objective is None else {j: frac(c) for j, c in objective.items() if frac(c)}
    if lp.num_vars == 0:
        return _make_vertex(lp, [], obj)
    size = lp.num_vars * max(1, len(lp.rows))
    if method == "exact" or (method == "auto" and size <= EXACT_SIZE_LIMIT):
        x = _solve_exact(lp, obj)
        if isinstance(x, Infeasible):
            return x
        return _make_vertex(lp, x, obj)
    res = _solve_highs(lp, obj)
    if res.status == 0:
        x = _rebuild_exact(lp, res.x)
        if x is not None and is_feasible_point(lp, x):
            try:
                return _make_vertex(lp, x, obj)
            except NotAVertexError:
                pass
        log.debug("float vertex failed exact certification; falling back to exact simplex")
    elif res.status == 2:
        if _farkas_infeasible(lp):
            return Infeasible("infeasible: exact Farkas certificate")
        if method == "highs":
            return Infeasible("HiGHS reports infeasibility", exact=False)
    elif res.status == 3:
        raise UnboundedLPError("HiGHS reports an unbounded objective")
    x = _solve_exact(lp, obj)
    if isinstance(x, Infeasible):
        return x
    return _make_vertex(lp, x, obj)


def minimize(lp: LinearProgram, objective: Mapping[int, Number], method: str = "auto"
             ) -> VertexSolution | Infeasible:
    return solve_feasible_vertex(lp, objective, method)


# --------------------------------------------------------------------------
# restriction and inspection


def restrict(lp: LinearProgram, solution: Sequence[Fraction] | VertexSolution,
             fixed_ids: Iterable[int]) -> LinearProgram:
    """Substitute the fixed variables by their values in ``solution``.

    The result keeps the remaining variables in their original order, with
    their names; rows left without variables are dropped.
    """
    vals = solution.values if isinstance(solution, VertexSolution) else solution
    fixed = set(fixed_ids)
    keep = [j for j in range(lp.num_vars) if j not in fixed]
    new_index = {j: k for k, j in enumerate(keep)}
    out = LinearProgram()
    for j in keep:
        out.add_var(lp.names[j], lp.lower[j], lp.upper[j])
    for row in lp.rows:
        rhs = row.rhs
        cs: dict[int, Fraction] = {}
        for j, a in row.coeffs.items():
            if j in fixed:
                rhs -= a * vals[j]
            else:
                cs[new_index[j]] = a
        if cs:
            out.add_row(cs, row.rel, rhs, row.tag)
    return out


def restrict_solution(lp: LinearProgram, solution: VertexSolution, fixed_ids: Iterable[int]
                      ) -> tuple[LinearProgram, VertexSolution]:
    """Restrict both the program and the vertex; the vertex is re-derived and audited."""
    fixed = set(fixed_ids)
    sub = restrict(lp, solution, fixed)
    x = [solution.values[j] for j in range(lp.num_vars) if j not in fixed]
    return sub, _make_vertex(sub, x, None)


def count_fractional(sol: VertexSolution, var_subset: Iterable[int] | None = None) -> int:
    """Number of variables strictly between their bounds."""
    ids = range(len(sol.values)) if var_subset is None else var_subset
    return sum(1 for j in ids if sol.is_fractional(j))


def tight_rows_by_tag(lp: LinearProgram, sol: VertexSolution) -> dict[str, int]:
    """Count of basis rows per constraint tag (bounds counted under "bound")."""
    out: dict[str, int] = {}
    for kind, i in sol.tight_rows:
        key = lp.rows[i].tag if kind == "row" else "bound"
        out[key] = out.get(key, 0) + 1
    return out


def dump(lp: LinearProgram) -> str:
    """Line-oriented text form: one variable or constraint per line."""
    lines = []
    for j in range(lp.num_vars):
        hi = "inf" if lp.upper[j] is None else str(lp.upper[j])
        lines.append(f"var {j} {lp.names[j]} [{lp.lower[j]}, {hi}]")
    for i, row in enumerate(lp.rows):
        terms = " ".join(f"{a}*x{j}" for j, a in sorted(row.coeffs.items()))
        lines.append(f"row {i} {row.tag}: {terms or '0'} {row.rel} {row.rhs}")
    return "\n".join(lines) + "\n"
