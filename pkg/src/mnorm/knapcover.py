"""d-dimensional knapsack cover with logarithmic budgets.

Partial enumeration fixes the choice inside the first T_0 groups; an LP
vertex over the remaining groups is then rounded up (every positive entry
is taken).  Two enumerators are provided: all small subsets (few
dimensions) and weight-class counting (more dimensions).
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .core import (
    GroupedUniverse, NoSolution, Number, SolveReport, ceil_log2, frac, report_for,
)
from .lp import (
    Infeasible, LinearProgram, VertexSolution, count_fractional, restrict_solution,
    solve_feasible_vertex, tight_rows_by_tag,
)

log = logging.getLogger(__name__)

Partial = tuple[frozenset[int], ...]


@dataclass(frozen=True)
class KnapInstance:
    universe: GroupedUniverse
    weights: tuple[tuple[Fraction, ...], ...]

    def __init__(self, universe: GroupedUniverse, weights: Sequence[Sequence[Number]]) -> None:
        ws = tuple(tuple(frac(x) for x in row) for row in weights)
        if len(ws) != universe.n:
            raise ValueError("need one weight vector per element")
        if not ws or not ws[0]:
            raise ValueError("need at least one dimension")
        d = len(ws[0])
        if any(len(r) != d for r in ws):
            raise ValueError("weight vectors have different lengths")
        if any(x < 0 for r in ws for x in r):
            raise ValueError("weights must be non-negative")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "weights", ws)

    @property
    def d(self) -> int:
        return len(self.weights[0])

    @property
    def n(self) -> int:
        return self.universe.n

    def coverage(self, chosen) -> list[Fraction]:
        tot = [Fraction(0)] * self.d
        for e in chosen:
            for i, w in enumerate(self.weights[e]):
                tot[i] += w
        return tot

    def covers(self, chosen) -> bool:
        return all(x >= 1 for x in self.coverage(chosen))

    def spread(self) -> Fraction:
        """W: the largest ratio of max weight to min positive weight over dimensions."""
        best = Fraction(1)
        for i in range(self.d):
            pos = [r[i] for r in self.weights if r[i] > 0]
            if pos:
                best = max(best, max(pos) / min(pos))
        return best


def with_universe(inst: KnapInstance, universe: GroupedUniverse) -> KnapInstance:
    return KnapInstance(universe, inst.weights)


# --------------------------------------------------------------------------
# enumeration


def _subsets_upto(items: Sequence[int], k: int, exact: bool = False) -> Iterator[frozenset[int]]:
    sizes = [min(k, len(items))] if exact else range(min(k, len(items)) + 1)
    for s in sizes:
        for c in itertools.combinations(items, s):
            yield frozenset(c)


def _product(factories) -> Iterator[Partial]:
    """Lazy cartesian product of re-creatable streams."""
    if not factories:
        yield ()
        return
    head, rest = factories[0], factories[1:]
    for a in head():
        for tail in _product(rest):
            yield (a,) + tail


def enumerate_full(inst: KnapInstance, T0: int, maximal_only: bool = False) -> Iterator[Partial]:
    """Every (D_1..D_T0) with D_j a subset of S_j and |D_j| <= 2^j.

    With ``maximal_only`` each D_j has exactly min(2^j, |S_j|) elements.
    """
    u = inst.universe
    facs = []
    for j in range(1, T0 + 1):
        items = sorted(u.group(j))
        facs.append(lambda items=items, j=j: _subsets_upto(items, 2 ** j, maximal_only))
    return _product(facs)


def count_full(inst: KnapInstance, T0: int) -> int:
    total = 1
    for j in range(1, T0 + 1):
        m = len(inst.universe.group(j))
        total *= sum(math.comb(m, s) for s in range(min(2 ** j, m) + 1))
    return total


def weight_class_key(inst: KnapInstance, j: int, e: int) -> tuple[int, ...]:
    """Per dimension 0 for zero weight, else 1 + floor(log2(w / gamma_{j,i}))."""
    members = inst.universe.group(j)
    key = []
    for i in range(inst.d):
        w = inst.weights[e][i]
        pos = [inst.weights[u][i] for u in members if inst.weights[u][i] > 0]
        if w == 0 or not pos:
            key.append(0)
        else:
            q = w / min(pos)
            key.append(1 + (q.numerator // q.denominator).bit_length() - 1)
    return tuple(key)


def weight_classes(inst: KnapInstance, j: int) -> list[list[int]]:
    """Partition of S_j by class key; classes and members sorted."""
    by: dict[tuple[int, ...], list[int]] = {}
    for e in sorted(inst.universe.group(j)):
        by.setdefault(weight_class_key(inst, j, e), []).append(e)
    return [by[k] for k in sorted(by)]


def _count_vectors(sizes: Sequence[int], budget: int, maximal_only: bool):
    def rec(k: int, left: int):
        if k == len(sizes):
            yield ()
            return
        for c in range(min(sizes[k], left) + 1):
            for rest in rec(k + 1, left - c):
                yield (c,) + rest
    for c in rec(0, budget):
        if maximal_only and sum(c) < budget and any(x < s for x, s in zip(c, sizes)):
            continue
        yield c


def _class_subsets(classes: list[list[int]], budget: int, maximal_only: bool):
    seen = set()
    for c in _count_vectors([len(cl) for cl in classes], budget, maximal_only):
        pick = frozenset(e for cl, ck in zip(classes, c) for e in cl[:min(2 * ck, len(cl))])
        if pick not in seen:
            seen.add(pick)
            yield pick


def enumerate_weight_classes(inst: KnapInstance, T0: int | None = None,
                             maximal_only: bool = False) -> Iterator[Partial]:
    """Weight-class partial enumeration with T_0 = ceil(log2 d) by default."""
    if T0 is None:
        T0 = min(ceil_log2(inst.d), inst.universe.T)
    facs = []
    for j in range(1, T0 + 1):
        classes = weight_classes(inst, j)
        facs.append(lambda classes=classes, j=j: _class_subsets(classes, 2 ** j, maximal_only))
    return _product(facs)


# --------------------------------------------------------------------------
# LP and rounding


def build_lp(inst: KnapInstance, partial: Partial, T0: int) -> tuple[LinearProgram, list[int]]:
    """LP-KnapCover over groups T0+1..T given the fixed choice ``partial``.

    Free elements (in no group and not banned) are taken up front.
    """
    u = inst.universe
    fixed = set().union(*partial) if partial else set()
    fixed |= set(u.free())
    cover = inst.coverage(fixed)
    lp = LinearProgram()
    var_elems: list[int] = []
    for j in range(T0 + 1, u.T + 1):
        for e in sorted(u.group(j)):
            lp.add_var(e, 0, 1)
            var_elems.append(e)
    for i in range(inst.d):
        coeffs = {k: inst.weights[e][i] for k, e in enumerate(var_elems)}
        lp.add_row(coeffs, ">=", max(Fraction(0), 1 - cover[i]), "feasibility")
    for j in range(T0 + 1, u.T + 1):
        idx = [k for k, e in enumerate(var_elems) if u.group_of[e] == j]
        if idx:
            lp.add_row({k: 1 for k in idx}, "<=", 2 ** j, "cardinality")
    return lp, var_elems


def support_audit(lp: LinearProgram, sol: VertexSolution, var_elems: list[int],
                  universe: GroupedUniverse) -> dict:
    """Fractional-support counts on the LP restricted to its fractional entries."""
    frac_ids = [k for k in range(lp.num_vars) if sol.is_fractional(k)]
    integral = [k for k in range(lp.num_vars) if not sol.is_fractional(k)]
    sub, subsol = restrict_solution(lp, sol, integral)
    tags = tight_rows_by_tag(sub, subsol)
    m1, m2 = tags.get("feasibility", 0), tags.get("cardinality", 0)
    per_group: dict[int, int] = {}
    for k in frac_ids:
        g = universe.group_of[var_elems[k]]
        per_group[g] = per_group.get(g, 0) + 1
    return {"fractional": len(frac_ids), "m1": m1, "m2": m2, "per_group": per_group}


def round_vertex(inst: KnapInstance, partial: Partial, T0: int,
                 check: bool = True) -> frozenset[int] | NoSolution:
    """Solve LP-KnapCover and take every element with a positive LP value."""
    u = inst.universe
    base = (set().union(*partial) if partial else set()) | set(u.free())
    if inst.covers(base):
        return frozenset(base)
    lp, var_elems = build_lp(inst, partial, T0)
    sol = solve_feasible_vertex(lp)
    if isinstance(sol, Infeasible):
        return NoSolution("LP-KnapCover is infeasible for this partial solution")
    chosen = set().union(*partial) if partial else set()
    chosen |= set(u.free())
    chosen |= {var_elems[k] for k in range(lp.num_vars) if sol.values[k] > 0}
    if check:
        a = support_audit(lp, sol, var_elems, u)
        m1, m2 = a["m1"], a["m2"]
        cap = m1 + m2 - 2 * max(0, m2 - 1)
        assert a["fractional"] <= m1 + m2, a
        assert m2 <= m1 <= inst.d, a
        for g, k in a["per_group"].items():
            assert k <= cap and k <= inst.d + 1, (g, a)
        counts = u.counts(chosen)
        for j in range(T0 + 1, u.T + 1):
            assert counts[j - 1] <= (Fraction(inst.d, 2 ** T0) + 1) * 2 ** j, (j, counts)
        assert inst.covers(chosen)
    return frozenset(chosen)


# --------------------------------------------------------------------------
# drivers


def small_d_T0(d: int, eps: Number, T: int) -> int:
    """ceil(log2(d/eps)), clamped to [0, T]; gives d/2^T0 <= eps."""
    r = Fraction(d) / frac(eps)
    k = 0
    while 2 ** k < r:
        k += 1
    return max(0, min(k, T))


def large_d_T0(d: int, T: int) -> int:
    return max(0, min(ceil_log2(d), T))


def solve(inst: KnapInstance, eps: Number = 1, regime: str = "small_d",
          maximal_only: bool = True) -> SolveReport:
    """(1+eps)-valid (small_d) or 2-valid (large_d) cover, or a certificate.

    Enumeration stops at the first partial solution whose LP is feasible.
    Adding elements to a partial solution only lowers the residual demand,
    so trying the maximal partials alone decides the same question.
    """
    u = inst.universe
    if not inst.covers(u.allowed()):
        return report_for(u, NoSolution("the allowed elements cannot cover every dimension",
                                        infeasible=True))
    if regime == "small_d":
        T0 = small_d_T0(inst.d, eps, u.T)
        stream = enumerate_full(inst, T0, maximal_only)
        promised = 1 + frac(eps)
    elif regime == "large_d":
        T0 = large_d_T0(inst.d, u.T)
        stream = enumerate_weight_classes(inst, T0, maximal_only)
        promised = Fraction(2)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    tried = 0
    for partial in stream:
        tried += 1
        res = round_vertex(inst, partial, T0)
        if not isinstance(res, NoSolution):
            return report_for(u, res, promised=promised,
                              stats={"partials_tried": tried, "T0": T0})
    return report_for(u, NoSolution("no 1-valid solution exists", c0=Fraction(1)),
                      stats={"partials_tried": tried, "T0": T0})


def logbgt_solver(weights: Sequence[Sequence[Number]], eps: Number = 1, regime: str = "small_d"):
    """Closure for the reduction driver: universe -> set or NoSolution."""
    def run(universe: GroupedUniverse):
        rep = solve(KnapInstance(universe, weights), eps, regime)
        if rep.solved:
            return rep.chosen
        return NoSolution(rep.certificate, infeasible=rep.status == "infeasible")
    return run
