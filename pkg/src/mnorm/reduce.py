"""From norm minimization to logarithmic budgets, and the generic reductions.

A threshold vector ``t`` guesses the sorted optimal value vector at the
positions of a ``PosSet``.  Each guess turns values into budget groups
(``build_groups``); a budgeted solver is then run once per guess and the
solution with the smallest actual norm wins.
"""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .core import (
    DimensionError, GroupedUniverse, NormSpec, NoSolution, Number, Ordered, SolveReport,
    eval_norm, frac, group_count, report_for, solution_vector, topl,
)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# positions and thresholds


@dataclass(frozen=True)
class PosSet:
    """Sorted positions in [1, n] ending at n, with advance/next lookups."""

    n: int
    positions: tuple[int, ...]

    @classmethod
    def doubling(cls, n: int) -> "PosSet":
        if n < 1:
            raise ValueError("n must be positive")
        ps = {min(2 ** s, n) for s in range(n.bit_length() + 1)}
        return cls(n, tuple(sorted(ps)))

    @classmethod
    def geometric(cls, n: int, delta: Number) -> "PosSet":
        """{min(ceil((1+delta)^s), n) : s >= 0}."""
        d = frac(delta)
        if d <= 0:
            raise ValueError("delta must be positive")
        ps = set()
        x = Fraction(1)
        while True:
            p = min(math.ceil(x), n)
            ps.add(p)
            if p == n:
                break
            x *= 1 + d
        return cls(n, tuple(sorted(ps)))

    def __len__(self) -> int:
        return len(self.positions)

    def advance(self, i: int) -> int:
        """Smallest position >= i."""
        for p in self.positions:
            if p >= i:
                return p
        raise ValueError(f"{i} exceeds n={self.n}")

    def next(self, l: int) -> int:
        """Position following l; n + 1 after the last one."""
        k = self.positions.index(l)
        return self.positions[k + 1] if k + 1 < len(self.positions) else self.n + 1


@dataclass(frozen=True)
class ThresholdVector:
    """Non-increasing values ``t[k]`` at ``pos.positions[k]``."""

    pos: PosSet
    t: tuple[Fraction, ...]
    o1: Fraction
    eps: Fraction

    def at(self, l: int) -> Fraction:
        return self.t[self.pos.positions.index(l)]

    @property
    def first(self) -> Fraction:
        return self.t[0]

    @property
    def last(self) -> Fraction:
        return self.t[-1]


def snap_up(x: Fraction, base: Fraction) -> Fraction:
    """Smallest integer power of ``base`` that is >= x (x > 0)."""
    if x <= 0:
        raise ValueError("snap_up needs a positive value")
    k = math.floor(math.log(float(x), float(base)))
    p = base ** k
    while p < x:
        k += 1
        p = base ** k
    while base ** (k - 1) >= x:
        k -= 1
    return base ** k


def _grid(lo: Fraction, hi: Fraction, base: Fraction) -> list[Fraction]:
    """All powers of base in [snap_up(lo), snap_up(hi)], descending."""
    top = snap_up(hi, base)
    out = [top]
    x = top
    bottom = snap_up(lo, base)
    while x > bottom:
        x /= base
        out.append(x)
    return out


def threshold_for(sorted_target: Sequence[Number], eps: Number, pos: PosSet) -> ThresholdVector:
    """The guess matching a known non-increasing target vector.

    t_l = snap_up(o_l) when o_l >= eps*o_1/n, and 0 otherwise.
    """
    e = frac(eps)
    o = [frac(x) for x in sorted_target]
    o1 = o[0]
    cut = e * o1 / pos.n
    ts = []
    for l in pos.positions:
        v = o[l - 1]
        ts.append(snap_up(v, 1 + e) if v > 0 and v >= cut else Fraction(0))
    return ThresholdVector(pos, tuple(ts), o1, e)


def _nonincreasing(grid: list[Fraction], length: int, start: int = 0):
    if length == 0:
        yield ()
        return
    for k in range(start, len(grid)):
        for rest in _nonincreasing(grid, length - 1, k):
            yield (grid[k],) + rest


def _collapse(grid: list[Fraction], distinct: list[Fraction], cut: Fraction) -> list[Fraction]:
    """Keep the largest grid point of each run that no value above ``cut`` separates."""
    above = [v for v in distinct if v > cut]
    out, last = [], None
    for g in grid:
        key = sum(1 for v in above if v <= g)
        if key != last:
            out.append(g)
            last = key
    return out


def enumerate_thresholds(values: Sequence[Number], eps: Number = 1,
                         pos: PosSet | None = None, dedup: bool = True) -> list[ThresholdVector]:
    """Candidate threshold vectors, one family per guess of the largest optimal value.

    With ``dedup`` the list keeps only the first vector for each distinct
    group assignment it induces.
    """
    vs = [frac(v) for v in values]
    n = len(vs)
    if n == 0:
        raise ValueError("need at least one element")
    e = frac(eps)
    if e <= 0:
        raise ValueError("eps must be positive")
    pos = pos or PosSet.doubling(n)
    base = 1 + e
    anchors = sorted(set(vs), reverse=True)
    out: list[ThresholdVector] = []
    seen: set = set()
    for o1 in anchors:
        if o1 == 0:
            cands = [ThresholdVector(pos, (Fraction(0),) * len(pos), o1, e)]
        else:
            grid = _grid(e * o1 / n, o1, base) + [Fraction(0)]
            if dedup:
                grid = _collapse(grid, anchors, e * o1 / n)
            t1 = snap_up(o1, base)
            cands = (ThresholdVector(pos, (t1,) + rest, o1, e)
                     for rest in _nonincreasing(grid, len(pos) - 1))
        for tv in cands:
            if dedup:
                key = (_assignment(vs, tv),)
                if key in seen:
                    continue
                seen.add(key)
            out.append(tv)
    return out


def _assignment(values: Sequence[Fraction], tv: ThresholdVector) -> tuple[int, ...]:
    """Group index per value; same answers as ``_group_index``, by bisection."""
    T = group_count(len(values))
    first = tv.first
    low = max(tv.last, tv.eps * tv.o1 / tv.pos.n)
    neg = [-t for t in tv.t]
    memo: dict[Fraction, int] = {}
    for v in values:
        if v in memo:
            continue
        if v > first:
            memo[v] = 0
        elif v <= low:
            memo[v] = T
        else:
            # t[k] >= v > t[k+1] with k the last index whose t is >= v
            memo[v] = min(bisect.bisect_right(neg, -v), T)
    return tuple(memo[v] for v in values)


def _group_index(v: Fraction, tv: ThresholdVector, T: int) -> int:
    """0 for excluded, otherwise the 1-based group index."""
    n = tv.pos.n
    if v > tv.first:
        return 0
    if v <= max(tv.last, tv.eps * tv.o1 / n):
        return T
    ps = tv.pos.positions
    for k in range(len(ps) - 1):
        if tv.t[k] >= v > tv.t[k + 1]:
            return min(k + 1, T)
    return T


def build_groups(values: Sequence[Number], tv: ThresholdVector) -> GroupedUniverse:
    """Budget groups for one threshold guess; values above t_1 are banned."""
    vs = [frac(v) for v in values]
    n = len(vs)
    T = group_count(n)
    groups: list[set[int]] = [set() for _ in range(T)]
    banned = []
    for e, g in enumerate(_assignment(vs, tv)):
        if g == 0:
            banned.append(e)
        else:
            groups[g - 1].add(e)
    return GroupedUniverse(n, groups, banned)


def g_of_t(tv: ThresholdVector, n: int | None = None) -> list[Fraction]:
    """The n-vector with g_i = t_advance(i)."""
    n = n or tv.pos.n
    return [tv.at(tv.pos.advance(i)) for i in range(1, n + 1)]


def is_valid_guess(tv: ThresholdVector, sorted_target: Sequence[Number]) -> bool:
    """o_l <= t_l <= (1+eps) o_l where o_l >= eps*o_1/n, t_l = 0 elsewhere."""
    o = [frac(x) for x in sorted_target]
    cut = tv.eps * o[0] / tv.pos.n
    for k, l in enumerate(tv.pos.positions):
        v, t = o[l - 1], tv.t[k]
        if v >= cut and v > 0:
            if not v <= t <= (1 + tv.eps) * v:
                return False
        elif t != 0:
            return False
    return True


# --------------------------------------------------------------------------
# the reduction driver

LogBgtSolver = Callable[[GroupedUniverse], "frozenset[int] | NoSolution"]


def minnorm_via_logbgt(values: Sequence[Number], norm: NormSpec, solver: LogBgtSolver,
                       eps: Number = 1, workers: int = 1,
                       thresholds: Iterable[ThresholdVector] | None = None) -> SolveReport:
    """Run ``solver`` once per threshold guess and keep the best actual norm.

    ``solver`` must return a feasible set or NoSolution.  Ties keep the
    earliest guess in list order.
    """
    vs = [frac(v) for v in values]
    guesses = list(thresholds) if thresholds is not None else enumerate_thresholds(vs, eps)

    def run(tv: ThresholdVector):
        uni = build_groups(vs, tv)
        return uni, solver(uni)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(run, guesses))
    else:
        results = map(run, guesses)

    best = None
    tried = 0
    for uni, res in results:
        tried += 1
        if isinstance(res, NoSolution):
            continue
        val = eval_norm(norm, solution_vector(vs, res))
        if best is None or val < best[0]:
            best = (val, uni, res)
    stats = {"thresholds": tried}
    if best is None:
        uni = GroupedUniverse(len(vs), [set() for _ in range(group_count(len(vs)))])
        return report_for(uni, NoSolution("every threshold guess was rejected", infeasible=True),
                          stats=stats)
    _, uni, res = best
    rep = report_for(uni, res, values=vs, norm=norm, stats=stats)
    rep.certificate = "best over threshold guesses"
    return rep


# --------------------------------------------------------------------------
# min-sum based reductions


@dataclass(frozen=True)
class MinSumSolver:
    """``solve(costs, banned)`` returns a feasible set avoiding ``banned`` whose
    cost is within ``factor`` of the cheapest such set, or NoSolution."""

    solve: Callable[[Sequence[Fraction], frozenset], "frozenset[int] | NoSolution"]
    factor: Fraction = Fraction(1)


def logbgt_costs(universe: GroupedUniverse) -> list[Fraction]:
    costs = [Fraction(0)] * universe.n
    for e, i in universe.group_of.items():
        costs[e] = Fraction(1, 2 ** i)
    return costs


def logbgt_via_minsum(universe: GroupedUniverse, solver: MinSumSolver) -> SolveReport:
    """alpha*T-valid solution from a min-sum solver, or a certificate.

    Under costs 1/2^i a 1-valid set costs at most T, so a returned set
    costing more than alpha*T proves that no 1-valid set exists.
    """
    costs = logbgt_costs(universe)
    res = solver.solve(costs, universe.banned)
    bound = solver.factor * universe.T
    if isinstance(res, NoSolution):
        return report_for(universe, NoSolution(res.reason, infeasible=True))
    total = sum((costs[e] for e in res), Fraction(0))
    if total > bound:
        return report_for(universe, NoSolution(f"min-sum cost {total} exceeds {bound}"))
    return report_for(universe, res, promised=bound, stats={"cost": total})


def logbgt_solver_from_minsum(solver: MinSumSolver) -> LogBgtSolver:
    def solve(universe: GroupedUniverse):
        rep = logbgt_via_minsum(universe, solver)
        if rep.solved:
            return rep.chosen
        return NoSolution(rep.certificate, infeasible=rep.status == "infeasible")
    return solve


def truncate(values: Sequence[Number], t: Number) -> list[Fraction]:
    """v^t_e = max(v_e - t, 0)."""
    tt = frac(t)
    return [max(frac(v) - tt, Fraction(0)) for v in values]


def topl_minimize(values: Sequence[Number], l: int, solver: MinSumSolver,
                  guesses: Iterable[Number] | None = None) -> frozenset[int] | NoSolution:
    """Best TopL(l) solution over the truncation guesses t in {0} and the values."""
    vs = [frac(v) for v in values]
    if not 1 <= l <= len(vs):
        raise DimensionError(f"TopL({l}) on {len(vs)} elements")
    ts = sorted({Fraction(0), *vs}) if guesses is None else [frac(t) for t in guesses]
    best = None
    for t in ts:
        res = solver.solve(truncate(vs, t), frozenset())
        if isinstance(res, NoSolution):
            continue
        val = topl(solution_vector(vs, res), l)
        if best is None or val < best[0]:
            best = (val, res)
    if best is None:
        return NoSolution("min-sum solver found no feasible set", infeasible=True)
    return best[1]


# --------------------------------------------------------------------------
# ordered norms


def padded_weights(w: Sequence[Number], n: int) -> list[Fraction]:
    ws = [frac(x) for x in w]
    if len(ws) > n:
        raise DimensionError(f"{len(ws)} ordered weights for {n} elements")
    return ws + [Fraction(0)] * (n - len(ws))


def sparsify_weights(w: Sequence[Number], pos: PosSet) -> list[Fraction]:
    """w~_i = w_l for the smallest position l >= i (1-based i, returned 0-based)."""
    ws = padded_weights(w, pos.n)
    return [ws[pos.advance(i) - 1] for i in range(1, pos.n + 1)]


def _wt(wt: Sequence[Fraction], l: int) -> Fraction:
    return wt[l - 1] if l <= len(wt) else Fraction(0)


def h_t(a: Number, wt: Sequence[Fraction], tv: ThresholdVector) -> Fraction:
    """Sum over positions l of (w~_l - w~_next(l)) * (a - t_l)^+."""
    x = frac(a)
    total = Fraction(0)
    for k, l in enumerate(tv.pos.positions):
        d = _wt(wt, l) - _wt(wt, tv.pos.next(l))
        if d and x > tv.t[k]:
            total += d * (x - tv.t[k])
    return total


def prox(wt: Sequence[Fraction], tv: ThresholdVector, values: Sequence[Number]) -> Fraction:
    total = Fraction(0)
    for k, l in enumerate(tv.pos.positions):
        total += (_wt(wt, l) - _wt(wt, tv.pos.next(l))) * l * tv.t[k]
    return total + sum((h_t(v, wt, tv) for v in values), Fraction(0))


def ordered_minimize(values: Sequence[Number], w: Sequence[Number], delta: Number,
                     eps: Number, solver: MinSumSolver,
                     audit: Callable[[ThresholdVector, frozenset], None] | None = None
                     ) -> frozenset[int] | NoSolution:
    """Best ordered-norm solution over threshold guesses on the (1+delta) positions.

    Each guess is solved as a min-sum problem with element costs h_t(v_e).
    ``audit`` is called with every guess and the set it produced.
    """
    vs = [frac(v) for v in values]
    n = len(vs)
    ws = padded_weights(w, n)
    pos = PosSet.geometric(n, delta)
    wt = sparsify_weights(ws, pos)
    norm = Ordered(ws)
    best = None
    for tv in enumerate_thresholds(vs, eps, pos, dedup=False):
        costs = [h_t(v, wt, tv) for v in vs]
        res = solver.solve(costs, frozenset())
        if isinstance(res, NoSolution):
            continue
        if audit is not None:
            audit(tv, res)
        val = eval_norm(norm, solution_vector(vs, res))
        if best is None or val < best[0]:
            best = (val, res)
    if best is None:
        return NoSolution("min-sum solver found no feasible set", infeasible=True)
    return best[1]


def count_above(values: Sequence[Number], chosen: Iterable[int], t: Number) -> int:
    tt = frac(t)
    return sum(1 for e in chosen if frac(values[e]) > tt)


def position_counts_bounded(values: Sequence[Number], chosen: Iterable[int], tv: ThresholdVector,
                        c: Number) -> bool:
    """For each position l, #{e in chosen : v_e > max(t_l, eps*o_1/n)} <= 2*c*l.

    Values at or below eps*o_1/n all land in S_T whatever t_l is, so they
    are not counted.
    """
    ch = list(chosen)
    cc = frac(c)
    cut = tv.eps * tv.o1 / tv.pos.n
    return all(count_above(values, ch, max(tv.t[k], cut)) <= 2 * cc * l
               for k, l in enumerate(tv.pos.positions))

