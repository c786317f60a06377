"""s-t path with logarithmic budgets by approximate dynamic programming.

Groups are bundled into supergroups of beta consecutive indices.  The DP
doubles walk length level by level; at each level the per-supergroup cost
of a combined walk is rounded up to a power of p and kept only while it
stays below p^i * beta.  Above level 0 every entry is a power of p, so the
DP stores integer exponents and never touches floats.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numba
import numpy as np

from .core import GroupedUniverse, NoSolution, Number, SolveReport, ceil_log2, frac, report_for
from .reduce import MinSumSolver

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathInstance:
    """Directed graph on vertices 0..V-1; edges are the universe elements."""

    universe: GroupedUniverse
    vertices: int
    edges: tuple[tuple[int, int], ...]
    s: int
    t: int

    def __init__(self, universe: GroupedUniverse, vertices: int,
                 edges: Sequence[Sequence[int]], s: int, t: int) -> None:
        es = tuple((int(a), int(b)) for a, b in edges)
        if len(es) != universe.n:
            raise ValueError("need one edge per element")
        if any(not (0 <= a < vertices and 0 <= b < vertices) for a, b in es):
            raise ValueError("edge endpoint outside the vertex range")
        if not (0 <= s < vertices and 0 <= t < vertices) or s == t:
            raise ValueError("need distinct s and t inside the vertex range")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", es)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    def is_st_path(self, chosen: Iterable[int]) -> bool:
        """True iff the edges form one simple directed path from s to t."""
        chosen = list(chosen)
        out: dict[int, int] = {}
        indeg: dict[int, int] = {}
        for e in chosen:
            a, b = self.edges[e]
            if a in out:
                return False
            out[a] = b
            indeg[b] = indeg.get(b, 0) + 1
        if any(k > 1 for k in indeg.values()) or self.s in indeg or self.t in out:
            return False
        v, steps = self.s, 0
        while v in out:
            v = out[v]
            steps += 1
            if steps > len(chosen):
                return False
        return v == self.t and steps == len(chosen)


# --------------------------------------------------------------------------
# parameters and costs


def choose_beta(alpha: Number) -> tuple[int, Fraction]:
    """Largest integer beta with delta = (alpha-1)/(4 beta) - 1 in [1/2, 2]."""
    a = frac(alpha)
    best = None
    for beta in range(1, max(1, math.floor((a - 1) / 6)) + 1):
        delta = (a - 1) / (4 * beta) - 1
        if Fraction(1, 2) <= delta <= 2:
            best = (beta, delta)
    if best is None:
        raise ValueError(f"no beta fits alpha={a}; alpha in [6b+1, 12b+1] works for integer b,"
                         " e.g. 7, 9, 13")
    return best


def supergroup_of(j: int, beta: int) -> int:
    """0-based supergroup index of group j."""
    return (j - 1) // beta


def supergroup_cost(inst: PathInstance, D: Iterable[int], beta: int) -> list[Fraction]:
    """C_i(D) = sum over the groups j in supergroup i of |D cap S_j| / 2^j."""
    K = -(-inst.universe.T // beta)
    out = [Fraction(0)] * K
    for e in D:
        j = inst.universe.group_of.get(e)
        if j is not None:
            out[supergroup_of(j, beta)] += Fraction(1, 2 ** j)
    return out


class PowerTable:
    """Exact arithmetic on integer exponents of a rational base p > 1."""

    def __init__(self, p: Fraction) -> None:
        self.p = p
        self._pow: dict[int, Fraction] = {0: Fraction(1)}
        self._gap: dict[int, int] = {}
        self._ceil: dict[Fraction, int] = {}

    def pow(self, k: int) -> Fraction:
        v = self._pow.get(k)
        if v is None:
            v = self.p ** k
            self._pow[k] = v
        return v

    def ceil_log(self, x: Fraction) -> int:
        """Smallest k with p^k >= x (x > 0)."""
        k = self._ceil.get(x)
        if k is None:
            k = math.ceil(math.log(float(x)) / math.log(float(self.p)))
            while self.pow(k) < x:
                k += 1
            while self.pow(k - 1) >= x:
                k -= 1
            self._ceil[x] = k
        return k

    def add(self, a: int | None, b: int | None) -> int | None:
        """Exponent of p^a + p^b rounded up to a power of p."""
        if a is None:
            return b
        if b is None:
            return a
        hi, d = max(a, b), abs(a - b)
        g = self._gap.get(d)
        if g is None:
            g = self.ceil_log(1 + 1 / self.pow(d))
            self._gap[d] = g
        return hi + g

    def floor_log(self, x: Fraction) -> int:
        """Largest k with p^k <= x (x > 0)."""
        k = self.ceil_log(x)
        return k if self.pow(k) == x else k - 1


# --------------------------------------------------------------------------
# the DP


NEG = -(1 << 40)  # exponent standing for the value 0


@numba.njit(cache=True)
def _skyline_insert(front, fbp, size, w, bp):
    """Insert w unless some front row is <= w; drop rows w dominates.  Returns new size."""
    K = w.shape[0]
    for r in range(size):
        le = True
        for j in range(K):
            if front[r, j] > w[j]:
                le = False
                break
        if le:
            return size
    keep = 0
    for r in range(size):
        ge = True
        for j in range(K):
            if w[j] > front[r, j]:
                ge = False
                break
        if not ge:
            if keep != r:
                front[keep, :] = front[r, :]
                fbp[keep, :] = fbp[r, :]
            keep += 1
    front[keep, :] = w
    fbp[keep, :] = bp
    return keep + 1


@numba.njit(cache=True)
def _skyline(rows):
    n, K = rows.shape
    front = np.empty((n, K), dtype=np.int64)
    fbp = np.empty((n, 3), dtype=np.int64)
    bp = np.zeros(3, dtype=np.int64)
    size = 0
    for i in range(n):
        bp[0] = i
        size = _skyline_insert(front, fbp, size, rows[i], bp)
    return fbp[:size, 0].copy()


def pareto_rows(rows: np.ndarray) -> np.ndarray:
    """Indices of the rows no earlier-or-other row dominates; of equal rows the first stays."""
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64)
    return _skyline(np.ascontiguousarray(rows, dtype=np.int64))


@numba.njit(cache=True)
def _combine(cell_of, starts, keys, need, gap, span, cap, neg):
    """One doubling level over exponent rows; returns rows, back-pointers and cell ranges."""
    V = cell_of.shape[0]
    K = keys.shape[1]
    cap_rows = 1024
    out = np.empty((cap_rows, K), dtype=np.int64)
    obp = np.empty((cap_rows, 3), dtype=np.int64)
    cells = np.full((V, V), -1, dtype=np.int64)
    ranges = np.empty((V * V, 2), dtype=np.int64)
    ncell = 0
    used = 0
    front = np.empty((16, K), dtype=np.int64)
    fbp = np.empty((16, 3), dtype=np.int64)
    w = np.empty(K, dtype=np.int64)
    bp = np.empty(3, dtype=np.int64)
    for x in range(V):
        for y in range(V):
            if not need[x, y]:
                continue
            size = 0
            for z in range(V):
                a = cell_of[x, z]
                b = cell_of[z, y]
                if a < 0 or b < 0:
                    continue
                for ra in range(starts[a], starts[a + 1]):
                    for rb in range(starts[b], starts[b + 1]):
                        ok = True
                        for j in range(K):
                            u = keys[ra, j]
                            v = keys[rb, j]
                            if u == neg:
                                c = v
                            elif v == neg:
                                c = u
                            else:
                                d = abs(u - v)
                                if d > span:
                                    d = span
                                c = max(u, v) + gap[d]
                            if c > cap:
                                ok = False
                                break
                            w[j] = c
                        if not ok:
                            continue
                        if size == front.shape[0]:
                            nf = np.empty((2 * size, K), dtype=np.int64)
                            nb = np.empty((2 * size, 3), dtype=np.int64)
                            nf[:size] = front
                            nb[:size] = fbp
                            front, fbp = nf, nb
                        bp[0] = z
                        bp[1] = ra - starts[a]
                        bp[2] = rb - starts[b]
                        size = _skyline_insert(front, fbp, size, w, bp)
            if size == 0:
                continue
            while used + size > out.shape[0]:
                no = np.empty((2 * out.shape[0], K), dtype=np.int64)
                nb = np.empty((2 * out.shape[0], 3), dtype=np.int64)
                no[:used] = out[:used]
                nb[:used] = obp[:used]
                out, obp = no, nb
            out[used:used + size] = front[:size]
            obp[used:used + size] = fbp[:size]
            cells[x, y] = ncell
            ranges[ncell, 0] = used
            ranges[ncell, 1] = used + size
            ncell += 1
            used += size
    return out[:used].copy(), obp[:used].copy(), cells, ranges[:ncell].copy()


@dataclass
class Cell:
    keys: np.ndarray  # (m, K) exponents; level 0 keeps rationals in ``exact``
    bps: np.ndarray   # (m, 3): z, left row, right row; level 0: edge id or -1
    exact: list[tuple[Fraction, ...]] | None = None


@dataclass
class PathDP:
    inst: PathInstance
    beta: int
    delta: Fraction
    p: Fraction
    levels: int
    K: int
    tables: list[dict[tuple[int, int], Cell]]
    powers: PowerTable

    def expand(self, level: int, x: int, y: int, row: int) -> list[int]:
        cell = self.tables[level][(x, y)]
        if level == 0:
            e = int(cell.bps[row][0])
            return [] if e < 0 else [e]
        z, a, b = (int(v) for v in cell.bps[row])
        return self.expand(level - 1, x, z, a) + self.expand(level - 1, z, y, b)

    def bound(self, key: Sequence[int]) -> list[Fraction]:
        return [Fraction(0) if k == NEG else self.powers.pow(int(k)) for k in key]


def _reach(inst: PathInstance, forward: bool) -> set[int]:
    adj: dict[int, list[int]] = {}
    for e in inst.universe.allowed():
        a, b = inst.edges[e]
        if not forward:
            a, b = b, a
        adj.setdefault(a, []).append(b)
    start = inst.s if forward else inst.t
    seen, stack = {start}, [start]
    while stack:
        for w in adj.get(stack.pop(), []):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def _level0(inst: PathInstance, beta: int, K: int, live: set[int]) -> dict[tuple[int, int], Cell]:
    u = inst.universe
    raw: dict[tuple[int, int], dict[tuple[Fraction, ...], int]] = {}
    for v in sorted(live):
        raw[(v, v)] = {(Fraction(0),) * K: -1}
    for e in u.allowed():
        a, b = inst.edges[e]
        if a == b or a not in live or b not in live:
            continue
        vec = [Fraction(0)] * K
        j = u.group_of.get(e)
        if j is not None:
            vec[supergroup_of(j, beta)] = Fraction(1, 2 ** j)
        raw.setdefault((a, b), {}).setdefault(tuple(vec), e)
    out = {}
    for xy, d in raw.items():
        ks = [k for k in d if not any(o != k and all(a <= b for a, b in zip(o, k)) for o in d)]
        out[xy] = Cell(np.zeros((len(ks), K), dtype=np.int64),
                       np.array([[d[k], 0, 0] for k in ks], dtype=np.int64), ks)
    return out


def run_dp(inst: PathInstance, alpha: Number = 9) -> PathDP:
    u = inst.universe
    beta, delta = choose_beta(alpha)
    K = -(-u.T // beta)
    lg = max(1, ceil_log2(max(u.n, 2)))
    p = 1 + (delta / 2) / lg
    pw = PowerTable(p)
    live = _reach(inst, True) & _reach(inst, False)
    tables = [_level0(inst, beta, K, live)]
    # every exponent lies in [lowest, top]; gaps beyond that range never occur
    lowest = min(pw.ceil_log(Fraction(1, 2 ** u.T)), 0)
    top = pw.floor_log(pw.pow(lg) * beta) + 1
    span = top - lowest + 1
    gap = np.array([pw.add(0, -d) for d in range(span + 1)], dtype=np.int64)
    # cells needed at the top levels: (s, t) last, then (s, z) and (z, t)
    V = inst.vertices
    need_all = np.zeros((V, V), dtype=np.bool_)
    for x in live:
        for y in live:
            need_all[x, y] = x != y
    need_top = np.zeros((V, V), dtype=np.bool_)
    need_top[inst.s, inst.t] = True
    need_second = np.zeros((V, V), dtype=np.bool_)
    for z in live:
        need_second[inst.s, z] = inst.s != z
        need_second[z, inst.t] = z != inst.t
    zero_row = np.full(K, NEG, dtype=np.int64)
    for i in range(1, lg + 1):
        prev = tables[-1]
        cap = pw.floor_log(pw.pow(i) * beta)
        need = need_top if i == lg else need_second if i == lg - 1 else need_all
        cur: dict[tuple[int, int], Cell] = {}
        if i == 1:
            by_start: dict[int, list[int]] = {}
            for (z, y) in prev:
                by_start.setdefault(z, []).append(y)
            for (x, z) in sorted(prev):
                left = prev[(x, z)]
                for y in sorted(by_start.get(z, [])):
                    if x == y or not need[x, y]:
                        continue
                    right = prev[(z, y)]
                    rows, bps = [], []
                    for ra, kl in enumerate(left.exact):
                        for rb, kr in enumerate(right.exact):
                            w = [NEG if s1 + s2 == 0 else pw.ceil_log(s1 + s2)
                                 for s1, s2 in zip(kl, kr)]
                            if all(c <= cap for c in w):
                                rows.append(w)
                                bps.append((z, ra, rb))
                    if rows:
                        c = cur.setdefault((x, y), Cell(np.zeros((0, K), dtype=np.int64),
                                                        np.zeros((0, 3), dtype=np.int64)))
                        c.keys = np.vstack([c.keys, np.array(rows, dtype=np.int64)])
                        c.bps = np.vstack([c.bps, np.array(bps, dtype=np.int64)])
            for c in cur.values():
                idx = pareto_rows(c.keys)
                c.keys, c.bps = c.keys[idx], c.bps[idx]
        else:
            order = sorted(prev)
            cell_of = np.full((V, V), -1, dtype=np.int64)
            starts = np.zeros(len(order) + 1, dtype=np.int64)
            for k, xy in enumerate(order):
                cell_of[xy] = k
                starts[k + 1] = starts[k] + len(prev[xy].keys)
            keys = np.vstack([prev[xy].keys for xy in order]) if order else \
                np.zeros((0, K), dtype=np.int64)
            rows, bps, cells, ranges = _combine(cell_of, starts, keys, need, gap, span, cap, NEG)
            for x, y in zip(*np.nonzero(cells >= 0)):
                lo, hi = ranges[cells[x, y]]
                cur[(int(x), int(y))] = Cell(rows[lo:hi], bps[lo:hi])
        # the empty walk stays available at every level
        for v in live:
            if i < lg:
                cur[(v, v)] = Cell(zero_row[None, :].copy(), np.array([[v, 0, 0]], dtype=np.int64))
        tables.append(cur)
    return PathDP(inst, beta, delta, p, lg, K, tables, pw)


def walk_to_path(inst: PathInstance, walk: Sequence[int]) -> list[int]:
    """Cut every cycle out of an s-t walk."""
    out: list[int] = []
    at = {inst.s: 0}
    for e in walk:
        b = inst.edges[e][1]
        out.append(e)
        if b in at:
            del out[at[b]:]
            at = {inst.s: 0}
            for k, f in enumerate(out):
                at[inst.edges[f][1]] = k + 1
        else:
            at[b] = len(out)
    return out


def solve_path(inst: PathInstance, alpha: Number = 9) -> frozenset[int] | NoSolution:
    """(alpha-1)/4-valid s-t path, or a certificate that no 1-valid path exists."""
    dp = run_dp(inst, alpha)
    final = dp.tables[-1].get((inst.s, inst.t))
    if final is None or len(final.keys) == 0:
        return NoSolution("no 1-valid s-t path exists")
    walk = dp.expand(dp.levels, inst.s, inst.t, 0)
    path = walk_to_path(inst, walk)
    cost = supergroup_cost(inst, path, dp.beta)
    assert all(c <= b for c, b in zip(cost, dp.bound(final.keys[0]))), \
        "rounding under-approximated"
    assert inst.is_st_path(path)
    return frozenset(path)


def solve(inst: PathInstance, alpha: Number = 9) -> SolveReport:
    u = inst.universe
    if shortest_path(inst, [Fraction(0)] * u.n, u.banned) is None:
        return report_for(u, NoSolution("t is unreachable from s", infeasible=True))
    res = solve_path(inst, alpha)
    beta, delta = choose_beta(alpha)
    return report_for(u, res, promised=(frac(alpha) - 1) / 4,
                      stats={"beta": beta, "delta": delta})


# --------------------------------------------------------------------------
# exact min-sum backend


def shortest_path(inst: PathInstance, costs: Sequence[Fraction],
                  banned: Iterable[int] = ()) -> list[int] | None:
    """Dijkstra with exact costs; ties broken by vertex then edge id."""
    ban = set(banned)
    adj: dict[int, list[tuple[int, int]]] = {}
    for e, (a, b) in enumerate(inst.edges):
        if e not in ban and a != b:
            adj.setdefault(a, []).append((b, e))
    dist = {inst.s: Fraction(0)}
    via: dict[int, int] = {}
    heap = [(Fraction(0), inst.s)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        if v == inst.t:
            break
        for b, e in adj.get(v, []):
            nd = d + costs[e]
            if b in done:
                continue
            if b not in dist or nd < dist[b] or (nd == dist[b] and e < via[b]):
                dist[b] = nd
                via[b] = e
                heapq.heappush(heap, (nd, b))
    if inst.t not in done:
        return None
    path, v = [], inst.t
    while v != inst.s:
        e = via[v]
        path.append(e)
        v = inst.edges[e][0]
    return path[::-1]


def minsum_solver(inst: PathInstance) -> MinSumSolver:
    def run(costs, banned):
        p = shortest_path(inst, costs, banned)
        return NoSolution("t is unreachable from s", infeasible=True) if p is None \
            else frozenset(p)
    return MinSumSolver(run, Fraction(1))


def logbgt_solver(vertices: int, edges: Sequence[Sequence[int]], s: int, t: int,
                  alpha: Number = 9):
    def run(universe: GroupedUniverse):
        return solve_path(PathInstance(universe, vertices, edges, s, t), alpha)
    return run
