"""Bipartite perfect matching with logarithmic budgets, as a bi-criteria problem.

Iterative rounding on the perfect-matching LP with budget rows yields an
eps-relaxed matching (every vertex has degree 1 or 2, few have degree 2).
Guessing the matching inside the lowest groups first makes the result
(2+delta)-valid; dropping one edge at each degree-2 vertex then leaves a
matching with at least (1-eps)m edges.

Vertices: left i is i, right j is m + j.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import (
    GroupedUniverse, NormSpec, NoSolution, Number, SolveReport, floor_log2, frac, report_for,
)
from .lp import Infeasible, LinearProgram, is_feasible_point, solve_feasible_vertex
from .reduce import MinSumSolver, minnorm_via_logbgt

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchingInstance:
    universe: GroupedUniverse
    m: int
    edges: tuple[tuple[int, int], ...]
    d: tuple[Fraction, ...]

    def __init__(self, universe: GroupedUniverse, m: int, edges: Sequence[Sequence[int]],
                 d: Sequence[Number] | None = None) -> None:
        if m < 1:
            raise ValueError("need m >= 1")
        es = tuple((int(a), int(b)) for a, b in edges)
        if len(es) != universe.n:
            raise ValueError("need one edge per element")
        if any(not (0 <= a < m and 0 <= b < m) for a, b in es):
            raise ValueError("edge endpoint outside 0..m-1")
        dd = tuple(frac(x) for x in d) if d is not None else \
            tuple(Fraction(2 ** i) for i in range(1, universe.T + 1))
        if len(dd) != universe.T or any(x < 0 for x in dd):
            raise ValueError("need one non-negative budget per group")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "edges", es)
        object.__setattr__(self, "d", dd)

    def ends(self, e: int) -> tuple[int, int]:
        a, b = self.edges[e]
        return a, self.m + b

    def degrees(self, chosen: Iterable[int]) -> list[int]:
        deg = [0] * (2 * self.m)
        for e in chosen:
            for v in self.ends(e):
                deg[v] += 1
        return deg

    def is_perfect_matching(self, chosen: Iterable[int]) -> bool:
        return all(k == 1 for k in self.degrees(chosen))

    def is_matching(self, chosen: Iterable[int]) -> bool:
        return all(k <= 1 for k in self.degrees(chosen))


@dataclass(frozen=True)
class RelaxedMatching:
    edges: frozenset[int]
    deg2: int

    @classmethod
    def of(cls, inst: MatchingInstance, edges: Iterable[int]) -> "RelaxedMatching":
        es = frozenset(edges)
        return cls(es, sum(1 for k in inst.degrees(es) if k == 2))


def is_relaxed(inst: MatchingInstance, edges: Iterable[int], eps: Number) -> bool:
    deg = inst.degrees(edges)
    return all(k in (1, 2) for k in deg) and \
        sum(1 for k in deg if k == 2) <= 2 * frac(eps) * inst.m


# --------------------------------------------------------------------------
# iterative rounding


@dataclass
class _State:
    active: set[int]
    ones: set[int]
    degree: dict[int, Fraction]   # live degree rows: vertex -> rhs
    budget: dict[int, Fraction]   # live budget rows: group -> rhs
    log: list[str] = field(default_factory=list)


def _build(inst: MatchingInstance, st: _State) -> tuple[LinearProgram, list[int]]:
    lp = LinearProgram()
    es = sorted(st.active)
    for e in es:
        lp.add_var(e, 0, 1)
    at: dict[int, dict[int, int]] = {v: {} for v in st.degree}
    for k, e in enumerate(es):
        for v in inst.ends(e):
            if v in at:
                at[v][k] = 1
    for v in sorted(st.degree):
        lp.add_row(at[v], "=", st.degree[v], "degree")
    for i in sorted(st.budget):
        ks = {k: 1 for k, e in enumerate(es) if inst.universe.group_of.get(e) == i}
        lp.add_row(ks, "<=", st.budget[i], "budget")
    return lp, es


def _retire(inst: MatchingInstance, st: _State, e: int, xe: Fraction, to_one: bool) -> None:
    """Take e out of the LP at value xe; it joins the output iff ``to_one``."""
    st.active.discard(e)
    if to_one:
        st.ones.add(e)
    for v in inst.ends(e):
        if v in st.degree:
            st.degree[v] -= xe
    g = inst.universe.group_of.get(e)
    if g in st.budget:
        st.budget[g] -= xe


def _components(nodes: Iterable[int], adj: dict[int, list[tuple[int, int]]]):
    """Paths and cycles of a max-degree-2 graph: (is_cycle, vertices, edges)."""
    seen: set[int] = set()
    nodes = sorted(nodes)
    # paths first start at an end vertex so the walk covers them in order
    starts = [v for v in nodes if len(adj[v]) < 2] + nodes
    for v0 in starts:
        if v0 in seen:
            continue
        vs, es = [v0], []
        seen.add(v0)
        prev_e, v = None, v0
        cycle = False
        while True:
            nxt = [(w, e) for w, e in sorted(adj[v], key=lambda t: t[1]) if e != prev_e]
            if not nxt:
                break
            w, e = nxt[0]
            if w == v0:
                es.append(e)
                cycle = True
                break
            if w in seen:
                break
            vs.append(w)
            es.append(e)
            seen.add(w)
            prev_e, v = e, w
        yield cycle, vs, es


def iterative_round(inst: MatchingInstance, eps: Number, vertices: Iterable[int] | None = None,
                    edges: Iterable[int] | None = None, audit: list | None = None
                    ) -> RelaxedMatching | NoSolution:
    """eps-relaxed matching with at most 2 d_i + 9/eps edges from each S_i (none if d_i = 0)."""
    e_ = frac(eps)
    if not 0 < e_ < 1:
        raise ValueError("eps must lie in (0, 1)")
    u = inst.universe
    verts = set(range(2 * inst.m)) if vertices is None else set(vertices)
    pool = set(u.allowed()) if edges is None else set(edges) - u.banned
    pool = {e for e in pool if all(v in verts for v in inst.ends(e))}
    st = _State(active=set(pool), ones=set(), degree={v: Fraction(1) for v in verts},
                budget={i: inst.d[i - 1] for i in range(1, u.T + 1) if u.group(i) & pool})
    long_path = 2 / e_ + 5
    k_sub = math.ceil(1 / e_) + 1
    first = True
    prev: dict[int, Fraction] | None = None
    while st.active or any(r != 0 for r in st.degree.values()):
        lp, es = _build(inst, st)
        if prev is not None:
            assert is_feasible_point(lp, [prev[e] for e in es]), "working point left the LP"
        sol = solve_feasible_vertex(lp)
        if isinstance(sol, Infeasible):
            if first:
                return NoSolution("LP-Perfect-Matching(d) is infeasible")
            raise AssertionError("LP became infeasible during rounding")
        first = False
        x = {e: sol.values[k] for k, e in enumerate(es)}
        prev = x
        fixed = [e for e in es if x[e] in (0, 1)]
        for e in fixed:
            _retire(inst, st, e, x[e], x[e] == 1)
        if fixed:
            prev = {e: x[e] for e in st.active}
            continue
        if not st.active:
            break
        if not st.budget:
            raise AssertionError("fractional vertex without budget rows")
        # bad degree rows: exactly two non-zero variables
        at: dict[int, list[int]] = {}
        for e in st.active:
            for v in inst.ends(e):
                if v in st.degree:
                    at.setdefault(v, []).append(e)
        bad = {v for v, lst in at.items() if len(lst) == 2}
        adj: dict[int, list[tuple[int, int]]] = {v: [] for v in bad}
        for e in sorted(st.active):
            a, b = inst.ends(e)
            if a in bad and b in bad:
                adj[a].append((b, e))
                adj[b].append((a, e))
        comps = list(_components(bad, adj))
        cyc = next(((vs, es_) for c, vs, es_ in comps if c), None)
        if cyc is not None:
            vs, ces = cyc
            odd, even = ces[0::2], ces[1::2]
            take = odd if x[odd[0]] >= x[even[0]] else even
            for e in ces:
                _retire(inst, st, e, x[e], e in take)
            for v in vs:
                del st.degree[v]
            st.log.append(f"cycle of {len(ces)} edges")
            prev = {e: x[e] for e in st.active}
            continue
        path = next(((vs, es_) for c, vs, es_ in comps if not c and len(es_) >= long_path), None)
        if path is not None:
            vs, pes = path
            off = 0 if x[pes[0]] >= Fraction(1, 2) else 1
            sub_e = pes[off:off + 2 * k_sub - 1]
            sub_v = vs[off:off + 2 * k_sub]
            for k, e in enumerate(sub_e):
                _retire(inst, st, e, x[e], k % 2 == 0)
            for v in sub_v:
                del st.degree[v]
            st.log.append(f"path rounding over {len(sub_e)} edges")
            prev = {e: x[e] for e in st.active}
            continue
        bound = 9 / e_
        drop = None
        for i in sorted(st.budget):
            slack = sum((1 - 2 * x[e] for e in st.active if u.group_of.get(e) == i), Fraction(0))
            if slack <= bound:
                drop = i
                break
        assert drop is not None, "no budget row meets the drop condition"
        del st.budget[drop]
        st.log.append(f"dropped budget row {drop}")
        prev = {e: x[e] for e in st.active}
    if audit is not None:
        audit.extend(st.log)
    return RelaxedMatching.of(inst, st.ones)


# --------------------------------------------------------------------------
# partial enumeration over the low groups


def relaxed_k(eps: Number, delta: Number) -> int:
    """floor(log2(9 / (delta * eps)))."""
    r = 9 / (frac(delta) * frac(eps))
    return floor_log2(math.floor(r))


def _low_lp(inst: MatchingInstance, k: int, D: set[int], out: set[int]):
    """Relaxation of every completion of the partial choice (D in, ``out`` excluded)."""
    u = inst.universe
    used = {v for e in D for v in inst.ends(e)}
    verts = [v for v in range(2 * inst.m) if v not in used]
    lp = LinearProgram()
    es = [e for e in u.allowed() if e not in D and e not in out
          and not any(v in used for v in inst.ends(e))]
    for e in es:
        lp.add_var(e, 0, 1)
    pos = {e: j for j, e in enumerate(es)}
    for v in verts:
        lp.add_row({pos[e]: 1 for e in es if v in inst.ends(e)}, "=", 1, "degree")
    for i in range(1, u.T + 1):
        ks = {pos[e]: 1 for e in es if u.group_of.get(e) == i}
        taken = sum(1 for e in D if u.group_of.get(e) == i)
        if ks:
            lp.add_row(ks, "<=", inst.d[i - 1] - taken, "budget")
    return lp, es


def find_partial(inst: MatchingInstance, k: int) -> frozenset[int] | None:
    """A matching D inside S_1..S_k with |D cap S_i| <= d_i whose residual LP is feasible.

    Branch and bound on the low-group edges; a branch is cut only when its
    relaxation is infeasible, so every partial choice that could succeed is
    reachable.
    """
    u = inst.universe
    low = {e for e in u.allowed() if u.group_of.get(e, u.T + 1) <= k}

    def rec(D: set[int], out: set[int]) -> frozenset[int] | None:
        lp, es = _low_lp(inst, k, D, out)
        sol = solve_feasible_vertex(lp)
        if isinstance(sol, Infeasible):
            return None
        x = dict(zip(es, sol.values))
        frac_low = [e for e in es if e in low and x[e] not in (0, 1)]
        if not frac_low:
            return frozenset(D | {e for e in es if e in low and x[e] == 1})
        e = frac_low[0]
        g = u.group_of[e]
        used = {v for f in D for v in inst.ends(f)}
        taken = sum(1 for f in D if u.group_of.get(f) == g)
        if not any(v in used for v in inst.ends(e)) and taken + 1 <= inst.d[g - 1]:
            got = rec(D | {e}, out)
            if got is not None:
                return got
        return rec(D, out | {e})

    return rec(set(), set())


def solve_relaxed(inst: MatchingInstance, eps: Number, delta: Number) -> RelaxedMatching | NoSolution:
    """(2+delta)-valid eps-relaxed matching, or a certificate of no 1-valid perfect matching."""
    u = inst.universe
    if not has_perfect_matching(inst):
        return NoSolution("no perfect matching avoids the banned edges", infeasible=True)
    k = min(relaxed_k(eps, delta), u.T)
    D = find_partial(inst, k)
    if D is None:
        return NoSolution("no 1-valid perfect matching exists")
    used = {v for e in D for v in inst.ends(e)}
    d = tuple(Fraction(0) if i <= k else inst.d[i - 1] for i in range(1, u.T + 1))
    rest = MatchingInstance(u, inst.m, inst.edges, d)
    verts = [v for v in range(2 * inst.m) if v not in used]
    res = iterative_round(rest, eps, verts)
    if isinstance(res, NoSolution):
        raise AssertionError("residual LP infeasible after a feasible partial choice")
    return RelaxedMatching.of(inst, res.edges | D)


def to_nearly_matching(inst: MatchingInstance, relaxed: RelaxedMatching | Iterable[int]
                       ) -> frozenset[int]:
    """Drop one edge at every degree-2 vertex, preferring edges between two of them."""
    edges = set(relaxed.edges if isinstance(relaxed, RelaxedMatching) else relaxed)
    deg = inst.degrees(edges)
    for v in range(2 * inst.m):
        if deg[v] < 2:
            continue
        mine = sorted(e for e in edges if v in inst.ends(e))
        both = [e for e in mine if all(deg[w] >= 2 for w in inst.ends(e))]
        e = (both or mine)[0]
        edges.remove(e)
        for w in inst.ends(e):
            deg[w] -= 1
    return frozenset(edges)


# --------------------------------------------------------------------------
# norm minimization and the exact min-sum backend


def has_perfect_matching(inst: MatchingInstance, banned: Iterable[int] = ()) -> bool:
    ban = set(banned) | inst.universe.banned
    g = nx.Graph()
    g.add_nodes_from(range(2 * inst.m))
    g.add_edges_from(inst.ends(e) for e in range(len(inst.edges)) if e not in ban)
    mt = nx.bipartite.hopcroft_karp_matching(g, top_nodes=range(inst.m))
    return len(mt) == 2 * inst.m


def min_cost_perfect_matching(inst: MatchingInstance, costs: Sequence[Fraction],
                              banned: Iterable[int] = ()) -> frozenset[int] | None:
    """Exact min-cost perfect matching through integer-scaled assignment."""
    ban = set(banned) | inst.universe.banned
    cs = [frac(c) for c in costs]
    scale = math.lcm(*(c.denominator for c in cs)) if cs else 1
    best: dict[tuple[int, int], int] = {}
    for e, (a, b) in enumerate(inst.edges):
        if e in ban:
            continue
        if (a, b) not in best or cs[e] < cs[best[(a, b)]]:
            best[(a, b)] = e
    if not best:
        return None
    ints = {ab: int(cs[e] * scale) for ab, e in best.items()}
    big = sum(abs(v) for v in ints.values()) + 1
    if big * inst.m >= 2 ** 52:
        raise ValueError("costs too large for exact assignment")
    mat = np.full((inst.m, inst.m), float(big))
    for (a, b), v in ints.items():
        mat[a, b] = float(v)
    rows, cols = linear_sum_assignment(mat)
    out = []
    for a, b in zip(rows, cols):
        if (int(a), int(b)) not in best:
            return None
        out.append(best[(int(a), int(b))])
    return frozenset(out)


def minsum_solver(inst: MatchingInstance) -> MinSumSolver:
    def run(costs, banned):
        r = min_cost_perfect_matching(inst, costs, banned)
        return NoSolution("no perfect matching avoids the banned edges", infeasible=True) \
            if r is None else r
    return MinSumSolver(run, Fraction(1))


def logbgt_solver(m: int, edges: Sequence[Sequence[int]], eps: Number, delta: Number):
    def run(universe: GroupedUniverse):
        res = solve_relaxed(MatchingInstance(universe, m, edges), eps, delta)
        return res if isinstance(res, NoSolution) else res.edges
    return run


def minnorm_relaxed_matching(m: int, edges: Sequence[Sequence[int]], values: Sequence[Number],
                             norm: NormSpec, eps: Number = Fraction(1, 2),
                             delta: Number = Fraction(1, 2), workers: int = 1) -> SolveReport:
    """eps-relaxed matching within 8+delta of the best perfect matching.

    The inner solver runs with delta/8 and the threshold grid with delta/2,
    so 4(2 + delta/8) + delta/2 = 8 + delta.
    """
    dl = frac(delta)
    uni = GroupedUniverse(len(edges), [])
    if not has_perfect_matching(MatchingInstance(uni, m, edges, ())):
        return report_for(uni, NoSolution("the graph has no perfect matching", infeasible=True))
    return minnorm_via_logbgt(values, norm, logbgt_solver(m, edges, eps, dl / 8),
                              eps=dl / 2, workers=workers)


def minnorm_nearly_matching(m: int, edges: Sequence[Sequence[int]], values: Sequence[Number],
                            norm: NormSpec, eps: Number = Fraction(1, 2),
                            delta: Number = Fraction(1, 2), workers: int = 1) -> SolveReport:
    """eps-nearly matching within 8+delta of the best perfect matching."""
    rep = minnorm_relaxed_matching(m, edges, values, norm, eps, delta, workers)
    if not rep.solved:
        return rep
    uni = GroupedUniverse(len(edges), [])
    near = to_nearly_matching(MatchingInstance(uni, m, edges, ()), rep.chosen)
    out = report_for(uni, near, values=values, norm=norm, stats=dict(rep.stats))
    out.certificate = "nearly matching from the best relaxed matching"
    out.stats["relaxed_norm"] = rep.norm_value
    return out
