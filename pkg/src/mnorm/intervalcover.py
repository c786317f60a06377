"""Interval cover with logarithmic budgets, solved through a tree cover problem.

Pipeline: clip to the target, make every group locally disjoint, make the
whole family laminar with containment only into higher groups, read the
laminar family as a rooted tree, then solve tree cover by partial
enumeration over the lowest groups followed by two LP rounding passes.
Every stage records how to map solutions back and forth.

Intervals are half-open, [l, r), so covering and splitting are exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .core import (
    GroupedUniverse, NoSolution, Number, SolveReport, floor_log2, frac, report_for,
)
from .lp import Infeasible, LinearProgram, solve_feasible_vertex

log = logging.getLogger(__name__)

Interval = tuple[Fraction, Fraction]


def _iv(x: Sequence[Number]) -> Interval:
    l, r = frac(x[0]), frac(x[1])
    if not l < r:
        raise ValueError(f"interval [{l}, {r}) is empty")
    return (l, r)


def union_covers(intervals: Iterable[Interval], target: Interval) -> bool:
    a, b = target
    cur = a
    for l, r in sorted(intervals):
        if l > cur:
            break
        if r > cur:
            cur = r
        if cur >= b:
            return True
    return cur >= b


def contains(outer: Interval, inner: Interval) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def overlaps(x: Interval, y: Interval) -> bool:
    return max(x[0], y[0]) < min(x[1], y[1])


def is_laminar(intervals: Sequence[Interval]) -> bool:
    for i, x in enumerate(intervals):
        for y in intervals[i + 1:]:
            if overlaps(x, y) and not (contains(x, y) or contains(y, x)):
                return False
    return True


@dataclass(frozen=True)
class IntervalInstance:
    universe: GroupedUniverse
    intervals: tuple[Interval, ...]
    gamma: Interval

    def __init__(self, universe: GroupedUniverse, intervals: Sequence[Sequence[Number]],
                 gamma: Sequence[Number]) -> None:
        ivs = tuple(_iv(x) for x in intervals)
        if len(ivs) != universe.n:
            raise ValueError("need one interval per element")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "gamma", _iv(gamma))

    def covers(self, chosen: Iterable[int]) -> bool:
        return union_covers((self.intervals[e] for e in chosen), self.gamma)


# --------------------------------------------------------------------------
# stage 1: locally disjoint groups


@dataclass(frozen=True)
class Piece:
    l: Fraction
    r: Fraction
    group: int
    origin: int  # index in the previous stage

    @property
    def iv(self) -> Interval:
        return (self.l, self.r)


@dataclass
class LocallyDisjoint:
    pieces: list[Piece]
    source: IntervalInstance

    def to_source(self, chosen: Iterable[int]) -> frozenset[int]:
        """Each piece sits inside its origin, so validity carries over unchanged."""
        return frozenset(self.pieces[k].origin for k in chosen)

    def from_source(self, chosen: Iterable[int]) -> frozenset[int]:
        """Pieces of the same group meeting a chosen interval; at most two each."""
        out = set()
        for e in chosen:
            g = self.source.universe.group_of.get(e)
            iv = self.source.intervals[e]
            for k, p in enumerate(self.pieces):
                if p.group == g and overlaps(p.iv, iv):
                    out.add(k)
        return frozenset(out)


def to_locally_disjoint(inst: IntervalInstance) -> LocallyDisjoint:
    a, b = inst.gamma
    u = inst.universe
    pieces: list[Piece] = []
    for j in range(1, u.T + 1):
        tmp = []
        for e in sorted(u.group(j)):
            l, r = inst.intervals[e]
            l, r = max(l, a), min(r, b)
            if l < r:
                tmp.append((l, r, e))
        while tmp:
            l0, r0, e0 = min(tmp, key=lambda x: (x[0], -x[1], x[2]))
            pieces.append(Piece(l0, r0, j, e0))
            nxt = []
            for l, r, e in tmp:
                if l0 <= l and r <= r0:
                    continue
                # l >= l0 here, so J minus I is the single piece right of I
                nl = max(l, r0) if l < r0 else l
                if nl < r:
                    nxt.append((nl, r, e))
            tmp = nxt
    return LocallyDisjoint(pieces, inst)


# --------------------------------------------------------------------------
# stage 2: laminar family


@dataclass
class Laminar:
    pieces: list[Piece]          # alive intervals; origin = ld index that created them
    extenders: list[frozenset[int]]
    forward: dict[int, frozenset[int]]  # ld index -> lam indices covering it
    source: LocallyDisjoint
    events: list[tuple[str, int]] = field(default_factory=list)

    def to_source(self, chosen: Iterable[int]) -> frozenset[int]:
        """Origin plus every extender of each chosen interval."""
        out = set()
        for k in chosen:
            out.add(self.pieces[k].origin)
            out |= self.extenders[k]
        return frozenset(out)

    def from_source(self, chosen: Iterable[int]) -> frozenset[int]:
        out = set()
        for i in chosen:
            out |= self.forward[i]
        return frozenset(out)


def to_laminar(ld: LocallyDisjoint) -> Laminar:
    order = sorted(range(len(ld.pieces)),
                   key=lambda i: (ld.pieces[i].group, ld.pieces[i].l, ld.pieces[i].r, i))
    ivs: list[Interval] = []
    grp: list[int] = []
    org: list[int] = []
    ext: list[frozenset[int]] = []
    alive: list[bool] = []
    succ: dict[int, int] = {}
    parts_of: dict[int, list[int]] = {}
    events: list[tuple[str, int]] = []

    def new(iv: Interval, g: int, o: int, x: frozenset[int]) -> int:
        ivs.append(iv); grp.append(g); org.append(o); ext.append(x); alive.append(True)
        return len(ivs) - 1

    for i in order:
        p = ld.pieces[i]
        lI, rI, k1 = p.l, p.r, p.group
        older = [c for c in range(len(ivs)) if alive[c] and grp[c] < k1]
        removed = [c for c in older if lI <= ivs[c][0] and ivs[c][1] <= rI]
        m_left = [c for c in older if lI < ivs[c][0] < rI < ivs[c][1]]
        m_right = [c for c in older if ivs[c][0] < lI < ivs[c][1] < rI]
        for c in removed:
            alive[c] = False
            events.append(("remove", c))
        if m_left:
            a = min(ivs[c][0] for c in m_left)
            assert all(ivs[c][1] <= a for c in m_right), "crossing intervals in M_L/M_R"
            parts = [(lI, a), (a, rI)] if a > lI else [(a, rI)]
        else:
            a = rI
            parts = [(lI, rI)]
        rest_r = a
        for c in m_left:
            alive[c] = False
            succ[c] = new((a, ivs[c][1]), grp[c], org[c], ext[c] | {i})
            events.append(("extend", c))
        for c in m_right:
            alive[c] = False
            succ[c] = new((ivs[c][0], max(ivs[c][1], rest_r)), grp[c], org[c], ext[c] | {i})
            events.append(("extend", c))
        made = [new(iv, k1, i, frozenset()) for iv in parts if iv[0] < iv[1]]
        parts_of[i] = made
        for c in removed:
            home = [m for m in made if contains(ivs[m], ivs[c])]
            assert len(home) == 1, "removed interval straddles the split point"
            succ[c] = home[0]

    def resolve(c: int) -> int:
        while not alive[c]:
            c = succ[c]
        return c

    live = [c for c in range(len(ivs)) if alive[c]]
    index = {c: k for k, c in enumerate(live)}
    pieces = [Piece(ivs[c][0], ivs[c][1], grp[c], org[c]) for c in live]
    extenders = [ext[c] for c in live]
    forward = {i: frozenset(index[resolve(c)] for c in cs) for i, cs in parts_of.items()}
    for i in range(len(ld.pieces)):
        forward.setdefault(i, frozenset())
    return Laminar(pieces, extenders, forward, ld, events)


# --------------------------------------------------------------------------
# stage 3: tree


@dataclass
class TreeInstance:
    """Rooted tree; node ids 0..N-1, the root is implicit (parent -1)."""

    parent: tuple[int, ...]
    group: tuple[int, ...]
    T: int
    n_log: int  # size used for T_0, T_1 and log n
    children: tuple[tuple[int, ...], ...] = ()
    roots: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        ch: list[list[int]] = [[] for _ in self.parent]
        roots = []
        for u, p in enumerate(self.parent):
            if p < 0:
                roots.append(u)
            else:
                ch[p].append(u)
        for u, p in enumerate(self.parent):
            pg = 0 if p < 0 else self.group[p]
            if not self.group[u] > pg:
                raise ValueError(f"node {u} has group {self.group[u]} <= parent's {pg}")
            if not 1 <= self.group[u] <= self.T:
                raise ValueError(f"node {u} has group outside 1..{self.T}")
        self.children = tuple(tuple(c) for c in ch)
        self.roots = tuple(roots)

    @property
    def size(self) -> int:
        return len(self.parent)

    def is_leaf(self, u: int) -> bool:
        return not self.children[u]

    def leaves(self) -> list[int]:
        return [u for u in range(self.size) if not self.children[u]]

    def anc(self, u: int) -> list[int]:
        out = []
        while u >= 0:
            out.append(u)
            u = self.parent[u]
        return out

    def des(self, u: int) -> list[int]:
        out, stack = [], [u]
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self.children[v])
        return out

    def des_set(self, us: Iterable[int]) -> set[int]:
        out: set[int] = set()
        for u in us:
            if u not in out:
                out.update(self.des(u))
        return out

    def universe(self) -> GroupedUniverse:
        gs: list[set[int]] = [set() for _ in range(self.T)]
        for u, g in enumerate(self.group):
            gs[g - 1].add(u)
        return GroupedUniverse(self.size, gs)

    def covers(self, chosen: Iterable[int]) -> bool:
        d = self.des_set(chosen)
        return all(u in d for u in self.leaves())


@dataclass
class TreeMap:
    tree: TreeInstance
    nodes: list[int]  # tree node -> lam index
    source: Laminar

    def to_source(self, chosen: Iterable[int]) -> frozenset[int]:
        return frozenset(self.nodes[u] for u in chosen)


def to_tree(lam: Laminar, T: int, n_log: int) -> TreeMap:
    """Tree over the intervals none of whose strict supersets has an uncovered point."""
    ps = lam.pieces
    # equal intervals nest by group, lower group outside
    order = sorted(range(len(ps)), key=lambda k: (ps[k].l, -ps[k].r, ps[k].group))
    parent = {k: -1 for k in order}
    stack: list[int] = []
    for k in order:
        while stack and not contains(ps[stack[-1]].iv, ps[k].iv):
            stack.pop()
        if stack:
            parent[k] = stack[-1]
        stack.append(k)
    kids: dict[int, list[int]] = {k: [] for k in order}
    for k, p in parent.items():
        if p >= 0:
            kids[p].append(k)
    tiled = {k: bool(kids[k]) and sum((ps[c].r - ps[c].l for c in kids[k]), Fraction(0))
             == ps[k].r - ps[k].l for k in order}
    keep: list[int] = []
    for k in order:
        a, ok = parent[k], True
        while a >= 0:
            if not tiled[a]:
                ok = False
                break
            a = parent[a]
        if ok:
            keep.append(k)
    idx = {k: i for i, k in enumerate(keep)}
    tree = TreeInstance(tuple(idx[parent[k]] if parent[k] >= 0 else -1 for k in keep),
                        tuple(ps[k].group for k in keep), T, n_log)
    return TreeMap(tree, keep, lam)


# --------------------------------------------------------------------------
# tree costs and enumeration


@dataclass
class TreeCosts:
    C1: list[Fraction]
    C2: list[Fraction]
    R: list[frozenset[int]]


def compute_costs(tree: TreeInstance) -> TreeCosts:
    n = tree.size
    C1 = [Fraction(1, 2 ** tree.group[u]) for u in range(n)]
    C2: list[Fraction] = [Fraction(0)] * n
    R: list[frozenset[int]] = [frozenset()] * n
    order: list[int] = []
    stack = list(tree.roots)
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(tree.children[v])
    for u in reversed(order):
        ch = tree.children[u]
        if not ch:
            C2[u], R[u] = C1[u], frozenset({u})
            continue
        below = sum((C2[v] for v in ch), Fraction(0))
        if C1[u] <= below:
            C2[u], R[u] = C1[u], frozenset({u})
        else:
            C2[u] = below
            R[u] = frozenset().union(*(R[v] for v in ch))
    return TreeCosts(C1, C2, R)


def tree_levels(n: int) -> tuple[int, int, int]:
    """(T_0, T_1, log n) with T_0 = floor(log log log n), T_1 = floor(log log n)."""
    lg = n.bit_length()
    T1 = floor_log2(floor_log2(n)) if n >= 2 and floor_log2(n) >= 1 else 0
    T0 = floor_log2(T1) if T1 >= 1 else 0
    return T0, T1, max(lg, 1)


def enumerate_tree(tree: TreeInstance, costs: TreeCosts, c0: Number, T0: int
                   ) -> Iterator[tuple[frozenset[int], ...]]:
    """DFS over (P, D) with the four pruning rules; yields distinct projections."""
    c = frac(c0)
    _, _, lg = tree_levels(tree.n_log)
    small = Fraction(1, lg)
    cap = 2 * c * tree.T
    seen: set = set()

    def rec(P: frozenset[int], D: frozenset[int]):
        if sum((costs.C2[v] for v in D), Fraction(0)) + \
                sum((costs.C2[v] for v in P), Fraction(0)) > cap:
            return
        cnt = [0] * (T0 + 1)
        for v in D:
            g = tree.group[v]
            if g <= T0:
                cnt[g] += 1
        if any(cnt[i] > 2 * c * 2 ** i for i in range(1, T0 + 1)):
            return
        if not P or all(tree.group[v] > T0 for v in P):
            yield D
            return
        u = min(P, key=lambda v: (tree.group[v], v))
        rest = P - {u}
        if not tree.is_leaf(u):
            yield from rec(rest | frozenset(tree.children[u]), D)
        # leaves stay choosable so a T0 override above log log log n stays complete
        if costs.C2[u] > small or tree.is_leaf(u):
            yield from rec(rest, D | {u})

    for D in rec(frozenset(tree.roots), frozenset()):
        proj = tuple(frozenset(v for v in D if tree.group[v] == i) for i in range(1, T0 + 1))
        if proj not in seen:
            seen.add(proj)
            yield proj


# --------------------------------------------------------------------------
# rounding


def tree_cover_lp(tree: TreeInstance, V: Sequence[int], L: Iterable[int], c: Fraction,
                  T0: int) -> tuple[LinearProgram, list[int]]:
    vs = sorted(V)
    pos = {v: k for k, v in enumerate(vs)}
    lp = LinearProgram()
    for v in vs:
        lp.add_var(v, 0, None)
    for u in sorted(L):
        lp.add_row({pos[a]: 1 for a in tree.anc(u) if a in pos}, "=", 1, "feasibility")
    for i in range(T0 + 1, tree.T + 1):
        ks = [pos[v] for v in vs if tree.group[v] == i]
        if ks:
            lp.add_row({k: 1 for k in ks}, "<=", c * 2 ** i, "cardinality")
    return lp, vs


def round_tree(tree: TreeInstance, partial: Sequence[frozenset[int]], c0: Number, T0: int,
               T1: int, audit: dict | None = None) -> frozenset[int] | NoSolution:
    """Two-pass LP rounding extending a partial choice on groups 1..T0."""
    c = frac(c0)
    chosen0 = frozenset().union(*partial) if partial else frozenset()
    covered0 = tree.des_set(chosen0)
    V0 = {u for u in range(tree.size) if tree.group[u] > T0 and u not in covered0}
    leaves = tree.leaves()
    if any(u not in covered0 and u not in V0 for u in leaves):
        return NoSolution("a low-group leaf is left uncovered by the partial solution")
    L0 = {u for u in leaves if u in V0}
    lp, vs = tree_cover_lp(tree, V0, L0, 2 * c, T0)
    sol = solve_feasible_vertex(lp)
    if isinstance(sol, Infeasible):
        return NoSolution("LP-Tree-Cover(2c0) is infeasible for this partial solution")
    x = {v: sol.values[k] for k, v in enumerate(vs)}

    # drop zero leaves: their parent becomes a leaf
    V1, L1 = set(V0), set(L0)
    while True:
        zero = sorted(u for u in L1 if x[u] == 0)
        if not zero:
            break
        p = tree.parent[zero[0]]
        assert p in V1, "zero leaf whose parent is not a variable"
        gone = tree.des_set(tree.children[p])
        assert all(x[v] == 0 for v in gone if v in x)
        V1 -= gone
        L1 = (L1 - gone) | {p}

    D1 = {v for v in V1 if x[v] >= Fraction(1, 2)}
    D1 |= {v for v in V1 - L1 if tree.group[v] > T1 and x[v] > 0}
    covered1 = tree.des_set(D1)
    live = V1 - covered1
    V2 = {v for v in live if T0 + 1 <= tree.group[v] <= T1}
    open_leaves = L1 - covered1
    L2 = set(V2 & L1)
    for u in V2:
        for v in tree.children[u]:
            if v in V1 and v not in V2 and any(w in open_leaves for w in tree.des(v)):
                L2.add(u)
                break
    D2: set[int] = set()
    if L2:
        lp2, vs2 = tree_cover_lp(tree, V2, L2, 4 * c, T0)
        sol2 = solve_feasible_vertex(lp2)
        if isinstance(sol2, Infeasible):
            raise AssertionError("second LP-Tree-Cover infeasible although the first was feasible")
        D2 = {v for k, v in enumerate(vs2) if sol2.values[k] > 0}
    out = frozenset(chosen0 | D1 | D2)
    if audit is not None:
        audit.update(V1=len(V1), L1=len(L1), D1=len(D1), V2=len(V2), L2=len(L2), D2=len(D2),
                     leaf_positive=all(x[u] > 0 for u in L1))
    assert tree.covers(out), "rounded tree solution misses a leaf"
    return out


def solve_tree(tree: TreeInstance, c0: Number = 1, T0: int | None = None,
               T1: int | None = None) -> frozenset[int] | NoSolution:
    """(4c0+1)-valid tree cover or a certificate that no c0-valid one exists."""
    t0, t1, _ = tree_levels(tree.n_log)
    T0 = t0 if T0 is None else T0
    T1 = max(t1, T0) if T1 is None else T1
    if not tree.roots:
        return frozenset()
    costs = compute_costs(tree)
    for partial in enumerate_tree(tree, costs, c0, T0):
        res = round_tree(tree, partial, c0, T0, T1)
        if not isinstance(res, NoSolution):
            return res
    return NoSolution(f"no {c0}-valid tree cover exists", c0=frac(c0))


# --------------------------------------------------------------------------
# end to end


@dataclass
class Pipeline:
    ld: LocallyDisjoint
    lam: Laminar
    tm: TreeMap

    def tree_to_interval(self, chosen: Iterable[int]) -> frozenset[int]:
        return self.ld.to_source(self.lam.to_source(self.tm.to_source(chosen)))


def build_pipeline(inst: IntervalInstance) -> Pipeline:
    u = inst.universe
    if u.free():
        raise ValueError("every interval must belong to a group or be banned")
    ld = to_locally_disjoint(inst)
    lam = to_laminar(ld)
    tm = to_tree(lam, u.T, u.n)
    return Pipeline(ld, lam, tm)


def solve_interval(inst: IntervalInstance, c0: Number = 1, T0: int | None = None) -> SolveReport:
    """3(32c0+1)-valid cover of the target, or a certificate."""
    u = inst.universe
    c = frac(c0)
    if not inst.covers(u.allowed()):
        return report_for(u, NoSolution("the allowed intervals do not cover the target",
                                        infeasible=True))
    pipe = build_pipeline(inst)
    res = solve_tree(pipe.tm.tree, 8 * c, T0)
    stats = {"ld": len(pipe.ld.pieces), "lam": len(pipe.lam.pieces),
             "tree": pipe.tm.tree.size}
    if isinstance(res, NoSolution):
        return report_for(u, NoSolution(f"no {c}-valid solution exists", c0=c), stats=stats)
    chosen = pipe.tree_to_interval(res)
    assert inst.covers(chosen)
    return report_for(u, chosen, promised=3 * (32 * c + 1), stats=stats)


def logbgt_solver(intervals: Sequence[Sequence[Number]], gamma: Sequence[Number],
                  c0: Number = 1):
    def run(universe: GroupedUniverse):
        rep = solve_interval(IntervalInstance(universe, intervals, gamma), c0)
        if rep.solved:
            return rep.chosen
        return NoSolution(rep.certificate, infeasible=rep.status == "infeasible")
    return run
