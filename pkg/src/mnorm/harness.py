"""Brute-force oracles, planted instance generators and integrality-gap families.

Every planted generator returns the instance together with a recorded
1-valid feasible solution, so solver tests can check against a known
witness.  Generators take a seed and are deterministic.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence, Union

from .core import (
    GroupedUniverse, NormSpec, Number, eval_norm, frac, group_count, solution_vector,
    validity_factor,
)
from .intervalcover import IntervalInstance, TreeInstance
from .knapcover import KnapInstance
from .lp import Infeasible, LinearProgram, minimize
from .matching import MatchingInstance
from .setcover import SetCoverInstance
from .stpath import PathInstance

SUBSET_CAP = 18
MATCHING_CAP = 7
PATH_CAP = 12


# --------------------------------------------------------------------------
# cut instances (only gap generation exists for cuts)


@dataclass(frozen=True)
class CutInstance:
    """Directed graph; a feasible set is an edge set whose removal separates s from t."""

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
        if s == t:
            raise ValueError("need distinct s and t")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", es)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    def is_cut(self, chosen: Iterable[int]) -> bool:
        gone = set(chosen)
        adj: dict[int, list[int]] = {}
        for e, (a, b) in enumerate(self.edges):
            if e not in gone:
                adj.setdefault(a, []).append(b)
        seen, stack = {self.s}, [self.s]
        while stack:
            v = stack.pop()
            for w in adj.get(v, ()):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return self.t not in seen


Instance = Union[KnapInstance, IntervalInstance, TreeInstance, SetCoverInstance,
                 PathInstance, MatchingInstance, CutInstance]


def universe_of(inst: Instance) -> GroupedUniverse:
    return inst.universe() if isinstance(inst, TreeInstance) else inst.universe


def feasibility(inst: Instance) -> Callable[[Iterable[int]], bool]:
    if isinstance(inst, PathInstance):
        return inst.is_st_path
    if isinstance(inst, MatchingInstance):
        return inst.is_perfect_matching
    if isinstance(inst, CutInstance):
        return inst.is_cut
    return inst.covers


def upward_closed(inst: Instance) -> bool:
    """Covering families: any superset of a feasible set is feasible."""
    return not isinstance(inst, (PathInstance, MatchingInstance))


# --------------------------------------------------------------------------
# brute-force oracles


def st_paths(inst: PathInstance, cap: int = PATH_CAP) -> Iterator[frozenset[int]]:
    """Every simple s-t path over allowed edges, as an edge set."""
    if inst.vertices > cap:
        raise ValueError(f"path enumeration capped at {cap} vertices")
    ban = inst.universe.banned
    out: dict[int, list[int]] = {}
    for e, (a, b) in enumerate(inst.edges):
        if e not in ban and a != b:
            out.setdefault(a, []).append(e)
    path: list[int] = []
    onpath = {inst.s}

    def rec(v: int):
        if v == inst.t:
            yield frozenset(path)
            return
        for e in out.get(v, ()):
            w = inst.edges[e][1]
            if w in onpath:
                continue
            onpath.add(w)
            path.append(e)
            yield from rec(w)
            path.pop()
            onpath.discard(w)

    yield from rec(inst.s)


def perfect_matchings(inst: MatchingInstance, cap: int = MATCHING_CAP) -> Iterator[frozenset[int]]:
    """Every perfect matching over allowed edges (parallel edges give distinct matchings)."""
    if inst.m > cap:
        raise ValueError(f"matching enumeration capped at m = {cap}")
    ban = inst.universe.banned
    at: list[list[int]] = [[] for _ in range(inst.m)]
    for e, (a, _) in enumerate(inst.edges):
        if e not in ban:
            at[a].append(e)
    used: set[int] = set()
    pick: list[int] = []

    def rec(a: int):
        if a == inst.m:
            yield frozenset(pick)
            return
        for e in at[a]:
            b = inst.edges[e][1]
            if b in used:
                continue
            used.add(b)
            pick.append(e)
            yield from rec(a + 1)
            pick.pop()
            used.discard(b)

    yield from rec(0)


def _valid_subsets(u: GroupedUniverse, c0: Fraction, maximal: bool) -> Iterator[frozenset[int]]:
    """Subsets of allowed elements with |D cap S_i| <= c0 2^i.

    With ``maximal`` only the inclusion-maximal ones (all free elements,
    min(floor(c0 2^i), |S_i|) from each group).
    """
    streams: list[Callable[[], Iterable[tuple[int, ...]]]] = []
    for i in range(1, u.T + 1):
        items = sorted(u.group(i))
        cap = min(math.floor(c0 * 2 ** i), len(items))
        sizes = [cap] if maximal else range(cap + 1)
        streams.append(lambda items=items, sizes=sizes: itertools.chain.from_iterable(
            itertools.combinations(items, s) for s in sizes))
    free = u.free()
    free_sizes = [len(free)] if maximal else range(len(free) + 1)
    streams.append(lambda: itertools.chain.from_iterable(
        itertools.combinations(free, s) for s in free_sizes))

    def rec(k: int, acc: tuple[int, ...]):
        if k == len(streams):
            yield frozenset(acc)
            return
        for part in streams[k]():
            yield from rec(k + 1, acc + part)

    yield from rec(0, ())


def feasible_sets(inst: Instance, cap: int | None = None) -> Iterator[frozenset[int]]:
    """Every feasible set (paths and matchings by search, the rest by subsets).

    ``cap`` bounds vertices for paths, m for matchings and n otherwise.
    """
    if isinstance(inst, PathInstance):
        yield from st_paths(inst, PATH_CAP if cap is None else cap)
        return
    if isinstance(inst, MatchingInstance):
        yield from perfect_matchings(inst, MATCHING_CAP if cap is None else cap)
        return
    cap = SUBSET_CAP if cap is None else cap
    u = universe_of(inst)
    if u.n > cap:
        raise ValueError(f"subset enumeration capped at n = {cap}")
    ok = feasibility(inst)
    allowed = u.allowed()
    for r in range(len(allowed) + 1):
        for c in itertools.combinations(allowed, r):
            if ok(c):
                yield frozenset(c)


def brute_force_logbgt(inst: Instance, c0: Number = 1, cap: int | None = None
                       ) -> frozenset[int] | None:
    """A c0-valid feasible set, or None when exhaustive search proves there is none."""
    c = frac(c0)
    u = universe_of(inst)
    if isinstance(inst, (PathInstance, MatchingInstance)):
        for D in feasible_sets(inst, cap):
            if validity_factor(u, D) <= c:
                return D
        return None
    cap = SUBSET_CAP if cap is None else cap
    if u.n > cap:
        raise ValueError(f"subset enumeration capped at n = {cap}")
    ok = feasibility(inst)
    for D in _valid_subsets(u, c, maximal=upward_closed(inst)):
        if ok(D):
            return D
    return None


def brute_force_minnorm(inst: Instance, values: Sequence[Number], norm: NormSpec,
                        cap: int | None = None) -> tuple[Fraction | float, frozenset[int]] | None:
    """Exact min of f(v[S]) over feasible S with a witness (earliest on ties); None if none."""
    vs = [frac(v) for v in values]
    best = None
    for D in feasible_sets(inst, cap):
        val = eval_norm(norm, solution_vector(vs, D))
        if best is None or val < best[0]:
            best = (val, D)
    return best


def best_integral_z(inst: Instance, cap: int | None = None
                    ) -> tuple[Fraction, frozenset[int]] | None:
    """min over feasible D of max_i |D cap S_i| / 2^i, by search.

    Covering families only try the maximal sets within each candidate scale.
    """
    u = universe_of(inst)
    if isinstance(inst, (PathInstance, MatchingInstance)):
        best = None
        for D in feasible_sets(inst, cap):
            z = validity_factor(u, D)
            if best is None or z < best[0]:
                best = (z, D)
        return best
    cands = sorted({Fraction(k, 2 ** i) for i in range(1, u.T + 1)
                    for k in range(len(u.group(i)) + 1)})
    for z in cands:
        D = brute_force_logbgt(inst, z, cap=u.n if cap is None else cap)
        if D is not None:
            return validity_factor(u, D), D
    return None


# --------------------------------------------------------------------------
# planted generators


@dataclass(frozen=True)
class Planted:
    instance: Instance
    witness: frozenset[int]


def _place(rng: random.Random, n: int, planted: Sequence[int], T: int | None = None
           ) -> list[set[int]]:
    """Groups with each planted element in a group that still has budget left."""
    T = group_count(n) if T is None else T
    groups: list[set[int]] = [set() for _ in range(T)]
    pset = set(planted)
    cnt = [0] * (T + 1)
    for e in range(n):
        if e in pset:
            js = [j for j in range(1, T + 1) if cnt[j] < 2 ** j]
            j = rng.choice(js)
            cnt[j] += 1
        else:
            j = rng.randint(1, T)
        groups[j - 1].add(e)
    return groups


def planted_knapsack(seed: int, n: int, d: int, W: int = 16, size: int | None = None) -> Planted:
    """Integer weights in 1..W (zero off the witness now and then), scaled so the
    witness covers every dimension exactly."""
    rng = random.Random(seed)
    k = size if size is not None else rng.randint(1, min(n, 8))
    P = sorted(rng.sample(range(n), k))
    raw = [[0 if (e not in P and rng.random() < 0.3) else rng.randint(1, W) for _ in range(d)]
           for e in range(n)]
    tot = [sum(raw[e][i] for e in P) for i in range(d)]
    weights = [[Fraction(raw[e][i], tot[i]) for i in range(d)] for e in range(n)]
    u = GroupedUniverse(n, _place(rng, n, P))
    return Planted(KnapInstance(u, weights), frozenset(P))


def planted_interval(seed: int, n: int) -> Planted:
    """A tiling of [0, L) by witness intervals plus short noise intervals."""
    rng = random.Random(seed)
    T = group_count(n)
    L = rng.randint(max(1, n // 4), n)
    cuts = sorted(rng.sample(range(1, L), min(L - 1, rng.randint(1, max(1, n // 4)))))
    pts = [0] + cuts + [L]
    ivs, grp, wit = [], [], []
    cnt = [0] * (T + 1)
    for a, b in zip(pts, pts[1:]):
        j = rng.choice([j for j in range(1, T + 1) if cnt[j] < 2 ** j])
        cnt[j] += 1
        wit.append(len(ivs))
        ivs.append((a, b))
        grp.append(j)
    g1 = cnt[1]
    while len(ivs) < n:
        a = rng.randint(-2, L)
        j = rng.randint(1, T)
        if j == 1 and g1 >= 4:
            j = min(2, T)
        g1 += j == 1
        ivs.append((a, a + rng.randint(1, 8)))
        grp.append(j)
    perm = list(range(len(ivs)))
    rng.shuffle(perm)
    out: list = [None] * len(ivs)
    groups: list[set[int]] = [set() for _ in range(T)]
    for k, p in enumerate(perm):
        out[p] = ivs[k]
        groups[grp[k] - 1].add(p)
    inst = IntervalInstance(GroupedUniverse(len(ivs), groups), out, (0, L))
    return Planted(inst, frozenset(perm[k] for k in wit))


def planted_tree(seed: int, n: int) -> Planted:
    """Witness nodes respect the budgets; every leaf hangs below one of them."""
    rng = random.Random(seed)
    T = group_count(n)
    parent: list[int] = []
    group: list[int] = []

    def add(p: int, g: int) -> int:
        parent.append(p)
        group.append(g)
        return len(parent) - 1

    cnt = [0] * (T + 1)
    cut_groups = []
    for _ in range(rng.randint(1, max(1, n // 6))):
        js = [j for j in range(1, T + 1) if cnt[j] < 2 ** j]
        j = rng.choice(js)
        cnt[j] += 1
        cut_groups.append(j)
    tops: dict[int, list[int]] = {}
    wit = []
    for j in cut_groups:
        p = -1
        for g in sorted(rng.sample(range(1, j), rng.randint(0, j - 1))):
            if g in tops and rng.random() < 0.5:
                cand = [v for v in tops[g] if parent[v] == p]
                if cand:
                    p = rng.choice(cand)
                    continue
            v = add(p, g)
            tops.setdefault(g, []).append(v)
            p = v
        c = add(p, j)
        wit.append(c)
        frontier = [c]
        while frontier and len(parent) < n:
            v = frontier.pop()
            if group[v] >= T or rng.random() < 0.4:
                continue
            for _ in range(rng.randint(1, 3)):
                frontier.append(add(v, rng.randint(group[v] + 1, T)))
    tree = TreeInstance(tuple(parent), tuple(group), T, max(len(parent), 2))
    return Planted(tree, frozenset(wit))


def planted_setcover(seed: int, n: int = 256, items: int = 64, density: float = 0.05) -> Planted:
    rng = random.Random(seed)
    k = rng.randint(1, min(n, 16))
    P = sorted(rng.sample(range(n), k))
    members: list[set[int]] = [set() for _ in range(n)]
    for a in range(items):
        members[rng.choice(P)].add(a)
    for v in range(n):
        members[v] |= {a for a in range(items) if rng.random() < density}
    u = GroupedUniverse(n, _place(rng, n, P))
    return Planted(SetCoverInstance(u, items, members), frozenset(P))


def planted_path(seed: int, V: int, extra: int | None = None) -> Planted:
    """Random simple s-t path in budget plus ``extra`` random edges."""
    rng = random.Random(seed)
    if extra is None:
        extra = rng.randint(0, V // 4)
    verts = list(range(V))
    rng.shuffle(verts)
    L = rng.randint(1, V - 1)
    path = verts[:L + 1]
    edges = [(path[i], path[i + 1]) for i in range(L)]
    while len(edges) < L + extra:
        edges.append(tuple(rng.sample(range(V), 2)))
    n = len(edges)
    groups = _place(rng, n, range(L))
    perm = list(range(n))
    rng.shuffle(perm)
    es: list = [None] * n
    gs: list[set[int]] = [set() for _ in groups]
    for i, g in enumerate(groups):
        for e in g:
            gs[i].add(perm[e])
    for k, p in enumerate(perm):
        es[p] = edges[k]
    inst = PathInstance(GroupedUniverse(n, gs), V, es, path[0], path[-1])
    return Planted(inst, frozenset(perm[k] for k in range(L)))


def planted_matching(seed: int, m: int, extra: int | None = None) -> Planted:
    """Random perfect matching in budget plus ``extra`` random edges."""
    rng = random.Random(seed)
    if extra is None:
        extra = rng.randint(0, 2 * m)
    perm = list(range(m))
    rng.shuffle(perm)
    edges = [(i, perm[i]) for i in range(m)]
    edges += [(rng.randrange(m), rng.randrange(m)) for _ in range(extra)]
    n = len(edges)
    groups = _place(rng, n, range(m))
    order = list(range(n))
    rng.shuffle(order)
    es: list = [None] * n
    gs: list[set[int]] = [set() for _ in groups]
    for i, g in enumerate(groups):
        for e in g:
            gs[i].add(order[e])
    for k, p in enumerate(order):
        es[p] = edges[k]
    inst = MatchingInstance(GroupedUniverse(n, gs), m, es)
    return Planted(inst, frozenset(order[k] for k in range(m)))


def random_values(seed: int, n: int, hi: int = 20) -> list[Fraction]:
    rng = random.Random(seed)
    return [Fraction(rng.randint(0, hi)) for _ in range(n)]


# --------------------------------------------------------------------------
# integrality-gap families


@dataclass(frozen=True)
class GapFamily:
    kind: str
    c: int
    k: int

    def __post_init__(self) -> None:
        if self.kind not in ("path", "cut"):
            raise ValueError(f"unknown gap family {self.kind!r}")
        if self.c < 1 or self.k < 1:
            raise ValueError("need c >= 1 and k >= 1")


@dataclass(frozen=True)
class GapInstance:
    family: GapFamily
    instance: PathInstance | CutInstance
    fractional: tuple[Fraction, ...]  # the stated fractional point, one entry per edge
    z_fractional: Fraction            # its budget scale
    witness: frozenset[int]           # best integral structure
    z_integral: Fraction


def _path_family(fam: GapFamily) -> GapInstance:
    c, k = fam.c, fam.k
    s, t = 0, 1
    nv = 2
    edges: list[tuple[int, int]] = []
    grp: list[int] = []

    def chain(parts: list[tuple[int, int]]) -> list[int]:
        """Chain s -> t made of (count, group) segments; returns edge ids."""
        nonlocal nv
        total = sum(cnt for cnt, _ in parts)
        ids, prev, done = [], s, 0
        for cnt, g in parts:
            for _ in range(cnt):
                done += 1
                nxt = t if done == total else nv
                if nxt != t:
                    nv += 1
                ids.append(len(edges))
                edges.append((prev, nxt))
                grp.append(g)
                prev = nxt
        return ids

    long_paths = [chain([(c * 2 ** i, i)]) for i in range(1, k + 1)]
    mixed = chain([(2 ** i, i) for i in range(k, 0, -1)])
    n = len(edges)
    T = max(group_count(n), k)
    groups: list[set[int]] = [set() for _ in range(T)]
    for e, g in enumerate(grp):
        groups[g - 1].add(e)
    inst = PathInstance(GroupedUniverse(n, groups), nv, edges, s, t)
    x = [Fraction(0)] * n
    for ids in long_paths:
        for e in ids:
            x[e] = Fraction(1, k)
    return GapInstance(fam, inst, tuple(x), Fraction(c, k), frozenset(mixed), Fraction(1))


def _cut_family(fam: GapFamily) -> GapInstance:
    c, k = fam.c, fam.k
    s, t = 0, k + 1  # A_0 = s, A_i = i, A_{k+1} = t
    edges: list[tuple[int, int]] = []
    grp: list[int] = []
    layer: dict[int, list[int]] = {}
    for i in range(1, k + 1):
        for _ in range(c * 2 ** (i - 1)):
            layer.setdefault(i, []).append(len(edges))
            edges.append((i - 1, i))
            grp.append(i)
    for i in range(1, k + 1):
        for _ in range(2 ** (i - 1)):
            layer.setdefault(k + 1, []).append(len(edges))
            edges.append((k, t))
            grp.append(i)
    n = len(edges)
    T = max(group_count(n), k)
    groups: list[set[int]] = [set() for _ in range(T)]
    for e, g in enumerate(grp):
        groups[g - 1].add(e)
    inst = CutInstance(GroupedUniverse(n, groups), k + 2, edges, s, t)
    x = [Fraction(0)] * n
    for i in range(1, k + 1):
        for e in layer[i]:
            x[e] = Fraction(1, k)
    return GapInstance(fam, inst, tuple(x), Fraction(c, 2 * k), frozenset(layer[k + 1]),
                       Fraction(1, 2))


def gen_gap_instance(family: GapFamily) -> GapInstance:
    return _path_family(family) if family.kind == "path" else _cut_family(family)


def _budget_rows(lp: LinearProgram, u: GroupedUniverse, xs: Sequence[int], z: int) -> None:
    for i in range(1, u.T + 1):
        row = {xs[e]: 1 for e in sorted(u.group(i))}
        if row:
            row[z] = -(2 ** i)
            lp.add_row(row, "<=", 0, "budget")


def path_lp(inst: PathInstance) -> tuple[LinearProgram, list[int], int]:
    """min z over unit s-t flows with |x cap S_i| <= z 2^i."""
    u = inst.universe
    lp = LinearProgram()
    xs = [lp.add_var(("x", e), 0, 0 if e in u.banned else 1) for e in range(u.n)]
    z = lp.add_var("z", 0, None)
    for v in range(inst.vertices):
        if v == inst.t:
            continue
        row: dict[int, int] = {}
        for e, (a, b) in enumerate(inst.edges):
            if a == b:
                continue
            if a == v:
                row[xs[e]] = row.get(xs[e], 0) + 1
            if b == v:
                row[xs[e]] = row.get(xs[e], 0) - 1
        lp.add_row(row, "=", 1 if v == inst.s else 0, "degree")
    _budget_rows(lp, u, xs, z)
    return lp, xs, z


def cut_lp(inst: CutInstance) -> tuple[LinearProgram, list[int], int]:
    """min z over potentials p (p_s = 0, p_t = 1) with x_uv >= p_v - p_u."""
    u = inst.universe
    lp = LinearProgram()
    xs = [lp.add_var(("x", e), 0, 0 if e in u.banned else 1) for e in range(u.n)]
    z = lp.add_var("z", 0, None)
    p = [lp.add_var(("p", v), 1 if v == inst.t else 0, 0 if v == inst.s else 1)
         for v in range(inst.vertices)]
    for e, (a, b) in enumerate(inst.edges):
        lp.add_row({xs[e]: 1, p[b]: -1, p[a]: 1}, ">=", 0, "feasibility")
    _budget_rows(lp, u, xs, z)
    return lp, xs, z


def matching_lp(inst: MatchingInstance) -> tuple[LinearProgram, list[int], int]:
    u = inst.universe
    lp = LinearProgram()
    xs = [lp.add_var(("x", e), 0, 0 if e in u.banned else 1) for e in range(u.n)]
    z = lp.add_var("z", 0, None)
    for v in range(2 * inst.m):
        lp.add_row({xs[e]: 1 for e in range(u.n) if v in inst.ends(e)}, "=", 1, "degree")
    _budget_rows(lp, u, xs, z)
    return lp, xs, z


def lp_z(inst: PathInstance | CutInstance | MatchingInstance) -> tuple[Fraction, list[Fraction]] | None:
    """Optimal z of the min-z relaxation and the x part of an optimal vertex."""
    if isinstance(inst, PathInstance):
        lp, xs, z = path_lp(inst)
    elif isinstance(inst, CutInstance):
        lp, xs, z = cut_lp(inst)
    elif isinstance(inst, MatchingInstance):
        lp, xs, z = matching_lp(inst)
    else:
        raise ValueError(f"no min-z relaxation for {type(inst).__name__}")
    sol = minimize(lp, {z: 1})
    if isinstance(sol, Infeasible):
        return None
    return sol.values[z], [sol.values[j] for j in xs]


@dataclass(frozen=True)
class GapMeasurement:
    z_lp: Fraction
    z_integral: Fraction
    witness: frozenset[int]
    method: str  # "structure" or "search"

    @property
    def ratio(self) -> Fraction:
        return self.z_integral / self.z_lp if self.z_lp else Fraction(1)


def measure_gap(obj: GapInstance | PathInstance | CutInstance | MatchingInstance,
                search: bool = False, cap: int | None = None) -> GapMeasurement:
    """Integral over fractional optimum of the min-z relaxation.

    Generated families use their known best integral structure unless
    ``search`` asks for exhaustive search; other instances are searched.
    """
    inst = obj.instance if isinstance(obj, GapInstance) else obj
    res = lp_z(inst)
    if res is None:
        raise ValueError("the relaxation is infeasible")
    z_lp = res[0]
    if isinstance(obj, GapInstance) and not search:
        return GapMeasurement(z_lp, obj.z_integral, obj.witness, "structure")
    best = best_integral_z(inst, cap)
    if best is None:
        raise ValueError("no integral feasible solution")
    return GapMeasurement(z_lp, best[0], best[1], "search")


def path_to_matching(inst: PathInstance) -> tuple[MatchingInstance, Callable[[Iterable[int]], frozenset[int]]]:
    """Bipartite instance whose perfect matchings correspond to s-t paths.

    Left side: s and every other vertex except t; right side: t and every
    other vertex except s.  Each such vertex v gets an edge (v_0, v_1) in
    S_T; each path edge (u, v) becomes (u_0, v_1) in its own group.  The
    returned map sends a path to its perfect matching.
    """
    others = [v for v in range(inst.vertices) if v not in (inst.s, inst.t)]
    left = {inst.s: 0, **{v: k + 1 for k, v in enumerate(others)}}
    right = {inst.t: 0, **{v: k + 1 for k, v in enumerate(others)}}
    u = inst.universe
    edges: list[tuple[int, int]] = []
    grp: list[int | None] = []
    banned: list[int] = []
    image: dict[int, int] = {}
    for e, (a, b) in enumerate(inst.edges):
        if a in left and b in right and a != b:
            image[e] = len(edges)
            if e in u.banned:
                banned.append(len(edges))
            edges.append((left[a], right[b]))
            grp.append(u.group_of.get(e))
    loop = {}
    for v in others:
        loop[v] = len(edges)
        edges.append((left[v], right[v]))
        grp.append(u.T)
    groups: list[set[int]] = [set() for _ in range(u.T)]
    for e, g in enumerate(grp):
        if g is not None:
            groups[g - 1].add(e)
    pm = MatchingInstance(GroupedUniverse(len(edges), groups, banned), len(others) + 1, edges)

    def lift(path: Iterable[int]) -> frozenset[int]:
        pe = list(path)
        on = {v for e in pe for v in inst.edges[e]}
        return frozenset([image[e] for e in pe] + [loop[v] for v in others if v not in on])

    return pm, lift
