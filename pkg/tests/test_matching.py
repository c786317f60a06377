from __future__ import annotations

import collections
import random
from fractions import Fraction

import pytest

from mnorm.core import (
    GroupedUniverse, NoSolution, Sum, TopL, eval_norm, group_count, solution_vector,
    validity_factor,
)
from mnorm.harness import brute_force_logbgt, brute_force_minnorm, perfect_matchings, \
    planted_matching, random_values
from mnorm.matching import (
    MatchingInstance, RelaxedMatching, find_partial, has_perfect_matching, is_relaxed,
    iterative_round, min_cost_perfect_matching, minnorm_nearly_matching,
    minnorm_relaxed_matching, relaxed_k, solve_relaxed, to_nearly_matching,
)

HALF = Fraction(1, 2)


def test_k_formula():
    assert relaxed_k(HALF, HALF) == 5
    assert relaxed_k(Fraction(1, 4), HALF) == 6


def test_instance_validation():
    u = GroupedUniverse(1, [{0}])
    with pytest.raises(ValueError):
        MatchingInstance(u, 0, [(0, 0)])
    with pytest.raises(ValueError):
        MatchingInstance(u, 1, [(0, 1)])
    with pytest.raises(ValueError):
        MatchingInstance(u, 1, [(0, 0)], d=[1, 2])


def test_unique_perfect_matching_rounds_exactly():
    u = GroupedUniverse(3, [set(), {0, 1, 2}])
    inst = MatchingInstance(u, 3, [(0, 0), (1, 1), (2, 2)])
    audit: list = []
    res = iterative_round(inst, HALF, audit=audit)
    assert res.edges == {0, 1, 2} and res.deg2 == 0
    assert not audit


def test_no_perfect_matching_gives_no_solution():
    u = GroupedUniverse(2, [{0, 1}])
    inst = MatchingInstance(u, 2, [(0, 0), (1, 0)])
    assert isinstance(iterative_round(inst, HALF), NoSolution)
    assert solve_relaxed(inst, HALF, HALF).__class__ is NoSolution


def test_planted_iterative_round_bounds():
    eps = Fraction(1, 4)
    rng = random.Random(0)
    for seed in range(60):
        m = rng.randint(1, 64)
        inst = planted_matching(seed, m).instance
        res = iterative_round(inst, eps)
        assert is_relaxed(inst, res.edges, eps)
        assert res.deg2 <= m / 2
        for i, k in enumerate(inst.universe.counts(res.edges), start=1):
            assert k <= 2 * 2 ** i + 36


def test_zero_budget_groups_stay_empty():
    rng = random.Random(1)
    for seed in range(60):
        pl = planted_matching(seed, rng.randint(2, 30))
        inst = pl.instance
        T = inst.universe.T
        wit_groups = {inst.universe.group_of[e] for e in pl.witness}
        empty = [i for i in range(1, T + 1) if i not in wit_groups]
        d = [Fraction(0) if i in empty else Fraction(2 ** i) for i in range(1, T + 1)]
        z = MatchingInstance(inst.universe, inst.m, inst.edges, d)
        res = iterative_round(z, HALF)
        counts = inst.universe.counts(res.edges)
        assert all(counts[i - 1] == 0 for i in empty)


def test_fractional_budgets_exercise_every_rounding_step():
    rng = random.Random(2)
    events = collections.Counter()
    for _ in range(60):
        m = rng.randint(4, 30)
        edges = []
        for _ in range(rng.randint(2, 3)):
            p = list(range(m))
            rng.shuffle(p)
            edges += [(i, p[i]) for i in range(m)]
        n = len(edges)
        T = group_count(n)
        groups = [set() for _ in range(T)]
        for e in range(n):
            groups[rng.randrange(T)].add(e)
        u = GroupedUniverse(n, groups)
        d = [Fraction(rng.randint(1, 4 * len(groups[i]) + 1), 4) for i in range(T)]
        inst = MatchingInstance(u, m, edges, d)
        for eps in (HALF, Fraction(1, 4)):
            audit: list = []
            res = iterative_round(inst, eps, audit=audit)
            if isinstance(res, NoSolution):
                continue
            events.update(a.split()[0] for a in audit)
            assert is_relaxed(inst, res.edges, eps)
            for i, k in enumerate(u.counts(res.edges)):
                assert k <= 2 * d[i] + 9 / eps
    assert events["cycle"] and events["path"] and events["dropped"]


def test_planted_solve_relaxed():
    rng = random.Random(3)
    for seed in range(60):
        m = rng.randint(1, 32)
        inst = planted_matching(seed, m).instance
        res = solve_relaxed(inst, HALF, HALF)
        assert isinstance(res, RelaxedMatching)
        assert validity_factor(inst.universe, res.edges) <= Fraction(5, 2)
        assert is_relaxed(inst, res.edges, HALF)


def test_find_partial_respects_low_budgets():
    for seed in range(30):
        inst = planted_matching(seed, 10).instance
        D = find_partial(inst, 2)
        assert D is not None and inst.is_matching(D)
        counts = inst.universe.counts(D)
        assert counts[0] <= 2 and (len(counts) < 2 or counts[1] <= 4)


def test_certificates_agree_with_brute_force():
    rng = random.Random(4)
    stats = collections.Counter()
    for _ in range(300):
        m = rng.randint(1, 5)
        edges = [(rng.randrange(m), rng.randrange(m)) for _ in range(rng.randint(m, 3 * m))]
        n = len(edges)
        T = group_count(n)
        groups = [set() for _ in range(T)]
        for e in range(n):
            groups[min(T - 1, int(rng.expovariate(3)))].add(e)
        inst = MatchingInstance(GroupedUniverse(n, groups), m, edges)
        res = solve_relaxed(inst, HALF, HALF)
        wit = brute_force_logbgt(inst, 1)
        if isinstance(res, NoSolution):
            assert wit is None
            stats["infeasible" if res.infeasible else "none"] += 1
        else:
            assert validity_factor(inst.universe, res.edges) <= Fraction(5, 2)
            stats["solved"] += 1
    assert stats["none"] > 10 and stats["solved"] > 10


def test_nearly_matching_conversion():
    u = GroupedUniverse(4, [{0, 1, 2, 3}])
    inst = MatchingInstance(u, 2, [(0, 0), (1, 1), (1, 0), (0, 1)])
    assert to_nearly_matching(inst, {0, 1}) == {0, 1}
    out = to_nearly_matching(inst, {0, 1, 2})
    assert inst.is_matching(out) and len(out) >= 1
    rng = random.Random(5)
    for seed in range(40):
        inst = planted_matching(seed, rng.randint(2, 40)).instance
        res = solve_relaxed(inst, HALF, HALF)
        near = to_nearly_matching(inst, res)
        assert inst.is_matching(near)
        assert len(near) >= (1 - HALF) * inst.m
        assert all(a <= b for a, b in zip(inst.universe.counts(near),
                                          inst.universe.counts(res.edges)))


def test_min_cost_matching_matches_brute_force():
    rng = random.Random(6)
    for seed in range(60):
        inst = planted_matching(seed, rng.randint(1, 6), extra=rng.randint(0, 8)).instance
        costs = [Fraction(rng.randint(0, 9), rng.randint(1, 3)) for _ in inst.edges]
        got = min_cost_perfect_matching(inst, costs)
        assert inst.is_perfect_matching(got)
        best = min(sum(costs[e] for e in D) for D in perfect_matchings(inst))
        assert sum(costs[e] for e in got) == best


def test_has_perfect_matching():
    u = GroupedUniverse(3, [{0, 1, 2}])
    inst = MatchingInstance(u, 2, [(0, 0), (1, 1), (1, 0)])
    assert has_perfect_matching(inst)
    assert not has_perfect_matching(inst, banned=[0])


def test_k22_sum_norm():
    edges = [(0, 0), (0, 1), (1, 0), (1, 1)]
    vals = [1, 5, 6, 2]
    rep = minnorm_relaxed_matching(2, edges, vals, Sum())
    inst = MatchingInstance(GroupedUniverse(4, []), 2, edges, ())
    opt = brute_force_minnorm(inst, vals, Sum())[0]
    assert rep.norm_value <= Fraction(17, 2) * opt
    near = minnorm_nearly_matching(2, edges, vals, Sum())
    assert near.solved and inst.is_matching(near.chosen)


def test_identical_values():
    inst = planted_matching(1, 4, extra=3).instance
    vals = [3] * inst.universe.n
    rep = minnorm_nearly_matching(inst.m, inst.edges, vals, Sum())
    opt = 3 * inst.m
    assert rep.solved and rep.norm_value <= Fraction(17, 2) * opt


def test_no_perfect_matching_certificate():
    rep = minnorm_nearly_matching(2, [(0, 0), (1, 0)], [1, 1], Sum())
    assert rep.status == "infeasible"


def test_small_fuzz_ratios():
    for seed in range(12):
        inst = planted_matching(seed, 2 + seed % 4, extra=seed % 5).instance
        vals = random_values(seed, inst.universe.n)
        for norm in (Sum(), TopL(2)):
            rep = minnorm_nearly_matching(inst.m, inst.edges, vals, norm)
            opt = brute_force_minnorm(inst, vals, norm)[0]
            assert rep.stats["relaxed_norm"] <= Fraction(17, 2) * opt
            assert len(rep.chosen) >= inst.m / 2
