from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from mnorm.core import (
    GroupedUniverse, Max, NoSolution, Ordered, Sum, TopL, check_valid, eval_norm, group_count,
    solution_vector, sorted_desc, topl, validity_factor,
)
from mnorm.harness import (
    brute_force_logbgt, brute_force_minnorm, perfect_matchings, planted_knapsack,
    planted_matching, planted_path, random_values,
)
from mnorm.knapcover import KnapInstance
from mnorm.matching import minsum_solver as matching_minsum
from mnorm.reduce import (
    MinSumSolver, PosSet, _assignment, _group_index, build_groups, enumerate_thresholds,
    g_of_t, h_t, is_valid_guess, position_counts_bounded, logbgt_costs, logbgt_solver_from_minsum,
    logbgt_via_minsum, minnorm_via_logbgt, ordered_minimize, padded_weights, prox,
    sparsify_weights, threshold_for, topl_minimize, truncate,
)
from mnorm.stpath import minsum_solver as path_minsum


def rand_vals(rng: random.Random, n: int) -> list[Fraction]:
    return [Fraction(rng.randint(0, 12), rng.choice([1, 1, 2, 3])) for _ in range(n)]


# --------------------------------------------------------------------------
# positions and thresholds


def test_posset_doubling_and_geometric():
    assert PosSet.doubling(8).positions == (1, 2, 4, 8)
    assert PosSet.doubling(6).positions == (1, 2, 4, 6)
    assert PosSet.geometric(10, 1).positions == (1, 2, 4, 8, 10)
    assert PosSet.geometric(5, Fraction(1, 2)).positions == (1, 2, 3, 4, 5)
    p = PosSet.doubling(8)
    assert p.advance(3) == 4 and p.next(4) == 8 and p.next(8) == 9
    with pytest.raises(ValueError):
        PosSet.doubling(0)


def test_single_value_has_a_dominating_guess():
    tvs = enumerate_thresholds([5], 1)
    assert any(5 <= tv.first <= 10 for tv in tvs)
    assert any(is_valid_guess(tv, [5]) for tv in tvs)


def test_all_zero_values_single_guess():
    tvs = enumerate_thresholds([0, 0, 0], 1)
    assert len(tvs) == 1 and all(t == 0 for t in tvs[0].t)


def test_bad_eps_rejected():
    with pytest.raises(ValueError):
        enumerate_thresholds([1, 2], 0)
    with pytest.raises(ValueError):
        enumerate_thresholds([], 1)


def test_guess_list_contains_valid_guess_for_every_subvector():
    rng = random.Random(0)
    for _ in range(100):
        vs = rand_vals(rng, 8)
        S = [e for e in range(8) if rng.random() < 0.5] or [0]
        o = sorted_desc(solution_vector(vs, S))
        full = enumerate_thresholds(vs, 1, dedup=False)
        assert any(is_valid_guess(tv, o) for tv in full)
        # dedup keeps a guess with the same group assignment as some valid one
        kept = {_assignment(vs, tv) for tv in enumerate_thresholds(vs, 1)}
        assert any(_assignment(vs, tv) in kept for tv in full if is_valid_guess(tv, o))


def test_assignment_matches_reference_scan():
    rng = random.Random(1)
    for _ in range(200):
        vs = rand_vals(rng, rng.randint(1, 9))
        T = group_count(len(vs))
        for tv in enumerate_thresholds(vs, 1, dedup=False)[:30]:
            assert _assignment(vs, tv) == tuple(_group_index(v, tv, T) for v in vs)


def test_build_groups_partition_and_monotone():
    rng = random.Random(2)
    for _ in range(100):
        vs = rand_vals(rng, rng.randint(1, 10))
        for tv in enumerate_thresholds(vs, 1)[:20]:
            u = build_groups(vs, tv)
            for e, v in enumerate(vs):
                if v > tv.first:
                    assert e in u.banned
                else:
                    assert e in u.group_of
                if v == 0:
                    assert u.group_of.get(e) == u.T
            for a, b in itertools.combinations(range(len(vs)), 2):
                if vs[a] > vs[b] and b in u.group_of and a in u.group_of:
                    assert u.group_of[a] <= u.group_of[b]


def test_g_of_t_examples():
    tv = threshold_for([8, 6, 5, 4, 3, 2, 1, 1], 1, PosSet.doubling(8))
    g = g_of_t(tv)
    assert g[2] == tv.at(4)
    const = threshold_for([4] * 8, 1, PosSet.doubling(8))
    assert len(set(g_of_t(const))) == 1


def test_planted_optimum_fits_valid_guess_groups():
    rng = random.Random(3)
    checked = 0
    for seed in range(100):
        pl = planted_knapsack(seed, 8, 1)
        vs = random_values(seed, 8, 9)
        best = brute_force_minnorm(pl.instance, vs, Sum())
        S = best[1]
        o = sorted_desc(solution_vector(vs, S))
        tv = next(tv for tv in enumerate_thresholds(vs, 1, dedup=False) if is_valid_guess(tv, o))
        u = build_groups(vs, tv)
        assert check_valid(u, S, 1)
        assert not (S & u.banned)
        for l in range(1, 9):
            assert topl(g_of_t(tv), l) * 2 >= topl(o, l)
        checked += 1
    assert checked == 100


def test_position_counts_on_valid_sets():
    rng = random.Random(4)
    for _ in range(100):
        vs = rand_vals(rng, 8)
        for tv in enumerate_thresholds(vs, 1)[:10]:
            u = build_groups(vs, tv)
            D = {e for e in u.allowed() if rng.random() < 0.6}
            c = validity_factor(u, D) or Fraction(1)
            assert position_counts_bounded(vs, D, tv, c)


# --------------------------------------------------------------------------
# the reduction driver


def test_single_feasible_set_is_returned():
    from mnorm.stpath import PathInstance
    u = GroupedUniverse(3, [{0, 1, 2}])
    inst = PathInstance(u, 4, [(0, 1), (1, 2), (1, 3)], 0, 2)
    rep = minnorm_via_logbgt([3, 1, 2], Sum(), lambda uni: brute_force_logbgt(
        PathInstance(uni, 4, inst.edges, 0, 2)) or NoSolution("none"))
    assert rep.solved and rep.chosen == {0, 1}
    assert rep.norm_value == brute_force_minnorm(inst, [3, 1, 2], Sum())[0] == 4


@pytest.mark.parametrize("norm", [Sum(), Max(), TopL(2), Ordered([3, 2, 1])])
def test_reduction_with_exact_logbgt_oracle(norm):
    for seed in range(25):
        n = 8
        pl = planted_knapsack(seed, n, 2)
        vs = random_values(seed + 100, n)
        ws = pl.instance.weights

        def solver(uni, ws=ws):
            return brute_force_logbgt(KnapInstance(uni, ws)) or NoSolution("none")

        rep = minnorm_via_logbgt(vs, norm, solver)
        opt = brute_force_minnorm(pl.instance, vs, norm)[0]
        assert rep.solved
        assert rep.norm_value <= 5 * opt
        assert pl.instance.covers(rep.chosen)


def test_parallel_driver_matches_serial():
    pl = planted_path(7, 8)
    vs = random_values(7, pl.instance.universe.n)
    solver = logbgt_solver_from_minsum(path_minsum(pl.instance))
    a = minnorm_via_logbgt(vs, TopL(2), solver)
    b = minnorm_via_logbgt(vs, TopL(2), solver, workers=4)
    assert a.chosen == b.chosen and a.norm_value == b.norm_value


# --------------------------------------------------------------------------
# min-sum reductions


def test_logbgt_costs_ungrouped_are_zero():
    u = GroupedUniverse(3, [set()])
    assert logbgt_costs(u) == [0, 0, 0]


def test_logbgt_via_shortest_path_is_log_valid():
    for seed in range(60):
        pl = planted_path(seed, 16)
        inst = pl.instance
        costs = logbgt_costs(inst.universe)
        assert sum(costs[e] for e in pl.witness) <= inst.universe.T
        rep = logbgt_via_minsum(inst.universe, path_minsum(inst))
        assert rep.solved
        assert rep.factor <= inst.universe.T
        assert inst.is_st_path(rep.chosen)


def test_truncate_example():
    assert truncate([5, 2], 3) == [2, 0]


def test_topl_with_l_equal_n_is_min_sum():
    for seed in range(20):
        pl = planted_path(seed, 8)
        inst = pl.instance
        vs = random_values(seed, inst.universe.n)
        solver = path_minsum(inst)
        S = topl_minimize(vs, len(vs), solver, guesses=[0])
        direct = solver.solve(vs, frozenset())
        assert sum(vs[e] for e in S) == sum(vs[e] for e in direct)


def test_topl_chain_and_matching_optimum():
    for seed in range(30):
        pl = planted_matching(seed, 4, extra=4)
        inst = pl.instance
        n = inst.universe.n
        vs = random_values(seed, n)
        l = 1 + seed % min(n, 4)
        solver = matching_minsum(inst)
        for t in sorted({Fraction(0), *vs}):
            S = solver.solve(truncate(vs, t), frozenset())
            assert topl(solution_vector(vs, S), l) <= \
                topl(solution_vector(truncate(vs, t), S), l) + l * t
        S = topl_minimize(vs, l, solver)
        opt = min(topl(solution_vector(vs, D), l) for D in perfect_matchings(inst))
        assert topl(solution_vector(vs, S), l) == opt


# --------------------------------------------------------------------------
# ordered norms


def test_all_ones_h_t_is_shifted_sum():
    vs = [Fraction(v) for v in (4, 1, 3, 0)]
    pos = PosSet.geometric(4, 1)
    wt = sparsify_weights([1, 1, 1, 1], pos)
    zero = threshold_for([0, 0, 0, 0], 1, pos)
    assert [h_t(v, wt, zero) for v in vs] == vs


def test_ordered_sandwich_and_prox_bounds():
    rng = random.Random(6)
    for _ in range(300):
        n = rng.randint(1, 9)
        v = rand_vals(rng, n)
        w = sorted((Fraction(rng.randint(0, 6)) for _ in range(n)), reverse=True)
        delta = Fraction(rng.choice([1, 2, 4]), 4)
        eps = Fraction(rng.choice([1, 2]), 2)
        pos = PosSet.geometric(n, delta)
        wt = sparsify_weights(w, pos)
        ow = eval_norm(Ordered(padded_weights(w, n)), v)
        owt = eval_norm(Ordered(wt), v)
        assert owt <= ow <= (1 + delta) * owt
        tv = threshold_for(sorted_desc(v), eps, pos)
        px = prox(wt, tv, v)
        assert owt <= px <= (1 + 2 * eps) * owt


def test_ordered_minimize_audited_and_near_optimal():
    for seed in range(15):
        pl = planted_path(seed, 7)
        inst = pl.instance
        vs = random_values(seed, inst.universe.n)
        w = [3, 2, 2, 1][:len(vs)]
        seen = []
        S = ordered_minimize(vs, w, 1, 1, path_minsum(inst),
                             audit=lambda tv, res: seen.append((tv, res)))
        assert seen and inst.is_st_path(S)
        norm = Ordered(padded_weights(w, len(vs)))
        opt = brute_force_minnorm(inst, vs, norm)[0]
        assert eval_norm(norm, solution_vector(vs, S)) <= (1 + 1) * (1 + 2) * opt


def test_minsum_solver_reports_unreachable():
    from mnorm.stpath import PathInstance
    inst = PathInstance(GroupedUniverse(1, [{0}]), 3, [(0, 1)], 0, 2)
    assert isinstance(topl_minimize([1], 1, path_minsum(inst)), NoSolution)
    solver = MinSumSolver(lambda c, b: NoSolution("x"))
    assert isinstance(ordered_minimize([1, 2], [1], 1, 1, solver), NoSolution)
