"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line, then asserts it."""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction

from mnorm import intervalcover as ic
from mnorm import knapcover as kc
from mnorm import matching as mt
from mnorm import setcover as sc
from mnorm import stpath as sp
from mnorm.core import (
    GroupedUniverse, Max, NoSolution, Ordered, Sum, TopL, eval_norm, group_count,
    ordered_as_conic, solution_vector, sorted_desc, topl, validity_factor,
)
from mnorm.harness import (
    GapFamily, brute_force_logbgt, brute_force_minnorm, gen_gap_instance, measure_gap,
    perfect_matchings, planted_interval, planted_knapsack, planted_matching, planted_path,
    planted_setcover, planted_tree, random_values, st_paths,
)
from mnorm.lp import (
    LinearProgram, VertexSolution, audit_vertex, is_feasible_point,
    solve_feasible_vertex,
)
from mnorm.reduce import (
    PosSet, minnorm_via_logbgt, ordered_minimize, padded_weights, prox, sparsify_weights,
    threshold_for, topl_minimize,
)

HALF = Fraction(1, 2)


# --------------------------------------------------------------------------
# 1. knapsack cover, small d


def test_criterion_1_knapsack_small_d(verdict):
    rng = random.Random(101)
    bad, slowest, worst = 0, 0.0, Fraction(0)
    for seed in range(500):
        n, d = rng.randint(1, 64), rng.randint(1, 3)
        pl = planted_knapsack(seed, n, d)
        start = time.perf_counter()
        rep = kc.solve(pl.instance, 1, "small_d")
        slowest = max(slowest, time.perf_counter() - start)
        if not (rep.solved and pl.instance.covers(rep.chosen) and rep.factor <= 2):
            bad += 1
        else:
            worst = max(worst, rep.factor)
    # certificates against exhaustive search on small instances
    disagree = checked = 0
    for _ in range(200):
        n = rng.randint(2, 18)
        T = group_count(n)
        groups = [set() for _ in range(T)]
        for e in range(n):
            groups[min(T - 1, int(rng.expovariate(2)))].add(e)
        d = rng.randint(1, 3)
        w = [[Fraction(rng.randint(0, 4), 12) for _ in range(d)] for _ in range(n)]
        inst = kc.KnapInstance(GroupedUniverse(n, groups), w)
        rep = kc.solve(inst, 1, "small_d")
        wit = brute_force_logbgt(inst, 1)
        checked += rep.status == "no_solution"
        # a certificate needs no 1-valid set; a 1-valid set needs a solution
        if wit is not None and not rep.solved:
            disagree += 1
    ok = bad == 0 and slowest < 1 and disagree == 0
    verdict(1, ok, f"500 planted: {bad} failures, max factor {worst}, slowest {slowest:.3f}s; "
                   f"200 brute-force checks ({checked} certificates): {disagree} disagreements")
    assert ok


# --------------------------------------------------------------------------
# 2. knapsack cover, large d


def test_criterion_2_knapsack_large_d(verdict):
    rng = random.Random(202)
    bad = class_bad = 0
    worst = Fraction(0)
    for seed in range(200):
        W = rng.randint(1, 16)
        pl = planted_knapsack(seed, rng.randint(4, 64), 4, W=W)
        inst = pl.instance
        rep = kc.solve(inst, 1, "large_d")
        if not (rep.solved and inst.covers(rep.chosen) and rep.factor <= 2):
            bad += 1
        else:
            worst = max(worst, rep.factor)
        cap = (math.log2(inst.spread()) + 2) ** inst.d
        for j in range(1, inst.universe.T + 1):
            if len(kc.weight_classes(inst, j)) > cap:
                class_bad += 1
    ok = bad == 0 and class_bad == 0
    verdict(2, ok, f"200 planted d=4: {bad} failures, max factor {worst}; "
                   f"{class_bad} groups over the class bound")
    assert ok


# --------------------------------------------------------------------------
# 3. interval cover


def piece_factor(pieces, chosen) -> Fraction:
    T = max((p.group for p in pieces), default=1)
    cnt = [0] * (T + 1)
    for k in chosen:
        cnt[pieces[k].group] += 1
    return max((Fraction(c, 2 ** g) for g, c in enumerate(cnt) if g), default=Fraction(0))


def piece_covers(pieces, chosen, gamma) -> bool:
    return ic.union_covers((pieces[k].iv for k in chosen), gamma)


def test_criterion_3_interval_cover(verdict):
    rng = random.Random(303)
    bad = stage_bad = 0
    worst = Fraction(0)
    for seed in range(200):
        pl = planted_interval(seed, rng.randint(8, 512))
        inst, W = pl.instance, pl.witness
        rep = ic.solve_interval(inst)
        if not (rep.solved and inst.covers(rep.chosen) and rep.factor <= 99):
            bad += 1
        else:
            worst = max(worst, rep.factor)
        pipe = ic.build_pipeline(inst)
        c = validity_factor(inst.universe, W)
        X = pipe.ld.from_source(W)
        Xf = piece_factor(pipe.ld.pieces, X)
        back = pipe.ld.to_source(X)
        ok1 = (piece_covers(pipe.ld.pieces, X, inst.gamma) and Xf <= 2 * c
               and inst.covers(back) and validity_factor(inst.universe, back) <= Xf)
        Y = pipe.lam.from_source(X)
        Yf = piece_factor(pipe.lam.pieces, Y)
        Xb = pipe.lam.to_source(Y)
        ok2 = (piece_covers(pipe.lam.pieces, Y, inst.gamma) and Yf <= 3 * Xf
               and piece_covers(pipe.ld.pieces, Xb, inst.gamma)
               and piece_factor(pipe.ld.pieces, Xb) <= 4 * Yf)
        res = ic.solve_tree(pipe.tm.tree, 8)
        ok3 = not isinstance(res, NoSolution)
        if ok3:
            Z = pipe.tm.to_source(res)
            ok3 = (piece_covers(pipe.lam.pieces, Z, inst.gamma)
                   and piece_factor(pipe.lam.pieces, Z) == validity_factor(pipe.tm.tree.universe(), res))
        stage_bad += not (ok1 and ok2 and ok3)
    tree_bad = 0
    tree_worst = Fraction(0)
    for seed in range(200):
        tree = planted_tree(seed, rng.randint(16, 512)).instance
        res = ic.solve_tree(tree, 1)
        if isinstance(res, NoSolution) or not tree.covers(res):
            tree_bad += 1
            continue
        f = validity_factor(tree.universe(), res)
        tree_worst = max(tree_worst, f)
        tree_bad += f > 5
    ok = bad == 0 and stage_bad == 0 and tree_bad == 0
    verdict(3, ok, f"200 planted: {bad} failures, max factor {worst}; {stage_bad} stage-factor "
                   f"violations; 200 trees: {tree_bad} failures, max factor {tree_worst}")
    assert ok


# --------------------------------------------------------------------------
# 4. s-t path DP


def test_criterion_4_path_dp(verdict):
    rng = random.Random(404)
    bad = 0
    worst = Fraction(0)
    for seed in range(200):
        V = rng.randint(4, 64)
        pl = planted_path(seed, V, rng.randint(0, V))
        rep = sp.solve(pl.instance, 9)
        if not (rep.solved and pl.instance.is_st_path(rep.chosen) and rep.factor <= 2):
            bad += 1
        else:
            worst = max(worst, rep.factor)
    gap_bad = 0
    for k in range(3, 7):
        g = gen_gap_instance(GapFamily("path", 1, k))
        rep = sp.solve(g.instance, 9)
        m = measure_gap(g)
        gap_bad += not (rep.solved and rep.factor <= 2 and m.ratio >= k)
    ok = bad == 0 and gap_bad == 0
    verdict(4, ok, f"200 planted: {bad} failures, max factor {worst}; gap family k=3..6: "
                   f"{gap_bad} failures")
    assert ok


# --------------------------------------------------------------------------
# 5. integrality gaps


def test_criterion_5_integrality_gaps(verdict):
    bad = 0
    rows = []
    for kind in ("path", "cut"):
        for c in (1, 2):
            prev = None
            for k in range(2, 9):
                m = measure_gap(gen_gap_instance(GapFamily(kind, c, k)))
                if m.ratio < Fraction(k, c) or (prev is not None and m.ratio <= prev):
                    bad += 1
                prev = m.ratio
            rows.append(f"{kind} c={c} ratio(k=8)={prev}")
    # the structural integral optimum agrees with exhaustive search where that is affordable
    search_bad = 0
    for kind, kmax in (("path", 4), ("cut", 3)):
        for c in (1, 2):
            for k in range(2, kmax + 1):
                g = gen_gap_instance(GapFamily(kind, c, k))
                a, b = measure_gap(g), measure_gap(g, search=True, cap=128)
                search_bad += a.z_integral != b.z_integral
    ok = bad == 0 and search_bad == 0
    verdict(5, ok, f"k=2..8: {bad} violations ({'; '.join(rows)}); "
                   f"search cross-check: {search_bad} mismatches")
    assert ok


# --------------------------------------------------------------------------
# 6. matching


def test_criterion_6_matching(verdict):
    rng = random.Random(606)
    bad = 0
    worst = Fraction(0)
    for seed in range(200):
        m = rng.randint(1, 64)
        inst = planted_matching(seed, m).instance
        res = mt.solve_relaxed(inst, HALF, HALF)
        if isinstance(res, NoSolution):
            bad += 1
            continue
        f = validity_factor(inst.universe, res.edges)
        near = mt.to_nearly_matching(inst, res)
        worst = max(worst, f)
        bad += not (f <= Fraction(5, 2) and mt.is_relaxed(inst, res.edges, HALF)
                    and res.deg2 <= 2 * HALF * m
                    and inst.is_matching(near) and len(near) >= (1 - HALF) * m)
    ratio_bad = 0
    worst_ratio = Fraction(0)
    for seed in range(30):
        m = rng.randint(1, 7)
        inst = planted_matching(seed, m, extra=rng.randint(0, m)).instance
        vals = random_values(seed, inst.universe.n)
        for norm in (Sum(), TopL(rng.randint(1, m))):
            rep = mt.minnorm_relaxed_matching(inst.m, inst.edges, vals, norm, HALF, HALF)
            opt = min(eval_norm(norm, solution_vector(vals, D)) for D in perfect_matchings(inst))
            if not rep.solved:
                ratio_bad += 1
                continue
            r = rep.norm_value / opt if opt else Fraction(0 if rep.norm_value == 0 else 10 ** 9)
            worst_ratio = max(worst_ratio, r)
            ratio_bad += r > 8 + HALF
    ok = bad == 0 and ratio_bad == 0
    verdict(6, ok, f"200 planted: {bad} failures, max factor {worst}; end-to-end m<=7: "
                   f"{ratio_bad} violations, max ratio {float(worst_ratio):.3f}")
    assert ok


# --------------------------------------------------------------------------
# 7. set cover


def test_criterion_7_setcover(verdict):
    rates = []
    invalid = 0
    for inst_seed in range(10):
        inst = planted_setcover(inst_seed, 256, 64).instance
        x = sc.relaxation(inst)
        cap = 4 * sc.log_n(inst)
        wins = 0
        for seed in range(1000):
            rep = sc.solve_randomized(inst, seed, tries=1, x=x)
            if rep.solved:
                wins += 1
                invalid += not (sc.succeeded(inst, rep.chosen) and rep.factor <= cap)
        rates.append(Fraction(wins, 1000))
    ok = min(rates) > HALF and invalid == 0
    verdict(7, ok, f"10 instances x 1000 seeds: min success rate {float(min(rates)):.3f}, "
                   f"{invalid} successes over 4 log n")
    assert ok


# --------------------------------------------------------------------------
# 8. reduction end to end


def norms_for(rng: random.Random, n: int):
    l = rng.randint(1, n)
    w = sorted((Fraction(rng.randint(0, 5)) for _ in range(rng.randint(1, n))), reverse=True)
    if not any(w):
        w[0] = Fraction(1)
    return [Sum(), Max(), TopL(l), Ordered(w)]


def reduction_cases(rng: random.Random):
    """(module, instance, solver or None, c) for n <= 14."""
    for seed in range(6):
        pl = planted_knapsack(seed, rng.randint(2, 14), rng.randint(1, 2))
        inst = pl.instance
        yield "knapcover", inst, kc.logbgt_solver(inst.weights, 1), Fraction(2)
        inst = planted_interval(seed, rng.randint(2, 14)).instance
        yield "intervalcover", inst, ic.logbgt_solver(inst.intervals, inst.gamma, 1), Fraction(99)
        inst = planted_setcover(seed, rng.randint(4, 14), rng.randint(2, 8), 0.3).instance
        yield ("setcover", inst, sc.logbgt_solver(inst.items, inst.members, seed),
               4 * sc.log_n(inst))
        V = rng.randint(3, 8)
        inst = planted_path(seed, V, rng.randint(0, 14 - (V - 1))).instance
        yield ("path", inst, sp.logbgt_solver(inst.vertices, inst.edges, inst.s, inst.t, 9),
               Fraction(2))
        m = rng.randint(1, 5)
        inst = planted_matching(seed, m, extra=rng.randint(0, 14 - m)).instance
        yield "matching", inst, None, 2 + HALF / 8


def test_criterion_8_reduction_end_to_end(verdict):
    rng = random.Random(808)
    violations = runs = 0
    worst: dict[str, float] = {}
    for name, inst, solver, c in reduction_cases(rng):
        n = inst.universe.n
        vals = random_values(rng.randrange(10 ** 6), n)
        for norm in norms_for(rng, n):
            opt = brute_force_minnorm(inst, vals, norm)[0]
            if solver is None:
                rep = mt.minnorm_relaxed_matching(inst.m, inst.edges, vals, norm, HALF, HALF)
                bound = 8 + HALF
            else:
                rep = minnorm_via_logbgt(vals, norm, solver, eps=1)
                bound = 4 * c + 1
            runs += 1
            if not rep.solved:
                violations += 1
                continue
            r = Fraction(rep.norm_value) / opt if opt else (0 if rep.norm_value == 0 else math.inf)
            worst[name] = max(worst.get(name, 0.0), float(r))
            violations += r > bound
    ok = violations == 0
    detail = ", ".join(f"{k} {v:.2f}" for k, v in sorted(worst.items()))
    verdict(8, ok, f"{runs} runs: {violations} violations; max ratio per module: {detail}")
    assert ok


# --------------------------------------------------------------------------
# 9. norm and LP properties


def random_lp(rng: random.Random) -> LinearProgram:
    lp = LinearProgram()
    n = rng.randint(1, 6)
    for j in range(n):
        lp.add_var(j, 0, rng.choice([1, 2, None]))
    for _ in range(rng.randint(1, 5)):
        cs = {j: rng.randint(-3, 4) for j in range(n) if rng.random() < 0.7}
        lp.add_row(cs, rng.choice(["<=", ">=", "="]), rng.randint(-2, 5))
    return lp


def test_criterion_9_norm_and_lp_properties(verdict):
    rng = random.Random(909)
    norm_bad = 0
    for _ in range(10 ** 4):
        n = rng.randint(1, 8)
        v = [Fraction(rng.randint(0, 20), rng.randint(1, 4)) for _ in range(n)]
        u = [Fraction(rng.randint(0, 20), rng.randint(1, 4)) for _ in range(n)]
        w = sorted((Fraction(rng.randint(0, 6)) for _ in range(n)), reverse=True)
        if not any(w):
            w[0] = Fraction(1)
        f = rng.choice([Sum(), Max(), TopL(rng.randint(1, n)), Ordered(w)])
        perm = v[:]
        rng.shuffle(perm)
        bigger = [x + Fraction(rng.randint(0, 3)) for x in v]
        fv = eval_norm(f, v)
        norm_bad += not (eval_norm(f, perm) == fv
                         and fv <= eval_norm(f, bigger)
                         and eval_norm(f, [a + b for a, b in zip(v, u)]) <= fv + eval_norm(f, u)
                         and eval_norm(Ordered(w), v) == ordered_as_conic(w, v))
    lp_bad = vertices = 0
    for _ in range(500):
        lp = random_lp(rng)
        for method in ("exact", "highs"):
            sol = solve_feasible_vertex(lp, method=method)
            if isinstance(sol, VertexSolution):
                vertices += 1
                lp_bad += not (is_feasible_point(lp, sol.values) and audit_vertex(lp, sol))
    tu_bad = 0
    for _ in range(100):
        m = rng.randint(1, 6)
        lp = LinearProgram()
        edges = [(a, b) for a in range(m) for b in range(m) if rng.random() < 0.6]
        perm = list(range(m))
        rng.shuffle(perm)
        edges += [(a, perm[a]) for a in range(m)]
        xs = [lp.add_var(e, 0, None) for e in edges]
        for v in range(m):
            lp.add_row({x: 1 for x, (a, _) in zip(xs, edges) if a == v}, "=", 1, "degree")
            lp.add_row({x: 1 for x, (_, b) in zip(xs, edges) if b == v}, "=", 1, "degree")
        obj = {j: rng.randint(-5, 5) for j in range(lp.num_vars)}
        sol = solve_feasible_vertex(lp, obj)
        tu_bad += not (isinstance(sol, VertexSolution) and audit_vertex(lp, sol)
                       and all(x.denominator == 1 for x in sol.values))
    ok = norm_bad == 0 and lp_bad == 0 and tu_bad == 0
    verdict(9, ok, f"10^4 norm fuzz vectors: {norm_bad} violations; {vertices} vertices audited: "
                   f"{lp_bad} failures; 100 degree LPs: {tu_bad} non-integral")
    assert ok


# --------------------------------------------------------------------------
# 10. generic reductions


def test_criterion_10_generic_reductions(verdict):
    rng = random.Random(1010)
    topl_bad = 0
    for seed in range(50):
        inst = planted_path(seed, rng.randint(3, 8), rng.randint(0, 8)).instance
        vals = random_values(seed, inst.universe.n)
        l = rng.randint(1, inst.universe.n)
        S = topl_minimize(vals, l, sp.minsum_solver(inst))
        opt = min(topl(solution_vector(vals, D), l) for D in st_paths(inst))
        topl_bad += isinstance(S, NoSolution) or topl(solution_vector(vals, S), l) != opt
    for seed in range(50):
        inst = planted_matching(seed, rng.randint(1, 5), extra=rng.randint(0, 5)).instance
        vals = random_values(seed, inst.universe.n)
        l = rng.randint(1, inst.universe.n)
        S = topl_minimize(vals, l, mt.minsum_solver(inst))
        opt = min(topl(solution_vector(vals, D), l) for D in perfect_matchings(inst))
        topl_bad += isinstance(S, NoSolution) or topl(solution_vector(vals, S), l) != opt
    sandwich_bad = points = 0
    for seed in range(30):
        inst = planted_path(seed, rng.randint(3, 7), rng.randint(0, 6)).instance
        n = inst.universe.n
        vals = random_values(seed, n)
        w = sorted((Fraction(rng.randint(0, 5)) for _ in range(rng.randint(1, n))), reverse=True)
        if not any(w):
            w[0] = Fraction(1)
        delta = Fraction(rng.choice([1, 2, 4]), 4)
        eps = Fraction(rng.choice([1, 2]), 2)
        ws = padded_weights(w, n)
        pos = PosSet.geometric(n, delta)
        wt = sparsify_weights(ws, pos)
        evaluated = []
        S = ordered_minimize(vals, w, delta, eps, sp.minsum_solver(inst),
                             audit=lambda tv, res: evaluated.append((tv, res)))
        for tv, res in evaluated:
            points += 1
            x = solution_vector(vals, res)
            owt = eval_norm(Ordered(wt), x)
            ow = eval_norm(Ordered(ws), x)
            own = threshold_for(sorted_desc(x), eps, pos)
            sandwich_bad += not (owt <= ow <= (1 + delta) * owt
                                 and owt <= prox(wt, tv, x)
                                 and prox(wt, own, x) <= (1 + 2 * eps) * owt)
        opt = brute_force_minnorm(inst, vals, Ordered(ws))[0]
        got = eval_norm(Ordered(ws), solution_vector(vals, S))
        sandwich_bad += got > (1 + delta) ** 2 * (1 + 2 * eps) * opt
    ok = topl_bad == 0 and sandwich_bad == 0
    verdict(10, ok, f"topl vs brute force on 50 path + 50 matching: {topl_bad} mismatches; "
                    f"{points} evaluated points: {sandwich_bad} sandwich violations")
    assert ok
