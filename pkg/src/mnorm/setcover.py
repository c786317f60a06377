"""Set cover with logarithmic budgets by randomized rounding.

Each set v is kept independently with probability min(2 x_v log2 n, 1),
where x is a vertex of the covering LP with budgets 2^i and n is the
number of sets.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import GroupedUniverse, NoSolution, SolveReport, report_for
from .lp import Infeasible, LinearProgram, solve_feasible_vertex

log = logging.getLogger(__name__)

MAX_TRIES = 32


@dataclass(frozen=True)
class SetCoverInstance:
    """Sets are universe elements; ``members[v]`` lists the items set v covers."""

    universe: GroupedUniverse
    items: int
    members: tuple[frozenset[int], ...]

    def __init__(self, universe: GroupedUniverse, items: int,
                 members: Sequence[Iterable[int]]) -> None:
        ms = tuple(frozenset(m) for m in members)
        if len(ms) != universe.n:
            raise ValueError("need one member list per set")
        for m in ms:
            if any(not 0 <= a < items for a in m):
                raise ValueError(f"set member outside 0..{items - 1}")
        object.__setattr__(self, "universe", universe)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "members", ms)

    def containing(self, a: int) -> list[int]:
        """B(a): the allowed sets containing item a."""
        return [v for v in self.universe.allowed() if a in self.members[v]]

    def covers(self, chosen: Iterable[int]) -> bool:
        got: set[int] = set()
        for v in chosen:
            got |= self.members[v]
        return len(got) == self.items


def log_n(inst: SetCoverInstance) -> Fraction:
    """log2 of the number of sets, exact for powers of two."""
    n = max(inst.universe.n, 2)
    k = n.bit_length() - 1
    return Fraction(k) if 2 ** k == n else Fraction(math.log2(n))


def relaxation(inst: SetCoverInstance) -> list[Fraction] | None:
    """Vertex of the covering LP with budgets 2^i; None when it is infeasible."""
    u = inst.universe
    lp = LinearProgram()
    sets = u.allowed()
    pos = {v: lp.add_var(v, 0, 1) for v in sets}
    for a in range(inst.items):
        lp.add_row({pos[v]: 1 for v in inst.containing(a)}, ">=", 1, "feasibility")
    for i in range(1, u.T + 1):
        ks = [pos[v] for v in sorted(u.group(i))]
        if ks:
            lp.add_row({k: 1 for k in ks}, "<=", 2 ** i, "cardinality")
    sol = solve_feasible_vertex(lp)
    if isinstance(sol, Infeasible):
        return None
    x = [Fraction(0)] * u.n
    for v, k in pos.items():
        x[v] = sol.values[k]
    return x


def keep_probabilities(inst: SetCoverInstance, x: Sequence[Fraction]) -> list[Fraction]:
    lg = log_n(inst)
    return [min(2 * xv * lg, Fraction(1)) for xv in x]


def miss_probability(inst: SetCoverInstance, p: Sequence[Fraction], a: int) -> Fraction:
    """Exact chance that item a stays uncovered: prod over B(a) of (1 - p_v)."""
    out = Fraction(1)
    for v in inst.containing(a):
        out *= 1 - p[v]
    return out


def group_cap(inst: SetCoverInstance, i: int) -> Fraction:
    return 2 ** (i + 2) * log_n(inst)


def succeeded(inst: SetCoverInstance, chosen: Iterable[int]) -> bool:
    chosen = list(chosen)
    counts = inst.universe.counts(chosen)
    return inst.covers(chosen) and all(
        k <= group_cap(inst, i) for i, k in enumerate(counts, start=1))


def sample(p: Sequence[Fraction], rng: np.random.Generator) -> frozenset[int]:
    draws = rng.random(len(p))
    return frozenset(v for v, q in enumerate(p) if q == 1 or (q > 0 and draws[v] < float(q)))


def solve_randomized(inst: SetCoverInstance, seed: int = 0, tries: int = MAX_TRIES,
                     x: Sequence[Fraction] | None = None) -> SolveReport:
    """Sample until the cover succeeds or ``tries`` samples were drawn.

    A failed run reports status "failed" and keeps the last sample.
    """
    u = inst.universe
    if not inst.covers(u.allowed()):
        return report_for(u, NoSolution("some item lies in no allowed set", infeasible=True),
                          seed=seed)
    if x is None:
        x = relaxation(inst)
    if x is None:
        return report_for(u, NoSolution("no 1-valid solution: the LP relaxation is infeasible"),
                          seed=seed)
    p = keep_probabilities(inst, x)
    rng = np.random.default_rng(seed)
    chosen: frozenset[int] = frozenset()
    for attempt in range(1, tries + 1):
        chosen = sample(p, rng)
        if succeeded(inst, chosen):
            return report_for(u, chosen, promised=4 * log_n(inst), seed=seed,
                              stats={"attempts": attempt})
    rep = report_for(u, chosen, seed=seed, stats={"attempts": tries})
    rep.status = "failed"
    rep.certificate = f"no successful sample in {tries} tries"
    return rep


def logbgt_solver(items: int, members: Sequence[Iterable[int]], seed: int = 0):
    def run(universe: GroupedUniverse):
        rep = solve_randomized(SetCoverInstance(universe, items, members), seed)
        if rep.solved:
            return rep.chosen
        return NoSolution(rep.certificate or "sampling failed",
                          infeasible=rep.status == "infeasible")
    return run
