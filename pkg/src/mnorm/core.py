"""Domain types: grouped universes, symmetric monotone norms, validity checks.

Everything here works on exact rationals (``fractions.Fraction``).  The one
exception is the l_p norm, which is evaluated in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence, Union

Number = Union[int, Fraction, float, str, Decimal]

LP_TOLERANCE = 1e-9


class DimensionError(ValueError):
    """A norm parameter does not fit the length of the vector it is applied to."""


def frac(x: Number) -> Fraction:
    """Convert ``x`` to an exact Fraction.

    Floats are converted through their shortest decimal repr, so ``0.1``
    becomes ``1/10`` rather than the binary expansion.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(x))
    if isinstance(x, (str, Decimal)):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def ceil_log2(n: int) -> int:
    """Smallest k >= 0 with 2**k >= n (n >= 1)."""
    if n < 1:
        raise ValueError("n must be positive")
    return (n - 1).bit_length()


def floor_log2(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return n.bit_length() - 1


def group_count(n: int) -> int:
    """Number of budget groups for a universe of size n; at least one."""
    return max(1, ceil_log2(max(n, 1)))


# --------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class Sum:
    pass


@dataclass(frozen=True)
class Max:
    pass


@dataclass(frozen=True)
class TopL:
    l: int

    def __post_init__(self) -> None:
        if self.l < 1:
            raise ValueError("TopL needs l >= 1")


@dataclass(frozen=True)
class Ordered:
    w: tuple[Fraction, ...]

    def __init__(self, w: Iterable[Number]) -> None:
        ws = tuple(frac(x) for x in w)
        if not ws:
            raise ValueError("Ordered needs at least one weight")
        if any(x < 0 for x in ws):
            raise ValueError("Ordered weights must be non-negative")
        if any(a < b for a, b in zip(ws, ws[1:])):
            raise ValueError("Ordered weights must be non-increasing")
        object.__setattr__(self, "w", ws)


@dataclass(frozen=True)
class Lp:
    p: Fraction

    def __init__(self, p: Number) -> None:
        q = frac(p)
        if q < 1:
            raise ValueError("Lp needs p >= 1")
        object.__setattr__(self, "p", q)


NormSpec = Union[Sum, Max, TopL, Ordered, Lp]


def sorted_desc(values: Iterable[Number]) -> list[Fraction]:
    return sorted((abs(frac(v)) for v in values), reverse=True)


def topl(values: Sequence[Number], l: int) -> Fraction:
    """Sum of the l largest absolute entries."""
    if l > len(values):
        raise DimensionError(f"TopL({l}) on a vector of length {len(values)}")
    return sum(sorted_desc(values)[:l], Fraction(0))


def eval_norm(spec: NormSpec, values: Sequence[Number]):
    """Evaluate ``spec`` on ``values``.

    Returns a Fraction for every variant except Lp, which returns a float.
    """
    if isinstance(spec, Sum):
        return sum((abs(frac(v)) for v in values), Fraction(0))
    if isinstance(spec, Max):
        return max((abs(frac(v)) for v in values), default=Fraction(0))
    if isinstance(spec, TopL):
        return topl(values, spec.l)
    if isinstance(spec, Ordered):
        if len(spec.w) > len(values):
            raise DimensionError(
                f"{len(spec.w)} ordered weights on a vector of length {len(values)}")
        desc = sorted_desc(values)
        return sum((w * v for w, v in zip(spec.w, desc)), Fraction(0))
    if isinstance(spec, Lp):
        p = float(spec.p)
        xs = [abs(float(frac(v))) for v in values]
        top = max(xs, default=0.0)
        if top == 0.0:
            return 0.0
        # scale first so large p does not overflow
        return top * sum((x / top) ** p for x in xs) ** (1.0 / p)
    raise TypeError(f"unknown norm spec {spec!r}")


def ordered_as_conic(w: Sequence[Number], values: Sequence[Number]) -> Fraction:
    """Ordered norm written as a non-negative combination of TopL norms."""
    ws = [frac(x) for x in w] + [Fraction(0)]
    total = Fraction(0)
    for l in range(1, len(ws)):
        total += (ws[l - 1] - ws[l]) * topl(values, l)
    return total


def majorization_dominates(u: Sequence[Number], v: Sequence[Number], alpha: Number) -> bool:
    """True iff TopL(l)(v) <= alpha * TopL(l)(u) for every l.

    When this holds, f(v) <= alpha * f(u) for every symmetric monotone norm f.
    """
    if len(u) != len(v):
        raise DimensionError("majorization needs vectors of equal length")
    a = frac(alpha)
    su, sv = sorted_desc(u), sorted_desc(v)
    pu = pv = Fraction(0)
    for x, y in zip(su, sv):
        pu += x
        pv += y
        if pv > a * pu:
            return False
    return True


def solution_vector(values: Sequence[Number], chosen: Iterable[int]) -> list[Fraction]:
    """The n-vector equal to ``values`` on ``chosen`` and 0 elsewhere."""
    out = [Fraction(0)] * len(values)
    for e in chosen:
        out[e] = frac(values[e])
    return out


# --------------------------------------------------------------------------
# grouped universes


@dataclass(frozen=True)
class GroupedUniverse:
    """Universe {0..n-1} with disjoint budget groups S_1..S_T.

    ``groups[i - 1]`` holds S_i.  Elements in no group are free unless they
    are listed in ``banned``, in which case no solution may use them.
    """

    n: int
    groups: tuple[frozenset[int], ...]
    banned: frozenset[int] = frozenset()
    group_of: dict[int, int] = field(init=False, repr=False, compare=False)

    def __init__(self, n: int, groups: Iterable[Iterable[int]],
                 banned: Iterable[int] = ()) -> None:
        gs = tuple(frozenset(g) for g in groups)
        ban = frozenset(banned)
        index: dict[int, int] = {}
        for i, g in enumerate(gs, start=1):
            for e in g:
                if not 0 <= e < n:
                    raise ValueError(f"element {e} outside universe of size {n}")
                if e in index:
                    raise ValueError(f"element {e} in groups {index[e]} and {i}")
                index[e] = i
        for e in ban:
            if not 0 <= e < n:
                raise ValueError(f"banned element {e} outside universe")
            if e in index:
                raise ValueError(f"banned element {e} also sits in group {index[e]}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "groups", gs)
        object.__setattr__(self, "banned", ban)
        object.__setattr__(self, "group_of", index)

    @property
    def T(self) -> int:
        return len(self.groups)

    def group(self, i: int) -> frozenset[int]:
        """S_i, 1-indexed."""
        return self.groups[i - 1]

    def budget(self, i: int) -> int:
        return 2 ** i

    def allowed(self) -> list[int]:
        return [e for e in range(self.n) if e not in self.banned]

    def free(self) -> list[int]:
        return [e for e in range(self.n) if e not in self.banned and e not in self.group_of]

    def counts(self, chosen: Iterable[int]) -> list[int]:
        c = [0] * self.T
        for e in chosen:
            i = self.group_of.get(e)
            if i is not None:
                c[i - 1] += 1
        return c

    def loads(self, chosen: Iterable[int]) -> list[Fraction]:
        return [Fraction(k, 2 ** i) for i, k in enumerate(self.counts(chosen), start=1)]


def check_valid(universe: GroupedUniverse, chosen: Iterable[int], c: Number) -> bool:
    """True iff |D ∩ S_i| <= c * 2^i for every group."""
    cc = frac(c)
    return all(k <= cc * 2 ** i for i, k in enumerate(universe.counts(chosen), start=1))


def validity_factor(universe: GroupedUniverse, chosen: Iterable[int]) -> Fraction:
    """Smallest c for which ``chosen`` is c-valid (0 for an empty set)."""
    return max(universe.loads(chosen), default=Fraction(0))


# --------------------------------------------------------------------------
# solver results


@dataclass(frozen=True)
class NoSolution:
    """Certificate that no ``c0``-valid solution exists (or, with ``infeasible``,
    that the instance admits no feasible set at all)."""

    reason: str
    c0: Fraction = Fraction(1)
    infeasible: bool = False


@dataclass
class SolveReport:
    status: str  # "solved" | "no_solution" | "infeasible" | "failed"
    chosen: frozenset[int] = frozenset()
    factor: Fraction | None = None
    loads: list[Fraction] = field(default_factory=list)
    norm_value: Fraction | float | None = None
    certificate: str = ""
    c0: Fraction = Fraction(1)
    seed: int | None = None
    stats: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def report_for(universe: GroupedUniverse, result: frozenset[int] | NoSolution,
               *, promised: Number | None = None, values: Sequence[Number] | None = None,
               norm: NormSpec | None = None, seed: int | None = None,
               stats: dict | None = None) -> SolveReport:
    """Wrap a solver result in a SolveReport."""
    if isinstance(result, NoSolution):
        return SolveReport(
            status="infeasible" if result.infeasible else "no_solution",
            certificate=result.reason, c0=result.c0, seed=seed, stats=dict(stats or {}))
    chosen = frozenset(result)
    cert = f"{promised}-valid" if promised is not None else "valid"
    nv = None
    if values is not None and norm is not None:
        nv = eval_norm(norm, solution_vector(values, chosen))
    return SolveReport(
        status="solved", chosen=chosen, factor=validity_factor(universe, chosen),
        loads=universe.loads(chosen), norm_value=nv, certificate=cert, seed=seed,
        stats=dict(stats or {}))
