"""Command line front end: instance I/O, solver dispatch and reports.

Exit codes: 0 solved, 2 certified no solution, 3 infeasible input, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from decimal import Decimal
from fractions import Fraction
from importlib import resources
from typing import Any, Sequence

import jsonschema

from . import harness
from . import intervalcover as ic
from . import knapcover as kc
from . import matching as mt
from . import setcover as sc
from . import stpath as sp
from .core import (
    GroupedUniverse, Lp, Max, NoSolution, NormSpec, Ordered, SolveReport, Sum, TopL, frac,
    report_for,
)
from .reduce import minnorm_via_logbgt

log = logging.getLogger("mnorm")

EXIT = {"solved": 0, "no_solution": 2, "infeasible": 3, "failed": 1}  # failed: sampling ran out of tries
PROBLEMS = ("knapcover", "intervalcover", "setcover", "path", "matching")


class InputError(ValueError):
    """Invalid instance file; ``pointer`` is a JSON pointer into it."""

    def __init__(self, pointer: str, message: str) -> None:
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


# --------------------------------------------------------------------------
# rationals


def rat_out(x: Fraction | float | int | None) -> Any:
    if x is None:
        return None
    if isinstance(x, float):
        return x
    q = frac(x)
    return {"num": str(q.numerator), "den": str(q.denominator)}


def rat_in(x: Any) -> Fraction:
    if isinstance(x, dict):
        return Fraction(int(x["num"]), int(x["den"]))
    return frac(x)


def _rat_str(x: Any) -> str:
    if x is None:
        return "none"
    if isinstance(x, float):
        return f"~{x!r}"
    return str(rat_in(x))


def _rat_parse(s: str) -> Any:
    if s == "none":
        return None
    if s.startswith("~"):
        return float(s[1:])
    return rat_out(Fraction(s))


# --------------------------------------------------------------------------
# instance files


def schema() -> dict:
    return json.loads(resources.files("mnorm").joinpath("schema.json").read_text())


def load_instance(text: str) -> dict:
    """Parse and validate an instance; decimals are kept exact."""
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise InputError("", f"not JSON: {exc}") from exc
    # the validator needs plain JSON types
    plain = json.loads(text)
    errors = sorted(jsonschema.Draft202012Validator(schema()).iter_errors(plain),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        ptr = "".join(f"/{p}" for p in err.absolute_path)
        raise InputError(ptr, err.message)
    _check_semantics(doc)
    return doc


def _check_semantics(doc: dict) -> None:
    n = doc["n"]
    seen: dict[int, int] = {}
    for i, g in enumerate(doc["groups"]):
        for j, e in enumerate(g):
            if e >= n:
                raise InputError(f"/groups/{i}/{j}", f"id {e} outside 0..{n - 1}")
            if e in seen:
                raise InputError(f"/groups/{i}/{j}", f"id {e} already in group {seen[e] + 1}")
            seen[e] = i
    for j, e in enumerate(doc.get("banned", [])):
        if e >= n:
            raise InputError(f"/banned/{j}", f"id {e} outside 0..{n - 1}")
    per_element = {"knapcover": "weights", "intervalcover": "intervals", "setcover": "sets",
                   "path": "edges", "matching": "edges"}[doc["problem"]]
    if len(doc[per_element]) != n:
        raise InputError(f"/{per_element}", f"expected {n} entries, got {len(doc[per_element])}")
    if "values" in doc and len(doc["values"]) != n:
        raise InputError("/values", f"expected {n} entries, got {len(doc['values'])}")
    if doc["problem"] == "knapcover":
        d = doc.get("d", len(doc["weights"][0]))
        for i, row in enumerate(doc["weights"]):
            if len(row) != d:
                raise InputError(f"/weights/{i}", f"expected {d} weights")
    if doc["problem"] == "path":
        for k in ("s", "t"):
            if doc[k] >= doc["vertices"]:
                raise InputError(f"/{k}", "vertex outside the graph")
        for i, (a, b) in enumerate(doc["edges"]):
            if max(a, b) >= doc["vertices"]:
                raise InputError(f"/edges/{i}", "endpoint outside the graph")
    if doc["problem"] == "matching":
        for i, (a, b) in enumerate(doc["edges"]):
            if max(a, b) >= doc["m"]:
                raise InputError(f"/edges/{i}", "endpoint outside 0..m-1")
    if doc["problem"] == "setcover":
        for i, s in enumerate(doc["sets"]):
            for j, a in enumerate(s):
                if a >= doc["items"]:
                    raise InputError(f"/sets/{i}/{j}", "item outside 0..items-1")


def universe_of(doc: dict) -> GroupedUniverse:
    return GroupedUniverse(doc["n"], doc["groups"], doc.get("banned", ()))


def build(doc: dict, universe: GroupedUniverse | None = None):
    """The typed instance described by ``doc``."""
    u = universe or universe_of(doc)
    p = doc["problem"]
    if p == "knapcover":
        return kc.KnapInstance(u, [[rat_in(x) for x in row] for row in doc["weights"]])
    if p == "intervalcover":
        return ic.IntervalInstance(u, [[rat_in(x) for x in iv] for iv in doc["intervals"]],
                                   [rat_in(x) for x in doc["gamma"]])
    if p == "setcover":
        return sc.SetCoverInstance(u, doc["items"], doc["sets"])
    if p == "path":
        return sp.PathInstance(u, doc["vertices"], doc["edges"], doc["s"], doc["t"])
    return mt.MatchingInstance(u, doc["m"], doc["edges"])


def norm_of(doc: dict) -> NormSpec:
    spec = doc.get("norm", {"kind": "sum"})
    kind = spec["kind"]
    if kind == "sum":
        return Sum()
    if kind == "max":
        return Max()
    if kind == "topl":
        if "l" not in spec:
            raise InputError("/norm", "topl needs l")
        return TopL(spec["l"])
    if kind == "ordered":
        if "w" not in spec:
            raise InputError("/norm", "ordered needs w")
        return Ordered([rat_in(x) for x in spec["w"]])
    if "p" not in spec:
        raise InputError("/norm", "lp needs p")
    return Lp(rat_in(spec["p"]))


def norm_to_json(norm: NormSpec) -> dict:
    if isinstance(norm, Sum):
        return {"kind": "sum"}
    if isinstance(norm, Max):
        return {"kind": "max"}
    if isinstance(norm, TopL):
        return {"kind": "topl", "l": norm.l}
    if isinstance(norm, Ordered):
        return {"kind": "ordered", "w": [rat_out(x) for x in norm.w]}
    return {"kind": "lp", "p": rat_out(norm.p)}


def param(doc: dict, key: str, default: Any) -> Any:
    v = doc.get("params", {}).get(key, default)
    return v if key in ("seed", "regime") else rat_in(v)


# --------------------------------------------------------------------------
# reports


def report_json(rep: SolveReport, problem: str, command: str, wall: float | None = None) -> dict:
    """JSON form; group counts come from the loads of the universe that was solved."""
    counts = [int(load * 2 ** i) for i, load in enumerate(rep.loads, start=1)]
    out = {
        "problem": problem,
        "command": command,
        "status": rep.status,
        "certificate": rep.certificate,
        "c0": rat_out(rep.c0),
        "solution": sorted(rep.chosen),
        "factor": rat_out(rep.factor) if rep.solved else None,
        "groups": [{"group": i, "count": k, "budget": 2 ** i}
                   for i, k in enumerate(counts, start=1)] if rep.solved else [],
        "norm_value": rat_out(rep.norm_value),
        "seed": rep.seed,
        "stats": _jsonable(rep.stats),
    }
    if wall is not None:
        out["wall_time"] = round(wall, 6)
    return out


def _jsonable(x: Any) -> Any:
    if isinstance(x, Fraction):
        return rat_out(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


BAR = 20


def render_text(rep: dict) -> str:
    """Deterministic text form of a JSON report; ``parse_text`` inverts it."""
    lines = []
    if rep["status"] == "no_solution":
        lines.append(f"== NO {_rat_str(rep['c0'])}-VALID SOLUTION ==")
    elif rep["status"] == "infeasible":
        lines.append("== INFEASIBLE INSTANCE ==")
    lines.append(f"problem: {rep['problem']}")
    lines.append(f"command: {rep['command']}")
    lines.append(f"status: {rep['status']}")
    lines.append(f"certificate: {rep['certificate']}")
    lines.append(f"c0: {_rat_str(rep['c0'])}")
    lines.append("solution: " + " ".join(str(e) for e in rep["solution"]))
    if rep["factor"] is not None:
        f = rat_in(rep["factor"])
        lines.append(f"factor {float(f)!r} ({f})")
    for g in rep["groups"]:
        load = Fraction(g["count"], g["budget"])
        filled = min(BAR, round(float(load) * BAR / 2))
        bar = "#" * filled + "." * (BAR - filled)
        lines.append(f"group {g['group']}: {g['count']}/{g['budget']} |{bar}|")
    lines.append(f"norm: {_rat_str(rep['norm_value'])}")
    lines.append(f"seed: {'none' if rep['seed'] is None else rep['seed']}")
    lines.append("stats: " + json.dumps(rep["stats"], sort_keys=True))
    if "wall_time" in rep:
        lines.append(f"wall_time: {rep['wall_time']!r}")
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> dict:
    rep: dict[str, Any] = {"factor": None, "groups": []}
    for line in text.splitlines():
        if line.startswith("=="):
            continue
        if line.startswith("factor "):
            rep["factor"] = rat_out(Fraction(line.rsplit("(", 1)[1].rstrip(")")))
            continue
        if line.startswith("group "):
            head, rest = line[6:].split(": ", 1)
            cnt, bud = rest.split(" ", 1)[0].split("/")
            rep["groups"].append({"group": int(head), "count": int(cnt), "budget": int(bud)})
            continue
        key, _, val = line.partition(": ")
        if key in ("problem", "command", "status", "certificate"):
            rep[key] = val
        elif key == "c0":
            rep[key] = _rat_parse(val)
        elif key == "solution":
            rep[key] = [int(x) for x in val.split()]
        elif key == "norm":
            rep["norm_value"] = _rat_parse(val)
        elif key == "seed":
            rep[key] = None if val == "none" else int(val)
        elif key == "stats":
            rep[key] = json.loads(val)
        elif key == "wall_time":
            rep[key] = float(val)
    rep.setdefault("certificate", "")
    return rep


# --------------------------------------------------------------------------
# commands


def solve_doc(doc: dict, seed: int | None = None) -> SolveReport:
    """Solve the LogBgt instance with the budgets given in the file."""
    inst = build(doc)
    p = doc["problem"]
    u = inst.universe
    if p == "knapcover":
        return kc.solve(inst, param(doc, "eps", 1), doc.get("params", {}).get("regime", "small_d"))
    if p == "intervalcover":
        return ic.solve_interval(inst, param(doc, "c0", 1))
    if p == "setcover":
        s = seed if seed is not None else param(doc, "seed", 0)
        return sc.solve_randomized(inst, s)
    if p == "path":
        return sp.solve(inst, param(doc, "alpha", 9))
    res = mt.solve_relaxed(inst, param(doc, "eps", Fraction(1, 2)), param(doc, "delta", Fraction(1, 2)))
    if isinstance(res, NoSolution):
        return report_for(u, res)
    rep = report_for(u, res.edges, promised=2 + param(doc, "delta", Fraction(1, 2)),
                     stats={"degree2": res.deg2})
    rep.stats["nearly_matching"] = sorted(mt.to_nearly_matching(inst, res))
    return rep


def reduce_doc(doc: dict, workers: int = 1, seed: int | None = None) -> SolveReport:
    """Minimize the norm of the values over the feasible sets (groups ignored)."""
    if "values" not in doc:
        raise InputError("/values", "reduce needs per-element values")
    vals = [rat_in(v) for v in doc["values"]]
    norm = norm_of(doc)
    p = doc["problem"]
    eps = param(doc, "eps", 1)
    if p == "knapcover":
        solver = kc.logbgt_solver([[rat_in(x) for x in r] for r in doc["weights"]], eps,
                                  doc.get("params", {}).get("regime", "small_d"))
    elif p == "intervalcover":
        solver = ic.logbgt_solver([[rat_in(x) for x in iv] for iv in doc["intervals"]],
                                  [rat_in(x) for x in doc["gamma"]], param(doc, "c0", 1))
    elif p == "setcover":
        s = seed if seed is not None else param(doc, "seed", 0)
        solver = sc.logbgt_solver(doc["items"], doc["sets"], s)
    elif p == "path":
        solver = sp.logbgt_solver(doc["vertices"], doc["edges"], doc["s"], doc["t"],
                                  param(doc, "alpha", 9))
    else:
        return mt.minnorm_nearly_matching(doc["m"], doc["edges"], vals, norm,
                                          param(doc, "eps", Fraction(1, 2)),
                                          param(doc, "delta", Fraction(1, 2)), workers)
    return minnorm_via_logbgt(vals, norm, solver, eps=1, workers=workers)


def oracle_doc(doc: dict, minnorm: bool = False) -> SolveReport:
    inst = build(doc)
    u = harness.universe_of(inst)
    if minnorm:
        vals = [rat_in(v) for v in doc.get("values", [0] * doc["n"])]
        norm = norm_of(doc)
        best = harness.brute_force_minnorm(inst, vals, norm)
        if best is None:
            return report_for(u, NoSolution("no feasible set exists", infeasible=True))
        rep = report_for(u, best[1], values=vals, norm=norm)
        rep.certificate = "exhaustive optimum"
        return rep
    c0 = param(doc, "c0", 1)
    wit = harness.brute_force_logbgt(inst, c0)
    if wit is None:
        return report_for(u, NoSolution(f"exhaustive search: no {c0}-valid solution", c0=c0))
    rep = report_for(u, wit)
    rep.certificate = f"exhaustive: {c0}-valid witness"
    return rep


def gen_doc(problem: str, size: int, seed: int) -> dict:
    """Planted instance file with its recorded 1-valid witness."""
    if problem == "knapcover":
        pl = harness.planted_knapsack(seed, size, 2)
    elif problem == "intervalcover":
        pl = harness.planted_interval(seed, size)
    elif problem == "setcover":
        pl = harness.planted_setcover(seed, size)
    elif problem == "path":
        pl = harness.planted_path(seed, size)
    elif problem == "matching":
        pl = harness.planted_matching(seed, size)
    else:
        raise ValueError(f"unknown problem {problem!r}")
    return instance_to_doc(pl.instance, pl.witness,
                           values=harness.random_values(seed, harness.universe_of(pl.instance).n))


def instance_to_doc(inst, witness=None, values=None, norm: NormSpec | None = None) -> dict:
    u = harness.universe_of(inst)
    doc: dict[str, Any] = {"n": u.n, "groups": [sorted(g) for g in u.groups]}
    if u.banned:
        doc["banned"] = sorted(u.banned)
    if isinstance(inst, kc.KnapInstance):
        doc.update(problem="knapcover", d=inst.d,
                   weights=[[rat_out(x) for x in r] for r in inst.weights])
    elif isinstance(inst, ic.IntervalInstance):
        doc.update(problem="intervalcover",
                   intervals=[[rat_out(a), rat_out(b)] for a, b in inst.intervals],
                   gamma=[rat_out(x) for x in inst.gamma])
    elif isinstance(inst, sc.SetCoverInstance):
        doc.update(problem="setcover", items=inst.items, sets=[sorted(m) for m in inst.members])
    elif isinstance(inst, sp.PathInstance):
        doc.update(problem="path", vertices=inst.vertices, edges=[list(e) for e in inst.edges],
                   s=inst.s, t=inst.t)
    elif isinstance(inst, mt.MatchingInstance):
        doc.update(problem="matching", m=inst.m, edges=[list(e) for e in inst.edges])
    else:
        raise ValueError(f"no file format for {type(inst).__name__}")
    if witness is not None:
        doc["witness"] = sorted(witness)
    if values is not None:
        doc["values"] = [rat_out(v) for v in values]
        doc["norm"] = norm_to_json(norm or Sum())
    return {k: doc[k] for k in sorted(doc)}


def gap_report(kind: str, c: int, k: int, search: bool) -> dict:
    g = harness.gen_gap_instance(harness.GapFamily(kind, c, k))
    m = harness.measure_gap(g, search=search)
    return {
        "family": kind, "c": c, "k": k, "n": g.instance.universe.n,
        "z_lp": rat_out(m.z_lp), "z_integral": rat_out(m.z_integral),
        "ratio": rat_out(m.ratio), "ratio_float": float(m.ratio),
        "bound": rat_out(Fraction(k, c)), "method": m.method,
    }


# --------------------------------------------------------------------------
# entry point


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mnorm", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
        if needs_input:
            p.add_argument("--input", required=True, help="instance JSON file ('-' for stdin)")
        p.add_argument("--output", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--seed", type=int, help="seed for randomized solvers")
        p.add_argument("--parallel", type=int, default=1, help="worker bound")
        p.add_argument("--timing", action="store_true", help="add wall time to the report")

    common(sub.add_parser("solve", help="solve the budgeted instance as given"))
    common(sub.add_parser("reduce", help="minimize the norm through threshold guesses"))
    o = sub.add_parser("oracle", help="exhaustive search on a small instance")
    common(o)
    o.add_argument("--minnorm", action="store_true", help="optimal norm instead of a witness")
    g = sub.add_parser("gap", help="integrality gap of a generated family")
    common(g, needs_input=False)
    g.add_argument("--family", choices=("path", "cut"), required=True)
    g.add_argument("--c", type=int, required=True)
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--search", action="store_true", help="find the integral optimum by search")
    n = sub.add_parser("gen", help="planted instance file")
    common(n, needs_input=False)
    n.add_argument("--problem", choices=PROBLEMS, required=True)
    n.add_argument("--size", type=int, required=True)
    return ap


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def run(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "gen":
            _emit(args, _dump(gen_doc(args.problem, args.size, args.seed or 0)))
            return 0
        if args.command == "gap":
            rep = gap_report(args.family, args.c, args.k, args.search)
            if args.format == "text":
                text = "".join(f"{k}: {_rat_str(v) if isinstance(v, dict) else v}\n"
                               for k, v in sorted(rep.items()))
            else:
                text = _dump(rep)
            _emit(args, text)
            return 0
        raw = sys.stdin.read() if args.input == "-" else open(args.input, encoding="utf-8").read()
        doc = load_instance(raw)
        start = time.perf_counter()
        if args.command == "solve":
            rep = solve_doc(doc, args.seed)
        elif args.command == "reduce":
            rep = reduce_doc(doc, args.parallel, args.seed)
        else:
            rep = oracle_doc(doc, args.minnorm)
        wall = time.perf_counter() - start if args.timing else None
        out = report_json(rep, doc["problem"], args.command, wall)
        _emit(args, render_text(out) if args.format == "text" else _dump(out))
        return EXIT[rep.status]
    except InputError as exc:
        print(f"mnorm: invalid input at {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"mnorm: {exc}", file=sys.stderr)
        return 1


def main(argv: Sequence[str] | None = None) -> None:
    level = os.environ.get("MNORM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run(argv))
