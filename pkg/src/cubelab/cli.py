"""Command-line front end.

Every subcommand prints (or writes with ``--out``) one JSON document holding
the resolved configuration, the library version and the result.  Keys are
sorted and no timestamps are recorded, so identical inputs give identical
bytes.

Exit codes: 0 success, 2 enumeration budget exceeded, 3 malformed input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable

from . import __version__
from .consistency import consistency_verdict
from .cubes import CornerError, complete_corner, cube_count
from .exch import WindowDistribution, check_affine_exchangeable, check_cubic_exchangeable, check_independence_property, uniform_cube_window
from .fib import (
    GroupNilspaceMap,
    enumerate_morphisms,
    fibration_failure,
    is_cube_surjective,
    is_polynomial_map,
    non_cube_witness,
)
from .group2 import FilteredGroup
from .measures import (
    BudgetExceeded,
    FunctionTable,
    LimitObject,
    LinearFormSystem,
    MonteCarlo,
    convergence_report,
    default_budget,
    sample_measure,
    zeta_marginal,
)
from .poly import calibrate_depth_convention

EXIT_OK, EXIT_BUDGET, EXIT_MALFORMED = 0, 2, 3


class MalformedInput(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which means "budget" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_MALFORMED, f"{self.prog}: error: {message}\n")


def _load(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc


def _mode(args):
    if args.mode == "exact":
        return "exact"
    if args.seed is None:
        raise MalformedInput("--seed is required in mc mode")
    return MonteCarlo(args.samples, args.seed, args.shards)


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "csv")}
    cfg["budget"] = args.budget if args.budget is not None else default_budget()
    return cfg


# -- subcommands -------------------------------------------------------------


def cmd_sample_measure(args):
    f = FunctionTable.from_json(_load(args.function))
    system = LinearFormSystem.from_json(_load(args.forms))
    return sample_measure(f, system, _mode(args), args.budget, args.jobs)


def cmd_zeta(args):
    lim = LimitObject.from_json(_load(args.limit))
    system = LinearFormSystem.from_json(_load(args.forms))
    return zeta_marginal(lim, system, _mode(args), args.budget)


def cmd_converge(args):
    fs = [FunctionTable.from_json(_load(p)) for p in args.functions]
    systems = [LinearFormSystem.from_json(_load(p)) for p in args.forms]
    lim = LimitObject.from_json(_load(args.limit)) if args.limit else None
    return convergence_report(fs, systems, _mode(args), lim, budget=args.budget).to_json()


def cmd_exch(args):
    if args.window:
        window = WindowDistribution.from_json(_load(args.window))
    elif args.group:
        window = uniform_cube_window(FilteredGroup.from_json(_load(args.group)), args.k)
    else:
        raise MalformedInput("give --window or --group")
    out = {}
    if args.check in ("affine", "all"):
        out["affine"] = check_affine_exchangeable(window).to_json()
    if args.check in ("cubic", "all"):
        out["cubic"] = check_cubic_exchangeable(window, args.m).to_json()
    if args.check in ("independence", "all"):
        out["independence"] = check_independence_property(window).to_json()
    return out


def cmd_consistency(args):
    forms = LinearFormSystem.from_json(_load(args.forms))
    try:
        values = [int(v) for v in args.tuple.split(",")]
    except ValueError as exc:
        raise MalformedInput(f"bad tuple {args.tuple!r}") from exc
    return consistency_verdict(values, forms, args.k, args.r)


def cmd_fib(args):
    x = FilteredGroup.from_json(_load(args.domain))
    y = FilteredGroup.from_json(_load(args.codomain))
    if args.check == "enumerate":
        maps = enumerate_morphisms(x, y, args.budget)
        return {
            "count": len(maps),
            "cube_surjective": sum(is_cube_surjective(m, budget=args.budget) for m in maps),
            "maps": [m.to_json()["table"] for m in maps],
        }
    if not args.map:
        raise MalformedInput("--map is required unless --check enumerate")
    phi = GroupNilspaceMap.from_json(_load(args.map), x, y)
    nmax = args.nmax if args.nmax is not None else max(x.degree, y.degree) + 1
    out: dict = {"nmax": nmax}
    morphism = is_polynomial_map(phi)
    out["morphism"] = morphism
    if not morphism:
        for n in range(nmax + 1):
            witness = non_cube_witness(phi, n, args.budget)
            if witness is not None:
                out["witness_cube"] = witness
                break
        return out
    if args.check in ("cube-surjective", "all"):
        out["cube_surjective"] = is_cube_surjective(phi, nmax, args.budget)
    if args.check in ("fibration", "all"):
        failure = fibration_failure(phi)
        out["fibration"] = failure is None
        if failure is not None:
            out["fibration_failure"] = failure
    return out


def cmd_calibrate(args):
    return calibrate_depth_convention(args.max_k, args.max_n).to_json()


def cmd_cube_count(args):
    z = FilteredGroup.from_json(_load(args.group))
    return {"n": args.n, "count": str(cube_count(z, args.n))}


def cmd_complete_corner(args):
    z = FilteredGroup.from_json(_load(args.group))
    data = _load(args.corner)
    raw = data["values"] if isinstance(data, dict) else data
    values = [None if v is None else z.reduce(v if isinstance(v, list) else [v]) for v in raw]
    try:
        q = complete_corner(values, z)
    except CornerError as exc:
        if exc.completions is None:
            raise
        return {"unique": False, "completions": exc.completions, "reason": str(exc)}
    missing = values.index(None)
    return {"unique": True, "vertex": missing, "value": list(q.values[missing]), "cube": q.to_json()}


# -- parser -------------------------------------------------------------------


def _add_mode(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["exact", "mc"], default="exact")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--shards", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cubelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--budget", type=int, help="enumeration budget (default: $CUBELAB_BUDGET or 2^24)")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--csv", action="store_true", help="emit distribution tables as CSV")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("sample-measure", cmd_sample_measure, "distribution of f along a form system")
    p.add_argument("--function", required=True)
    p.add_argument("--forms", required=True)
    _add_mode(p)

    p = add("zeta", cmd_zeta, "limit-object marginal along a form system")
    p.add_argument("--limit", required=True)
    p.add_argument("--forms", required=True)
    _add_mode(p)

    p = add("converge", cmd_converge, "distances between successive sampling measures")
    p.add_argument("--functions", nargs="+", required=True)
    p.add_argument("--forms", nargs="+", required=True)
    p.add_argument("--limit")
    _add_mode(p)

    p = add("exch", cmd_exch, "exchangeability and independence checks")
    p.add_argument("--window")
    p.add_argument("--group")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--check", choices=["affine", "cubic", "independence", "all"], default="all")

    p = add("consistency", cmd_consistency, "membership in a consistency subgroup")
    p.add_argument("--forms", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--tuple", required=True)

    p = add("fib", cmd_fib, "morphism, cube-surjectivity and fibration checks")
    p.add_argument("--domain", required=True)
    p.add_argument("--codomain", required=True)
    p.add_argument("--map")
    p.add_argument("--nmax", type=int)
    p.add_argument("--check", choices=["morphism", "cube-surjective", "fibration", "all", "enumerate"], default="all")

    p = add("calibrate", cmd_calibrate, "pair (degree, depth) with target groups")
    p.add_argument("--max-k", type=int, default=3)
    p.add_argument("--max-n", type=int, default=2)

    p = add("cube-count", cmd_cube_count, "size of the n-cube group")
    p.add_argument("--group", required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("complete-corner", cmd_complete_corner, "fill the missing vertex of a corner")
    p.add_argument("--group", required=True)
    p.add_argument("--corner", required=True)
    return parser


def _render(args, result) -> str:
    if args.csv and hasattr(result, "to_csv"):
        return result.to_csv()
    payload = result.to_json() if hasattr(result, "to_json") else result
    doc = {"command": args.command, "config": _config(args), "version": __version__, "result": payload}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.budget is not None and args.budget <= 0:
        parser.error("--budget must be positive")
    try:
        text = _render(args, args.func(args))
    except BudgetExceeded as exc:
        print(f"cubelab: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (MalformedInput, ValueError, KeyError, TypeError, IndexError) as exc:
        print(f"cubelab: malformed input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
