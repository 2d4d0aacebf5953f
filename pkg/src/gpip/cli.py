"""Command-line entry point: solve, plan, oracle, experiment, gen."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import diet, harness
from .exact import solve_exact
from .lp import relax
from .model import GpipInstance, normalize
from .pessimistic import NoCertificateError, solve
from .rounding import DEFAULT_BETA, RoundingParams

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_CERT = 3

log = logging.getLogger("gpip")


class InputError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _load_instance(path: str) -> GpipInstance:
    try:
        return GpipInstance.from_json(Path(path))
    except FileNotFoundError as exc:
        raise InputError(f"{path}: no such file") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _params(args) -> RoundingParams | None:
    if args.alpha is None and args.gamma is None:
        return None
    if args.alpha is None or args.gamma is None:
        raise InputError("--alpha and --gamma go together")
    try:
        return RoundingParams.from_alpha_gamma(args.alpha, args.gamma, args.beta)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_solve(args) -> int:
    raw = _load_instance(args.instance)
    params = _params(args)
    if args.dump_lp:
        relax(normalize(raw)[0]).dump(args.dump_lp)
    methods = {"det": ["auto"], "rand": ["randomized"], "both": ["auto", "randomized"]}[args.method]
    results = {}
    for meth in methods:
        res = solve(
            raw,
            trials=args.trials,
            seed=args.seed,
            envelope=not args.literal,
            method=meth,
            params=params,
            fallback=not args.no_fallback,
        )
        results["det" if meth == "auto" else "rand"] = res.to_dict()
    payload = results if len(results) > 1 else next(iter(results.values()))
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    try:
        catalog = diet.load_catalog(args.catalog)
        config = diet.PlanConfig.load(args.config)
        model = diet.build_model(catalog, config)
        raw, vmap = diet.lower(model)
    except FileNotFoundError as exc:
        raise InputError(f"{exc.filename}: no such file") from exc
    except (diet.CatalogError, diet.UnboundedVariableError) as exc:
        raise InputError(str(exc)) from exc
    res = solve(raw, trials=args.trials, seed=args.seed, fallback=not args.no_fallback)
    plan = diet.decode(vmap, res.solution, model)
    payload = plan.to_dict(model)
    payload.update({"lp_bound": res.lp_bound, "gap": res.gap, "method": res.method})
    violations = diet.check_plan(model, plan)
    if violations:
        payload["violations"] = violations
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    raw = _load_instance(args.instance)
    inst, record = normalize(raw)
    res = solve_exact(inst, node_cap=args.node_cap)
    payload = res.to_dict()
    payload["solution"] = record.lift(res.solution).to_dict()
    payload["objective"] = record.raw_objective(res.objective)
    _emit(json.dumps(payload, indent=2), args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    try:
        config = harness.ExperimentConfig.load(args.config)
    except FileNotFoundError as exc:
        raise InputError(f"{args.config}: no such file") from exc
    except (ValueError, TypeError) as exc:
        raise InputError(f"{args.config}: {exc}") from exc
    rows = harness.run_experiment(config)
    harness.write_csv(rows, args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    catalog = harness.generate_synthetic(args.size, args.seed)
    text = catalog.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpip", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="round the LP optimum of a GPIP instance")
    p.add_argument("instance")
    p.add_argument("--method", choices=["det", "rand", "both"], default="det")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--auto-calibrate", action="store_true", help="search alpha and gamma (default)")
    grp.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fallback", action="store_true", help="exit 3 instead of sampling without a certificate")
    p.add_argument("--literal", action="store_true", help="use the literal coupling-row estimator")
    p.add_argument("--dump-lp", metavar="PATH", help="write the normalized LP relaxation as text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("plan", help="meal plan for a catalog and config")
    p.add_argument("catalog")
    p.add_argument("config")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fallback", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("oracle", help="exact optimum by branch and bound")
    p.add_argument("instance")
    p.add_argument("--node-cap", type=int, default=100_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("experiment", help="gap and timing table over synthetic catalogs")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("gen", help="write a synthetic catalog")
    p.add_argument("size", choices=sorted(harness.SIZES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoCertificateError as exc:
        print(f"no certificate: {exc}", file=sys.stderr)
        return EXIT_NO_CERT


if __name__ == "__main__":
    sys.exit(main())
