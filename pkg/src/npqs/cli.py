"""Command-line front end.

Exit codes: 0 success, 1 a checked invariant was violated, 2 bad input.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import battery, holo
from .functionals import FunctionalKind, ParameterError, SpaceParams, _check_hw_gate, prepare, sup_functional
from .integrate import SamplerConfig
from .parser import ParseError, parse
from .report import COLUMNS, ConfigError, Row, RunConfig, _space_params, _sup_row, format_point, run_report, write_report

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("NPQS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"NPQS_SEED must be an integer, got {env!r}") from None


def _params(text: str, n: int) -> SpaceParams:
    parts = [t.strip() for t in text.split(",")]
    if len(parts) not in (3, 4):
        raise InputError("--params expects p,q,s or p,q,s,alpha")
    try:
        nums = [float(t) for t in parts]
    except ValueError:
        raise InputError(f"--params has a non-numeric entry: {text!r}") from None
    return _space_params(n, *nums)


def _point(text: str, n: int) -> np.ndarray:
    try:
        a = np.array([complex(t.strip().replace("i", "j")) for t in text.split(",")])
    except ValueError:
        raise InputError(f"--a expects comma-separated complex coordinates, got {text!r}") from None
    if a.size != n:
        raise InputError(f"--a has {a.size} coordinates but n={n}")
    if float(np.sum(np.abs(a) ** 2)) >= 1.0:
        raise InputError("--a must lie in the open unit ball")
    return a


def _sampler(args, seed: int) -> SamplerConfig:
    """Sampler settings from --config when given, with explicit flags taking precedence."""
    if not args.config:
        return SamplerConfig(seed=seed, n_samples=args.samples, workers=args.workers)
    rc = RunConfig.load(args.config)
    return SamplerConfig(
        seed=seed if args.seed is not None or "NPQS_SEED" in os.environ else rc.seed,
        n_samples=args.samples if args.samples_set else rc.samples,
        radial_mode=rc.radial_mode,
        shards=rc.shards,
        workers=args.workers if args.workers_set else rc.workers,
    )


# -- subcommands --------------------------------------------------------------------


def cmd_check_identities(args) -> int:
    seed = _seed(args)
    t0 = time.perf_counter()
    results = battery.run_battery(args.n, args.samples, seed, args.mutate)
    failed = [r for r in results if not r.passed]
    for r in results:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name:<40} max violation {r.max_violation:.3e} (tol {r.tolerance:g}, {r.cases} cases)")
    if args.n == 1:
        collapse = next(r for r in results if r.name.startswith("projection_kernel=euclidean"))
        print(f"n=1: projection kernel equals the Euclidean kernel to {collapse.max_violation:.3e}")
    print(f"{len(results) - len(failed)}/{len(results)} checks passed in {time.perf_counter() - t0:.2f}s")
    for r in failed:
        print(f"violation: {r.name} reproduce with seed={seed} index={r.worst_index}", file=sys.stderr)
    return EXIT_VIOLATION if failed else EXIT_OK


def _evaluate(args, kind: FunctionalKind, force_sup: bool = False) -> int:
    seed = _seed(args)
    f = parse(args.expr, args.n)
    P = _params(args.params, args.n)
    cfg = _sampler(args, seed)
    if kind in (FunctionalKind.HWEuclid, FunctionalKind.HWProj):
        _check_hw_gate(P, args.override_hw_gate)
    row = Row(args.expr, kind.value, P, seed)
    t0 = time.perf_counter()
    if args.a is not None and not force_sup:
        a = _point(args.a, args.n)
        est = prepare(f, P, kind, cfg).at(a)
        row.a_star = format_point(a)
        row.value, row.std_error = repr(est.value), repr(est.std_error)
        row.samples, row.diverged = str(est.n_samples), "true" if est.diverged else "false"
        verdict = "diverged" if est.diverged else "finite"
        print(f"{kind.value}[{args.expr}] at a=({row.a_star}) = {est.value:.6g} +/- {est.std_error:.2g} ({verdict})")
    else:
        sup = sup_functional(
            f, P, kind, cfg, budget=args.budget, r_max=args.r_max, override_hw=args.override_hw_gate
        )
        _sup_row(row, sup)
        verdict = "diverged" if sup.diverged else "finite"
        print(
            f"sup_a {kind.value}[{args.expr}] >= {sup.value:.6g} +/- {sup.std_error:.2g} "
            f"at a*=({row.a_star}) over {len(sup.table)} probes ({verdict}; probed lower bound)"
        )
    row.seconds = time.perf_counter() - t0
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, "report.csv")
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            w.writerow(row.cells(True))
        print(f"wrote {path}")
    return EXIT_OK


def cmd_norm(args) -> int:
    return _evaluate(args, FunctionalKind.NNorm)


def cmd_functional(args) -> int:
    return _evaluate(args, FunctionalKind.parse(args.kind))


def cmd_sup_search(args) -> int:
    return _evaluate(args, FunctionalKind.parse(args.kind), force_sup=True)


def cmd_equivalence_report(args) -> int:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    # an explicit --seed always wins; the environment only fills in when no config is given
    if args.seed is not None or (not args.config and "NPQS_SEED" in os.environ):
        overrides["seed"] = _seed(args)
    if args.samples_set:
        overrides["samples"] = args.samples
    if args.workers_set:
        overrides["workers"] = args.workers
    if args.n is not None:
        overrides["n"] = args.n
    if args.override_hw_gate:
        overrides["override_hw_gate"] = True
    if overrides:
        rc = RunConfig.from_dict({**rc.to_dict(), **overrides})
    jobs, summary = run_report(rc)
    csv_path, json_path = write_report(rc, jobs, summary, args.out_dir)
    n_rows = sum(len(j.rows) for j in jobs)
    print(f"{n_rows} rows -> {csv_path}; summary -> {json_path}")
    print(f"verdicts agree across kinds: {summary['all_agree']}; dominance violations: {summary['dominance_violations']}")
    for lab, ok in summary["threshold_consistent"].items():
        print(f"{lab}: threshold ordering consistent: {ok}")
    return EXIT_OK if summary["consistent"] else EXIT_VIOLATION


# -- argument parsing ------------------------------------------------------------------


class _Tracked(argparse.Action):
    """Store the value and remember that the flag was given explicitly."""

    def __call__(self, parser, namespace, values, option_string=None):
        setattr(namespace, self.dest, values)
        setattr(namespace, self.dest + "_set", True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="npqs", description="Monte Carlo laboratory for N(p,q,s) spaces on the ball.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (falls back to $NPQS_SEED, then 0)")
    common.add_argument("--samples", type=int, default=1_000_000, action=_Tracked)
    common.add_argument("--workers", type=int, default=1, action=_Tracked)
    common.add_argument("--config", default=None, help="JSON run configuration")
    common.add_argument("--out-dir", default=None)
    common.set_defaults(samples_set=False, workers_set=False)

    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-identities", parents=[common], help="run the identity and inequality battery")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--mutate", choices=sorted(battery.MUTATIONS), default=None,
                   help="swap in a deliberately wrong map to confirm the battery detects it")
    p.set_defaults(func=cmd_check_identities, samples=100_000)

    def evaluation(name, func, help_, kind=False):
        q = sub.add_parser(name, parents=[common], help=help_)
        q.add_argument("--expr", required=True)
        q.add_argument("--n", type=int, default=1)
        q.add_argument("--params", required=True, help="p,q,s[,alpha]")
        q.add_argument("--a", default=None, help="comma-separated complex coordinates")
        q.add_argument("--override-hw-gate", action="store_true")
        q.add_argument("--budget", type=int, default=264)
        q.add_argument("--r-max", type=float, default=0.95)
        if kind:
            q.add_argument("--kind", required=True, choices=[k.value for k in FunctionalKind])
        q.set_defaults(func=func)

    evaluation("norm", cmd_norm, "N(p,q,s) functional at a, or its supremum over a")
    evaluation("functional", cmd_functional, "any functional kind at a, or its supremum", kind=True)
    evaluation("sup-search", cmd_sup_search, "supremum over a of one functional kind", kind=True)

    p = sub.add_parser("equivalence-report", parents=[common], help="cross-kind verdict report")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--override-hw-gate", action="store_true")
    p.set_defaults(func=cmd_equivalence_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ParameterError, ConfigError, InputError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except holo.EvaluationError as e:
        where = "" if e.point is None else f" at z={format_point(e.point)}"
        print(f"error: {e}{where}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
