"""Command-line front end.

Five subcommands: coverage (profile tables), plan (sample-size
planning), estimate (run estimators over seeded trials), sample (the
race sampler), and experiment (config-driven sweeps). Exit codes:
0 success, 2 infeasible plan, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .coverage import CoverageProfile, min_coverage_threshold
from .distributions import (
    DistributionPair,
    load_pair,
    make_weighted_pair,
    sample,
)
from .divergences import f_divergence, parse_f_spec
from .errors import InfeasiblePlanError, PfestError
from .estimators import (
    EstimateReport,
    median_of_means,
    plan_n_coverage,
    plan_n_fdiv,
    plan_n_is,
    plan_n_quantile,
    plan_n_snis,
    quantile_estimator,
    snis,
    within_multiplicative,
)
from .harness import (
    build_family,
    emit_csv,
    load_config,
    run_experiment,
    _parse_scalar,
)
from .rng import derive_seed
from .sampler import astar_sample, empirical_tv, plan_n_sampling, run_races

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; 2 is reserved for infeasible
    # plans here, so usage problems become a plain error exit instead.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(f"{self.prog}: error: {message}")


def _add_pair_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pair", help="JSON pair file (see save_pair)")
    parser.add_argument(
        "--family",
        help="inline family instead of --pair: "
        "bernoulli|two_point_mu|point_mass|random_finite",
    )
    parser.add_argument(
        "--params",
        default="",
        help="comma-separated family parameters, e.g. p=0.5,eps=0.25",
    )


def _load_pair_argument(args) -> DistributionPair:
    if bool(args.pair) == bool(args.family):
        raise ValueError("exactly one of --pair or --family is required")
    if args.pair:
        return load_pair(args.pair)
    params = {}
    for chunk in filter(None, (s.strip() for s in args.params.split(","))):
        key, sep, value = chunk.partition("=")
        if not sep:
            raise ValueError(f"malformed --params entry {chunk!r}")
        params[key] = _parse_scalar(value)
    return build_family(args.family, params)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo_s, hi_s, steps_s = spec.split(":")
        lo, hi, steps = float(lo_s), float(hi_s), int(steps_s)
    except ValueError:
        raise ValueError(f"--grid must be M0:M1:steps, got {spec!r}") from None
    if steps < 1 or hi < lo or lo < 0:
        raise ValueError(f"bad grid {spec!r}: need 0 <= M0 <= M1 and steps >= 1")
    return np.linspace(lo, hi, steps)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _cmd_coverage(args) -> int:
    pair = _load_pair_argument(args)
    profile = CoverageProfile.from_pair(pair)
    grid = _parse_grid(args.grid)
    out, owned = _open_out(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(
            ["M", "cov", "icov", "icov_over_M", "trunc_second_moment"]
        )
        cov = profile.coverage(grid)
        icov = profile.integrated_coverage(grid)
        trunc = profile.truncated_second_moment(grid)
        with np.errstate(divide="ignore"):
            ratio = np.where(grid > 0, icov / np.maximum(grid, 1e-300), np.inf)
        for i, m in enumerate(grid):
            writer.writerow(
                [repr(float(m)), repr(float(cov[i])), repr(float(icov[i])),
                 repr(float(ratio[i])), repr(float(trunc[i]))]
            )
    finally:
        if owned:
            out.close()
    return EXIT_OK


def _cmd_plan(args) -> int:
    pair = _load_pair_argument(args)
    profile = CoverageProfile.from_pair(pair)
    method = args.method
    if method.startswith("fdiv:"):
        f = parse_f_spec(method[len("fdiv:"):])
        d = f_divergence(pair, f)
        plan = plan_n_fdiv(f, d, args.eps, args.delta)
        extra = f" f={f.name} D={d!r}"
    elif method == "coverage":
        plan = plan_n_coverage(profile, args.eps, args.delta)
        extra = ""
    elif method == "quantile":
        plan = plan_n_quantile(args.eps, args.delta, profile=profile)
        extra = ""
    elif method == "is":
        weighted = CoverageProfile.from_pair(
            make_weighted_pair(pair, _g_table(args, pair))
        )
        plan = plan_n_is(weighted, args.eps, args.delta)
        extra = ""
    elif method == "snis":
        weighted = CoverageProfile.from_pair(
            make_weighted_pair(pair, _g_table(args, pair))
        )
        plan = plan_n_snis(profile, weighted, args.eps, args.delta)
        extra = ""
    elif method == "sampling":
        m = max(1.0, min_coverage_threshold(profile, args.eps / 3.0))
        n = plan_n_sampling(m, args.eps)
        print(f"plan method=sampling n={n} M={m!r} eps={args.eps!r}")
        return EXIT_OK
    else:
        raise ValueError(f"unknown plan method {method!r}")
    consts = ";".join(f"{k}={v!r}" for k, v in sorted(plan.constants.items()))
    print(
        f"plan method={method} n={plan.n} M={plan.m!r} "
        f"eps={args.eps!r} delta={args.delta!r} constants={consts}{extra}"
    )
    return EXIT_OK


def _g_table(args, pair: DistributionPair) -> np.ndarray:
    if not args.g:
        raise ValueError("--g values are required for this method")
    g = np.asarray([float(v) for v in args.g.split(",")], dtype=np.float64)
    if g.size != pair.support_size:
        raise ValueError(
            f"--g has {g.size} entries, support has {pair.support_size}"
        )
    return g


def _estimate_one(args, pair, n, m, trial_seed) -> EstimateReport:
    batch = sample(pair, n, trial_seed)
    if args.method == "mom":
        return median_of_means(batch, args.delta, true_value=pair.z_true)
    if args.method == "quantile":
        return quantile_estimator(
            batch, args.eps, m, true_value=pair.z_true
        )
    # snis
    g = _g_table(args, pair)
    return snis(batch, g, true_value=pair.nu_mean(g))


def _cmd_estimate(args) -> int:
    pair = _load_pair_argument(args)
    profile = CoverageProfile.from_pair(pair)
    if args.method == "mom":
        if args.plan.startswith("fdiv:"):
            f = parse_f_spec(args.plan[len("fdiv:"):])
            plan = plan_n_fdiv(f, f_divergence(pair, f), args.eps, args.delta)
        elif args.plan == "coverage":
            plan = plan_n_coverage(profile, args.eps, args.delta)
        else:
            raise ValueError(f"unknown plan {args.plan!r}")
        n, m = plan.n, plan.m
    elif args.method == "quantile":
        plan = plan_n_quantile(args.eps, args.delta, profile=profile)
        n, m = plan.n, plan.m
    elif args.method == "snis":
        g = _g_table(args, pair)
        weighted = CoverageProfile.from_pair(make_weighted_pair(pair, g))
        plan = plan_n_snis(profile, weighted, args.eps, args.delta)
        n, m = plan.n, plan.m
    else:
        raise ValueError(f"unknown estimate method {args.method!r}")

    if args.trials < 1:
        raise ValueError(f"--trials must be >= 1, got {args.trials}")
    records = []
    for trial in range(args.trials):
        report = _estimate_one(
            args, pair, n, m, int(derive_seed(args.seed, trial))
        )
        truth = report.true_value
        if args.method == "quantile":
            ok = (1.0 - args.eps) * truth <= report.estimate <= m * truth
        else:
            ok = within_multiplicative(report.estimate, truth, args.eps)
        records.append((trial, report.n_used, report.estimate,
                        report.rel_error, ok))

    success_freq = sum(r[4] for r in records) / len(records)
    mean_estimate = sum(r[2] for r in records) / len(records)
    print(
        f"estimate method={args.method} n={n} M={m!r} trials={args.trials} "
        f"eps={args.eps!r} delta={args.delta!r} "
        f"mean_estimate={mean_estimate!r} success_freq={success_freq!r}"
    )
    if args.out:
        out, owned = _open_out(args.out)
        try:
            writer = csv.writer(out)
            writer.writerow(["trial", "n", "estimate", "rel_error", "success"])
            for trial, n_used, est, rel, ok in records:
                writer.writerow(
                    [trial, n_used, repr(float(est)), repr(float(rel)),
                     "true" if ok else "false"]
                )
        finally:
            if owned:
                out.close()
    return EXIT_OK


def _cmd_sample(args) -> int:
    pair = _load_pair_argument(args)
    profile = CoverageProfile.from_pair(pair)
    m = max(1.0, min_coverage_threshold(profile, args.eps / 3.0))
    n = plan_n_sampling(m, args.eps)
    if args.trials is None:
        atom, state = astar_sample(pair, n, args.seed)
        print(
            f"sample atom={atom} n={n} M={m!r} eps={args.eps!r} "
            f"best_score={state.best_score!r}"
        )
        return EXIT_OK
    summary = run_races(pair, n, args.trials, args.seed)
    tv = empirical_tv(summary, pair)
    freqs = ",".join(repr(float(c) / summary.trials) for c in summary.counts)
    print(
        f"sample trials={args.trials} n={n} M={m!r} eps={args.eps!r} "
        f"empirical_tv={tv!r} null_races={summary.null_races} freqs={freqs}"
    )
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = load_config(args.config)
    table = run_experiment(config)
    path = args.out or config.output_path
    emit_csv(table, path)
    print(f"wrote {path} ({len(table.rows)} rows, kind={config.kind})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_cov = sub.add_parser("coverage", help="tabulate the coverage profile")
    _add_pair_arguments(p_cov)
    p_cov.add_argument("--grid", required=True, help="M0:M1:steps")
    p_cov.add_argument("--out", help="CSV path (default stdout)")
    p_cov.set_defaults(fn=_cmd_coverage)

    p_plan = sub.add_parser("plan", help="compute a sample-size plan")
    _add_pair_arguments(p_plan)
    p_plan.add_argument("--eps", type=float, required=True)
    p_plan.add_argument("--delta", type=float, default=0.1)
    p_plan.add_argument(
        "--method",
        default="coverage",
        help="coverage|fdiv:<f-spec>|quantile|is|snis|sampling",
    )
    p_plan.add_argument("--g", help="comma-separated g values (is/snis)")
    p_plan.set_defaults(fn=_cmd_plan)

    p_est = sub.add_parser("estimate", help="run an estimator")
    _add_pair_arguments(p_est)
    p_est.add_argument("--method", choices=("mom", "quantile", "snis"),
                       required=True)
    p_est.add_argument("--eps", type=float, required=True)
    p_est.add_argument("--delta", type=float, default=0.1)
    p_est.add_argument("--plan", default="coverage",
                       help="coverage|fdiv:<f-spec> (mom only)")
    p_est.add_argument("--seed", type=int, required=True)
    p_est.add_argument("--trials", type=int, default=1)
    p_est.add_argument("--g", help="comma-separated g values (snis)")
    p_est.add_argument("--out", help="per-trial CSV path")
    p_est.set_defaults(fn=_cmd_estimate)

    p_samp = sub.add_parser("sample", help="run the race sampler")
    _add_pair_arguments(p_samp)
    p_samp.add_argument("--eps", type=float, required=True)
    p_samp.add_argument("--seed", type=int, required=True)
    p_samp.add_argument("--trials", type=int)
    p_samp.set_defaults(fn=_cmd_sample)

    p_exp = sub.add_parser("experiment", help="run a config-driven sweep")
    p_exp.add_argument("--config", required=True)
    p_exp.add_argument("--out", help="override the config output_path")
    p_exp.set_defaults(fn=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InfeasiblePlanError as exc:
        print(f"pfest: infeasible plan: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PfestError, ValueError, OSError) as exc:
        print(f"pfest: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
