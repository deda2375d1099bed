"""Command line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import __version__
from .bounds import VarianceProxies, adaptive_radius, bound_report, mom_radius, xi_radius
from .estimators import KernelSpec, MomConfig, mom_estimate
from .exceptions import RobustPWMError
from .experiments import (
    PROPOSITIONS,
    TARGETS,
    ExperimentGrid,
    default_jobs,
    run_coverage,
    run_figure1,
    run_variance_check,
    write_figure1,
)
from .samples import read_sample
from .tail_index import estimate_xi, fit_gev

GLOBAL_DEFAULTS = {"seed": 0, "delta": 0.05, "out": None, "format": "csv", "jobs": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _probability(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0 < x < 1:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text}")
    return x


def _positive_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return x


def _seed(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= x < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return x


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _global_flags():
    # SUPPRESS lets the flags appear before or after the subcommand without
    # a subparser default clobbering a value given earlier.
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=_seed, default=argparse.SUPPRESS, help="master seed (default 0)")
    g.add_argument("--delta", type=_probability, default=argparse.SUPPRESS,
                   help="error level; K = ceil(log(1/delta)) blocks (default 0.05)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (directory for simulate)")
    g.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    g.add_argument("--jobs", type=_positive_int, default=argparse.SUPPRESS,
                   help="worker processes (default $ROBUST_PWM_JOBS or 1)")
    return p


def build_parser():
    common = _global_flags()
    parser = _Parser(prog="robust-pwm", parents=[common],
                     description="Median-of-means PWM and tail-index estimation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    est = groups.add_parser("estimate", help="estimate from a data file").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = est.add_parser("pwm", parents=[common], help="median-of-means estimate of E X(k:m)")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--input", required=True, help="CSV with header 'value' or one number per line")
    p.add_argument("--vm", type=float, help="variance proxy v_m, enables the radii")
    p.add_argument("--v1", type=float, help="variance proxy v_1, enables the sub-gamma radius")
    p.add_argument("--shuffle", action="store_true", help="shuffle indices (with --seed) before blocking")
    p.set_defaults(func=cmd_estimate_pwm)

    p = est.add_parser("xi", parents=[common], help="GEV shape estimate")
    p.add_argument("--input", required=True)
    p.add_argument("--method", choices=("mom", "lc"), default="mom")
    p.set_defaults(func=cmd_estimate_xi)

    p = est.add_parser("quantile", parents=[common], help="quantile of the PWM-fitted GEV")
    p.add_argument("--input", required=True)
    p.add_argument("--prob", type=_probability, default=0.95)
    p.add_argument("--method", choices=("mom", "lc"), default="mom")
    p.set_defaults(func=cmd_estimate_quantile)

    sim = groups.add_parser("simulate", help="simulation studies").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = sim.add_parser("figure1", parents=[common], help="contaminated-GEV boxplot data")
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--xis", type=_float_list, default=(-0.4, 0.0, 0.4))
    p.add_argument("--n-outliers", type=_int_list, default=(0, 5, 15, 20))
    p.add_argument("--n-total", type=_positive_int, default=200)
    p.add_argument("--targets", type=lambda s: tuple(s.split(",")), default=TARGETS)
    p.add_argument("--placement", choices=("appended", "shuffled"), default="appended")
    p.add_argument("--partition", choices=("contiguous", "shuffled"), default="contiguous")
    p.set_defaults(func=cmd_simulate_figure1)

    ver = groups.add_parser("verify", help="Monte Carlo checks of the bounds").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = ver.add_parser("coverage", parents=[common], help="empirical failure rate of a radius")
    p.add_argument("--prop", choices=PROPOSITIONS, required=True)
    p.add_argument("--n", type=_positive_int, default=300)
    p.add_argument("--m", type=_positive_int, default=3)
    p.add_argument("--k", type=_positive_int)
    p.add_argument("--q", type=_positive_int, default=1)
    p.add_argument("--dist", choices=("uniform01", "exponential1", "gumbel01"), default="uniform01")
    p.add_argument("--reps", type=_positive_int, default=10_000)
    p.add_argument("--xi", type=float, default=0.4, help="GEV shape for p3_xi")
    p.add_argument("--regime", choices=("clean", "contaminated"))
    p.add_argument("--flavor", choices=("sub_gaussian", "sub_gamma"))
    p.set_defaults(func=cmd_verify_coverage)

    p = ver.add_parser("variance", parents=[common], help="Monte Carlo var(U_n) vs the variance bounds")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--reps", type=_positive_int, default=100_000)
    p.set_defaults(func=cmd_verify_variance)

    bnd = groups.add_parser("bound", help="closed-form bounds").add_subparsers(
        dest="command", required=True, parser_class=_Parser)
    p = bnd.add_parser("eval", parents=[common], help="evaluate a deviation radius")
    p.add_argument("--prop", choices=("p1", "p2", "p3", "p4", "adaptive"), required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--m", type=_positive_int, default=1)
    p.add_argument("--q", type=_positive_int, default=1)
    p.add_argument("--vm", type=float, help="v_m (p3: max(v_1, v_2, v_4))")
    p.add_argument("--v1", type=float, help="v_1 (or v_q for q > 1)")
    p.add_argument("--xi-hat", type=float)
    p.add_argument("--xi", type=float, help="true shape for the p3 oracle radius")
    p.add_argument("--theta1", type=float)
    p.add_argument("--theta2", type=float)
    p.add_argument("--regime", choices=("clean", "contaminated"))
    p.set_defaults(func=cmd_bound_eval)
    return parser


def parse_args(argv):
    args = build_parser().parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    if args.jobs is None:
        args.jobs = default_jobs()
    return args


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _cell(value):
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def render(record, fmt):
    if fmt == "json":
        return json.dumps(record, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(record))
    writer.writerow([_cell(v) for v in record.values()])
    return buf.getvalue()


def emit(record, args):
    text = render(record, args.format)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def cmd_estimate_pwm(args):
    sample = read_sample(args.input)
    kernel = KernelSpec.order_statistic(args.k, args.m)
    if args.shuffle:
        config = MomConfig(args.delta, "shuffled", args.seed)
    else:
        config = MomConfig(args.delta)
    if config.K > sample.n // args.m:
        raise RobustPWMError(
            f"{sample.n} observations allow at most {sample.n // args.m} blocks; "
            f"delta={args.delta} needs K={config.K}")
    report = mom_estimate(sample, kernel, config)
    record = {
        "k": args.k, "m": args.m, "n": sample.n, "delta": args.delta, "K": config.K,
        "point": report.point, "block_estimates": list(report.block_estimates),
    }
    if args.vm is not None:
        proxies = VarianceProxies.from_endpoints(args.m, args.vm, args.v1)
        rep = bound_report(sample.n, args.m, 1, args.delta, proxies)
        record["radius_sub_gaussian"] = rep.t1
        record["radius_sub_gamma"] = rep.t2
    emit(record, args)


def cmd_estimate_xi(args):
    sample = read_sample(args.input)
    est = estimate_xi(sample, args.delta, args.method)
    t1, t2, t4 = est.theta_hats
    emit({"method": args.method, "n": sample.n, "delta": est.delta, "K": est.K, "xi_hat": est.xi_hat,
          "theta1": t1, "theta2": t2, "theta4": t4}, args)


def cmd_estimate_quantile(args):
    sample = read_sample(args.input)
    fit = fit_gev(sample, args.delta, args.method)
    from .distributions import gev_quantile

    p = fit.params
    emit({"method": args.method, "prob": args.prob, "quantile": float(gev_quantile(args.prob, p)),
          "xi_hat": p.xi, "mu_hat": p.mu, "sigma_hat": p.sigma, "K": fit.source.K}, args)


def cmd_simulate_figure1(args):
    grid = ExperimentGrid(
        xis=args.xis, n_outliers=args.n_outliers, n_total=args.n_total, reps=args.reps,
        delta=args.delta, master_seed=args.seed, targets=args.targets,
        placement=args.placement, partition=args.partition,
    )
    result = run_figure1(grid, jobs=args.jobs)
    paths = write_figure1(result, args.out or "results", args.format)
    noniden = sum(s["n_noniden"] for s in result.summaries)
    print(f"wrote {len(result.rows)} rows ({noniden} not identifiable) to {', '.join(paths)}",
          file=sys.stderr)


def cmd_verify_coverage(args):
    res = run_coverage(args.prop, n=args.n, m=args.m, k=args.k, q=args.q, delta=args.delta,
                       dist=args.dist, reps=args.reps, seed=args.seed, flavor=args.flavor,
                       regime=args.regime, xi=args.xi, jobs=args.jobs)
    emit({"proposition": res.proposition, "empirical_failure_rate": res.empirical_failure_rate,
          "nominal_delta": res.nominal_delta, "budget": res.budget, "allowance": res.allowance,
          "radius_used": res.radius_used, "reps": res.reps, "regime": res.regime,
          "flavor": res.flavor, "failures": res.failures, "passed": res.passed}, args)


def cmd_verify_variance(args):
    emit(run_variance_check(args.k, args.m, args.n, args.reps, args.seed), args)


def cmd_bound_eval(args):
    if args.vm is None:
        raise UsageError("bound eval: --vm is required")
    record = {"prop": args.prop, "n": args.n, "m": args.m, "q": args.q, "delta": args.delta}
    if args.prop in ("p1", "p2", "p4"):
        regime = args.regime or ("contaminated" if args.prop == "p2" else "clean")
        v = [None] * args.m
        v[-1] = args.vm
        if args.v1 is not None:
            v[args.q - 1] = args.v1
        rep = bound_report(args.n, args.m, args.q, args.delta, VarianceProxies(tuple(v)), regime)
        record.update(K=rep.inputs["K"], regime=regime, radius_sub_gaussian=rep.t1,
                      radius_sub_gamma=rep.t2,
                      confidence=1 - (2 if args.prop == "p4" else 1) * args.delta)
    elif args.prop == "p3":
        if None in (args.xi_hat, args.theta1, args.theta2):
            raise UsageError("bound eval --prop p3 needs --xi-hat, --theta1 and --theta2")
        regime = args.regime or "clean"
        radius, conf = xi_radius(args.n, args.delta, args.vm, args.xi_hat, args.theta2, args.theta1,
                                 regime, xi=args.xi)
        record.update(regime=regime, radius=radius, confidence=conf,
                      form="oracle" if args.xi is not None else "plug_in")
    else:
        record.update(radius=adaptive_radius(args.n, args.m, args.vm, args.delta),
                      confidence=1 - args.delta)
    emit(record, args)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except RobustPWMError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
