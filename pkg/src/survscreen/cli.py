"""Command-line front end.

``survscreen screen`` ingests a `time,status,u1,...` CSV and prints a JSON
report; ``survscreen simulate`` runs seeded Monte-Carlo studies and prints
CSV; ``survscreen bench`` times one full stabilized screen on synthetic
data.  Exit codes: 0 on successful computation (the statistical decision
lives in the report, never in the exit code), 2 on input errors, 3 on
numerical-degeneracy errors.
"""

import argparse
import json
import os
import secrets
import sys
import time

from . import __version__
from .dataset import read_csv
from .errors import DegeneracyError, InputError
from .onestep import bonferroni_test, one_step
from .simulate import METHODS as SIM_METHODS
from .simulate import MonteCarloReport, ScenarioSpec, generate_scenario, monte_carlo_rejection
from .stabilized import multi_ordering_test, stabilized_estimate


def _default_threads() -> int:
    env = os.environ.get("SURVSCREEN_THREADS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _qn_value(text: str):
    if text == "half":
        return "half"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--qn must be an integer or 'half', got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="survscreen", description=__doc__)
    parser.add_argument("--version", action="version", version=f"survscreen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    screen = sub.add_parser("screen", help="screen a CSV dataset")
    screen.add_argument("csv", help="input file: time,status,u1,... (optionally .gz)")
    screen.add_argument("--method", choices=("stabilized", "bonferroni", "oracle"),
                        default="stabilized")
    screen.add_argument("--qn", type=_qn_value, default="half",
                        help="smallest prefix size (integer or 'half')")
    screen.add_argument("--orderings", type=int, default=10, metavar="R",
                        help="random orderings for the stabilized method")
    screen.add_argument("--alpha", type=float, default=0.05)
    screen.add_argument("--variant", choices=("prefix", "full"), default="full")
    screen.add_argument("--tau", default="max", help="follow-up cap rule: max or q:<x>")
    screen.add_argument("--no-standardize", dest="standardize", action="store_false")
    screen.add_argument("--seed", type=int, default=None)
    screen.add_argument("--threads", type=int, default=None)
    screen.add_argument("--oracle-k", default=None, metavar="NAME",
                        help="predictor name (or 1-based index) for --method oracle")

    simulate = sub.add_parser("simulate", help="Monte-Carlo rejection-rate study")
    simulate.add_argument("--model", choices=("N", "A1", "A2"), default="N")
    simulate.add_argument("--error", choices=("independent", "dependent"), default="independent")
    simulate.add_argument("--censoring", choices=("light", "heavy", "none"), default="light")
    simulate.add_argument("--n", type=int, default=500)
    simulate.add_argument("--p", type=int, default=100)
    simulate.add_argument("--rho", type=float, default=0.75)
    simulate.add_argument("--method", choices=SIM_METHODS, default="stabilized_full")
    simulate.add_argument("--reps", type=int, default=100)
    simulate.add_argument("--alpha", type=float, default=0.05)
    simulate.add_argument("--orderings", type=int, default=10)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--parallelism", type=int, default=1)
    simulate.add_argument("--no-header", dest="header", action="store_false")

    bench = sub.add_parser("bench", help="time one full stabilized screen")
    bench.add_argument("--n", type=int, default=500)
    bench.add_argument("--p", type=int, default=10_000)
    bench.add_argument("--variant", choices=("prefix", "full"), default="full")
    bench.add_argument("--threads", type=int, default=None)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--no-header", dest="header", action="store_false")

    return parser


def _auto_seed(seed):
    return secrets.randbits(63) if seed is None else seed


def cmd_screen(args) -> int:
    seed = _auto_seed(args.seed)
    threads = args.threads if args.threads is not None else _default_threads()
    start = time.perf_counter()
    data = read_csv(args.csv, tau_rule=args.tau, standardize=args.standardize)
    qn = data.n // 2 if args.qn == "half" else args.qn

    config = {
        "alpha": args.alpha,
        "method": args.method,
        "oracle_k": args.oracle_k,
        "orderings": args.orderings,
        "qn": args.qn if args.qn == "half" else int(args.qn),
        "seed": seed,
        "standardize": args.standardize,
        "tau": args.tau,
        "threads": threads,
        "variant": args.variant,
    }
    report = {
        "censoring_fraction": data.censoring_fraction(),
        "config": config,
        "method": args.method,
        "n": data.n,
        "p": data.p,
        "seed": seed,
        "tau": data.tau,
        "tool": {"name": "survscreen", "version": __version__},
    }

    if args.method == "stabilized":
        outcome = multi_ordering_test(
            data, orderings=args.orderings, q_n=qn, variant=args.variant,
            alpha=args.alpha, seed=seed, threads=threads,
        )
        best = outcome.best
        selected = best.modal_k()
        report.update({
            "estimate": best.s_star,
            "ci": [best.ci_low, best.ci_high],
            "p_value": outcome.min_p,
            "adjusted_p_value": outcome.adjusted_p,
            "selected": {"index": selected + 1, "name": data.predictor_names[selected]},
            "orderings": [
                {
                    "ordering": r.ordering_seed,
                    "p_value": r.p_value,
                    "estimate": r.s_star,
                    "selected_name": data.predictor_names[r.modal_k()],
                    "distinct_selected": len(r.selection_counts()),
                }
                for r in outcome.results
            ],
            "decision": {"alpha": args.alpha, "reject": outcome.reject},
        })
    elif args.method == "bonferroni":
        outcome = bonferroni_test(data, alpha=args.alpha)
        best = outcome.results[outcome.selected]
        report.update({
            "estimate": best.s_onestep,
            "ci": [best.ci_low, best.ci_high],
            "p_value": outcome.min_p,
            "adjusted_p_value": outcome.adjusted_p,
            "n_tests": data.p,
            "selected": {
                "index": outcome.selected + 1,
                "name": data.predictor_names[outcome.selected],
            },
            "decision": {"alpha": args.alpha, "reject": outcome.reject},
        })
    else:
        if args.oracle_k is None:
            raise InputError("--method oracle requires --oracle-k")
        k = data.column(args.oracle_k)
        result = one_step(data, k, alpha=args.alpha)
        report.update({
            "estimate": result.s_onestep,
            "ci": [result.ci_low, result.ci_high],
            "p_value": result.p_value,
            "adjusted_p_value": result.p_value,
            "selected": {"index": k + 1, "name": data.predictor_names[k]},
            "decision": {"alpha": args.alpha, "reject": bool(result.p_value < args.alpha)},
        })

    report["timing_ms"] = (time.perf_counter() - start) * 1000.0
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    seed = _auto_seed(args.seed)
    spec = ScenarioSpec(
        model=args.model, error=args.error, censoring=args.censoring,
        n=args.n, p=args.p, rho=args.rho, seed=seed,
    )
    report = monte_carlo_rejection(
        spec, args.method, args.reps, alpha=args.alpha,
        parallelism=args.parallelism, orderings=args.orderings,
    )
    if args.header:
        print(MonteCarloReport.csv_header() + ",alpha,seed")
    print(report.csv_row() + f",{args.alpha:.6g},{seed}")
    return 0


def cmd_bench(args) -> int:
    threads = args.threads if args.threads is not None else _default_threads()
    spec = ScenarioSpec(model="N", error="independent", censoring="light",
                        n=args.n, p=args.p, seed=args.seed)
    data, _ = generate_scenario(spec)
    start = time.perf_counter()
    stabilized_estimate(data, variant=args.variant)
    wall = time.perf_counter() - start
    if args.header:
        print("n,p,variant,threads,qn,seed,wall_time_s")
    print(f"{args.n},{args.p},{args.variant},{threads},{data.n // 2},{args.seed},{wall:.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "screen":
            return cmd_screen(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_bench(args)
    except InputError as exc:
        print(f"survscreen: error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"survscreen: numerical degeneracy: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
