"""Command-line interface: ``syncbandit {generate,run,oracle,regret,sweep,bound}``.

Exit codes: 0 success, 2 configuration or validity error, 3 numerical
convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

import numpy as np

from . import __version__
from .formats import load_instance, read_trials_csv, save_instance, write_keyvalue
from .harness import (ALGOS, GENERATORS, ExperimentConfig, aggregate_path, corollary_hyperparams,
                      grid_search, make_instance, parse_grid, run_experiment)
from .policy import oracle_optimal_rates, policy_cost
from .validation import ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3

log = logging.getLogger("syncbandit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_instance_args(p):
    p.add_argument("--family", choices=sorted(GENERATORS), default="polynomial")
    p.add_argument("--K", type=int, help="number of arms")
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--B", type=float, help="total bandwidth (default 0.4*K)")
    p.add_argument("--seed", type=int, default=0, help="master seed")


def _add_run_args(p, algo_required=False):
    p.add_argument("--algo", choices=ALGOS, action="append", required=algo_required,
                   help="repeat to run several algorithms on the same instances")
    p.add_argument("--eta", type=float, help="learning rate (default: tuned value)")
    p.add_argument("--epsilon", type=float, default=None, help="probe probability (default 0.05)")
    p.add_argument("--upd-period", type=float, help="async update period l (default: tuned value)")
    horizon = p.add_mutually_exclusive_group()
    horizon.add_argument("--rounds", type=int, help="horizon in MirrorSync rounds (default 240)")
    horizon.add_argument("--horizon-time", type=float, help="horizon in simulated time")
    p.add_argument("--local-budget", choices=("literal", "conserving"), default=None)
    p.add_argument("--engine", choices=("vectorized", "event"), default=None)
    p.add_argument("--config", help="key = value experiment config file")


def build_parser():
    parser = _Parser(prog="syncbandit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a random instance file")
    _add_instance_args(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="run one or more learners over fresh instances")
    _add_instance_args(p)
    _add_run_args(p)
    p.add_argument("--instance", help="use this instance file for every trial")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="trial CSV (aggregate goes to <stem>_aggregate.csv)")

    p = sub.add_parser("oracle", help="optimal rates and cost with known expectations")
    _add_instance_args(p)
    p.add_argument("--instance", help="instance file (otherwise generated from --family/--seed)")
    p.add_argument("--epsilon", type=float, default=0.0, help="shrink box and budget by 1+epsilon")
    p.add_argument("--out", help="write r* and J* as key = value")

    p = sub.add_parser("regret", help="mean cumulative regret curve from a trial CSV")
    p.add_argument("results", help="trial CSV written by 'run'")
    p.add_argument("--instance", help="recompute regret against this instance's optimum")
    p.add_argument("--out", help="CSV: algo,update_index,sim_time,regret_mean,regret_stderr,n")

    p = sub.add_parser("sweep", help="grid search over eta and the update period")
    _add_instance_args(p)
    _add_run_args(p)
    p.add_argument("--etas", required=True, help="comma or space separated")
    p.add_argument("--periods", default="", help="comma or space separated (async only)")
    p.add_argument("--penalty", type=float, default=1.0, help="weight on trailing std")
    p.add_argument("--allow-any-period", action="store_true",
                   help="do not drop periods outside [8, 40]")
    p.add_argument("--out", help="ranked table as CSV")

    p = sub.add_parser("bound", help="theory-backed learning rate, probe rate and regret bound")
    p.add_argument("--B", type=float, default=40.0)
    p.add_argument("--r-min", type=float, default=0.025)
    p.add_argument("--K", type=int, default=100)
    p.add_argument("--U", type=float, default=40.0)
    p.add_argument("--T-max", type=int, default=240)
    return parser


def _instance_params(args):
    out = {}
    for key in ("K", "r_min", "r_max", "B"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def _config(args):
    base = {"family": args.family, "seed": args.seed, "instance_params": _instance_params(args)}
    cli = {"algos": tuple(args.algo) if args.algo else None, "eta": args.eta,
           "epsilon": args.epsilon, "upd_period": args.upd_period,
           "rounds": args.rounds, "horizon_time": args.horizon_time,
           "local_budget": args.local_budget, "engine": args.engine,
           "trials": getattr(args, "trials", None), "workers": getattr(args, "workers", None),
           "out": getattr(args, "out", None)}
    cli = {k: v for k, v in cli.items() if v is not None}
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **cli)
        cfg.instance_params.update(base["instance_params"])
        return cfg
    return ExperimentConfig(**base, **cli)


def cmd_generate(args):
    cfg = ExperimentConfig(family=args.family, seed=args.seed,
                           instance_params=_instance_params(args))
    inst = make_instance(cfg, 0)
    save_instance(inst, args.out)
    print(f"wrote {inst.K}-arm {args.family} instance to {args.out}")


def cmd_run(args):
    cfg = _config(args)
    instance = load_instance(args.instance) if args.instance else None
    res = run_experiment(cfg, instance=instance,
                         progress=lambda i, n: log.info("trial %d/%d done", i, n))
    for algo in cfg.algos:
        t, J = res.mean_curve(algo)
        if not np.all(np.isfinite(J)):
            raise ConvergenceError(f"{algo}: non-finite policy cost")
        print(f"{algo}: J {J[0]:.6f} -> {J[-1]:.6f} at t={t[-1]:g} over {cfg.trials} trial(s)")
    if cfg.out:
        print(f"wrote {cfg.out} and {aggregate_path(cfg.out)}")


def cmd_oracle(args):
    if args.instance:
        inst = load_instance(args.instance)
    else:
        inst = make_instance(ExperimentConfig(family=args.family, seed=args.seed,
                                              instance_params=_instance_params(args)), 0)
    r = oracle_optimal_rates(inst, inst.constraints(args.epsilon))
    J = policy_cost(inst, r)
    r0 = np.full(inst.K, inst.B / inst.K)
    print(f"J* = {J:.10g}  (uniform rates: {policy_cost(inst, r0):.10g})")
    at_lo = int(np.sum(np.isclose(r, inst.r_min)))
    print(f"arms at r_min: {at_lo} of {inst.K}, sum of rates = {r.sum():.10g}")
    if args.out:
        write_keyvalue(args.out, {"J_star": J, "rates": r}, header="oracle optimum")


def cmd_regret(args):
    rows = read_trials_csv(args.results)
    if args.instance:
        inst = load_instance(args.instance)
        J_star = policy_cost(inst, oracle_optimal_rates(inst))
        by_trial = {}
        for row in rows:
            by_trial.setdefault((row["algo"], row["trial"]), []).append(row)
        for series in by_trial.values():
            series.sort(key=lambda r: r["update_index"])
            acc = 0.0
            for row in series:
                row["regret_cum"] = acc
                acc += row["J"] - J_star
    groups = {}
    for row in rows:
        groups.setdefault((row["algo"], row["update_index"]), []).append(row)
    table = []
    for (algo, u), items in sorted(groups.items()):
        reg = np.array([r["regret_cum"] for r in items])
        n = len(reg)
        table.append({"algo": algo, "update_index": u,
                      "sim_time": float(np.mean([r["sim_time"] for r in items])),
                      "regret_mean": float(reg.mean()),
                      "regret_stderr": float(reg.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
                      "n": n})
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(table[0]) if table else ["algo"])
            w.writeheader()
            w.writerows(table)
    for algo in sorted({t["algo"] for t in table}):
        last = [t for t in table if t["algo"] == algo][-1]
        print(f"{algo}: cumulative regret {last['regret_mean']:.6g} "
              f"after {last['update_index']} updates (n={last['n']})")


def cmd_sweep(args):
    cfg = _config(args)
    periods = parse_grid(args.periods) if args.periods.strip() else [None]
    table = grid_search(cfg, parse_grid(args.etas), periods, penalty=args.penalty,
                        allow_any_period=args.allow_any_period)
    if not table:
        raise ValueError("grid is empty after dropping periods outside [8, 40]")
    cols = ["rank", "algo", "eta", "upd_period", "final_J", "trailing_std", "score"]
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            w.writerows(table)
    print(" ".join(f"{c:>12}" for c in cols))
    for row in table:
        print(" ".join(f"{row[c]:>12.6g}" if isinstance(row[c], float) else f"{str(row[c]):>12}"
                       for c in cols))


def cmd_bound(args):
    eta, eps, bound = corollary_hyperparams(args.B, args.r_min, args.K, args.U, args.T_max)
    print(f"eta = {eta:.6g}")
    print(f"epsilon = {eps:.6g}")
    print(f"regret_bound = {bound:.6g}")


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "oracle": cmd_oracle,
            "regret": cmd_regret, "sweep": cmd_sweep, "bound": cmd_bound}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
