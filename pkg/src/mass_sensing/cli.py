"""Command-line entry point: ``mass <subcommand> [options]``."""

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import coherence, pipeline
from .coherence import (
    REPORT_COLUMNS,
    coherence_row,
    mutual_coherence,
    overlap_probability_closed_form,
    overlap_probability_monte_carlo,
)
from .detection import pd_at_pfa
from .rng import stream
from .sampler import PlanError, SamplingPlan, StackedSystem, build_alias_matrix, select_primes
from .scenario import ConfigError, Scenario
from .signal_model import SignalSpecError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _common(p, config=True):
    if config:
        p.add_argument("--config", help="JSON scenario file")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out", help="output directory (default: print to stdout)")
    p.add_argument("--trials", type=int, help="override the trial count")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="mass", description="Multi-rate asynchronous sub-Nyquist sensing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="show or export a sampling plan")
    _common(p)
    p.add_argument("--n", type=int, help="Nyquist bin count N")
    p.add_argument("--v", type=int, help="number of branches")
    p.add_argument("--scale", type=float, default=1.0, help="first prime >= scale*sqrt(N)")
    p.add_argument("--primes", help="comma-separated branch lengths")

    for name, text in (("sample", "branch samples of one trial"),
                       ("recover", "recovered spectrum of one trial")):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--trial", type=int, default=0)
        p.add_argument("--hypothesis", choices=("H0", "H1"), default="H1")

    p = sub.add_parser("detect", help="per-trial decisions at the calibrated threshold")
    _common(p)
    p = sub.add_parser("roc", help="ROC points")
    _common(p)
    p = sub.add_parser("run", help="full pipeline: trial records and ROC")
    _common(p)

    p = sub.add_parser("analyze", help="coherence and recovery bound of a plan")
    _common(p, config=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--primes", help="comma-separated branch lengths")
    p.add_argument("--v", type=int)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--k", type=int, help="sparsity for the success bound")

    p = sub.add_parser("overlap", help="closed-form vs Monte-Carlo overlap probability")
    _common(p, config=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    return parser


# -- helpers ------------------------------------------------------------------

def _load(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    if not os.path.isfile(args.config):
        raise ConfigError(f"config file not found: {args.config}")
    sc = Scenario.load(args.config)
    if args.seed is not None or args.trials is not None:
        sc = sc.with_overrides(seed=args.seed, trials=args.trials)
    return sc


def _primes(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"--primes must be comma-separated integers, got {text!r}") from None


def _emit(args, name, header, rows, doc=None):
    """Write rows as CSV/JSON to ``--out/name`` or stdout."""
    if args.format == "json":
        text = json.dumps(doc if doc is not None else [dict(zip(header, r)) for r in rows],
                          indent=1) + "\n"
        name = name.rsplit(".", 1)[0] + ".json"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        text = buf.getvalue()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _f(x):
    return repr(float(x))


# -- subcommands --------------------------------------------------------------

def cmd_plan(args):
    if args.config:
        plan = _load(args).sampling_plan()
    elif args.n is None:
        raise ConfigError("plan needs --config or --n with --v/--primes")
    elif args.primes:
        plan = SamplingPlan(args.n, _primes(args.primes))
    elif args.v:
        plan = select_primes(args.n, args.v, args.scale)
    else:
        raise ConfigError("plan needs --v or --primes together with --n")
    rows = [[i, m, _f(r), _f(plan.nyquist_n / m)]
            for i, (m, r) in enumerate(zip(plan.branch_lengths, plan.rates_hz))]
    doc = dict(plan.to_dict(), v=plan.v, sum_ratio=plan.sum_ratio, mean_ratio=plan.mean_ratio)
    _emit(args, "plan.csv", ["branch", "length", "rate_hz", "undersampling_factor"], rows, doc)
    if args.out:
        for m in plan.branch_lengths:
            build_alias_matrix(m, plan.nyquist_n).to_csv(os.path.join(args.out, f"alias_{m}.csv"))


def cmd_sample(args):
    sc = _load(args)
    ctx, samples, offsets = pipeline.trial_samples(sc, args.trial, args.hypothesis)
    rows = []
    for i, (y, t) in enumerate(zip(samples, ctx.times)):
        rows += [[i, m, _f(tm - offsets[i]), _f(val)] for m, (tm, val) in enumerate(zip(t, y))]
    _emit(args, "samples.csv", ["branch", "index", "time_s", "value"], rows)


def cmd_recover(args):
    sc = _load(args)
    spec = pipeline.recover_trial(sc, args.trial, args.hypothesis)
    rows = [[int(b), _f(f), _f(m)]
            for b, f, m in zip(spec.bins, spec.frequencies_hz, spec.magnitude)]
    _emit(args, "spectrum.csv", ["bin", "frequency_hz", "magnitude"], rows)


def cmd_detect(args):
    result = pipeline.run_pipeline(_load(args))
    cols, rows = pipeline.TRIAL_COLUMNS, pipeline.trial_rows(result.records)
    _emit(args, "decisions.csv", cols, rows)
    print(f"threshold = {result.threshold!r}", file=sys.stderr)


def cmd_roc(args):
    sc = _load(args)
    points = pipeline.roc_sweep(sc)
    _emit(args, "roc.csv", pipeline.ROC_COLUMNS, pipeline.roc_rows(sc, points))


def cmd_run(args):
    sc = _load(args)
    result = pipeline.run_pipeline(sc)
    points = pipeline.roc_sweep(sc, result=result)
    cols, rows = pipeline.TRIAL_COLUMNS, pipeline.trial_rows(result.records)
    _emit(args, "trials.csv", cols, rows)
    _emit(args, "roc.csv", pipeline.ROC_COLUMNS, pipeline.roc_rows(sc, points))
    occ = result.occupancy()
    if occ is not None:
        _emit(args, "occupancy.csv", ["trial"] + [f"band_{j}" for j in range(occ.shape[1])],
              [[t] + [int(x) for x in row] for t, row in enumerate(occ)])
    h0, h1 = result.h0_energies, result.h1_energies
    for p in sc.detection.target_pfas:
        pd = pd_at_pfa(h0, h1, p) if sc.signal_spec().subbands else float("nan")
        print(f"pfa = {p:g}: pd = {pd:.4f}", file=sys.stderr)


def cmd_analyze(args):
    n = args.n
    if args.primes:
        ms = _primes(args.primes)
    elif args.v:
        ms = select_primes(n, args.v, args.scale).branch_lengths
    else:
        raise ConfigError("analyze needs --primes or --v")
    try:
        plan = SamplingPlan(n, ms)
        valid, reason = True, ""
    except PlanError as exc:
        plan, valid, reason = None, False, str(exc)
    if plan is None:
        # still report the coherence of the offending operator
        for m in ms:
            if not 1 < m < n:
                raise ConfigError(f"branch length {m} must lie in (1, N)")
        blocks = [build_alias_matrix(m, n) for m in ms]
        report = mutual_coherence(StackedSystem(np.zeros(sum(ms)), blocks))
        row = {"plan_id": "-".join(map(str, ms)), "v": report.v, "mu": report.mu,
               "predicted_mu": report.predicted_mu, "bound": "", "empirical_rate": ""}
    else:
        report = mutual_coherence(plan)
        rng = stream(args.seed or 0, "instance")
        row = coherence_row(plan, k=args.k, trials=args.trials or 0, rng=rng)
    if args.format == "json" or args.out:
        doc = dict(row, valid=valid, reason=reason, max_pair=list(report.max_pair),
                   omega_probabilities=list(report.omega_probabilities))
        _emit(args, "analysis.csv", REPORT_COLUMNS + ["valid"],
              [[row[c] for c in REPORT_COLUMNS] + [valid]], doc)
        return
    print(f"N = {n}")
    print(f"primes = {','.join(map(str, ms))}")
    print(f"mu = {report.mu:g}")
    print(f"predicted_mu = {report.predicted_mu:g}")
    print(f"validity = {'true' if valid else 'false'}")
    if reason:
        print(f"reason = {reason}")
    if row["bound"] != "":
        print(f"bound = {row['bound']:.6g}")
    if row["empirical_rate"] != "":
        print(f"empirical_rate = {row['empirical_rate']:.6g}")


def cmd_overlap(args):
    n, m, k = args.n, args.m, args.k
    trials = args.trials or 100000
    closed = overlap_probability_closed_form(k, n, m)
    est, half = overlap_probability_monte_carlo(k, n, m, trials, stream(args.seed or 0, "overlap"))
    ok = abs(est - closed) <= half
    header = ["n", "m", "k", "closed_form", "monte_carlo", "three_sigma", "trials", "agree"]
    row = [n, m, k, _f(closed), _f(est), _f(half), trials, ok]
    if math.isqrt(n) ** 2 == n and m == math.isqrt(n):
        header.append("sqrt_form")
        row.append(_f(coherence.overlap_probability_sqrt_form(k, n)))
    _emit(args, "overlap.csv", header, [row])


COMMANDS = {
    "plan": cmd_plan, "sample": cmd_sample, "recover": cmd_recover, "detect": cmd_detect,
    "roc": cmd_roc, "run": cmd_run, "analyze": cmd_analyze, "overlap": cmd_overlap,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, PlanError, SignalSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
