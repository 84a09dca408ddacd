"""Command-line interface: ``mifm {prior-sim,synth,fit,predict,select,eval}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical abort.  ``MIFM_LOG`` sets the log level (error, info, debug).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .ffm import FfmParams, add_depth_curve, build_depth_table, depth_mean, depth_mean_recursion
from .gibbs import NumericalError, run_chains
from .io import (ConfigError, ensure_dir, load_config, load_dataset, load_mapping, load_schema, read_column,
                 read_samples, write_column, write_dataset, write_samples)
from .metrics import Metrics, metric_amape, metric_recovery, metric_rmse
from .model import IngestionError, SyntheticTruth
from .selection import SelectionRule, interaction_marginals, posterior_predictive, select_interactions
from .synth import ExperimentSpec, REALISTIC_PLAN, SpecError, synth_generate

log = logging.getLogger("mifm")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


class UsageError(Exception):
    pass


def _parse_plan(text: str) -> tuple[tuple[int, int], ...]:
    if text == "realistic":
        return REALISTIC_PLAN
    try:
        plan = tuple(tuple(int(t) for t in part.split(":")) for part in text.split(","))
    except ValueError:
        raise UsageError(f"bad plan {text!r}; expected depth:count[,depth:count...]") from None
    if any(len(p) != 2 for p in plan):
        raise UsageError(f"bad plan {text!r}; expected depth:count[,depth:count...]")
    return plan


def cmd_prior_sim(args) -> int:
    out = Path(args.out)
    alphas = args.alpha or [0.0, 0.25, 0.5, 0.7, 1.0]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "m", "depth_prob", "add_prob", "mean", "mean_recursion"])
        for a in alphas:
            params = FfmParams(args.gamma1, args.gamma2, a, args.D)
            table = build_depth_table(params, full=args.table_out is not None)
            curve = add_depth_curve(params, table)
            mean, mean_rec = depth_mean(table), depth_mean_recursion(params)
            for m, (p, q) in enumerate(zip(table.row(args.D), curve)):
                w.writerow([repr(float(a)), m, repr(float(p)), repr(float(q)), repr(mean), repr(mean_rec)])
            if args.table_out is not None:
                base = Path(args.table_out)
                path = base if len(alphas) == 1 else base.with_name(f"{base.stem}_alpha{a:g}{base.suffix}")
                table.to_csv(path)
    log.info("wrote %s", out)
    return 0


def cmd_synth(args) -> int:
    spec_kw = {}
    if args.config:
        spec_kw.update(load_mapping(args.config))
    for key in ("D", "n_train", "n_test", "beta_range", "var_type", "continuous_ratio"):
        v = getattr(args, key)
        if v is not None:
            spec_kw[key] = v
    if args.noise_precision is not None:
        spec_kw["noise_precision"] = None if args.noise_precision <= 0 else args.noise_precision
    if args.plan is not None:
        spec_kw["plan"] = _parse_plan(args.plan)
    elif "plan" in spec_kw:
        spec_kw["plan"] = tuple(tuple(p) for p in spec_kw["plan"])
    if args.seed is not None:
        spec_kw["seed"] = args.seed
    try:
        spec = ExperimentSpec(**spec_kw)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    train, test, truth = synth_generate(spec)
    out = ensure_dir(args.out)
    write_dataset(out / "train.csv", train)
    write_dataset(out / "test.csv", test)
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth.to_mapping(), fh, indent=2, sort_keys=True)
    with open(out / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(train.schema.to_mapping(), fh, indent=2)
    log.info("wrote %s/{train,test}.csv truth.json schema.json", out)
    return 0


def cmd_fit(args) -> int:
    hyper, config = load_config(args.config, seed=args.seed)
    schema = load_schema(args.schema) if args.schema else None
    data = load_dataset(args.data, schema, require_response=True)
    log.info("fitting %d rows, %d units, %d features, K=%d J=%d", data.N, data.n_units, data.n_features,
             hyper.K, hyper.J)
    samples = run_chains(data, hyper, config, n_chains=args.chains)
    write_samples(args.out, samples, data.schema, hyper, config)
    log.info("wrote %d samples to %s", len(samples), args.out)
    return 0


def cmd_predict(args) -> int:
    samples, schema = read_samples(args.samples)
    if args.schema:
        schema = load_schema(args.schema)
    data = load_dataset(args.data, schema)
    write_column(args.out, "prediction", posterior_predictive(samples, data))
    return 0


def _rule(args) -> SelectionRule:
    if args.top is not None and args.threshold is not None:
        raise UsageError("--threshold and --top are mutually exclusive")
    if args.top is not None:
        return SelectionRule(top=args.top)
    return SelectionRule(threshold=0.5 if args.threshold is None else args.threshold)


def cmd_select(args) -> int:
    rule = _rule(args)
    samples, _ = read_samples(args.samples)
    report = interaction_marginals(samples)
    selected = select_interactions(report, rule)
    if args.out:
        report.to_csv(args.out)
    text = "".join(c + "\n" for c in selected)
    if args.list:
        Path(args.list).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_eval(args) -> int:
    pred = read_column(args.pred, "prediction")
    data = load_dataset(args.data, load_schema(args.schema) if args.schema else None, require_response=True)
    if pred.shape != data.y.shape:
        raise IngestionError(f"{args.pred} has {pred.size} predictions but {args.data} has {data.N} rows")
    metrics = Metrics(metric_rmse(pred, data.y), metric_amape(pred, data.y))
    if args.truth and args.selection:
        truth = SyntheticTruth.from_mapping(load_mapping(args.truth))
        selected = [ln.strip() for ln in Path(args.selection).read_text(encoding="utf-8").splitlines() if ln.strip()]
        metrics.recovery_rate = metric_recovery(selected, truth)
    text = json.dumps({k: v for k, v in vars(metrics).items() if v is not None}, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mifm", description="Multi-way interaction factorization machines")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prior-sim", help="depth pmf and add-probability curves of the FFM_alpha prior")
    s.add_argument("--D", type=int, default=30)
    s.add_argument("--gamma1", type=float, default=0.2)
    s.add_argument("--gamma2", type=float, default=1.0)
    s.add_argument("--alpha", type=float, action="append", help="repeatable; default 0,0.25,0.5,0.7,1")
    s.add_argument("--out", required=True)
    s.add_argument("--table-out", help="also write the full depth table (i, m, prob)")
    s.set_defaults(func=cmd_prior_sim)

    s = sub.add_parser("synth", help="generate a synthetic experiment")
    s.add_argument("--config", help="YAML/JSON file with ExperimentSpec fields")
    s.add_argument("--D", type=int)
    s.add_argument("--n-train", dest="n_train", type=int)
    s.add_argument("--n-test", dest="n_test", type=int)
    s.add_argument("--plan", help="depth:count[,depth:count...] or 'realistic'")
    s.add_argument("--beta-range", dest="beta_range", type=float)
    s.add_argument("--noise-precision", dest="noise_precision", type=float, help="<= 0 for noiseless")
    s.add_argument("--var-type", dest="var_type", choices=["continuous", "binary", "mixed"])
    s.add_argument("--continuous-ratio", dest="continuous_ratio", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("fit", help="run the Gibbs sampler and store posterior samples")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--schema")
    s.add_argument("--seed", type=int)
    s.add_argument("--chains", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="posterior-predictive mean responses")
    s.add_argument("--samples", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--schema")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("select", help="interaction marginals and selection")
    s.add_argument("--samples", required=True)
    s.add_argument("--threshold", type=float)
    s.add_argument("--top", type=int)
    s.add_argument("--out", help="marginal report CSV")
    s.add_argument("--list", help="write the selection here as well as to stdout")
    s.set_defaults(func=cmd_select)

    s = sub.add_parser("eval", help="metrics of predictions against held-out responses")
    s.add_argument("--pred", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--schema")
    s.add_argument("--truth", help="truth.json from synth, for the recovery rate")
    s.add_argument("--selection", help="selection list from select, for the recovery rate")
    s.add_argument("--out")
    s.set_defaults(func=cmd_eval)
    return p


def _setup_logging():
    level = os.environ.get("MIFM_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "chains", 1) < 1:
        parser.error("--chains must be at least 1")
    try:
        return args.func(args)
    except (UsageError, ConfigError, SpecError) as exc:
        print(f"mifm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"mifm: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (IngestionError, OSError, ValueError) as exc:
        print(f"mifm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
