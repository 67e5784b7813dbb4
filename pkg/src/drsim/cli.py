"""Command-line entry point: ``drsim <subcommand> ...``.

Exit codes: 0 success, 2 config error, 3 a round halted with an alert,
4 model error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import trace
from .errors import (ConfigInvalidError, ConfigParseError, DrsimError, EmptyTraceError,
                     ModelLoadError, RecordParseError)
from .forecast import checkpoint
from .forecast.data import chrono_split, make_windows
from .forecast.metrics import evaluate, persistence_metrics
from .forecast.train import TrainConfig
from .forecast.workflow import fit_series
from .scenario import compare_policies, emit_report, load_config, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_HALTED, EXIT_MODEL = 0, 2, 3, 4

log = logging.getLogger("drsim")


def _write(out, data: bytes) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def cmd_ingest(args) -> int:
    schema = trace.TraceSchema(args.start_col, args.end_col, args.cpu_col,
                               delimiter=args.delimiter, has_header=args.header)
    skipped: list = []
    with open(args.trace, "rb") as fh:
        try:
            records = trace.parse_usage_records(fh, schema, strict=args.strict, skipped=skipped)
        except RecordParseError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    if skipped:
        log.warning("skipped %d malformed rows", len(skipped))
    try:
        series = trace.aggregate_to_slots(records, args.slot_seconds)
    except EmptyTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        trace.save_series(series, args.out)
    else:
        sys.stdout.write(series.to_csv())
    print(f"{len(records)} records -> {len(series)} slots of {args.slot_seconds}s "
          f"({len(skipped)} skipped)", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    series = trace.synth_trace(args.length, args.seed, args.profile, args.slot_seconds)
    if args.out:
        trace.save_series(series, args.out)
    else:
        sys.stdout.write(series.to_csv())
    return EXIT_OK


def _metrics_line(name, m) -> str:
    return f"{name}: MAE={m.mae:.6f} MAPE={m.mape:.4f}% R2={m.r2:.6f}"


def cmd_train(args) -> int:
    series = trace.load_series(args.series)
    cfg = TrainConfig(
        hidden_sizes=tuple(int(h) for h in args.hidden.split(",")),
        epochs=args.epochs, batch_size=args.batch_size, learning_rate=args.lr,
        optimizer=args.optimizer, seed=args.seed,
    )
    try:
        outcome = fit_series(series.values, args.lookback, args.horizon, args.split, cfg,
                             train_only_norm=args.train_only_norm,
                             denormalized=not args.normalized_metrics)
    except DrsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    checkpoint.save(outcome.result.model, args.out)
    print(f"trained {outcome.result.model.n_params()} parameters for {args.epochs} epochs; "
          f"final loss {outcome.result.losses[-1] if outcome.result.losses else float('nan'):.6g}")
    print(_metrics_line("model", outcome.metrics))
    print(_metrics_line("persistence", outcome.baseline))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = checkpoint.load(args.model)
    except ModelLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    series = trace.load_series(args.series)
    data = make_windows(model.norm.normalize(series.values), model.lookback, model.horizon)
    if args.split > 0:
        _, data = chrono_split(data, args.split)
    denorm = not args.normalized_metrics
    print(_metrics_line("model", evaluate(model, data, denorm)))
    print(_metrics_line("persistence", persistence_metrics(data, model.norm if denorm else None)))
    return EXIT_OK


def _load_scenario(args):
    cfg = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None):
        overrides["policy"] = args.policy
    if getattr(args, "model", None):
        overrides["model_path"] = args.model
    if getattr(args, "strict_more", False):
        overrides["strict_more"] = True
    return replace(cfg, **overrides).validate() if overrides else cfg


def cmd_simulate(args) -> int:
    try:
        cfg = _load_scenario(args)
    except (ConfigParseError, ConfigInvalidError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_scenario(cfg)
    except ModelLoadError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ConfigInvalidError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _write(args.out, emit_report(report, args.format))
    return EXIT_HALTED if report.halted_rounds else EXIT_OK


def cmd_compare(args) -> int:
    try:
        cfg = _load_scenario(args)
    except (ConfigParseError, ConfigInvalidError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    model = None
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    if "forecast" in policies:
        if not cfg.model_path:
            print("config error: forecast policy requires --model or model_path", file=sys.stderr)
            return EXIT_CONFIG
        try:
            model = checkpoint.load(cfg.model_path)
        except ModelLoadError as exc:
            print(f"model error: {exc}", file=sys.stderr)
            return EXIT_MODEL
    try:
        result = compare_policies(cfg, policies, args.trials, model=model)
    except ConfigInvalidError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.format == "json":
        _write(args.out, (json.dumps(result, indent=2, sort_keys=True) + "\n").encode())
    else:
        lines = [f"{'policy':<10} {'mean max%':>10} {'mean spread%':>13} {'trials flagged':>15}"]
        for kind, s in result.items():
            lines.append(f"{kind:<10} {100 * s['mean_final_max']:10.1f} {100 * s['mean_spread']:13.1f} "
                         f"{100 * s['fraction_flagged']:14.1f}%")
        _write(args.out, ("\n".join(lines) + "\n").encode())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drsim", description="Multi-cluster disaster-recovery simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="aggregate a task-usage trace into a slot series")
    s.add_argument("--trace", required=True)
    s.add_argument("--slot-seconds", type=int, default=300)
    s.add_argument("--start-col", type=int, default=0)
    s.add_argument("--end-col", type=int, default=1)
    s.add_argument("--cpu-col", type=int, default=5)
    s.add_argument("--delimiter", default=",")
    s.add_argument("--header", action="store_true", help="first row is a header")
    s.add_argument("--strict", action="store_true", help="abort on the first malformed row")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="write a synthetic slot series")
    s.add_argument("--length", type=int, default=4000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--profile", choices=trace.PROFILES, default="sinusoid-mix")
    s.add_argument("--slot-seconds", type=int, default=300)
    s.add_argument("--out")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="train the LSTM forecaster on a slot series")
    s.add_argument("--series", required=True)
    s.add_argument("--lookback", type=int, default=3)
    s.add_argument("--horizon", type=int, default=1)
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--split", type=float, default=0.2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--hidden", default="128,128", help="comma-separated hidden sizes")
    s.add_argument("--batch-size", type=int, default=32)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    s.add_argument("--train-only-norm", action="store_true",
                   help="fit min-max constants on the training prefix only")
    s.add_argument("--normalized-metrics", action="store_true")
    s.add_argument("--out", default="model.bin")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a checkpoint on a slot series")
    s.add_argument("--model", required=True)
    s.add_argument("--series", required=True)
    s.add_argument("--split", type=float, default=0.2,
                   help="score the final fraction of windows; 0 scores all windows")
    s.add_argument("--normalized-metrics", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="run a multi-round recovery scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--policy", choices=("forecast", "current", "random", "replay"))
    s.add_argument("--seed", type=int)
    s.add_argument("--model", help="checkpoint for the forecast policy")
    s.add_argument("--strict-more", action="store_true",
                   help="require strictly more cores than the failed cluster")
    s.add_argument("--format", choices=("text", "json", "csv"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="compare selection policies over many seeds")
    s.add_argument("--config", required=True)
    s.add_argument("--policies", default="forecast,random")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--seed", type=int)
    s.add_argument("--model")
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
