"""beamsim command line: scenario gen, dataset build, train, eval, xeval, report.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.  BEAMSIM_THREADS caps torch's CPU parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, DataError, NumericError


def _parse_resolution(text: str):
    try:
        x1, x2 = text.lower().split("x")
        return int(x1), int(x2)
    except ValueError as exc:
        raise ConfigError(f"resolution must look like '4x4', got {text!r}") from exc


def _cmd_scenario_gen(args):
    from .scenario import config_from_json, generate_scenario, save_scenario

    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: not valid JSON (line {exc.lineno})") from exc
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        config = config_from_json(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from exc
    scenario = generate_scenario(config)
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {len(scenario.ues)} UEs")
    return 0


def _cmd_dataset_build(args):
    from .measurement import build_dataset, save_dataset
    from .scenario import load_scenario

    scenario = load_scenario(args.scenario)
    dataset = build_dataset(
        scenario,
        _parse_resolution(args.coarse),
        _parse_resolution(args.fine),
        args.snr,
        seed=args.seed,
    )
    save_dataset(dataset, args.out)
    print(f"wrote {args.out}: {len(dataset.samples)} records")
    return 0


def _cmd_train(args):
    from .learner.nets import ModelConfig
    from .learner.train import TrainSchedule, save_checkpoint, save_history_csv, train
    from .measurement import load_dataset

    dataset = load_dataset(args.dataset)
    fx1, fx2 = dataset.provenance["fine_resolution"]
    config = ModelConfig(
        backbone=args.backbone,
        feature_dim=args.feature_dim,
        fusion=args.fusion,
        fine_beam_count=fx1 * fx2,
    )
    schedule = TrainSchedule(epochs=args.epochs, batch_size=args.batch_size)
    model, history = train(dataset, config, schedule, seed=args.seed)
    metrics = {"val_top1": history[-1]["val_top1"]} if history else {}
    save_checkpoint(model, args.out, seed=args.seed, epoch=len(history), metrics=metrics)
    save_history_csv(history, str(args.out) + ".history.csv")
    last = f"val_top1={metrics.get('val_top1', float('nan')):.4f}" if history else "no epochs"
    print(f"wrote {args.out}: {len(history)} epochs, {last}")
    return 0


def _cmd_eval(args):
    from .evaluate import emit_report, evaluate_policy
    from .learner.train import load_checkpoint
    from .measurement import load_dataset
    from .scenario import load_scenario

    dataset = load_dataset(args.dataset)
    scenario = load_scenario(args.scenario)
    model = None
    if args.policy == "model":
        if args.ckpt is None:
            raise ConfigError("--ckpt is required for the model policy")
        model, _ = load_checkpoint(args.ckpt)
    report = evaluate_policy(args.policy, dataset, scenario, model=model, seed=args.seed, split=args.split)
    fmt = "json" if str(args.out).endswith(".json") else "csv"
    emit_report([report], fmt, args.out)
    print(f"{args.policy}: top1={report.top1:.4f} rate={report.mean_rate:.4f} -> {args.out}")
    return 0


def _cmd_xeval(args):
    from .evaluate import CrossEvalSettings, cross_scenario_eval, emit_report
    from .learner.nets import ModelConfig
    from .learner.train import TrainSchedule
    from .scenario import load_scenario

    fine = _parse_resolution(args.fine)
    settings = CrossEvalSettings(
        coarse_resolution=_parse_resolution(args.coarse),
        fine_resolution=fine,
        snr_db=args.snr,
        dataset_seed=args.seed,
        train_seed=args.seed,
        model_config=ModelConfig(fusion=args.fusion, fine_beam_count=fine[0] * fine[1]),
        schedule=TrainSchedule(epochs=args.epochs, batch_size=args.batch_size),
    )
    train_scenario = load_scenario(args.train_scenario)
    test_scenarios = [load_scenario(p) for p in args.test_scenarios]
    reports = cross_scenario_eval(train_scenario, test_scenarios, settings)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_report(reports, "csv", out / "xeval.csv")
    for path, report in zip(args.test_scenarios, reports):
        print(f"{Path(path).name}: top1={report.top1:.4f}")
    print(f"wrote {out / 'xeval.csv'}")
    return 0


def _cmd_report(args):
    from .evaluate import emit_report, read_reports

    reports = []
    for path in args.inputs:
        reports.extend(read_reports(path))
    created = emit_report(reports, args.format, args.out)
    for path in created:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    scenario = sub.add_parser("scenario", help="scenario generation")
    scenario_sub = scenario.add_subparsers(dest="subcommand", required=True)
    gen = scenario_sub.add_parser("gen", help="generate a synthetic scenario")
    gen.add_argument("--config", required=True, help="scenario config JSON")
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    gen.set_defaults(func=_cmd_scenario_gen)

    dataset = sub.add_parser("dataset", help="dataset construction")
    dataset_sub = dataset.add_subparsers(dest="subcommand", required=True)
    build = dataset_sub.add_parser("build", help="build a coarse->fine dataset")
    build.add_argument("--scenario", required=True)
    build.add_argument("--coarse", default="4x4")
    build.add_argument("--fine", default="16x16")
    build.add_argument("--snr", type=float, default=0.0)
    build.add_argument("--seed", type=int, default=42)
    build.add_argument("--out", required=True)
    build.set_defaults(func=_cmd_dataset_build)

    train = sub.add_parser("train", help="train a fusion model")
    train.add_argument("--dataset", required=True)
    train.add_argument("--fusion", choices=["auto", "gan", "concat"], default="auto")
    train.add_argument("--backbone", choices=["mlp", "conv-lite"], default="mlp")
    train.add_argument("--feature-dim", type=int, default=64)
    train.add_argument("--epochs", type=int, default=30)
    train.add_argument("--batch-size", type=int, default=256)
    train.add_argument("--seed", type=int, default=42)
    train.add_argument("--out", required=True)
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate a policy on a dataset")
    ev.add_argument("--policy", choices=["model", "hc", "exhaustive", "softmax-ref"], required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--scenario", required=True, help="scenario file backing the dataset")
    ev.add_argument("--ckpt", default=None)
    ev.add_argument("--split", default="test")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_eval)

    xeval = sub.add_parser("xeval", help="train on one scenario, test on others")
    xeval.add_argument("--train-scenario", required=True)
    xeval.add_argument("--test-scenarios", nargs="+", required=True)
    xeval.add_argument("--coarse", default="4x4")
    xeval.add_argument("--fine", default="16x16")
    xeval.add_argument("--snr", type=float, default=0.0)
    xeval.add_argument("--fusion", choices=["auto", "gan", "concat"], default="auto")
    xeval.add_argument("--epochs", type=int, default=30)
    xeval.add_argument("--batch-size", type=int, default=256)
    xeval.add_argument("--seed", type=int, default=42)
    xeval.add_argument("--out", required=True)
    xeval.set_defaults(func=_cmd_xeval)

    report = sub.add_parser("report", help="convert or merge report files")
    report.add_argument("--format", choices=["csv", "json", "plotdata"], required=True)
    report.add_argument("--in", dest="inputs", nargs="+", required=True)
    report.add_argument("--out", required=True)
    report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    threads = os.environ.get("BEAMSIM_THREADS")
    if threads:
        try:
            import torch

            torch.set_num_threads(max(1, int(threads)))
        except ValueError:
            print(f"ignoring invalid BEAMSIM_THREADS={threads!r}", file=sys.stderr)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
