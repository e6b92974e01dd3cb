"""Command line driver: train, attack, bench, and account subcommands.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .accounting import schedule_rho, to_epsilon
from .bench import run_bench
from .config import ConfigError, load_config
from .experiments import run_attack, run_training, save_run
from .pipeline import DECAY_KINDS, DpConfig


def _cmd_train(args) -> int:
    config = load_config(args.config).with_overrides(seed=args.seed, report_path=args.out)
    report, checkpoint = run_training(config, threads=args.threads)
    report_path, checkpoint_path = save_run(report, checkpoint, config.report_path)
    train = report["train"]
    print(f"report: {report_path}")
    print(f"checkpoint: {checkpoint_path}")
    print(f"train accuracy: {train['final_train_accuracy']:.4f}")
    print(f"test accuracy: {train['final_test_accuracy']:.4f}")
    privacy = report.get("privacy")
    if privacy:
        if privacy["epsilon"] is not None:
            print(f"epsilon: {privacy['epsilon']:.4f} (delta={privacy['delta']:g})")
        else:
            print("epsilon: unbounded (no noise)")
    return 0


def _cmd_attack(args) -> int:
    config = load_config(args.config).with_overrides(seed=args.seed)
    target = args.target or config.report_path
    report = run_attack(target, config)
    out = Path(args.out or target)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True))
    print(f"report: {out}")
    print(f"attack auc: {report['attack']['auc']:.4f}")
    return 0


def _cmd_bench(args) -> int:
    config = load_config(args.config).with_overrides(seed=args.seed)
    table = run_bench(config, repetitions=args.repetitions, threads=args.threads)
    text = json.dumps(table, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        print(f"benchmark: {args.out}")
    else:
        print(text)
    for optimizer, entry in table["optimizers"].items():
        print(
            f"{optimizer}: {entry['median_epoch_seconds']:.4f}s/epoch "
            f"x{entry['factor_vs_sgd']:.2f} ({entry['grad_evaluations']} grad evals)"
        )
    return 0


def _cmd_account(args) -> int:
    config = DpConfig(
        clip_norm=1.0,
        noise_multiplier=args.noise_multiplier,
        decay=args.decay,
        decay_rate=args.decay_rate,
        workers=1,
        seed=0,
    )
    rho = schedule_rho(config, args.epochs, args.steps_per_epoch)
    epsilon = to_epsilon(rho, args.delta)
    print(
        json.dumps(
            {
                "noise_multiplier": args.noise_multiplier,
                "decay": args.decay,
                "decay_rate": args.decay_rate,
                "epochs": args.epochs,
                "steps_per_epoch": args.steps_per_epoch,
                "delta": args.delta,
                "rho": rho,
                "epsilon": epsilon,
                "log10_epsilon": math.log10(epsilon),
            },
            indent=2,
            sort_keys=True,
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microdp",
        description="Micro-batch differentially private training experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a model per the config and write a report")
    train.add_argument("config", help="TOML experiment config")
    train.add_argument("--seed", type=int, default=None, help="override the master seed")
    train.add_argument("--out", default=None, help="override the report path")
    train.add_argument("--threads", type=int, default=1, help="worker-loop thread count")
    train.set_defaults(func=_cmd_train)

    attack = sub.add_parser("attack", help="run membership inference against a finished run")
    attack.add_argument("config", help="TOML experiment config (supplies attack seeds)")
    attack.add_argument("--target", default=None, help="target report path (default: config output)")
    attack.add_argument("--seed", type=int, default=None, help="override the attack master seed")
    attack.add_argument("--out", default=None, help="where to write the amended report")
    attack.set_defaults(func=_cmd_attack)

    bench = sub.add_parser("bench", help="compare wall time of sgd, dpsgd and edpsgd")
    bench.add_argument("config", help="TOML experiment config")
    bench.add_argument("--repetitions", type=int, default=5)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--out", default=None, help="write the benchmark table as JSON")
    bench.add_argument("--threads", type=int, default=1)
    bench.set_defaults(func=_cmd_bench)

    account = sub.add_parser("account", help="epsilon for a hypothetical noise schedule")
    account.add_argument("--noise-multiplier", type=float, required=True)
    account.add_argument("--decay", choices=DECAY_KINDS, default="none")
    account.add_argument("--decay-rate", type=float, default=0.0)
    account.add_argument("--epochs", type=int, required=True)
    account.add_argument("--steps-per-epoch", type=int, required=True)
    account.add_argument("--delta", type=float, required=True)
    account.set_defaults(func=_cmd_account)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary of the process
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
