"""Command-line interface.

Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
runtime failures (including a failed gradient check).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as config_mod
from . import trainer
from .errors import (
    DucaError,
    ParseError,
    UnknownKey,
    UnknownMethod,
    ValidationError,
)
from .policy import PolicyModel, gradcheck
from .trajectory import read_jsonl, write_jsonl

_CONFIG_ERRORS = (ParseError, ValidationError, UnknownKey, UnknownMethod)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML config file (defaults apply)")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY=VALUE",
        help="override a config key (dotted, TOML literal value); repeatable",
    )
    parser.add_argument("--workers", type=int, default=1,
                        help="rollout worker threads (outputs do not depend "
                             "on this)")


def _load_config(args) -> config_mod.ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config \
        else config_mod.default_config()
    overrides = {}
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"--set needs KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    if overrides:
        cfg = config_mod.apply_overrides(cfg, overrides)
    return cfg


def _cmd_train(args) -> int:
    cfg = _load_config(args)
    method = trainer.parse_method(args.method)
    out_dir = args.out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)

    def progress(record):
        if not args.quiet and record.step % 10 == 0:
            print(f"step {record.step}: cvr={record.cvr:.3f} "
                  f"compliance={record.compliance:.2f} "
                  f"avg_turns={record.avg_turns:.2f}")

    result = trainer.train(cfg, method, workers=args.workers,
                           progress=progress)
    tag = f"{method.value}_seed{cfg.seed}"
    curve_path = os.path.join(out_dir, f"curve_{tag}.csv")
    model_path = args.save_model or os.path.join(out_dir, f"model_{tag}.txt")
    trainer.write_curve_csv(curve_path, result.records)
    result.model.save(model_path)
    last = result.records[-1]
    print(f"trained {method.value} for {len(result.records)} steps: "
          f"final cvr={last.cvr:.3f} compliance={last.compliance:.2f}")
    print(f"curve: {curve_path}")
    print(f"model: {model_path}")
    return 0


def _cmd_eval(args) -> int:
    cfg = _load_config(args)
    model = PolicyModel.load(args.model)
    result = trainer.evaluate(model, cfg, args.episodes, args.seed,
                              workers=args.workers)
    if args.save_episodes:
        write_jsonl(args.save_episodes, result.trajectories)
    print(json.dumps(result.report.to_dict(), indent=2))
    return 0


def _cmd_gradcheck(args) -> int:
    report = gradcheck(seed=args.seed, cases=args.cases, h=args.h,
                       tolerance=args.tolerance)
    print(f"cases: {report.cases}")
    print(f"max rel err (policy):        {report.max_rel_err_policy:.3e}")
    print(f"max rel err (turn value):    {report.max_rel_err_value_turn:.3e}")
    print(f"max rel err (session value): {report.max_rel_err_value_session:.3e}")
    print(f"tolerance: {report.tolerance:.1e}")
    if not report.passed:
        print("gradient check FAILED", file=sys.stderr)
        return 3
    print("gradient check passed")
    return 0


def _cmd_ablate(args) -> int:
    cfg = _load_config(args)
    methods = (args.methods.split(",") if args.methods
               else list(trainer.METHOD_NAMES))
    seeds = ([int(s) for s in args.seeds.split(",")] if args.seeds
             else list(trainer.DEFAULT_SEEDS))
    out_dir = args.out_dir or cfg.output_dir

    def progress(run):
        if not args.quiet:
            print(f"{run.method.value} seed {run.seed}: "
                  f"cvr={run.report.cvr:.3f} "
                  f"compliance={run.report.compliance:.2f} "
                  f"repeat={run.report.repeat_action_rate:.3f}")

    ablation = trainer.run_ablation(
        cfg, methods=methods, seeds=seeds, workers=args.workers,
        out_dir=out_dir, eval_episodes=args.eval_episodes,
        progress=progress)
    print(f"{'method':<12} {'cvr':>8} {'compliance':>11} {'avg_turn':>9}")
    for method_name, cvr, compliance, avg_turn in ablation.summary_rows():
        print(f"{method_name:<12} {cvr:>8.3f} {compliance:>11.2f} "
              f"{avg_turn:>9.2f}")
    print(f"tables: {os.path.join(out_dir, 'ablation_summary.csv')}")
    return 0


def _cmd_report(args) -> int:
    trajectories = read_jsonl(args.episodes)
    from .metrics import compute_report

    report = compute_report(trajectories)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="duca",
        description="Dual-horizon credit assignment on a scripted "
                    "sales-dialogue simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one method")
    _add_common(p_train)
    p_train.add_argument("--method", default="duca",
                         help=f"one of {', '.join(trainer.METHOD_NAMES)}")
    p_train.add_argument("--out-dir", help="output directory "
                                           "(default: config output_dir)")
    p_train.add_argument("--save-model", help="model checkpoint path")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a saved model greedily")
    _add_common(p_eval)
    p_eval.add_argument("--model", required=True, help="model checkpoint")
    p_eval.add_argument("--episodes", type=int, default=256)
    p_eval.add_argument("--seed", type=int, default=99_000_001)
    p_eval.add_argument("--save-episodes",
                        help="write evaluated episodes as JSONL")
    p_eval.set_defaults(func=_cmd_eval)

    p_grad = sub.add_parser("gradcheck",
                            help="compare analytic gradients to finite "
                                 "differences")
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.add_argument("--cases", type=int, default=25)
    p_grad.add_argument("--h", type=float, default=1e-5)
    p_grad.add_argument("--tolerance", type=float, default=1e-4)
    p_grad.set_defaults(func=_cmd_gradcheck)

    p_abl = sub.add_parser("ablate", help="train and evaluate all methods "
                                          "over multiple seeds")
    _add_common(p_abl)
    p_abl.add_argument("--methods", help="comma-separated method names "
                                         "(default: all)")
    p_abl.add_argument("--seeds", help="comma-separated integer seeds "
                                       "(default: 1,2,3,4,5)")
    p_abl.add_argument("--out-dir", help="output directory")
    p_abl.add_argument("--eval-episodes", type=int,
                       default=trainer.DEFAULT_EVAL_EPISODES)
    p_abl.add_argument("--quiet", action="store_true")
    p_abl.set_defaults(func=_cmd_ablate)

    p_rep = sub.add_parser("report", help="metrics report from saved "
                                          "episodes")
    p_rep.add_argument("--episodes", required=True,
                       help="episodes JSONL written by eval")
    p_rep.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DucaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
