"""Command-line entry point: train, evaluate, export-latents, gradcheck, odecheck."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import gradcheck, training
from .config import ConfigError, build_config, parse_key_values


def _add_config_args(parser):
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", dest="sets", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
    parser.add_argument("--seed", type=int, help="shorthand for --set seed=N")
    parser.add_argument("--out", default="runs/run", help="output directory")


def _build_config(args):
    overrides = parse_key_values(args.sets)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return build_config(args.config, overrides)


def cmd_train(args):
    cfg = _build_config(args)
    training.train(cfg, args.out)
    print(f"run artifacts in {args.out}")
    return 0


def cmd_evaluate(args):
    cfg = _build_config(args)
    if args.episodes <= 0:
        raise ConfigError(f"episodes must be positive, got {args.episodes}")
    agent = training.load_agent(cfg, args.checkpoint)
    mean, std, length = training.evaluate(agent, cfg, args.episodes, seed_seq=args.eval_seed)
    print(f"return {mean:.3f} +- {std:.3f} over {args.episodes} episodes (mean length {length:.1f})")
    return 0


def cmd_export_latents(args):
    cfg = _build_config(args)
    agent = training.load_agent(cfg, args.checkpoint)
    path = training.export_latents(agent, cfg, args.out_csv, episodes=args.episodes)
    print(f"latents written to {path}")
    return 0


def cmd_gradcheck(args):
    ok = gradcheck.run_gradient_suite(seed=args.check_seed)
    print("gradcheck: all passed" if ok else "gradcheck: FAILURES above")
    return 0 if ok else 1


def cmd_odecheck(args):
    ok = gradcheck.run_order_suite()
    print("odecheck: all passed" if ok else "odecheck: FAILURES above")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ctxode", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the rollout/update loop")
    _add_config_args(p_train)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("evaluate", help="deterministic rollouts from a checkpoint")
    _add_config_args(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.add_argument("--eval-seed", type=int, default=0)
    p_eval.set_defaults(fn=cmd_evaluate)

    p_lat = sub.add_parser("export-latents", help="dump per-step context parameters to CSV")
    _add_config_args(p_lat)
    p_lat.add_argument("--checkpoint", required=True)
    p_lat.add_argument("--episodes", type=int, default=1)
    p_lat.add_argument("--out-csv", default="latents.csv")
    p_lat.set_defaults(fn=cmd_export_latents)

    p_grad = sub.add_parser("gradcheck", help="finite-difference checks for every op")
    p_grad.add_argument("--check-seed", type=int, default=0)
    p_grad.set_defaults(fn=cmd_gradcheck)

    p_ode = sub.add_parser("odecheck", help="solver convergence-order suite")
    p_ode.set_defaults(fn=cmd_odecheck)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except training.TrainAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
