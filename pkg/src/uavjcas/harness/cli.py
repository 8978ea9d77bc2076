"""Command line entry point: ``uavjcas {eval,sweep,train}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from ..errors import ConfigError
from .config import POLICY_NAMES, load_config
from .runner import evaluate_sweep, write_metrics_csv
from .train import train


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> List[str]:
    items = [v.strip() for v in text.split(",") if v.strip()]
    for v in items:
        if v not in POLICY_NAMES:
            raise argparse.ArgumentTypeError(f"unknown policy {v!r}")
    return items


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavjcas", description="Multi-UAV JCAS hotspot mission simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", help="evaluate one policy on one configuration")
    ev.add_argument("--policy", choices=POLICY_NAMES)
    ev.add_argument("--checkpoint", help="weights file for --policy checkpoint")
    ev.add_argument("--n-uavs", type=int)
    ev.add_argument("--n-targets", type=int)
    ev.add_argument("--episodes", type=int)
    ev.add_argument("--seed", type=int)
    ev.add_argument("--config")
    ev.add_argument("--out", default="metrics.csv")
    ev.add_argument("--workers", type=int)
    ev.add_argument("--trace-dir")

    sw = sub.add_parser("sweep", help="evaluate a cross product of policies and fleet/hotspot sizes")
    sw.add_argument("--policy", "--policies", dest="policies", type=_str_list)
    sw.add_argument("--checkpoint")
    sw.add_argument("--n-uavs", type=_int_list)
    sw.add_argument("--n-targets", type=_int_list)
    sw.add_argument("--episodes", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--config")
    sw.add_argument("--out", default="sweep.csv")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--trace-dir")

    tr = sub.add_parser("train", help="train the shared PPO policy")
    tr.add_argument("--iterations", type=int, default=40)
    tr.add_argument("--config")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--checkpoint-dir", default="checkpoints")
    tr.add_argument("--checkpoint-every", type=int, default=10)
    tr.add_argument("--resume", action="store_true")
    tr.add_argument("--log", help="iteration log CSV (default: <checkpoint-dir>/train_log.csv)")
    return p


def _pick(value, default):
    return default if value is None else value


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        ev = cfg.evaluation
        if args.command == "train":
            train(cfg, args.iterations, args.seed, args.checkpoint_dir, args.checkpoint_every,
                  resume=args.resume, log_path=args.log)
            return 0
        if args.command == "eval":
            policies = [_pick(args.policy, ev.policy)]
            n_uavs = [_pick(args.n_uavs, cfg.env.n_uavs)]
            n_targets = [_pick(args.n_targets, cfg.env.n_targets)]
        else:
            policies = _pick(args.policies, [ev.policy])
            n_uavs = _pick(args.n_uavs, [cfg.env.n_uavs])
            n_targets = _pick(args.n_targets, [cfg.env.n_targets])
        rows = evaluate_sweep(
            cfg.env, policies, n_uavs, n_targets,
            episodes=_pick(args.episodes, ev.episodes),
            base_seed=_pick(args.seed, ev.base_seed),
            workers=_pick(args.workers, ev.workers),
            checkpoint=_pick(args.checkpoint, ev.checkpoint),
            trace_dir=Path(args.trace_dir) if args.trace_dir else None,
        )
        write_metrics_csv(rows, args.out)
        return 0
    except ConfigError as exc:
        print(f"uavjcas: configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
