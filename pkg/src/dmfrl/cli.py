"""Command-line entry points: train, fuse, evaluate, benchmark.

The DMFRL_SEED environment variable supplies a default seed; an explicit
--seed flag always wins.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import (
    ConfigError,
    ExperimentConfig,
    experiment_from_dict,
    load_config_file,
)
from .fusion import FusionPolicy, extract_first_layer
from .harness import benchmark, evaluate, train, variant_names
from .numkit import MLP

SEED_ENV_VAR = "DMFRL_SEED"


def default_seed(args_seed: int | None) -> int:
    if args_seed is not None:
        return args_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV_VAR}={env!r} is not an integer") from e
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dmfrl", description=__doc__)
    p.add_argument("--version", action="version", version=f"dmfrl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one seeded agent from a config file")
    t.add_argument("--config", required=True, help="key=value experiment config")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", required=True, help="actor checkpoint path (critic saved alongside)")
    t.add_argument("--metrics", default=None, help="metrics CSV path (default: <out>.metrics.csv)")

    f = sub.add_parser("fuse", help="fuse first layers of trained actors into a new policy")
    f.add_argument("--inputs", nargs="+", required=True, help="two or more actor checkpoints")
    f.add_argument("--out", required=True)
    f.add_argument("--seed", type=int, default=None, help="seed for the fresh fusion head")
    f.add_argument("--head-hidden", type=int, default=64)

    e = sub.add_parser("evaluate", help="greedy rollouts of a saved actor")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--env", required=True, help=f"one of {', '.join(variant_names())}")
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--seed", type=int, default=None)
    e.add_argument("--gamma", type=float, default=0.9)
    e.add_argument("--reward", choices=("sparse", "mgr"), default="sparse")

    b = sub.add_parser("benchmark", help="run a method x reward x env x seed matrix")
    b.add_argument("--config", required=True, help="matrix config file")
    b.add_argument("--out-dir", required=True)
    return p


def cmd_train(args) -> int:
    kv = load_config_file(args.config)
    exp = experiment_from_dict(kv)
    seed = default_seed(args.seed)
    metrics_path = args.metrics or (args.out + ".metrics.csv")
    _, rows = train(exp, seed, ckpt_path=args.out, metrics_path=metrics_path)
    final = rows[-1].success_rate if rows else float("nan")
    print(f"trained {exp.method}/{exp.reward_mode} on {exp.env_variant} seed {seed}: "
          f"final success rate {final:.3f}")
    print(f"checkpoint: {args.out}")
    print(f"metrics: {metrics_path}")
    return 0


def cmd_fuse(args) -> int:
    if len(args.inputs) < 2:
        raise ConfigError("fuse needs at least two input checkpoints")
    ckpts = [load_checkpoint(p) for p in args.inputs]
    primitives = [extract_first_layer(c) for c in ckpts]
    d = primitives[0].feature_dim
    action_dim = ckpts[0].arch["layer_dims"][-1]
    rng = np.random.default_rng(default_seed(args.seed))
    head = MLP([3 * d, args.head_hidden, action_dim], ["relu", "tanh"], rng=rng)
    policy = FusionPolicy(primitives, head)
    meta = {"fused_from": list(args.inputs)}
    encodings = {c.meta.get("features") for c in ckpts}
    if len(encodings) > 1:
        raise ConfigError(f"input checkpoints use different input encodings: {sorted(map(str, encodings))}")
    encoding = encodings.pop()
    if encoding is not None:
        meta["features"] = encoding
    save_checkpoint(args.out, Checkpoint.from_fusion(policy, meta))
    print(f"fused {len(primitives)} primitives (feature width {d}) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    seed = default_seed(args.seed)
    sr, ret = evaluate(
        ckpt,
        args.env,
        args.episodes,
        seed,
        gamma=args.gamma,
        reward_mode=args.reward,
    )
    print(f"success_rate={sr:.4f} avg_return={ret:.4f} "
          f"({args.episodes} episodes on {args.env}, seed {seed})")
    return 0


def expand_matrix(kv: dict[str, str]) -> list[ExperimentConfig]:
    """Expand methods/rewards/envs list keys into per-cell configs.

    The primitives key names a pool of actor checkpoints: transfer uses the
    first, dmf2 the first two, dmf3 the first three.
    """
    skip = ("methods", "rewards", "envs", "primitives")
    base = experiment_from_dict({k: v for k, v in kv.items() if k not in skip})
    methods = [m.strip() for m in kv.get("methods", base.method).split(",") if m.strip()]
    rewards = [r.strip() for r in kv.get("rewards", base.reward_mode).split(",") if r.strip()]
    envs = [e.strip() for e in kv.get("envs", base.env_variant).split(",") if e.strip()]
    pool = tuple(p.strip() for p in kv.get("primitives", "").split(",") if p.strip())
    need = {"tfs": 0, "transfer": 1, "dmf2": 2, "dmf3": 3}
    matrix = []
    for env in envs:
        for method in methods:
            n = need.get(method)
            if n is None:
                raise ConfigError(f"unknown method {method!r} in matrix")
            if len(pool) < n:
                raise ConfigError(f"method {method} needs {n} primitives, pool has {len(pool)}")
            for reward in rewards:
                matrix.append(
                    replace(
                        base,
                        env_variant=env,
                        method=method,
                        reward_mode=reward,
                        primitive_checkpoints=pool[:n],
                    )
                )
    return matrix


def cmd_benchmark(args) -> int:
    kv = load_config_file(args.config)
    matrix = expand_matrix(kv)
    results = benchmark(matrix, args.out_dir)
    failures = 0
    for res in results:
        mark = "FAILED" if res.failed else "ok"
        print(f"{res.name}: {mark}" + (f" ({len(res.failed)} seed(s) failed)" if res.failed else ""))
        failures += len(res.failed)
    print(f"summary written to {os.path.join(args.out_dir, 'summary.txt')}")
    return 1 if failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "train": cmd_train,
        "fuse": cmd_fuse,
        "evaluate": cmd_evaluate,
        "benchmark": cmd_benchmark,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, CheckpointError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
