"""Experiment orchestration: train agents in named environment variants,
evaluate success rate and discounted return at episode checkpoints, and run
benchmark matrices into per-run CSVs plus a summary table.

Every run is driven entirely by (config, seed): network init, environment
resets, exploration noise, distance noise, and replay sampling each draw
from generators spawned off the seed, so identical inputs reproduce
identical metrics. Only the wall-time column depends on the real clock,
which is injectable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .checkpoint import Checkpoint, KindError, load_checkpoint, save_checkpoint
from .config import ConfigError, ExperimentConfig
from .ddpg import Agent
from .fusion import FusionPolicy, extract_first_layer
from .numkit import MLP
from .pushworld import MAX_STEP, PushWorld, WorldConfig, is_success
from .replay import EpisodeStore, HERConfig, Transition
from .rewards import RewardWeights, mgr_push, sparse_reward

CRITIC_SUFFIX = ".critic"

# feature-map convention recorded in checkpoint metadata so saved actors can
# be replayed with the input encoding they were trained on
FEATURES_KEY = "features"
FEATURES_REL = "pushworld_rel_v1"
REL_FEATURE_DIM = 21

# Named environment variants: three base worlds supply primitive training,
# env-1/2/3 are the changed-dynamics targets (friction drop, object shape
# change, obstacle added).
_VARIANT_FIELDS = {
    "base-a": {"friction": 0.9, "object_shape": "box"},
    "base-b": {"friction": 0.7, "object_shape": "box"},
    "base-c": {"friction": 0.9, "object_shape": "cylinder"},
    "env-1": {"friction": 0.5, "object_shape": "box"},
    "env-2": {"friction": 0.9, "object_shape": "flat_box"},
    "env-3": {"friction": 0.9, "object_shape": "box", "obstacle": (0.3, 0.3)},
}


def variant_names() -> list[str]:
    return [f"{task}-{v}" for task in ("push", "slide") for v in _VARIANT_FIELDS]


def world_config(variant: str, overrides: dict | None = None) -> WorldConfig:
    task, _, rest = variant.partition("-")
    if task not in ("push", "slide") or rest not in _VARIANT_FIELDS:
        raise ConfigError(f"unknown environment variant {variant!r}, expected one of {variant_names()}")
    fields = dict(_VARIANT_FIELDS[rest])
    fields["task"] = task
    fields.update(overrides or {})
    return WorldConfig(**fields)


@dataclass(frozen=True)
class MetricsRow:
    seed: int
    episode: int
    success_rate: float
    avg_return: float
    wall_time_s: float


CSV_HEADER = "seed,episode,success_rate,avg_return,wall_time_s"


def write_metrics(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(f"{r.seed},{r.episode},{r.success_rate!r},{r.avg_return!r},{r.wall_time_s:.3f}\n")


def read_metrics(path) -> list[MetricsRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ConfigError(f"unexpected metrics header {header!r}")
        for line in fh:
            if not line.strip():
                continue
            seed, episode, sr, ret, wt = line.strip().split(",")
            rows.append(MetricsRow(int(seed), int(episode), float(sr), float(ret), float(wt)))
    return rows


# -- agent input features ----------------------------------------------------


def relative_features(wcfg: WorldConfig):
    """Fixed input encoding for pushworld agents: normalized absolute state
    plus relative geometry (object-ee, goal-object, obstacle-ee offsets and
    the two task distances).

    Positions are centered on the workspace and scaled by its half-width,
    velocities by the per-step travel. The goal features come from the goal
    argument (not the observation's goal slot) so hindsight-substituted
    goals are encoded correctly. Returns (map, feature_dim); the map takes
    (obs batch, goal batch) and is a pure function of the world config, so
    checkpointed actors can rebuild it at evaluation time.
    """
    xmin, ymin, xmax, ymax = wcfg.workspace
    ctr = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
    half = max((xmax - xmin) / 2.0, (ymax - ymin) / 2.0)
    obstacle = np.asarray(wcfg.obstacle, dtype=np.float64) if wcfg.obstacle is not None else None

    def fmap(obs: np.ndarray, goal: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        goal = np.atleast_2d(np.asarray(goal, dtype=np.float64))
        ee = obs[:, 0:2]
        ee_vel = obs[:, 2:4]
        obj = obs[:, 4:6]
        theta = obs[:, 6:7]
        obj_vel = obs[:, 7:9]
        b = obs.shape[0]
        if obstacle is not None:
            obst_abs = np.broadcast_to((obstacle - ctr) / half, (b, 2))
            obst_rel = (obstacle - ee) / half
        else:
            obst_abs = np.zeros((b, 2))
            obst_rel = np.zeros((b, 2))
        return np.concatenate(
            [
                (ee - ctr) / half,
                ee_vel / MAX_STEP,
                (obj - ctr) / half,
                theta / 3.0,
                obj_vel / MAX_STEP,
                (goal - ctr) / half,
                obst_abs,
                (obj - ee) / half,
                (goal - obj) / half,
                np.linalg.norm(obj - ee, axis=1, keepdims=True) / half,
                np.linalg.norm(goal - obj, axis=1, keepdims=True) / half,
                obst_rel,
            ],
            axis=1,
        )

    return fmap, REL_FEATURE_DIM


def feature_map_for(ckpt: Checkpoint, wcfg: WorldConfig):
    """Rebuild the input encoding a saved actor was trained with."""
    if ckpt.meta.get(FEATURES_KEY) == FEATURES_REL:
        fmap, _ = relative_features(wcfg)
        return fmap
    return None


# -- reward plumbing ---------------------------------------------------------


def step_reward(distances, reward_mode: str, weights: RewardWeights) -> float:
    if reward_mode == "mgr":
        return mgr_push(distances, weights)
    return sparse_reward(distances.d_og, weights.eta)


def relabel_reward_fn(reward_mode: str, weights: RewardWeights):
    """Reward recomputation for hindsight-substituted goals.

    The goal-distance term is recomputed noiselessly from the achieved/
    substituted pair; the ee and obstacle terms reuse the stored distances
    since they do not depend on the goal.
    """

    def fn(achieved: np.ndarray, goal: np.ndarray, stored) -> float:
        d_og = float(np.linalg.norm(achieved - goal))
        if reward_mode == "mgr":
            return mgr_push(stored.replace(d_og=d_og), weights)
        return sparse_reward(d_og, weights.eta)

    return fn


# -- acting / evaluation -------------------------------------------------------


def greedy_action(actor, obs, fmap=None) -> np.ndarray:
    if fmap is None:
        x = np.concatenate([obs.vector, obs.desired_goal]).reshape(1, -1)
    else:
        x = fmap(obs.vector.reshape(1, -1), obs.desired_goal.reshape(1, -1))
    return np.clip(actor.forward(x)[0], -1.0, 1.0)


def rollout_greedy(actor, world: PushWorld, reset_seed: int, gamma: float,
                   reward_mode: str, weights: RewardWeights, fmap=None) -> tuple[bool, float]:
    """One noiseless greedy episode; returns (success, discounted return)."""
    state, obs = world.reset(reset_seed)
    ret = 0.0
    discount = 1.0
    done = False
    d = None
    while not done:
        action = greedy_action(actor, obs, fmap)
        state, obs, d, done = world.step(state, action)
        ret += discount * step_reward(d, reward_mode, weights)
        discount *= gamma
    return is_success(d.d_og, world.config.eta), ret


def evaluate_actor(
    actor,
    world: PushWorld,
    n_episodes: int,
    seed: int,
    gamma: float = 0.9,
    reward_mode: str = "sparse",
    weights: RewardWeights | None = None,
    fmap=None,
) -> tuple[float, float]:
    if weights is None:
        weights = RewardWeights(eta=world.config.eta, mu=world.config.mu)
    reset_rng = np.random.default_rng(seed)
    reset_seeds = reset_rng.integers(0, 2**62, size=n_episodes)
    successes = 0
    total_return = 0.0
    for rs in reset_seeds:
        ok, ret = rollout_greedy(actor, world, int(rs), gamma, reward_mode, weights, fmap)
        successes += int(ok)
        total_return += ret
    return successes / n_episodes, total_return / n_episodes


def evaluate(
    ckpt: Checkpoint,
    env_variant: str,
    n_episodes: int,
    seed: int,
    gamma: float = 0.9,
    reward_mode: str = "sparse",
    weights: RewardWeights | None = None,
    env_overrides: dict | None = None,
) -> tuple[float, float]:
    """Greedy rollouts of a saved actor in a named variant."""
    if ckpt.kind == "critic":
        raise KindError("evaluate needs an actor checkpoint, got a critic")
    world = PushWorld(world_config(env_variant, env_overrides))
    fmap = feature_map_for(ckpt, world.config)
    return evaluate_actor(ckpt.to_actor(), world, n_episodes, seed, gamma, reward_mode, weights, fmap)


# -- agent construction per method ---------------------------------------------


def build_agent(exp: ExperimentConfig, rng: np.random.Generator, fmap, fdim: int) -> Agent:
    cfg = exp.agent
    if exp.method == "tfs":
        return Agent.fresh(cfg, rng, feature_map=fmap, feature_dim=fdim)

    if exp.method == "transfer":
        actor_ckpt = load_checkpoint(exp.primitive_checkpoints[0])
        if actor_ckpt.kind != "mlp_actor":
            raise KindError(f"transfer warm start needs an mlp_actor, got {actor_ckpt.kind!r}")
        actor = actor_ckpt.to_mlp()
        critic_path = exp.primitive_checkpoints[0] + CRITIC_SUFFIX
        try:
            critic = load_checkpoint(critic_path).to_mlp()
        except FileNotFoundError:
            critic = None
        if critic is not None:
            return Agent(cfg, actor, critic, feature_map=fmap)
        return Agent.with_actor(cfg, actor, rng, feature_map=fmap)

    # dmf2 / dmf3: first layers from the primitives, fresh head + critic
    primitives = [extract_first_layer(load_checkpoint(p)) for p in exp.primitive_checkpoints]
    d = primitives[0].feature_dim
    head_hidden = cfg.hidden_dims[-1] if cfg.hidden_dims else 64
    head = MLP([3 * d, head_hidden, cfg.action_dim], ["relu", "tanh"], rng=rng)
    policy = FusionPolicy(
        primitives,
        head,
        freeze_primitives=exp.freeze_primitives,
        pre_activation_features=exp.pre_activation_features,
    )
    return Agent.with_actor(cfg, policy, rng, feature_map=fmap)


def agent_checkpoints(agent: Agent, exp: ExperimentConfig, seed: int, episodes_run: int) -> tuple[Checkpoint, Checkpoint]:
    meta = {
        "env": exp.env_variant,
        "method": exp.method,
        "reward_mode": exp.reward_mode,
        "episodes": episodes_run,
        "seed": seed,
    }
    if agent.feature_map is not None:
        meta[FEATURES_KEY] = FEATURES_REL
    if isinstance(agent.actor, FusionPolicy):
        actor_ckpt = Checkpoint.from_fusion(agent.actor, meta)
    else:
        actor_ckpt = Checkpoint.from_mlp(agent.actor, "mlp_actor", meta)
    critic_ckpt = Checkpoint.from_mlp(agent.critic, "critic", meta)
    return actor_ckpt, critic_ckpt


# -- training ----------------------------------------------------------------


def train(
    exp: ExperimentConfig,
    seed: int,
    ckpt_path=None,
    metrics_path=None,
    clock=None,
) -> tuple[Checkpoint, list[MetricsRow]]:
    """Run one seeded training run; returns the actor checkpoint and metrics.

    When paths are given, the actor is saved at ckpt_path, the critic at
    ckpt_path + ".critic", and the metrics CSV at metrics_path.
    """
    if clock is None:
        clock = time.perf_counter
    world = PushWorld(world_config(exp.env_variant, exp.env_overrides))
    wcfg = world.config

    ss = np.random.SeedSequence(seed)
    init_ss, explore_ss, replay_ss, reset_ss, eval_ss = ss.spawn(5)
    init_rng = np.random.default_rng(init_ss)
    explore_rng = np.random.default_rng(explore_ss)
    reset_rng = np.random.default_rng(reset_ss)
    eval_rng = np.random.default_rng(eval_ss)

    fmap, fdim = relative_features(wcfg)
    agent = build_agent(exp, init_rng, fmap, fdim)
    weights = exp.mgr
    store = EpisodeStore(exp.replay_capacity, wcfg.episode_len, int(np.random.default_rng(replay_ss).integers(2**62)))
    her = HERConfig(
        reward_fn=relabel_reward_fn(exp.reward_mode, weights),
        k=exp.her_k,
        strategy=exp.her_strategy,
        eta=wcfg.eta,
    )

    t0 = clock()
    rows: list[MetricsRow] = []
    for episode in range(1, exp.episodes + 1):
        state, obs = world.reset(int(reset_rng.integers(0, 2**62)))
        transitions: list[Transition] = []
        done = False
        while not done:
            action = agent.select_action(obs, explore=True, rng=explore_rng)
            state, next_obs, d_clean, done = world.step(state, action)
            noisy = world.distances(state, noisy=wcfg.noise_std > 0.0, rng=explore_rng)
            transitions.append(
                Transition(
                    obs=obs.vector,
                    action=action,
                    reward=step_reward(noisy, exp.reward_mode, weights),
                    next_obs=next_obs.vector,
                    achieved_goal=obs.achieved_goal,
                    next_achieved_goal=next_obs.achieved_goal,
                    desired_goal=obs.desired_goal,
                    done=is_success(d_clean.d_og, wcfg.eta),
                    distances=noisy,
                )
            )
            obs = next_obs
        store.store_episode(transitions)

        for _ in range(exp.train_steps_per_episode):
            batch = store.sample_batch(exp.agent.batch_size, her)
            agent.train_step(batch)
            agent.soft_update()

        if episode % exp.eval_every == 0:
            sr, ret = evaluate_actor(
                agent.actor,
                world,
                exp.eval_episodes,
                int(eval_rng.integers(0, 2**62)),
                gamma=exp.agent.gamma,
                reward_mode=exp.reward_mode,
                weights=weights,
                fmap=fmap,
            )
            rows.append(MetricsRow(seed, episode, sr, ret, clock() - t0))

    actor_ckpt, critic_ckpt = agent_checkpoints(agent, exp, seed, exp.episodes)
    if ckpt_path is not None:
        save_checkpoint(ckpt_path, actor_ckpt)
        save_checkpoint(str(ckpt_path) + CRITIC_SUFFIX, critic_ckpt)
    if metrics_path is not None:
        write_metrics(metrics_path, rows)
    return actor_ckpt, rows


# -- benchmark matrices ----------------------------------------------------------


@dataclass
class CellResult:
    name: str
    exp: ExperimentConfig
    rows: list[MetricsRow]
    failed: list[tuple[int, str]]  # (seed, error)


def cell_name(exp: ExperimentConfig) -> str:
    return f"{exp.env_variant}_{exp.method}_{exp.reward_mode}"


def benchmark(matrix: list[ExperimentConfig], out_dir, clock=None) -> list[CellResult]:
    """Run every (config, seed) cell; write per-run CSVs and summary tables.

    A failing run marks its cell FAILED in the summary but does not stop the
    others; callers should treat any failure as a nonzero exit.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    results: list[CellResult] = []
    for exp in matrix:
        name = cell_name(exp)
        rows: list[MetricsRow] = []
        failed: list[tuple[int, str]] = []
        for seed in exp.seeds:
            run = f"{name}_seed{seed}"
            try:
                _, run_rows = train(
                    exp,
                    seed,
                    ckpt_path=os.path.join(out_dir, run + ".ckpt"),
                    metrics_path=os.path.join(out_dir, run + ".csv"),
                    clock=clock,
                )
                rows.extend(run_rows)
            except Exception as e:  # noqa: BLE001 - cell isolation is the contract
                failed.append((seed, f"{type(e).__name__}: {e}"))
        results.append(CellResult(name=name, exp=exp, rows=rows, failed=failed))

    summary_csv, summary_txt = summarize(results)
    with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
        fh.write(summary_csv)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(summary_txt)
    return results


def mean_success_at(rows: list[MetricsRow], episode: int) -> float | None:
    vals = [r.success_rate for r in rows if r.episode == episode]
    if not vals:
        return None
    return sum(vals) / len(vals)


def summarize(results: list[CellResult]) -> tuple[str, str]:
    """Mean success rate per cell at each episode checkpoint, as CSV + text."""
    checkpoints = sorted({r.episode for res in results for r in res.rows})
    cols = ["cell", "seeds"] + [f"sr@{c}" for c in checkpoints] + ["status"]
    table: list[list[str]] = [cols]
    for res in results:
        n_seeds = len(res.exp.seeds) - len(res.failed)
        status = "FAILED" if res.failed else "ok"
        row = [res.name, str(n_seeds)]
        for c in checkpoints:
            m = mean_success_at(res.rows, c)
            row.append("" if m is None else f"{m:.3f}")
        row.append(status)
        table.append(row)

    csv_text = "\n".join(",".join(r) for r in table) + "\n"
    widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
    txt = "\n".join("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in table) + "\n"
    return csv_text, txt
