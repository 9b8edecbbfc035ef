"""Flat key=value experiment configuration.

Config files are plain text: one dotted `key=value` per line, `#` comments,
blank lines ignored. Everything has a default, so an empty file is a valid
experiment. The same format drives single runs and benchmark matrices
(where `methods`, `rewards`, `envs`, and `seeds` hold comma-separated lists).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ddpg import AgentConfig
from .rewards import RewardWeights

METHODS = ("tfs", "transfer", "dmf2", "dmf3")
REWARD_MODES = ("sparse", "mgr")

PRIMITIVES_REQUIRED = {"tfs": 0, "transfer": 1, "dmf2": 2, "dmf3": 3}


class ConfigError(ValueError):
    """Experiment configuration is malformed or inconsistent."""


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key in {raw!r}")
        out[key] = value.strip()
    return out


def load_config_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _get(kv: dict[str, str], key: str, cast, default):
    if key not in kv:
        return default
    try:
        return cast(kv[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {key}: {kv[key]!r} ({e})") from e


def _int_list(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.split(",") if x.strip())


def _str_list(raw: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in raw.split(",") if x.strip())


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One training cell: method x reward mode x environment, multi-seed."""

    env_variant: str = "push-env-1"
    method: str = "tfs"
    reward_mode: str = "sparse"
    primitive_checkpoints: tuple[str, ...] = ()
    episodes: int = 200
    eval_every: int = 50
    eval_episodes: int = 50
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    output_path: str = "metrics.csv"
    train_steps_per_episode: int = 40
    replay_capacity: int = 1000
    her_k: int = 4
    her_strategy: str = "future"
    freeze_primitives: bool = True
    pre_activation_features: bool = False
    agent: AgentConfig = field(default_factory=AgentConfig)
    mgr: RewardWeights = field(default_factory=RewardWeights)
    env_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"unknown reward mode {self.reward_mode!r}, expected one of {REWARD_MODES}")
        need = PRIMITIVES_REQUIRED[self.method]
        if len(self.primitive_checkpoints) != need:
            raise ConfigError(
                f"method {self.method} requires exactly {need} primitive checkpoints, "
                f"got {len(self.primitive_checkpoints)}"
            )
        if self.episodes < 0:
            raise ConfigError(f"episodes must be non-negative, got {self.episodes}")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigError("eval_every and eval_episodes must be positive")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def with_method(self, method: str, primitives: tuple[str, ...]) -> "ExperimentConfig":
        return replace(self, method=method, primitive_checkpoints=primitives)


def agent_config_from_dict(kv: dict[str, str]) -> AgentConfig:
    base = AgentConfig()
    clip = _get(kv, "agent.clip_norm", float, base.clip_norm)
    if clip is not None and clip <= 0:
        clip = None
    return AgentConfig(
        gamma=_get(kv, "agent.gamma", float, base.gamma),
        tau=_get(kv, "agent.tau", float, base.tau),
        lr_actor=_get(kv, "agent.lr_actor", float, base.lr_actor),
        lr_critic=_get(kv, "agent.lr_critic", float, base.lr_critic),
        noise_std=_get(kv, "agent.noise_std", float, base.noise_std),
        batch_size=_get(kv, "agent.batch_size", int, base.batch_size),
        action_dim=_get(kv, "agent.action_dim", int, base.action_dim),
        obs_dim=_get(kv, "agent.obs_dim", int, base.obs_dim),
        goal_dim=_get(kv, "agent.goal_dim", int, base.goal_dim),
        hidden_dims=_get(kv, "agent.hidden_dims", _int_list, base.hidden_dims),
        optimizer=_get(kv, "agent.optimizer", str, base.optimizer),
        clip_norm=clip,
    )


def reward_weights_from_dict(kv: dict[str, str]) -> RewardWeights:
    base = RewardWeights()
    alpha = (
        _get(kv, "mgr.alpha1", float, base.alpha[0]),
        _get(kv, "mgr.alpha2", float, base.alpha[1]),
        _get(kv, "mgr.alpha3", float, base.alpha[2]),
    )
    if "mgr.alpha4" in kv:
        alpha = alpha + (_get(kv, "mgr.alpha4", float, 1.0),)
    return RewardWeights(
        alpha=alpha,
        eta=_get(kv, "mgr.eta", float, base.eta),
        mu=_get(kv, "mgr.mu", float, base.mu),
    )


def env_overrides_from_dict(kv: dict[str, str]) -> dict:
    """Pick up env.* keys as WorldConfig field overrides."""
    casts = {
        "friction": float,
        "object_shape": str,
        "eta": float,
        "mu": float,
        "episode_len": int,
        "noise_std": float,
    }
    out: dict = {}
    for name, cast in casts.items():
        key = f"env.{name}"
        if key in kv:
            out[name] = _get(kv, key, cast, None)
    if "env.obstacle" in kv:
        parts = [p for p in kv["env.obstacle"].split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigError(f"env.obstacle needs two comma-separated numbers, got {kv['env.obstacle']!r}")
        out["obstacle"] = (float(parts[0]), float(parts[1]))
    if "env.workspace" in kv:
        parts = [p for p in kv["env.workspace"].split(",") if p.strip()]
        if len(parts) != 4:
            raise ConfigError(f"env.workspace needs four comma-separated numbers, got {kv['env.workspace']!r}")
        out["workspace"] = tuple(float(p) for p in parts)
    return out


def experiment_from_dict(kv: dict[str, str]) -> ExperimentConfig:
    base = ExperimentConfig()
    return ExperimentConfig(
        env_variant=_get(kv, "env", str, base.env_variant),
        method=_get(kv, "method", str, base.method),
        reward_mode=_get(kv, "reward", str, base.reward_mode),
        primitive_checkpoints=_get(kv, "primitives", _str_list, base.primitive_checkpoints),
        episodes=_get(kv, "episodes", int, base.episodes),
        eval_every=_get(kv, "eval_every", int, base.eval_every),
        eval_episodes=_get(kv, "eval_episodes", int, base.eval_episodes),
        seeds=_get(kv, "seeds", _int_list, base.seeds),
        output_path=_get(kv, "out", str, base.output_path),
        train_steps_per_episode=_get(kv, "train_steps_per_episode", int, base.train_steps_per_episode),
        replay_capacity=_get(kv, "replay.capacity", int, base.replay_capacity),
        her_k=_get(kv, "her.k", int, base.her_k),
        her_strategy=_get(kv, "her.strategy", str, base.her_strategy),
        freeze_primitives=_get(kv, "fusion.freeze_primitives", _bool, base.freeze_primitives),
        pre_activation_features=_get(kv, "fusion.pre_activation", _bool, base.pre_activation_features),
        agent=agent_config_from_dict(kv),
        mgr=reward_weights_from_dict(kv),
        env_overrides=env_overrides_from_dict(kv),
    )


def load_experiment(path) -> ExperimentConfig:
    return experiment_from_dict(load_config_file(path))
