"""Actor-critic agent: Q-learning critic targets, deterministic policy
gradient actor updates chained through the critic's input gradient.

The actor maps [obs || desired_goal] to a tanh-bounded action; the critic
maps [obs || desired_goal || action] to a scalar value. Lagged target copies
of both provide the bootstrap term and are pulled toward the online nets by
a soft update. The actor may be a plain MLP or a FusionPolicy; both expose
the same forward/backward/parameters interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numkit
from .numkit import MLP, Adam, SGD, copy_params
from .pushworld import Observation
from .replay import Transition


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    tau: float = 0.05
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    noise_std: float = 0.3       # exploration noise in normalized action units
    batch_size: int = 128
    action_dim: int = 2
    obs_dim: int = 13
    goal_dim: int = 2
    hidden_dims: tuple[int, ...] = (64, 64)
    optimizer: str = "adam"      # "sgd" | "adam"
    clip_norm: float | None = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if self.lr_actor < 0.0 or self.lr_critic < 0.0:
            raise ValueError("learning rates must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _make_optimizer(net, kind: str, lr: float, clip_norm: float | None):
    if kind == "adam":
        return Adam(net, lr, clip_norm=clip_norm)
    return SGD(net, lr, clip_norm=clip_norm)


class Agent:
    """One online/target actor-critic pair plus its optimizers.

    An optional feature_map callable turns raw (obs batch, goal batch) pairs
    into the network input; by default the two are simply concatenated. The
    map must be a fixed (non-learned) function so that checkpointed actors
    can be replayed by rebuilding the same map.
    """

    def __init__(self, config: AgentConfig, actor, critic: MLP, feature_map=None):
        self.config = config
        self.feature_map = feature_map
        in_dim = actor.layer_dims[0] if isinstance(actor, MLP) else actor.input_dim
        self.feature_dim = in_dim
        if feature_map is None and in_dim != config.obs_dim + config.goal_dim:
            raise numkit.DimensionError(
                f"actor expects input {in_dim}, config implies {config.obs_dim + config.goal_dim}"
            )
        if critic.layer_dims[0] != in_dim + config.action_dim:
            raise numkit.DimensionError(
                f"critic expects input {critic.layer_dims[0]}, actor implies {in_dim + config.action_dim}"
            )
        self.actor = actor
        self.critic = critic
        self.target_actor = actor.clone()
        self.target_critic = critic.clone()
        self.actor_opt = _make_optimizer(actor, config.optimizer, config.lr_actor, config.clip_norm)
        self.critic_opt = _make_optimizer(critic, config.optimizer, config.lr_critic, config.clip_norm)

    @classmethod
    def fresh(
        cls,
        config: AgentConfig,
        rng: np.random.Generator,
        feature_map=None,
        feature_dim: int | None = None,
    ) -> "Agent":
        """Seeded agent with plain MLP actor (tanh head) and critic."""
        in_dim = feature_dim if feature_dim is not None else config.obs_dim + config.goal_dim
        actor = MLP(
            [in_dim, *config.hidden_dims, config.action_dim],
            ["relu"] * len(config.hidden_dims) + ["tanh"],
            rng=rng,
        )
        critic = MLP([in_dim + config.action_dim, *config.hidden_dims, 1], rng=rng)
        return cls(config, actor, critic, feature_map=feature_map)

    @classmethod
    def with_actor(
        cls,
        config: AgentConfig,
        actor,
        rng: np.random.Generator,
        feature_map=None,
    ) -> "Agent":
        """Agent around a pre-built actor (e.g. a FusionPolicy) and a fresh critic."""
        in_dim = actor.layer_dims[0] if isinstance(actor, MLP) else actor.input_dim
        critic = MLP([in_dim + config.action_dim, *config.hidden_dims, 1], rng=rng)
        return cls(config, actor, critic, feature_map=feature_map)

    def _features(self, obs_batch: np.ndarray, goal_batch: np.ndarray) -> np.ndarray:
        if self.feature_map is None:
            return np.concatenate([obs_batch, goal_batch], axis=1)
        return self.feature_map(obs_batch, goal_batch)

    # -- acting -------------------------------------------------------------

    def select_action(
        self,
        obs: Observation,
        explore: bool = False,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        cfg = self.config
        if obs.vector.shape != (cfg.obs_dim,):
            raise ValueError(f"observation has shape {obs.vector.shape}, expected ({cfg.obs_dim},)")
        x = self._features(obs.vector.reshape(1, -1), obs.desired_goal.reshape(1, -1))
        action = self.actor.forward(x)[0]
        if explore and cfg.noise_std > 0.0:
            if rng is None:
                raise ValueError("exploration requires a generator")
            action = action + rng.normal(0.0, cfg.noise_std, size=cfg.action_dim)
        return np.clip(action, -1.0, 1.0)

    # -- learning -------------------------------------------------------------

    def train_step(self, batch: list[Transition]) -> tuple[float, float]:
        """One critic update then one actor update on the given batch.

        Returns the critic's pre-update MSE against its bootstrap targets and
        the mean Q of the actor's actions (measured before the actor update).
        """
        cfg = self.config
        if not batch:
            raise ValueError("train_step needs a non-empty batch")
        if len(batch) != cfg.batch_size:
            raise ValueError(f"batch has {len(batch)} transitions, config expects {cfg.batch_size}")

        obs = np.stack([t.obs for t in batch])
        act = np.stack([t.action for t in batch])
        rew = np.array([t.reward for t in batch])
        next_obs = np.stack([t.next_obs for t in batch])
        goal = np.stack([t.desired_goal for t in batch])
        done = np.array([1.0 if t.done else 0.0 for t in batch])
        b = len(batch)

        # critic: regress onto r + gamma * (1 - done) * Q'(s', pi'(s'))
        next_in = self._features(next_obs, goal)
        next_act = self.target_actor.forward(next_in)
        q_next = self.target_critic.forward(np.concatenate([next_in, next_act], axis=1))[:, 0]
        y = rew + cfg.gamma * (1.0 - done) * q_next

        actor_in = self._features(obs, goal)
        q = self.critic.forward(np.concatenate([actor_in, act], axis=1))[:, 0]
        critic_loss = float(np.mean((q - y) ** 2))
        self.critic.zero_grads()
        self.critic.backward(((q - y) * 2.0 / b).reshape(-1, 1))
        self.critic_opt.step()

        # actor: ascend mean Q(s, pi(s)) through the critic's input gradient
        pi = self.actor.forward(actor_in)
        q_pi = self.critic.forward(np.concatenate([actor_in, pi], axis=1))
        actor_objective = float(np.mean(q_pi))
        self.critic.zero_grads()
        d_input = self.critic.backward(np.full((b, 1), -1.0 / b))
        self.critic.zero_grads()  # discard critic grads from the chaining pass
        d_action = d_input[:, self.feature_dim :]
        self.actor.zero_grads()
        self.actor.backward(d_action)
        self.actor_opt.step()

        return critic_loss, actor_objective

    def soft_update(self) -> None:
        tau = self.config.tau
        copy_params(self.actor, self.target_actor, tau)
        copy_params(self.critic, self.target_critic, tau)
