"""Episode-organized replay buffer with hindsight goal relabeling.

Episodes of fixed length are kept in a FIFO ring. Sampling relabels each
drawn transition with probability k/(k+1): the desired goal is replaced by
the goal actually achieved at a uniformly chosen step from the remainder of
the same episode ("future" strategy), and reward/done are recomputed against
the substituted goal. Observations and actions are never touched.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .numkit import StateError
from .pushworld import Distances

# reward_fn(next_achieved_goal, substituted_goal, stored_distances) -> reward
RewardFn = Callable[[np.ndarray, np.ndarray, Distances], float]


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    achieved_goal: np.ndarray
    next_achieved_goal: np.ndarray
    desired_goal: np.ndarray
    done: bool
    # distances used when the stored reward was computed; goal-independent
    # terms (d_oe, d_es) are reused when relabeling recomputes the reward
    distances: Distances


@dataclass(frozen=True)
class HERConfig:
    reward_fn: RewardFn
    k: int = 4
    strategy: str = "future"
    eta: float = 0.05  # success threshold for the recomputed done flag

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if self.strategy != "future":
            raise ValueError(f"unsupported relabel strategy {self.strategy!r}")


class EpisodeStore:
    """Ring buffer of complete episodes with its own generator.

    episode_len is the environment's horizon: stored episodes are at most
    that long, and shorter only when the task ended early in success.
    """

    def __init__(self, capacity: int, episode_len: int, seed: int):
        if capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {capacity}")
        if episode_len < 1:
            raise ValueError(f"episode_len must be at least 1, got {episode_len}")
        self.capacity = capacity
        self.episode_len = episode_len
        self.episodes: deque[list[Transition]] = deque(maxlen=capacity)
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.episodes)

    def store_episode(self, episode: list[Transition]) -> None:
        if not 1 <= len(episode) <= self.episode_len:
            raise ValueError(
                f"episode has {len(episode)} transitions, store expects 1..{self.episode_len}"
            )
        self.episodes.append(list(episode))

    def sample_batch(self, batch_size: int, her: HERConfig) -> list[Transition]:
        """Draw batch_size transitions, each independently hindsight-relabeled.

        Relabeling only rewrites desired_goal, reward, and done; the goal is
        taken from the next_achieved_goal of a uniform step >= the sampled
        one, so the final transition of an episode can only be relabeled
        with the episode's final achieved goal.
        """
        if not self.episodes:
            raise StateError("cannot sample from an empty store")
        if batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {batch_size}")
        relabel_p = her.k / (her.k + 1.0)
        out: list[Transition] = []
        for _ in range(batch_size):
            ep = self.episodes[int(self.rng.integers(len(self.episodes)))]
            t = int(self.rng.integers(len(ep)))
            tr = ep[t]
            if self.rng.random() < relabel_p:
                j = int(self.rng.integers(t, len(ep)))
                goal = ep[j].next_achieved_goal.copy()
                d_new = float(np.linalg.norm(tr.next_achieved_goal - goal))
                tr = replace(
                    tr,
                    desired_goal=goal,
                    reward=her.reward_fn(tr.next_achieved_goal, goal, tr.distances),
                    done=d_new <= her.eta,
                )
            out.append(tr)
        return out
