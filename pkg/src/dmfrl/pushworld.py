"""Deterministic planar pushing/sliding environment family.

A quasi-static 2-D proxy for tabletop manipulation: a point end-effector
moves on a bounded plane and interacts with a single object that must reach
a goal position. Surface friction, object shape, and an optional obstacle
parameterize the transition dynamics, giving a family of environments that
share one observation space. The obstacle penalizes proximity through the
reward only; it does not block motion.

All randomness is confined to reset() placement and to the optional distance
noise, both driven by explicitly seeded generators, so a (config, seed,
action-sequence) triple replays bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .numkit import StateError

TASKS = ("push", "slide")

# footprint radius (m), friction multiplier applied to the surface coefficient
SHAPES = {
    "box": (0.05, 1.0),
    "cylinder": (0.045, 1.1),
    "flat_box": (0.06, 0.8),
}

MAX_STEP = 0.03          # ee displacement per unit action, m
CONTACT_PAD = 0.02       # contact radius = footprint radius + pad, m
SLIDE_DECAY_RATE = 0.2   # obj_vel decay factor is (1 - rate * friction)
GOAL_MAX_DIST = 0.35     # goal sampled within this distance of the object, m
OBS_DIM = 13
GOAL_DIM = 2
ACTION_DIM = 2

_RESET_ATTEMPTS = 1000


class ConfigError(ValueError):
    """Environment configuration is invalid or unsatisfiable."""


@dataclass(frozen=True)
class WorldConfig:
    task: str = "push"
    friction: float = 0.9
    object_shape: str = "box"
    obstacle: tuple[float, float] | None = None
    eta: float = 0.05          # goal distance threshold, m
    mu: float = 0.10           # obstacle proximity threshold, m
    episode_len: int = 50
    noise_std: float = 0.005   # additive Gaussian distance noise, m
    workspace: tuple[float, float, float, float] = (0.0, 0.0, 0.45, 0.45)  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if not 0.0 < self.friction <= 1.0:
            raise ConfigError(f"friction must lie in (0, 1], got {self.friction}")
        if self.object_shape not in SHAPES:
            raise ConfigError(f"unknown object shape {self.object_shape!r}, expected one of {tuple(SHAPES)}")
        if self.eta <= 0.0 or self.mu <= 0.0:
            raise ConfigError(f"eta and mu must be positive, got eta={self.eta}, mu={self.mu}")
        if self.episode_len < 1:
            raise ConfigError(f"episode_len must be at least 1, got {self.episode_len}")
        if self.noise_std < 0.0:
            raise ConfigError(f"noise_std must be non-negative, got {self.noise_std}")
        xmin, ymin, xmax, ymax = self.workspace
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError(f"degenerate workspace {self.workspace}")
        if self.obstacle is not None:
            ox, oy = self.obstacle
            if not (xmin <= ox <= xmax and ymin <= oy <= ymax):
                raise ConfigError(f"obstacle {self.obstacle} lies outside workspace {self.workspace}")

    @property
    def footprint_radius(self) -> float:
        return SHAPES[self.object_shape][0]

    @property
    def effective_friction(self) -> float:
        return self.friction * SHAPES[self.object_shape][1]

    @property
    def contact_radius(self) -> float:
        return self.footprint_radius + CONTACT_PAD


@dataclass
class WorldState:
    ee_pos: np.ndarray
    ee_vel: np.ndarray
    obj_pos: np.ndarray
    obj_theta: float
    obj_vel: np.ndarray
    goal_pos: np.ndarray
    step_index: int = 0
    done: bool = False

    def copy(self) -> "WorldState":
        return WorldState(
            ee_pos=self.ee_pos.copy(),
            ee_vel=self.ee_vel.copy(),
            obj_pos=self.obj_pos.copy(),
            obj_theta=self.obj_theta,
            obj_vel=self.obj_vel.copy(),
            goal_pos=self.goal_pos.copy(),
            step_index=self.step_index,
            done=self.done,
        )


@dataclass(frozen=True)
class Observation:
    """Flat 13-vector plus the goal pair consumed by goal-conditioned agents.

    vector = [ee_pos(2), ee_vel(2), obj_pos(2), obj_theta(1), obj_vel(2),
    goal_pos(2), obstacle-or-zeros(2)]. The dimension is fixed across all
    environment variants so policies trained in one variant can be fused
    with policies from another.
    """

    vector: np.ndarray
    achieved_goal: np.ndarray
    desired_goal: np.ndarray


@dataclass(frozen=True)
class Distances:
    d_og: float                  # object <-> goal
    d_oe: float                  # object <-> end-effector
    d_es: float = math.inf       # end-effector <-> obstacle; +inf when absent

    def __post_init__(self):
        if self.d_og < 0.0 or self.d_oe < 0.0 or self.d_es < 0.0:
            raise ValueError(f"distances must be non-negative: {self}")

    def replace(self, **kw) -> "Distances":
        return replace(self, **kw)


def is_success(d_og: float, eta: float) -> bool:
    """Goal reached when the object sits within eta of the goal (inclusive)."""
    return d_og <= eta


def _clamp_to(workspace, p: np.ndarray) -> np.ndarray:
    xmin, ymin, xmax, ymax = workspace
    return np.array([min(max(p[0], xmin), xmax), min(max(p[1], ymin), ymax)])


class PushWorld:
    """Stateless stepper over WorldState; the instance only holds the config."""

    def __init__(self, config: WorldConfig):
        self.config = config

    def reset(self, seed: int) -> tuple[WorldState, Observation]:
        """Place ee, object, and goal with pairwise separation >= 2 * eta.

        The object is drawn uniformly with a small wall margin so it stays
        pushable; the goal lands on a ring within GOAL_MAX_DIST of the
        object (a 50-step horizon bounds how far a push can travel); the ee
        starts just outside the separation radius around the object,
        mirroring a manipulator whose gripper begins near the workpiece.
        Placement uses rejection sampling from a generator seeded with
        `seed`; identical (config, seed) pairs reproduce identical states.
        """
        cfg = self.config
        xmin, ymin, xmax, ymax = cfg.workspace
        sep = 2.0 * cfg.eta
        margin = cfg.footprint_radius
        if xmax - xmin <= 2 * margin or math.hypot(xmax - xmin, ymax - ymin) < 2 * sep:
            raise ConfigError(
                f"workspace {cfg.workspace} cannot hold points separated by {sep}"
            )
        rng = np.random.default_rng(seed)
        goal_hi = max(GOAL_MAX_DIST, sep + cfg.eta)
        for _ in range(_RESET_ATTEMPTS):
            obj = rng.uniform((xmin + margin, ymin + margin), (xmax - margin, ymax - margin))
            goal_angle = rng.uniform(0.0, 2.0 * math.pi)
            goal_dist = rng.uniform(sep, goal_hi)
            goal = obj + goal_dist * np.array([math.cos(goal_angle), math.sin(goal_angle)])
            if not (xmin <= goal[0] <= xmax and ymin <= goal[1] <= ymax):
                continue
            ee_angle = rng.uniform(0.0, 2.0 * math.pi)
            ee_dist = rng.uniform(sep, sep + cfg.eta)
            ee = obj + ee_dist * np.array([math.cos(ee_angle), math.sin(ee_angle)])
            if not (xmin <= ee[0] <= xmax and ymin <= ee[1] <= ymax):
                continue
            if np.linalg.norm(ee - goal) >= sep:
                break
        else:
            raise ConfigError(
                f"workspace {cfg.workspace} too small to separate ee/object/goal by {sep}"
            )
        state = WorldState(
            ee_pos=ee,
            ee_vel=np.zeros(2),
            obj_pos=obj,
            obj_theta=0.0,
            obj_vel=np.zeros(2),
            goal_pos=goal,
        )
        return state, self.observe(state)

    def observe(self, state: WorldState) -> Observation:
        cfg = self.config
        obstacle = np.asarray(cfg.obstacle, dtype=np.float64) if cfg.obstacle is not None else np.zeros(2)
        vector = np.concatenate(
            [
                state.ee_pos,
                state.ee_vel,
                state.obj_pos,
                [state.obj_theta],
                state.obj_vel,
                state.goal_pos,
                obstacle,
            ]
        )
        return Observation(
            vector=vector,
            achieved_goal=state.obj_pos.copy(),
            desired_goal=state.goal_pos.copy(),
        )

    def step(self, state: WorldState, action: np.ndarray) -> tuple[WorldState, Observation, Distances, bool]:
        """Advance one step. Action components are clamped to [-1, 1].

        Push task: contact translates the object along the ee->object normal
        by overlap * friction. Slide task: contact adds ee_vel * friction to
        the object velocity, which decays geometrically each step. Contact
        with a tangential ee motion component also spins the object.
        """
        if state.done or state.step_index >= self.config.episode_len:
            raise StateError("step called on a finished episode")
        cfg = self.config
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)

        new = state.copy()
        target = state.ee_pos + a * MAX_STEP
        new.ee_pos = _clamp_to(cfg.workspace, target)
        new.ee_vel = new.ee_pos - state.ee_pos

        fric = cfg.effective_friction
        offset = state.obj_pos - new.ee_pos
        dist = float(np.linalg.norm(offset))
        in_contact = dist < cfg.contact_radius
        normal = offset / dist if dist > 0.0 else np.array([1.0, 0.0])

        if cfg.task == "push":
            if in_contact:
                overlap = cfg.contact_radius - dist
                moved = _clamp_to(cfg.workspace, state.obj_pos + normal * overlap * fric)
                new.obj_vel = moved - state.obj_pos
                new.obj_pos = moved
            else:
                new.obj_vel = np.zeros(2)
        else:  # slide
            vel = state.obj_vel * (1.0 - SLIDE_DECAY_RATE * fric)
            if in_contact:
                vel = vel + new.ee_vel * fric
            moved = _clamp_to(cfg.workspace, state.obj_pos + vel)
            new.obj_vel = vel
            new.obj_pos = moved

        if in_contact:
            # spin proportional to the tangential component of the ee motion
            cross = normal[0] * new.ee_vel[1] - normal[1] * new.ee_vel[0]
            new.obj_theta = state.obj_theta + cross / cfg.footprint_radius

        new.step_index = state.step_index + 1
        d = self.distances(new, noisy=False)
        new.done = is_success(d.d_og, cfg.eta) or new.step_index >= cfg.episode_len
        return new, self.observe(new), d, new.done

    def distances(
        self,
        state: WorldState,
        noisy: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Distances:
        """Euclidean distances; when noisy, each finite one gets Gaussian noise."""
        cfg = self.config
        d_og = float(np.linalg.norm(state.obj_pos - state.goal_pos))
        d_oe = float(np.linalg.norm(state.obj_pos - state.ee_pos))
        if cfg.obstacle is not None:
            d_es = float(np.linalg.norm(state.ee_pos - np.asarray(cfg.obstacle)))
        else:
            d_es = math.inf
        if noisy and cfg.noise_std > 0.0:
            if rng is None:
                raise ValueError("noisy distances require a generator")
            d_og = max(0.0, d_og + rng.normal(0.0, cfg.noise_std))
            d_oe = max(0.0, d_oe + rng.normal(0.0, cfg.noise_std))
            if math.isfinite(d_es):
                d_es = max(0.0, d_es + rng.normal(0.0, cfg.noise_std))
        return Distances(d_og=d_og, d_oe=d_oe, d_es=d_es)
