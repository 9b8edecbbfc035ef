"""Sparse task reward and the multi-objective guided reward (MGR).

The guided reward combines a weighted sparse final-goal term, dense
sequential guidance terms (reach the object, then bring it to the goal),
and a logarithmic obstacle-avoidance penalty that activates only inside the
proximity threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .pushworld import Distances

# floor applied to d_es before the log so the penalty stays finite
LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class RewardWeights:
    """Objective weights: (final goal, sequential..., prevention).

    For the pushing task alpha = (a1, a2, a3) weights the sparse goal term,
    -d_oe, and -d_og; the obstacle log term carries an implicit weight of 1
    unless a fourth entry is given.
    """

    alpha: tuple[float, ...] = (0.3, 0.35, 0.35)
    eta: float = 0.05
    mu: float = 0.10

    def __post_init__(self):
        if any(a < 0.0 for a in self.alpha):
            raise ValueError(f"weights must be non-negative, got {self.alpha}")
        if self.eta <= 0.0 or self.mu <= 0.0:
            raise ValueError(f"eta and mu must be positive, got eta={self.eta}, mu={self.mu}")


def sparse_reward(d_og: float, eta: float) -> float:
    """-1 per step until the object is within eta of the goal, then 0."""
    return 0.0 if d_og <= eta else -1.0


def mgr_push(d: Distances, w: RewardWeights) -> float:
    """Guided reward for pushing/sliding.

    r = a1 * (-[d_og > eta]) + a2 * (-d_oe) + a3 * (-d_og)
        + a_p * [d_es < mu] * (ln d_es - ln mu)

    An infinite d_es (no obstacle) zeroes the prevention term; a d_es of
    exactly mu is outside the indicator. d_es is floored at 1e-6 before the
    log so the penalty is bounded.
    """
    if len(w.alpha) not in (3, 4):
        raise ValueError(f"pushing reward needs 3 weights (optionally 4), got {len(w.alpha)}")
    a1, a2, a3 = w.alpha[:3]
    a_p = w.alpha[3] if len(w.alpha) == 4 else 1.0
    r = a1 * (-1.0 if d.d_og > w.eta else 0.0) + a2 * (-d.d_oe) + a3 * (-d.d_og)
    if d.d_es < w.mu:
        r += a_p * (math.log(max(d.d_es, LOG_FLOOR)) - math.log(w.mu))
    return r


def mgr_general(G_f: float, O: Sequence[float], O_p: float, w: RewardWeights) -> float:
    """Weighted sum of a final-goal term, sequential objectives, and a
    prevention objective: alpha[0]*G_f + sum_i alpha[i]*O[i-1] + alpha[-1]*O_p.
    """
    if len(O) + 2 != len(w.alpha):
        raise ValueError(
            f"got {len(O)} sequential objectives but {len(w.alpha)} weights; expected {len(O) + 2}"
        )
    r = w.alpha[0] * G_f
    for a_i, o_i in zip(w.alpha[1:-1], O):
        r += a_i * o_i
    return r + w.alpha[-1] * O_p
