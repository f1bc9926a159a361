"""Data preparation and losses for the reward-prediction (RP) and
state-representation (SR) auxiliary tasks. No networks are trained here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError

RP_THRESHOLD = 0.009
RP_SEQUENCE_LENGTH = 20


class RewardClass(IntEnum):
    POSITIVE = 0
    ZERO = 1
    NEGATIVE = 2


@dataclass(frozen=True)
class RewardClassLabel:
    cls: RewardClass
    epsilon: float

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros(3)
        out[int(self.cls)] = 1.0
        return out


def classify_reward(r: float, epsilon: float = RP_THRESHOLD) -> RewardClassLabel:
    """Positive above ``epsilon``, negative below ``-epsilon``, zero on the closed band between."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    if r > epsilon:
        cls = RewardClass.POSITIVE
    elif r < -epsilon:
        cls = RewardClass.NEGATIVE
    else:
        cls = RewardClass.ZERO
    return RewardClassLabel(cls, epsilon)


@dataclass(frozen=True)
class ObservationHistory:
    frames: np.ndarray   # (l, d)
    pad: int


def build_history(observations: Sequence[np.ndarray] | np.ndarray, length: int = RP_SEQUENCE_LENGTH) -> ObservationHistory:
    """Last ``length`` observations of one episode, zero-padded at the front."""
    if length < 1:
        raise ParameterError(f"history length must be >= 1, got {length}")
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or len(obs) == 0:
        raise ParameterError("observations must be a non-empty (t, d) array")
    recent = obs[-length:]
    pad = length - len(recent)
    frames = np.vstack([np.zeros((pad, obs.shape[1])), recent]) if pad else recent.copy()
    return ObservationHistory(frames, pad)


def episode_histories(
    observations: np.ndarray,
    episode_starts: Sequence[bool],
    length: int = RP_SEQUENCE_LENGTH,
) -> np.ndarray:
    """History for every step of a flat rollout; padding restarts at each episode start.

    Returns an array of shape ``(t, length, d)``.
    """
    obs = np.asarray(observations, dtype=float)
    if len(episode_starts) != len(obs):
        raise ParameterError("episode_starts must align with observations")
    out = np.zeros((len(obs), length, obs.shape[1]))
    start = 0
    for t in range(len(obs)):
        if episode_starts[t]:
            start = t
        out[t] = build_history(obs[start:t + 1], length).frames
    return out


def smooth_l1(predicted: Sequence[float], target: Sequence[float], beta: float = 1.0) -> float:
    """Mean Huber-style loss: ``0.5 x^2 / beta`` for ``|x| < beta``, else ``|x| - 0.5 beta``."""
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(target, dtype=float).ravel()
    if p.shape != t.shape:
        raise ParameterError(f"length mismatch: {p.size} vs {t.size}")
    if not beta > 0:
        raise ParameterError("beta must be > 0")
    x = np.abs(p - t)
    per = np.where(x < beta, 0.5 * x * x / beta, x - 0.5 * beta)
    return float(per.mean()) if per.size else 0.0


def cross_entropy_3class(probabilities: Sequence[float], label: RewardClass | int) -> float:
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (3,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ParameterError(f"not a strictly positive 3-class distribution: {p}")
    return -math.log(p[int(label)])


def combined_loss(main: float, aux: Mapping[str, float], weights: Mapping[str, float] | None = None) -> float:
    """``main + sum_c lambda_c * L_c``; missing weights default to 1."""
    weights = weights or {}
    total = float(main)
    for name, loss in aux.items():
        total += weights.get(name, 1.0) * loss
    return total


def class_balance(rewards: Sequence[float], epsilon: float = RP_THRESHOLD) -> dict[str, float]:
    """Fraction of rewards per class (positive / zero / negative)."""
    if len(rewards) == 0:
        raise ParameterError("empty reward sequence")
    counts = np.zeros(3)
    for r in rewards:
        counts[int(classify_reward(r, epsilon).cls)] += 1
    fractions = counts / counts.sum()
    return {c.name.lower(): float(fractions[c]) for c in RewardClass}


def class_balance_report(timeline, epsilon: float = RP_THRESHOLD, distributed: bool = True) -> dict[str, float]:
    """Class fractions over every player-step of a reward timeline.

    Labels use the team-distributed reward by default, the pre-distribution
    shaped reward with ``distributed=False``.
    """
    values = timeline.values("distributed" if distributed else "shaped")
    if not values:
        raise ParameterError("empty timeline")
    return class_balance(values, epsilon)


def sr_target(key_value: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Flattened reconstruction target: the non-padding key/value object rows."""
    return np.asarray(key_value)[~np.asarray(mask, dtype=bool)].ravel()
