from __future__ import annotations

import math

import numpy as np
import pytest

from arena_rewards.auxiliary import (
    RP_THRESHOLD, RewardClass, build_history, class_balance, class_balance_report, classify_reward,
    combined_loss, cross_entropy_3class, episode_histories, smooth_l1, sr_target,
)
from arena_rewards.errors import ParameterError

import oracles


@pytest.mark.parametrize("r, cls", [
    (0.005, RewardClass.ZERO), (0.01, RewardClass.POSITIVE), (-0.02, RewardClass.NEGATIVE),
    (0.009, RewardClass.ZERO), (-0.009, RewardClass.ZERO), (0.0, RewardClass.ZERO),
    (0.0090001, RewardClass.POSITIVE), (-0.0090001, RewardClass.NEGATIVE),
])
def test_classification_table(r, cls):
    label = classify_reward(r)
    assert label.cls is cls and label.epsilon == RP_THRESHOLD
    assert label.one_hot.sum() == 1 and label.one_hot[int(cls)] == 1


def test_classify_rejects_bad_epsilon():
    with pytest.raises(ParameterError):
        classify_reward(0.1, 0.0)


def test_history_padding():
    obs = np.arange(12, dtype=float).reshape(6, 2) + 1
    h = build_history(obs[:1], 20)
    assert h.frames.shape == (20, 2) and h.pad == 19
    assert np.all(h.frames[:19] == 0) and np.all(h.frames[19] == obs[0])
    assert build_history(obs, 3).pad == 0
    np.testing.assert_array_equal(build_history(obs, 1).frames, obs[-1:])
    with pytest.raises(ParameterError):
        build_history(obs, 0)


def test_episode_histories_restart_padding():
    obs = np.arange(1, 11, dtype=float).reshape(10, 1)
    starts = [True, False, False, False, True, False, False, False, False, False]
    h = episode_histories(obs, starts, length=3)
    assert h[4, :, 0].tolist() == [0, 0, 5]
    assert h[5, :, 0].tolist() == [0, 5, 6]
    assert h[3, :, 0].tolist() == [2, 3, 4]
    assert h[9, :, 0].tolist() == [8, 9, 10]


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (0.5, 0.125), (-0.5, 0.125), (2.0, 1.5)])
def test_smooth_l1_values(x, expected):
    assert smooth_l1([x], [0.0]) == expected


def test_smooth_l1_oracle(rng):
    p, t = rng.normal(size=50), rng.normal(size=50)
    assert smooth_l1(p, t) == pytest.approx(oracles.smooth_l1(p - t), abs=1e-15)
    with pytest.raises(ParameterError):
        smooth_l1([1, 2], [1])


def test_cross_entropy():
    assert cross_entropy_3class([1 / 3] * 3, 1) == pytest.approx(math.log(3), abs=1e-15)
    assert cross_entropy_3class([0.5, 0.25, 0.25], RewardClass.POSITIVE) == pytest.approx(math.log(2))
    assert cross_entropy_3class([1 - 2e-9, 1e-9, 1e-9], 0) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ParameterError):
        cross_entropy_3class([1.0, 0.0, 0.0], 0)


def test_combined_loss():
    assert combined_loss(1.0, {}) == 1.0
    assert combined_loss(1.0, {"sr": 0.5, "rp": 0.25}, {"sr": 0.0, "rp": 0.0}) == 1.0
    assert combined_loss(1.0, {"sr": 0.5, "rp": 0.25}) == 1.75


def test_class_balance(rng):
    assert class_balance([0.0] * 5) == {"positive": 0.0, "zero": 1.0, "negative": 0.0}
    assert class_balance([1.0, -1.0] * 4) == {"positive": 0.5, "zero": 0.0, "negative": 0.5}
    r = rng.normal(scale=0.02, size=1000)
    got = class_balance(r)
    assert got["positive"] == np.mean(r > 0.009)
    assert got["negative"] == np.mean(r < -0.009)
    with pytest.raises(ParameterError):
        class_balance([])


def test_class_balance_report_uses_distributed():
    class Fake:
        def values(self, which):
            return {"distributed": [1.0, 1.0], "shaped": [-1.0, 0.0]}[which]
    assert class_balance_report(Fake())["positive"] == 1.0
    assert class_balance_report(Fake(), distributed=False)["negative"] == 0.5


def test_sr_target_drops_padding():
    kv = np.arange(12, dtype=float).reshape(4, 3)
    out = sr_target(kv, np.array([False, False, True, True]))
    np.testing.assert_array_equal(out, np.arange(6))
