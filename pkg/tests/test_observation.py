from __future__ import annotations

import math

import numpy as np
import pytest

from arena_rewards.arena import Team
from arena_rewards.errors import ParameterError
from arena_rewards.observation import (
    ActionVector, AdjacencyVariant, KBMTable, ObservationTriplet, build_adjacency, encode_observation,
    feature_layout, parse_kbm_actions, row_length, state_positions,
)
from arena_rewards.sim import random_state_setter

from conftest import car, state

# Feature spans as printed in the published feature table (k = 5), 1-based inclusive.
PUBLISHED_SPANS_K5 = {
    "object_flags": (1, 4), "position": (5, 7), "linear_velocity": (8, 10), "forward": (11, 13),
    "up": (14, 16), "angular_velocity": (17, 19), "boost": (20, 20), "on_ground_has_flip": (21, 22),
    "demolished": (23, 23), "previous_actions": (24, 64), "mask": (65, 65),
}


def test_layout_matches_published_table():
    assert feature_layout(5) == PUBLISHED_SPANS_K5
    assert row_length(5) == 65


def test_2v2_packed_shape_and_empty_history():
    s = random_state_setter(0, (2, 2))
    t = encode_observation(s, 0)
    assert t.packed.shape == (6, 65)
    assert np.all(t.query[23:63] == 0)
    assert t.packed[0, -1] == 0.0


def test_action_history_right_aligned():
    s = random_state_setter(0, (1, 1))
    hist = [ActionVector(throttle=0.1 * j, jump=True) for j in range(1, 8)]
    t = encode_observation(s, 0, hist, k=5)
    stacked = t.query[23:63].reshape(5, 8)
    np.testing.assert_array_equal(stacked[-1], hist[-1].as_array())
    np.testing.assert_array_equal(stacked[0], hist[2].as_array())
    short = encode_observation(s, 0, hist[:2], k=5).query[23:63].reshape(5, 8)
    assert np.all(short[:3] == 0) and short[4, 0] == pytest.approx(0.2)


def test_capacity_padding_mask():
    s = state(players=[car((0, 0, 17)), car((0, 100, 17), team=Team.ORANGE)])
    t = encode_observation(s, 0, capacity=8)
    assert t.mask.tolist() == [False] * 3 + [True] * 5
    assert np.all(t.key_value[3:] == 0)
    with pytest.raises(ParameterError):
        encode_observation(s, 0, capacity=2)


def test_feature_values_and_flags():
    s = state(ball=(0, 2300, 92.75), players=[
        car((230, 0, 17), (0, 1150, 0), boost=50), car((0, 100, 17)), car((0, 900, 17), team=Team.ORANGE),
    ])
    t = encode_observation(s, 1)
    kv = t.key_value
    assert kv[0, :4].tolist() == [0, 0, 0, 1]
    assert kv[2, :4].tolist() == [1, 0, 0, 0]          # the acting car
    assert kv[1, :4].tolist() == [0, 1, 0, 0]
    assert kv[3, :4].tolist() == [0, 0, 1, 0]
    assert kv[0, 4:7] == pytest.approx([0, 1, 92.75 / 2300])
    assert kv[1, 7:10] == pytest.approx([0, 0.5, 0])
    assert kv[1, 19] == 0.5
    np.testing.assert_array_equal(t.query[:23], kv[2, :23])


def test_unpack_round_trip():
    s = random_state_setter(4, (3, 2))
    t = encode_observation(s, 2, [ActionVector(steer=-1, boost=True)], capacity=9)
    u = ObservationTriplet.unpack(t.packed)
    np.testing.assert_array_equal(u.query, t.query)
    np.testing.assert_array_equal(u.key_value, t.key_value)
    np.testing.assert_array_equal(u.mask, t.mask)


def test_action_vector_clamps():
    a = ActionVector(throttle=3, steer=-2, jump=2)
    assert a.throttle == 1 and a.steer == -1 and a.jump is True
    with pytest.raises(ParameterError):
        ActionVector.from_sequence([0] * 7)


def test_kbm_neutral_and_forward_jump():
    assert parse_kbm_actions([1, 1, 1, 0, 0]) == ActionVector()
    a = parse_kbm_actions([2, 1, 1, 1, 0])
    assert a == ActionVector(throttle=1, jump=True)


def test_kbm_air_uses_rotation():
    a = parse_kbm_actions([0, 2, 2, 0, 1], on_ground=False)
    assert (a.throttle, a.pitch, a.steer, a.yaw, a.roll, a.boost) == (-1, -1, 1, 1, 1, True)


def test_kbm_errors():
    with pytest.raises(ParameterError):
        parse_kbm_actions([3, 1, 1, 0, 0])
    with pytest.raises(ParameterError):
        parse_kbm_actions([1, 1, 1, 0])
    with pytest.raises(ParameterError):
        KBMTable.from_dict({"arities": [3], "ground": {"slot0": ["fly"]}, "air": {}})


def test_adjacency_worked_example():
    pts = [(0, 0, 0), (2300, 0, 0)]
    b = build_adjacency(pts, AdjacencyVariant.NORMALIZED_SELF)
    np.testing.assert_allclose(b[0], [1.2449, 0.7550], atol=1e-4)
    assert b.mean(axis=1) == pytest.approx([1, 1], abs=1e-15)
    a = build_adjacency(pts, "unit_self")
    assert a[0, 0] == 1.0 and a[0, 1] == pytest.approx(2.0, abs=1e-15)
    alt = build_adjacency(pts, "unit_self", include_self_in_mean=True)
    assert alt[0, 1] == pytest.approx(math.exp(-0.5) / ((1 + math.exp(-0.5)) / 2), abs=1e-15)


def test_adjacency_coincident_objects():
    assert np.all(build_adjacency([(5, 5, 5)] * 2, "normalized_self") == 1.0)


def test_adjacency_errors():
    with pytest.raises(ParameterError):
        build_adjacency([], "unit_self")
    with pytest.raises(ParameterError):
        build_adjacency([(0, 0, 0)], "unit_self", dispersion=0)


def test_state_positions_order():
    s = random_state_setter(1, (1, 1))
    assert state_positions(s)[0] == s.ball.position
