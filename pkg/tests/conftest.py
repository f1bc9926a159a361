from __future__ import annotations

import numpy as np
import pytest

from arena_rewards.arena import GameState, PhysObject, PlayerState, Team, Vec3


def car(pos, vel=(0.0, 0.0, 0.0), team=Team.BLUE, boost=33.0, **kw) -> PlayerState:
    return PlayerState(PhysObject(Vec3(*pos), Vec3(*vel)), team, boost, **kw)


def state(ball=(0.0, 0.0, 92.75), ball_vel=(0.0, 0.0, 0.0), players=(), tick=0) -> GameState:
    return GameState(PhysObject(Vec3(*ball), Vec3(*ball_vel)), tuple(players), tick)


@pytest.fixture
def rng():
    return np.random.default_rng(20231016)
