"""Atomic reward and utility components, evaluated for one player.

Every component is a plain function ``fn(ctx, **params) -> float``. Utilities
stay inside [0, 1] or [-1, 1]; event rewards are 0/1 indicators. Components
are written from the acting player's perspective: the "opponent net" is the
+y net for Blue players and the -y net for Orange players.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional, Sequence

from .arena import (
    CAR_MAX_SPEED,
    BALL_MAX_SPEED,
    DEFAULT_ARENA,
    ArenaConstants,
    GameState,
    PlayerState,
    cosine,
)
from .errors import ParameterError, SpecError, StateError

EVENT_KINDS = ("touch", "goal", "concede", "team_goal", "shot", "save", "demolish", "demolished")


@dataclass(frozen=True)
class EventFlags:
    touch: bool = False
    goal: bool = False
    concede: bool = False
    team_goal: bool = False
    shot: bool = False
    save: bool = False
    demolish: bool = False
    demolished: bool = False

    def __post_init__(self) -> None:
        if self.goal and self.concede:
            raise StateError("goal and concede cannot both be set")
        if self.shot and not self.touch:
            raise StateError("shot requires touch")

    def to_dict(self) -> dict[str, bool]:
        return {k: getattr(self, k) for k in EVENT_KINDS}


NO_EVENTS = EventFlags()


@dataclass(frozen=True)
class ComponentContext:
    state: GameState
    player_index: int
    previous_state: Optional[GameState] = None
    events: Sequence[EventFlags] = ()
    arena: ArenaConstants = DEFAULT_ARENA

    @property
    def player(self) -> PlayerState:
        return self.state.players[self.player_index]

    @property
    def player_events(self) -> EventFlags:
        if not self.events:
            return NO_EVENTS
        return self.events[self.player_index]


def _check_positive(**params: float) -> None:
    for name, value in params.items():
        if not value > 0:
            raise ParameterError(f"{name} must be > 0, got {value}")


def parameterized_distance(distance: float, normalizer: float, dispersion: float = 1.0, density: float = 1.0) -> float:
    """``exp(-0.5 * d / (c_d * w_dis)) ** (1 / w_den)``."""
    _check_positive(dispersion=dispersion, density=density)
    return math.exp(-0.5 * distance / (normalizer * dispersion)) ** (1.0 / density)


def _ball_to_goal_velocity(state: GameState, player_index: int, arena: ArenaConstants) -> float:
    ball = state.ball
    target = arena.attack_target(state.players[player_index].team)
    d = target - ball.position
    n = d.norm()
    if n == 0.0:
        return 0.0
    return d.dot(ball.linear_velocity) / (n * BALL_MAX_SPEED)


def ball_to_goal_velocity(ctx: ComponentContext) -> float:
    """Ball velocity projected on the ball->opponent-net direction, over 6000."""
    return _ball_to_goal_velocity(ctx.state, ctx.player_index, ctx.arena)


def player_to_ball_velocity(ctx: ComponentContext) -> float:
    car = ctx.player.body
    d = ctx.state.ball.position - car.position
    n = d.norm()
    if n == 0.0:
        return 0.0
    return d.dot(car.linear_velocity) / (n * CAR_MAX_SPEED)


def save_boost(ctx: ComponentContext) -> float:
    return math.sqrt(ctx.player.boost / 100.0)


def player_to_ball_distance(ctx: ComponentContext, dispersion: float = 1.0, density: float = 1.0) -> float:
    """Parameterized closeness to the ball surface, normalized by 2300 uu."""
    gap = (ctx.state.ball.position - ctx.player.body.position).norm() - ctx.arena.ball_radius
    return parameterized_distance(max(0.0, gap), CAR_MAX_SPEED, dispersion, density)


def align_ball_to_goal(ctx: ComponentContext) -> float:
    """Mean of two cosines against the player->ball direction.

    Offense compares it with ball->opponent net, defense with own net->ball.
    Only the direction of player->ball matters, so the field is beam shaped.
    """
    team = ctx.player.team
    ball = ctx.state.ball.position
    p2b = ball - ctx.player.body.position
    if p2b.norm() == 0.0:
        return 0.0
    offense = cosine(p2b, ctx.arena.attack_target(team) - ball)
    defense = cosine(p2b, ball - ctx.arena.defend_target(team))
    return 0.5 * offense + 0.5 * defense


def ball_to_goal_distance_difference(
    ctx: ComponentContext,
    off_weight: float = 1.0,
    off_dispersion: float = 0.6,
    off_density: float = 1.0,
    def_weight: float = 1.0,
    def_dispersion: float = 0.4,
    def_density: float = 1.0,
) -> float:
    """Offensive closeness of the ball to the opponent net minus defensive closeness to ours.

    Distances are measured to the back of each net minus the goal depth and
    floored at 0, so the value stays inside (-def_weight, off_weight].
    """
    _check_positive(
        off_dispersion=off_dispersion, off_density=off_density,
        def_dispersion=def_dispersion, def_density=def_density,
    )
    team = ctx.player.team
    ball = ctx.state.ball.position
    depth = ctx.arena.goal_depth
    d_off = max(0.0, (ctx.arena.attack_target(team) - ball).norm() - depth)
    d_def = max(0.0, (ctx.arena.defend_target(team) - ball).norm() - depth)
    offensive = off_weight * parameterized_distance(d_off, BALL_MAX_SPEED, off_dispersion, off_density)
    defensive = def_weight * parameterized_distance(d_def, BALL_MAX_SPEED, def_dispersion, def_density)
    return offensive - defensive


def touch_ball_to_goal_acceleration(ctx: ComponentContext) -> float:
    """Change of ball-to-goal velocity across a touch; 0 without a touch."""
    if not ctx.player_events.touch:
        return 0.0
    if ctx.previous_state is None:
        raise StateError("touch_ball_to_goal_acceleration needs previous_state when touch is set")
    now = _ball_to_goal_velocity(ctx.state, ctx.player_index, ctx.arena)
    prev = _ball_to_goal_velocity(ctx.previous_state, ctx.player_index, ctx.arena)
    return now - prev


def event_reward(ctx: ComponentContext, kind: str) -> float:
    if kind not in EVENT_KINDS:
        raise ParameterError(f"unknown event kind {kind!r}")
    return 1.0 if getattr(ctx.player_events, kind) else 0.0


ComponentFn = Callable[..., float]

REGISTRY: dict[str, ComponentFn] = {
    "ball_to_goal_velocity": ball_to_goal_velocity,
    "player_to_ball_velocity": player_to_ball_velocity,
    "save_boost": save_boost,
    "player_to_ball_distance": player_to_ball_distance,
    "align_ball_to_goal": align_ball_to_goal,
    "ball_to_goal_distance_difference": ball_to_goal_distance_difference,
    "touch_ball_to_goal_acceleration": touch_ball_to_goal_acceleration,
}
for _kind in EVENT_KINDS:
    REGISTRY[_kind] = partial(event_reward, kind=_kind)

# Components that read previous_state.
STATEFUL = frozenset({"touch_ball_to_goal_acceleration"})

# Declared output ranges, used by property tests and docs.
RANGES: dict[str, tuple[float, float]] = {
    "ball_to_goal_velocity": (-1.0, 1.0),
    "player_to_ball_velocity": (-1.0, 1.0),
    "save_boost": (0.0, 1.0),
    "player_to_ball_distance": (0.0, 1.0),
    "align_ball_to_goal": (-1.0, 1.0),
    "touch_ball_to_goal_acceleration": (-2.0, 2.0),
    **{k: (0.0, 1.0) for k in EVENT_KINDS},
}


def register(name: str, fn: ComponentFn, value_range: tuple[float, float] | None = None) -> None:
    REGISTRY[name] = fn
    if value_range is not None:
        RANGES[name] = value_range


def evaluate_component(name: str, ctx: ComponentContext, **params: float) -> float:
    try:
        fn = REGISTRY[name]
    except KeyError:
        raise SpecError(f"unknown component {name!r}") from None
    return fn(ctx, **params)
