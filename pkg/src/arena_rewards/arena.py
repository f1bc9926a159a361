"""Arena constants, vector helpers and the immutable game-state types.

Coordinate system (standard field):

- x: side walls at +/- 4096
- y: goal lines at +/- 5120; Blue defends -y and attacks +y
- z: floor at 0, ceiling at 2044
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

CAR_MAX_SPEED = 2300.0
BALL_MAX_SPEED = 6000.0
CONFIG_ENV_VAR = "ARENA_REWARDS_CONFIG"


class Vec3(NamedTuple):
    """3D vector in uu (positions) or uu/s (velocities)."""

    x: float
    y: float
    z: float

    def __add__(self, other: Vec3) -> Vec3:  # type: ignore[override]
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, scalar: float) -> Vec3:  # type: ignore[override]
        return Vec3(self.x * scalar, self.y * scalar, self.z * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> Vec3:
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def flip_y(self) -> Vec3:
        return Vec3(self.x, -self.y, self.z)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


ZERO = Vec3(0.0, 0.0, 0.0)


def cosine(a: Vec3, b: Vec3) -> float:
    """Cosine of the angle between ``a`` and ``b``; 0 if either is zero-length."""
    na = a.norm()
    nb = b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(-1.0, min(1.0, a.dot(b) / (na * nb)))


class Team(str, Enum):
    BLUE = "blue"
    ORANGE = "orange"

    @property
    def other(self) -> Team:
        return Team.ORANGE if self is Team.BLUE else Team.BLUE


@dataclass(frozen=True)
class PhysObject:
    position: Vec3 = ZERO
    linear_velocity: Vec3 = ZERO
    angular_velocity: Vec3 = ZERO
    forward: Vec3 = Vec3(1.0, 0.0, 0.0)
    up: Vec3 = Vec3(0.0, 0.0, 1.0)

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, Vec3):
                v = Vec3(*map(float, v))
                object.__setattr__(self, f.name, v)
            if not v.is_finite():
                raise ValueError(f"non-finite {f.name}: {v}")

    def check_orientation(self, tol: float = 1e-6) -> bool:
        """True if forward/up are orthonormal within ``tol``."""
        return (
            abs(self.forward.norm() - 1.0) <= tol
            and abs(self.up.norm() - 1.0) <= tol
            and abs(self.forward.dot(self.up)) <= tol
        )

    def mirrored(self) -> PhysObject:
        # Reflection through the xz-plane: polar vectors flip y, the angular
        # velocity pseudo-vector flips x and z.
        w = self.angular_velocity
        return PhysObject(
            position=self.position.flip_y(),
            linear_velocity=self.linear_velocity.flip_y(),
            angular_velocity=Vec3(-w.x, w.y, -w.z),
            forward=self.forward.flip_y(),
            up=self.up.flip_y(),
        )


@dataclass(frozen=True)
class PlayerState:
    body: PhysObject
    team: Team = Team.BLUE
    boost: float = 33.0
    on_ground: bool = True
    has_flip: bool = True
    demolished: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.boost <= 100.0:
            raise ValueError(f"boost must be in [0, 100], got {self.boost}")
        if not isinstance(self.team, Team):
            object.__setattr__(self, "team", Team(self.team))


@dataclass(frozen=True)
class GameState:
    ball: PhysObject
    players: tuple[PlayerState, ...] = ()
    tick: int = 0

    def __post_init__(self) -> None:
        players = tuple(self.players)
        object.__setattr__(self, "players", players)
        seen_orange = False
        for p in players:
            if p.team is Team.ORANGE:
                seen_orange = True
            elif seen_orange:
                raise ValueError("players must be grouped Blue-first then Orange")

    def team_indices(self, team: Team) -> list[int]:
        return [i for i, p in enumerate(self.players) if p.team is team]

    @property
    def n_blue(self) -> int:
        return sum(1 for p in self.players if p.team is Team.BLUE)

    def roster(self) -> tuple[Team, ...]:
        return tuple(p.team for p in self.players)

    def to_dict(self) -> dict[str, Any]:
        return state_to_dict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GameState:
        return state_from_dict(data)


@dataclass(frozen=True)
class ArenaConstants:
    """Field geometry. Values are configuration, not measured ground truth."""

    half_width_x: float = 4096.0
    half_length_y: float = 5120.0
    ceiling_z: float = 2044.0
    goal_half_width: float = 892.755
    goal_height: float = 642.775
    goal_depth: float = 880.0
    ball_radius: float = 92.75
    back_net_z: float = 321.0
    car_max_speed: float = CAR_MAX_SPEED
    ball_max_speed: float = BALL_MAX_SPEED

    def __post_init__(self) -> None:
        if self.car_max_speed != CAR_MAX_SPEED or self.ball_max_speed != BALL_MAX_SPEED:
            raise ValueError("car/ball max speeds are fixed normalizers (2300, 6000)")
        if self.goal_depth <= 0:
            raise ValueError("goal_depth must be positive")

    @property
    def goal_line_y(self) -> float:
        return self.half_length_y

    @property
    def back_net_blue(self) -> Vec3:
        return Vec3(0.0, -(self.half_length_y + self.goal_depth), self.back_net_z)

    @property
    def back_net_orange(self) -> Vec3:
        return Vec3(0.0, self.half_length_y + self.goal_depth, self.back_net_z)

    @property
    def goal_center_blue(self) -> Vec3:
        return Vec3(0.0, -self.half_length_y, self.goal_height / 2)

    @property
    def goal_center_orange(self) -> Vec3:
        return Vec3(0.0, self.half_length_y, self.goal_height / 2)

    def attack_target(self, team: Team) -> Vec3:
        """Back of the opponent's net for ``team``."""
        return self.back_net_orange if team is Team.BLUE else self.back_net_blue

    def defend_target(self, team: Team) -> Vec3:
        """Back of ``team``'s own net."""
        return self.back_net_blue if team is Team.BLUE else self.back_net_orange

    def in_goal_mouth(self, p: Vec3) -> bool:
        return abs(p.x) < self.goal_half_width and p.z < self.goal_height


DEFAULT_ARENA = ArenaConstants()


def object_distance(a: PhysObject, b: PhysObject) -> Vec3:
    """Displacement from ``a`` to ``b`` (``p_b - p_a``)."""
    return b.position - a.position


def mirror_for_orange(state: GameState) -> GameState:
    """Reflect the field in y and swap team labels.

    Players keep their relative order within a team; the former Orange
    players become the leading Blue block. Applying this twice returns the
    original state exactly.
    """
    blue = [p for p in state.players if p.team is Team.BLUE]
    orange = [p for p in state.players if p.team is Team.ORANGE]

    def flip(p: PlayerState) -> PlayerState:
        return replace(p, body=p.body.mirrored(), team=p.team.other)

    players = tuple(flip(p) for p in orange) + tuple(flip(p) for p in blue)
    return GameState(ball=state.ball.mirrored(), players=players, tick=state.tick)


def mirrored_index(state: GameState, index: int) -> int:
    """Index of player ``index`` of ``state`` inside ``mirror_for_orange(state)``."""
    n_blue = state.n_blue
    n_orange = len(state.players) - n_blue
    if index < n_blue:
        return n_orange + index
    return index - n_blue


# -- serialization --------------------------------------------------------

def _obj_to_dict(o: PhysObject) -> dict[str, list[float]]:
    return {f.name: list(getattr(o, f.name)) for f in fields(o)}


def _obj_from_dict(d: dict[str, Any]) -> PhysObject:
    return PhysObject(**{k: Vec3(*map(float, v)) for k, v in d.items()})


def state_to_dict(state: GameState) -> dict[str, Any]:
    return {
        "tick": state.tick,
        "ball": _obj_to_dict(state.ball),
        "players": [
            {
                "team": p.team.value,
                "boost": p.boost,
                "on_ground": p.on_ground,
                "has_flip": p.has_flip,
                "demolished": p.demolished,
                "body": _obj_to_dict(p.body),
            }
            for p in state.players
        ],
    }


def state_from_dict(data: dict[str, Any]) -> GameState:
    players = tuple(
        PlayerState(
            body=_obj_from_dict(p["body"]),
            team=Team(p["team"]),
            boost=float(p.get("boost", 33.0)),
            on_ground=bool(p.get("on_ground", True)),
            has_flip=bool(p.get("has_flip", True)),
            demolished=bool(p.get("demolished", False)),
        )
        for p in data.get("players", [])
    )
    return GameState(ball=_obj_from_dict(data["ball"]), players=players, tick=int(data.get("tick", 0)))


def load_config(path: str | os.PathLike | None) -> dict[str, Any]:
    """Read a TOML or JSON config file into a dict (empty if ``path`` is None)."""
    if path is None:
        return {}
    p = Path(path)
    if p.suffix.lower() == ".json":
        return json.loads(p.read_text(encoding="utf-8"))
    with p.open("rb") as fh:
        return tomllib.load(fh)


def arena_from_config(config: dict[str, Any] | None = None) -> ArenaConstants:
    """Build constants from the ``[arena]`` section of a config mapping."""
    section = (config or {}).get("arena", {})
    known = {f.name for f in fields(ArenaConstants)}
    unknown = set(section) - known
    if unknown:
        raise ValueError(f"unknown arena keys: {sorted(unknown)}")
    return ArenaConstants(**{k: float(v) for k, v in section.items()})


def load_arena(path: str | os.PathLike | None = None) -> ArenaConstants:
    """Arena constants from ``path``, else ``$ARENA_REWARDS_CONFIG``, else defaults."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    return arena_from_config(load_config(path)) if path else DEFAULT_ARENA


def make_state(
    ball_position: Sequence[float] = (0.0, 0.0, 92.75),
    ball_velocity: Sequence[float] = (0.0, 0.0, 0.0),
    blue: Sequence[Sequence[float]] = (),
    orange: Sequence[Sequence[float]] = (),
    boost: float = 33.0,
    tick: int = 0,
) -> GameState:
    """Convenience constructor: players given by position, at rest, facing the opponent net."""
    players = [
        PlayerState(PhysObject(Vec3(*map(float, pos)), forward=Vec3(0.0, 1.0, 0.0)), Team.BLUE, boost)
        for pos in blue
    ]
    players += [
        PlayerState(PhysObject(Vec3(*map(float, pos)), forward=Vec3(0.0, -1.0, 0.0)), Team.ORANGE, boost)
        for pos in orange
    ]
    return GameState(
        ball=PhysObject(Vec3(*map(float, ball_position)), Vec3(*map(float, ball_velocity))),
        players=tuple(players),
        tick=tick,
    )
