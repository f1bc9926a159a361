"""Observation triplet (query / key-value / padding mask), keyboard-mouse action
expansion, and distance-kernel adjacency matrices over arena objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .arena import CAR_MAX_SPEED, GameState, PhysObject, Vec3, load_config
from .errors import ParameterError

N_ACTIONS = 8
DEFAULT_STACK = 5
POS_NORM = CAR_MAX_SPEED
VEL_NORM = CAR_MAX_SPEED

ACTION_FIELDS = ("throttle", "steer", "pitch", "yaw", "roll", "jump", "boost", "handbrake")
BINARY_ACTIONS = frozenset({"jump", "boost", "handbrake"})


@dataclass(frozen=True)
class ActionVector:
    throttle: float = 0.0
    steer: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0
    roll: float = 0.0
    jump: bool = False
    boost: bool = False
    handbrake: bool = False

    def __post_init__(self) -> None:
        for name in ("throttle", "steer", "pitch", "yaw", "roll"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, max(-1.0, min(1.0, v)))
        for name in BINARY_ACTIONS:
            object.__setattr__(self, name, bool(getattr(self, name)))

    def as_array(self) -> np.ndarray:
        return np.array([float(getattr(self, f)) for f in ACTION_FIELDS])

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> ActionVector:
        if len(values) != N_ACTIONS:
            raise ParameterError(f"expected {N_ACTIONS} action values, got {len(values)}")
        return cls(*values[:5], *(bool(v) for v in values[5:]))


def feature_layout(k: int = DEFAULT_STACK) -> dict[str, tuple[int, int]]:
    """1-based inclusive feature spans of a packed observation row.

    The previous-action span is ``[24, 24 + 8k]``: ``8k`` action values plus
    one trailing reserved zero, with the padding-mask flag at ``25 + 8k``.
    """
    return {
        "object_flags": (1, 4),
        "position": (5, 7),
        "linear_velocity": (8, 10),
        "forward": (11, 13),
        "up": (14, 16),
        "angular_velocity": (17, 19),
        "boost": (20, 20),
        "on_ground_has_flip": (21, 22),
        "demolished": (23, 23),
        "previous_actions": (24, 24 + N_ACTIONS * k),
        "mask": (25 + N_ACTIONS * k, 25 + N_ACTIONS * k),
    }


def row_length(k: int = DEFAULT_STACK) -> int:
    return 25 + N_ACTIONS * k


# object flag order: main player, teammate, opponent, ball
FLAG_MAIN, FLAG_TEAMMATE, FLAG_OPPONENT, FLAG_BALL = range(4)


@dataclass(frozen=True)
class ObservationTriplet:
    query: np.ndarray        # (row_length - 1,)
    key_value: np.ndarray    # (n_objects, row_length - 1)
    mask: np.ndarray         # (n_objects,) bool, True = padding
    k: int = DEFAULT_STACK

    @property
    def packed(self) -> np.ndarray:
        """Query in row 0, objects below; mask stored as the last feature."""
        rows = np.vstack([self.query[None, :], self.key_value])
        flags = np.concatenate([[0.0], self.mask.astype(float)])
        return np.hstack([rows, flags[:, None]])

    @classmethod
    def unpack(cls, packed: np.ndarray, k: int = DEFAULT_STACK) -> ObservationTriplet:
        return cls(packed[0, :-1].copy(), packed[1:, :-1].copy(), packed[1:, -1] > 0.5, k)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "layout": {name: list(span) for name, span in feature_layout(self.k).items()},
            "query": self.query.tolist(),
            "key_value": self.key_value.tolist(),
            "mask": self.mask.tolist(),
            "packed": self.packed.tolist(),
        }


def _object_features(obj: PhysObject, flag: int, width: int) -> np.ndarray:
    row = np.zeros(width)
    row[flag] = 1.0
    row[4:7] = np.asarray(obj.position) / POS_NORM
    row[7:10] = np.asarray(obj.linear_velocity) / VEL_NORM
    row[10:13] = obj.forward
    row[13:16] = obj.up
    row[16:19] = obj.angular_velocity
    return row


def encode_observation(
    state: GameState,
    player_index: int,
    action_history: Sequence[ActionVector] = (),
    k: int = DEFAULT_STACK,
    capacity: Optional[int] = None,
) -> ObservationTriplet:
    """Encode ``state`` from ``player_index``'s point of view.

    Key/value rows are the ball followed by every car (the acting car
    included, carrying the main-player flag). No boost pads, no timers.
    Positions and velocities are absolute coordinates divided by 2300.
    ``capacity`` pads the object list with masked zero rows.
    """
    if not 0 <= player_index < len(state.players):
        raise ParameterError(f"player_index {player_index} out of range for {len(state.players)} players")
    width = row_length(k) - 1
    me = state.players[player_index]

    objects = [_object_features(state.ball, FLAG_BALL, width)]
    for i, p in enumerate(state.players):
        if i == player_index:
            flag = FLAG_MAIN
        elif p.team is me.team:
            flag = FLAG_TEAMMATE
        else:
            flag = FLAG_OPPONENT
        row = _object_features(p.body, flag, width)
        row[19] = p.boost / 100.0
        row[20] = float(p.on_ground)
        row[21] = float(p.has_flip)
        row[22] = float(p.demolished)
        objects.append(row)

    n_real = len(objects)
    if capacity is not None:
        if capacity < n_real:
            raise ParameterError(f"capacity {capacity} < {n_real} objects")
        objects += [np.zeros(width) for _ in range(capacity - n_real)]
    key_value = np.vstack(objects)
    mask = np.arange(len(objects)) >= n_real

    query = key_value[1 + player_index].copy()
    recent = list(action_history)[-k:] if k > 0 else []
    start = 23
    # most recent action last; missing history stays zero
    offset = start + N_ACTIONS * (k - len(recent))
    for j, a in enumerate(recent):
        query[offset + N_ACTIONS * j: offset + N_ACTIONS * (j + 1)] = a.as_array()
    return ObservationTriplet(query, key_value, mask, k)


# -- keyboard/mouse actions -----------------------------------------------

@dataclass(frozen=True)
class KBMTable:
    arities: tuple[int, ...]
    ground: Mapping[int, tuple[str, ...]]
    air: Mapping[int, tuple[str, ...]]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> KBMTable:
        arities = tuple(int(a) for a in data["arities"])

        def targets(section: Mapping[str, Any]) -> dict[int, tuple[str, ...]]:
            out = {}
            for key, names in section.items():
                slot = int(key.removeprefix("slot"))
                bad = [n for n in names if n not in ACTION_FIELDS]
                if bad or not 0 <= slot < len(arities):
                    raise ParameterError(f"bad KBM entry {key}={names}")
                out[slot] = tuple(names)
            return out

        return cls(arities, targets(data["ground"]), targets(data["air"]))


def default_kbm_table() -> KBMTable:
    ref = resources.files("arena_rewards") / "configs" / "kbm_table.toml"
    with resources.as_file(ref) as path:
        return KBMTable.from_dict(load_config(path))


def parse_kbm_actions(raw: Sequence[int], on_ground: bool = True, table: Optional[KBMTable] = None) -> ActionVector:
    """Expand a discrete keyboard/mouse vector into the 8 continuous/binary actions.

    Trinary slots map {0, 1, 2} -> {-1, 0, +1}; binary slots map {0, 1} -> {0, 1}.
    """
    table = table or default_kbm_table()
    if len(raw) != len(table.arities):
        raise ParameterError(f"expected {len(table.arities)} slots, got {len(raw)}")
    values = dict.fromkeys(ACTION_FIELDS, 0.0)
    targets = table.ground if on_ground else table.air
    for slot, (v, arity) in enumerate(zip(raw, table.arities)):
        if int(v) != v or not 0 <= v < arity:
            raise ParameterError(f"slot {slot} value {v} outside arity {arity}")
        signed = float(v) - (1.0 if arity == 3 else 0.0)
        for name in targets.get(slot, ()):
            values[name] = abs(signed) if name in BINARY_ACTIONS else signed
    return ActionVector(**values)


# -- graph adjacency ------------------------------------------------------

class AdjacencyVariant(str, Enum):
    UNIT_SELF = "unit_self"              # self-connection fixed at 1
    NORMALIZED_SELF = "normalized_self"  # self-connection normalized with the row


def build_adjacency(
    positions: Sequence[Sequence[float]],
    variant: AdjacencyVariant | str = AdjacencyVariant.NORMALIZED_SELF,
    dispersion: float = 1.0,
    density: float = 1.0,
    include_self_in_mean: bool = False,
) -> np.ndarray:
    """Distance-kernel adjacency ``exp(-0.5 d / (2300 w_dis)) ** (1 / w_den)``.

    ``NORMALIZED_SELF`` divides every row by its mean (diagonal included).
    ``UNIT_SELF`` keeps the diagonal at 1 and divides off-diagonal entries by
    ``sum_{j != i} A_ij / N``; with ``include_self_in_mean`` the diagonal is
    counted in that sum instead.
    """
    if not dispersion > 0 or not density > 0:
        raise ParameterError("dispersion and density must be > 0")
    variant = AdjacencyVariant(variant)
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = len(p)
    if n == 0:
        raise ParameterError("need at least one object")
    dist = np.linalg.norm(p[None, :, :] - p[:, None, :], axis=-1)
    a = np.exp(-0.5 * dist / (CAR_MAX_SPEED * dispersion)) ** (1.0 / density)

    if variant is AdjacencyVariant.NORMALIZED_SELF:
        mean = a.sum(axis=1, keepdims=True) / n
        return a / mean

    np.fill_diagonal(a, 1.0)
    off = a.sum(axis=1) - (0.0 if include_self_in_mean else 1.0)
    mean = off / n
    out = np.ones_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(mean[:, None] > 0, a / mean[:, None], 0.0)
    mask = ~np.eye(n, dtype=bool)
    out[mask] = scaled[mask]
    return out


def state_positions(state: GameState) -> list[Vec3]:
    """Ball first, then every car; the object order used by the graph view."""
    return [state.ball.position] + [p.body.position for p in state.players]
