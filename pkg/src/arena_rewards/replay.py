"""Replay frame CSVs -> game states -> per-frame reward timelines.

Canonical columns (rename through ``column_map``)::

    frame, time,
    ball_pos_{x,y,z}, ball_vel_{x,y,z}, [ball_angvel_{x,y,z}],
    player{N}_team, player{N}_pos_{x,y,z}, player{N}_vel_{x,y,z}, player{N}_boost,
    [player{N}_fwd_{x,y,z}, player{N}_up_{x,y,z}, player{N}_angvel_{x,y,z},
     player{N}_on_ground, player{N}_has_flip, player{N}_demolished]

Bracketed columns are optional. Team values are ``blue``/``orange`` or ``0``/``1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .arena import DEFAULT_ARENA, ArenaConstants, GameState, PhysObject, PlayerState, Team, Vec3
from .components import EventFlags
from .composition import RewardSpec, ShapedRewardOutput, step_rewards
from .errors import ParameterError, SchemaError, StateError

GRAVITY = 650.0
TOUCH_MARGIN = 120.0
TOUCH_IMPULSE = 50.0

_AXES = ("x", "y", "z")
_PLAYER_RE = re.compile(r"^player(\d+)_pos_x$")


@dataclass(frozen=True)
class ReplayFrameTable:
    """Parsed frames; ``rows`` hold canonical column name -> float."""

    rows: tuple[dict[str, float], ...]
    player_ids: tuple[int, ...]
    teams: tuple[tuple[Team, ...], ...]
    dropped: int = 0
    source: str = ""

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def frame_indices(self) -> list[int]:
        return [int(r["frame"]) for r in self.rows]

    def state(self, i: int) -> GameState:
        """Game state for row ``i`` with players ordered Blue-first (stable)."""
        teams = self.teams[i]
        if teams != self.teams[0]:
            raise StateError(f"roster changed at frame {int(self.rows[i]['frame'])}")
        row = self.rows[i]
        order = sorted(range(len(self.player_ids)), key=lambda j: teams[j] is Team.ORANGE)
        players = []
        for j in order:
            pid = self.player_ids[j]
            pre = f"player{pid}_"
            body = PhysObject(
                position=_vec(row, pre + "pos"),
                linear_velocity=_vec(row, pre + "vel"),
                angular_velocity=_vec(row, pre + "angvel", (0.0, 0.0, 0.0)),
                forward=_vec(row, pre + "fwd", (0.0, 1.0 if teams[j] is Team.BLUE else -1.0, 0.0)),
                up=_vec(row, pre + "up", (0.0, 0.0, 1.0)),
            )
            players.append(PlayerState(
                body=body,
                team=teams[j],
                boost=min(100.0, max(0.0, row[pre + "boost"])),
                on_ground=bool(row.get(pre + "on_ground", 1.0)),
                has_flip=bool(row.get(pre + "has_flip", 1.0)),
                demolished=bool(row.get(pre + "demolished", 0.0)),
            ))
        ball = PhysObject(
            position=_vec(row, "ball_pos"),
            linear_velocity=_vec(row, "ball_vel"),
            angular_velocity=_vec(row, "ball_angvel", (0.0, 0.0, 0.0)),
        )
        return GameState(ball=ball, players=tuple(players), tick=int(row["frame"]))

    def player_order(self) -> list[int]:
        """Replay player ids in the order used by :meth:`state`."""
        teams = self.teams[0]
        return [self.player_ids[j] for j in sorted(range(len(teams)), key=lambda j: teams[j] is Team.ORANGE)]


def _vec(row: Mapping[str, float], prefix: str, default: Optional[Sequence[float]] = None) -> Vec3:
    keys = [f"{prefix}_{a}" for a in _AXES]
    if default is not None and not all(k in row for k in keys):
        return Vec3(*default)
    return Vec3(*(row[k] for k in keys))


def _parse_team(value: str) -> Team:
    v = value.strip().lower()
    if v in ("blue", "0", "0.0"):
        return Team.BLUE
    if v in ("orange", "1", "1.0"):
        return Team.ORANGE
    raise ValueError(value)


def required_columns(player_ids: Iterable[int]) -> list[str]:
    cols = ["frame", "time"]
    cols += [f"ball_{k}_{a}" for k in ("pos", "vel") for a in _AXES]
    for pid in player_ids:
        pre = f"player{pid}_"
        cols.append(pre + "team")
        cols += [f"{pre}{k}_{a}" for k in ("pos", "vel") for a in _AXES]
        cols.append(pre + "boost")
    return cols


def parse_replay_csv(path: str | os.PathLike | io.TextIOBase, column_map: Optional[Mapping[str, str]] = None) -> ReplayFrameTable:
    """Read a replay frame CSV.

    ``column_map`` maps canonical names to the file's header names. Rows whose
    numeric fields do not parse are dropped and counted in ``dropped``.
    """
    if isinstance(path, (str, os.PathLike)):
        source = str(path)
        with open(path, newline="", encoding="utf-8") as fh:
            return _parse(fh, column_map, source)
    return _parse(path, column_map, "<stream>")


def _parse(fh, column_map, source: str) -> ReplayFrameTable:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    rename = {v: k for k, v in (column_map or {}).items()}
    canonical = [rename.get(h, h) for h in header]

    player_ids = sorted(int(m.group(1)) for c in canonical if (m := _PLAYER_RE.match(c)))
    present = set(canonical)
    for col in required_columns(player_ids):
        if col not in present:
            actual = (column_map or {}).get(col, col)
            raise SchemaError(f"{source}: missing column {actual!r}")

    team_cols = {f"player{pid}_team" for pid in player_ids}
    rows: list[dict[str, float]] = []
    teams: list[tuple[Team, ...]] = []
    dropped = 0
    last_frame = -math.inf
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        try:
            if len(raw) != len(canonical):
                raise ValueError("column count")
            row = {}
            for name, cell in zip(canonical, raw):
                if name in team_cols:
                    continue
                value = float(cell)
                if not math.isfinite(value):
                    raise ValueError(cell)
                row[name] = value
            cells = dict(zip(canonical, raw))
            frame_teams = tuple(_parse_team(cells[f"player{pid}_team"]) for pid in player_ids)
        except ValueError:
            dropped += 1
            continue
        if row["frame"] <= last_frame:
            raise SchemaError(f"{source}: frame index not increasing at frame {int(row['frame'])}")
        last_frame = row["frame"]
        rows.append(row)
        teams.append(frame_teams)

    if not rows:
        raise SchemaError(f"{source}: no parseable frames")
    return ReplayFrameTable(tuple(rows), tuple(player_ids), tuple(teams), dropped, source)


def write_replay_csv(states: Sequence[GameState], times: Optional[Sequence[float]] = None) -> str:
    """Serialize states to the canonical CSV layout (used for fixtures and round trips)."""
    if not states:
        raise ParameterError("no states")
    n = len(states[0].players)
    header = required_columns(range(n))
    extra = []
    for pid in range(n):
        pre = f"player{pid}_"
        extra += [f"{pre}{k}_{a}" for k in ("fwd", "up", "angvel") for a in _AXES]
        extra += [pre + "on_ground", pre + "has_flip", pre + "demolished"]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header + extra)
    for i, s in enumerate(states):
        row: dict[str, Any] = {"frame": s.tick, "time": times[i] if times is not None else s.tick / 30.0}
        for k, v in (("pos", s.ball.position), ("vel", s.ball.linear_velocity)):
            for a, x in zip(_AXES, v):
                row[f"ball_{k}_{a}"] = repr(x)
        for pid, p in enumerate(s.players):
            pre = f"player{pid}_"
            row[pre + "team"] = p.team.value
            row[pre + "boost"] = repr(p.boost)
            vecs = {"pos": p.body.position, "vel": p.body.linear_velocity, "fwd": p.body.forward,
                    "up": p.body.up, "angvel": p.body.angular_velocity}
            for k, v in vecs.items():
                for a, x in zip(_AXES, v):
                    row[f"{pre}{k}_{a}"] = repr(x)
            row[pre + "on_ground"] = int(p.on_ground)
            row[pre + "has_flip"] = int(p.has_flip)
            row[pre + "demolished"] = int(p.demolished)
        w.writerow([row[c] for c in header + extra])
    return out.getvalue()


# -- event inference ------------------------------------------------------

def infer_events(
    prev: GameState,
    now: GameState,
    dt: float,
    last_toucher: Optional[int] = None,
    arena: ArenaConstants = DEFAULT_ARENA,
    gravity: float = GRAVITY,
) -> tuple[list[EventFlags], Optional[int]]:
    """Touch and goal flags from kinematics alone; returns flags and the updated last toucher.

    A touch needs the car within ``r_ball + 120`` of the ball and a ball
    velocity change of more than 50 uu/s beyond what gravity explains.
    Shots, saves and demolitions are never inferred.
    """
    vp, vn = prev.ball.linear_velocity, now.ball.linear_velocity
    expected = Vec3(vp.x, vp.y, vp.z - gravity * dt)
    impulse = (vn - expected).norm() > TOUCH_IMPULSE
    touches = []
    for i, p in enumerate(now.players):
        gap = (now.ball.position - p.body.position).norm()
        touches.append(impulse and not p.demolished and gap < arena.ball_radius + TOUCH_MARGIN)
    if any(touches):
        # closest touching car becomes the last toucher
        last_toucher = min(
            (i for i, t in enumerate(touches) if t),
            key=lambda i: (now.ball.position - now.players[i].body.position).norm(),
        )
    scoring = goal_scored(prev, now, arena)
    return goal_flags(now, touches, scoring, last_toucher), last_toucher


def goal_scored(prev: GameState, now: GameState, arena: ArenaConstants = DEFAULT_ARENA) -> Optional[Team]:
    """Team credited with a goal on this transition, if the ball centre crossed a goal line in the mouth."""
    y0, p = prev.ball.position.y, now.ball.position
    line = arena.goal_line_y
    if not arena.in_goal_mouth(p):
        return None
    if y0 <= line < p.y:
        return Team.BLUE
    if y0 >= -line > p.y:
        return Team.ORANGE
    return None


def goal_flags(
    state: GameState,
    touches: Sequence[bool],
    scoring: Optional[Team],
    last_toucher: Optional[int],
    shots: Optional[Sequence[bool]] = None,
    saves: Optional[Sequence[bool]] = None,
    demolish: Optional[Sequence[bool]] = None,
    demolished: Optional[Sequence[bool]] = None,
) -> list[EventFlags]:
    n = len(state.players)
    out = []
    for i, p in enumerate(state.players):
        team_goal = scoring is not None and p.team is scoring
        out.append(EventFlags(
            touch=bool(touches[i]),
            goal=team_goal and last_toucher == i,
            concede=scoring is not None and p.team is not scoring,
            team_goal=team_goal,
            shot=bool(shots[i]) if shots else False,
            save=bool(saves[i]) if saves else False,
            demolish=bool(demolish[i]) if demolish else False,
            demolished=bool(demolished[i]) if demolished else False,
        ))
    assert len(out) == n
    return out


# -- timelines ------------------------------------------------------------

@dataclass(frozen=True)
class TimelineEntry:
    frame: int
    time: float
    events: tuple[EventFlags, ...]
    output: ShapedRewardOutput


@dataclass(frozen=True)
class RewardTimeline:
    entries: tuple[TimelineEntry, ...]
    player_ids: tuple[int, ...] = ()
    teams: tuple[Team, ...] = ()
    n_skip: int = 0
    spec_name: str = ""
    source: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def values(self, which: str = "distributed") -> list[float]:
        """Flattened per-player, per-frame values of one output field."""
        return [v for e in self.entries for v in getattr(e.output, which)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "spec": self.spec_name,
            "n_skip": self.n_skip,
            "player_ids": list(self.player_ids),
            "teams": [t.value for t in self.teams],
            "frames": [
                {
                    "frame": e.frame,
                    "time": e.time,
                    "events": [ev.to_dict() for ev in e.events],
                    **e.output.to_dict(),
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RewardTimeline:
        entries = []
        for f in data["frames"]:
            out = ShapedRewardOutput(
                tuple(f["reward"]), tuple(f["potential"]), tuple(f["shaping"]),
                tuple(f["shaped"]), tuple(f["distributed"]), tuple(dict(b) for b in f["breakdown"]),
            )
            events = tuple(EventFlags(**ev) for ev in f.get("events", []))
            entries.append(TimelineEntry(int(f["frame"]), float(f["time"]), events, out))
        return cls(
            tuple(entries),
            tuple(data.get("player_ids", [])),
            tuple(Team(t) for t in data.get("teams", [])),
            int(data.get("n_skip", 0)),
            str(data.get("spec", "")),
            str(data.get("source", "")),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        keys: list[str] = []
        for e in self.entries:
            for b in e.output.breakdown:
                keys += [k for k in b if k not in keys]
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["frame", "time", "player", "team", "reward", "potential", "shaping", "shaped", "distributed", *keys])
        for e in self.entries:
            o = e.output
            for i in range(len(o.reward)):
                pid = self.player_ids[i] if self.player_ids else i
                team = self.teams[i].value if self.teams else ""
                w.writerow([e.frame, repr(e.time), pid, team, repr(o.reward[i]), repr(o.potential[i]),
                            repr(o.shaping[i]), repr(o.shaped[i]), repr(o.distributed[i]),
                            *(repr(o.breakdown[i].get(k, 0.0)) for k in keys)])
        return out.getvalue()


def sampled_indices(n_frames: int, n_skip: int) -> range:
    if n_skip < 0:
        raise ParameterError(f"n_skip must be >= 0, got {n_skip}")
    return range(0, n_frames, n_skip + 1)


def replay_to_rewards(
    table: ReplayFrameTable,
    spec: RewardSpec,
    n_skip: int = 9,
    arena: ArenaConstants = DEFAULT_ARENA,
) -> RewardTimeline:
    """Evaluate ``spec`` on every ``(n_skip + 1)``-th frame.

    The previously evaluated frame is the previous state for shaping and
    touch detection; the first evaluated frame has zero shaping and no events.
    """
    entries = []
    prev: Optional[GameState] = None
    prev_time = 0.0
    prev_phi: Optional[list[float]] = None
    last_toucher: Optional[int] = None
    for i in sampled_indices(len(table), n_skip):
        state = table.state(i)
        t = table.rows[i]["time"]
        if prev is None:
            events = [EventFlags() for _ in state.players]
        else:
            events, last_toucher = infer_events(prev, state, t - prev_time, last_toucher, arena)
        out = step_rewards(spec, prev, state, events, arena, prev_phi)
        entries.append(TimelineEntry(int(table.rows[i]["frame"]), t, tuple(events), out))
        prev, prev_time, prev_phi = state, t, list(out.potential)
    return RewardTimeline(
        tuple(entries), tuple(table.player_order()),
        tuple(sorted(table.teams[0], key=lambda t: t is Team.ORANGE)),
        n_skip, spec.name, table.source,
    )


def parse_replay_folders(
    groups: Mapping[str, Sequence[str | os.PathLike]],
    spec: RewardSpec,
    n_skip: int = 9,
    column_map: Optional[Mapping[str, str]] = None,
    arena: ArenaConstants = DEFAULT_ARENA,
) -> dict[str, list[RewardTimeline]]:
    """Timelines for every ``*.csv`` in each group's folders, keyed by group name."""
    out: dict[str, list[RewardTimeline]] = {}
    for group, folders in groups.items():
        timelines = []
        for folder in folders:
            for path in sorted(Path(folder).glob("*.csv")):
                table = parse_replay_csv(path, column_map)
                timelines.append(replay_to_rewards(table, spec, n_skip, arena))
        out[group] = timelines
    return out
