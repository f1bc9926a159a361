"""Reward fields over the arena floor plan.

A probe car is placed at every point of a rectilinear grid at fixed height
and the chosen component (or reward spec) is evaluated there. Results can be
exported as CSV/JSON/SVG data or rendered to an image with matplotlib.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np
from scipy.spatial import cKDTree

from .arena import (
    DEFAULT_ARENA,
    ArenaConstants,
    GameState,
    PhysObject,
    PlayerState,
    Team,
    Vec3,
    state_from_dict,
    state_to_dict,
)
from .components import REGISTRY, ComponentContext
from .composition import RewardSpec, distribute_team_spirit, potential_value
from .errors import ParameterError, SpecError

FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class GridConfig:
    nx: int = 128
    ny: int = 160
    z: float = 300.0

    def __post_init__(self) -> None:
        if self.nx < 2 or self.ny < 2:
            raise ParameterError(f"grid resolution must be at least 2x2, got {self.nx}x{self.ny}")


@dataclass(frozen=True)
class Scenario:
    """Everything on the field except the probe car."""

    ball: PhysObject = PhysObject(Vec3(0.0, 0.0, 92.75))
    players: tuple[PlayerState, ...] = ()
    probe_velocity: Vec3 = Vec3(0.0, 0.0, 0.0)
    probe_forward: Vec3 = Vec3(0.0, 1.0, 0.0)
    probe_boost: float = 33.0

    def state_with_probe(self, position: Vec3) -> GameState:
        """Scenario state with the probe car inserted as Blue player 0."""
        probe = PlayerState(
            PhysObject(position, self.probe_velocity, forward=self.probe_forward),
            Team.BLUE,
            self.probe_boost,
        )
        return GameState(self.ball, (probe,) + tuple(self.players))

    def to_dict(self) -> dict[str, Any]:
        d = state_to_dict(GameState(self.ball, self.players))
        return {
            "ball": d["ball"],
            "players": d["players"],
            "probe_velocity": list(self.probe_velocity),
            "probe_forward": list(self.probe_forward),
            "probe_boost": self.probe_boost,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Scenario:
        s = state_from_dict({"ball": data["ball"], "players": data.get("players", [])})
        return cls(
            s.ball,
            s.players,
            Vec3(*data.get("probe_velocity", (0.0, 0.0, 0.0))),
            Vec3(*data.get("probe_forward", (0.0, 1.0, 0.0))),
            float(data.get("probe_boost", 33.0)),
        )


@dataclass
class ArenaGrid:
    nx: int
    ny: int
    z: float
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    @classmethod
    def make(cls, config: GridConfig = GridConfig(), arena: ArenaConstants = DEFAULT_ARENA) -> ArenaGrid:
        xs = np.linspace(-arena.half_width_x, arena.half_width_x, config.nx)
        ys = np.linspace(-arena.half_length_y, arena.half_length_y, config.ny)
        return cls(config.nx, config.ny, config.z, xs, ys, np.full(config.nx * config.ny, np.nan))

    @property
    def positions(self) -> np.ndarray:
        """(nx*ny, 3) array, row-major in y: index = iy * nx + ix."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, self.z)])

    def __len__(self) -> int:
        return self.nx * self.ny

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.ny, self.nx)

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.positions)
        return self._tree

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArenaGrid):
            return NotImplemented
        return (
            (self.nx, self.ny, self.z) == (other.nx, other.ny, other.z)
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


Target = Union[str, RewardSpec]


def _value_fn(target: Target, params: Mapping[str, float], team_spirit: Optional[float], arena: ArenaConstants):
    if isinstance(target, RewardSpec):
        def per_player(state: GameState, i: int) -> float:
            return potential_value(target, ComponentContext(state, i, arena=arena))[0]
    else:
        fn = REGISTRY.get(target)
        if fn is None:
            raise SpecError(f"unknown component {target!r}")

        def per_player(state: GameState, i: int) -> float:
            return fn(ComponentContext(state, i, arena=arena), **params)

    if team_spirit is None:
        return lambda state: per_player(state, 0)

    def distributed(state: GameState) -> float:
        values = [per_player(state, i) for i in range(len(state.players))]
        return distribute_team_spirit(values, state.roster(), team_spirit)[0]

    return distributed


def sample_field(
    target: Target,
    scenario: Scenario = Scenario(),
    grid: GridConfig = GridConfig(),
    params: Optional[Mapping[str, float]] = None,
    team_spirit: Optional[float] = None,
    arena: ArenaConstants = DEFAULT_ARENA,
) -> ArenaGrid:
    """Evaluate ``target`` for a probe car at every grid point.

    ``target`` is a component name (with ``params``) or a reward spec, whose
    general utility is sampled. With ``team_spirit`` the per-player values of
    the whole roster are distributed and the probe's share is kept.
    """
    fn = _value_fn(target, params or {}, team_spirit, arena)
    out = ArenaGrid.make(grid, arena)
    values = np.empty(len(out))
    for k, (x, y, z) in enumerate(out.positions.tolist()):
        values[k] = fn(scenario.state_with_probe(Vec3(x, y, z)))
    out.values = values
    return out


def nearest_grid_lookup(grid: ArenaGrid, position: Sequence[float]) -> tuple[int, float]:
    """Index and value of the grid point nearest to ``position`` (ties -> lowest index)."""
    if len(grid) == 0:
        raise ParameterError("empty grid")
    k = min(8, len(grid))
    dist, idx = grid.tree().query(np.asarray(position, dtype=float), k=k)
    dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
    best = dist.min()
    index = int(min(i for d, i in zip(dist, idx) if d == best))
    return index, float(grid.values[index])


# -- reports --------------------------------------------------------------

@dataclass(frozen=True)
class Annotation:
    label: str
    position: tuple[float, float, float]
    index: int
    value: float


@dataclass
class FieldReport:
    grid: ArenaGrid
    scenario: Scenario
    component: str
    params: dict[str, float] = field(default_factory=dict)
    annotations: list[Annotation] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "component": self.component,
            "params": dict(self.params),
            "scenario": self.scenario.to_dict(),
            "grid": {
                "nx": self.grid.nx,
                "ny": self.grid.ny,
                "z": self.grid.z,
                "xs": self.grid.xs.tolist(),
                "ys": self.grid.ys.tolist(),
                "values": self.grid.values.tolist(),
            },
            "annotations": [
                {"label": a.label, "position": list(a.position), "index": a.index, "value": a.value}
                for a in self.annotations
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FieldReport:
        g = data["grid"]
        grid = ArenaGrid(int(g["nx"]), int(g["ny"]), float(g["z"]),
                         np.asarray(g["xs"], dtype=float), np.asarray(g["ys"], dtype=float),
                         np.asarray(g["values"], dtype=float))
        annotations = [
            Annotation(a["label"], tuple(a["position"]), int(a["index"]), float(a["value"]))
            for a in data.get("annotations", [])
        ]
        return cls(grid, Scenario.from_dict(data["scenario"]), data["component"],
                   dict(data.get("params", {})), annotations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def build_report(
    target: Target,
    scenario: Scenario = Scenario(),
    grid: GridConfig = GridConfig(),
    params: Optional[Mapping[str, float]] = None,
    team_spirit: Optional[float] = None,
    annotate_ball: bool = False,
    arena: ArenaConstants = DEFAULT_ARENA,
) -> FieldReport:
    """Sample a field and annotate scenario players (and optionally the ball) with nearest-grid values."""
    sampled = sample_field(target, scenario, grid, params, team_spirit, arena)
    annotations = []
    for i, p in enumerate(scenario.players):
        pos = tuple(p.body.position)
        idx, value = nearest_grid_lookup(sampled, pos)
        annotations.append(Annotation(f"{p.team.value}{i}", pos, idx, value))
    if annotate_ball:
        pos = tuple(scenario.ball.position)
        idx, value = nearest_grid_lookup(sampled, pos)
        annotations.append(Annotation("ball", pos, idx, value))
    name = target if isinstance(target, str) else f"spec:{target.name}"
    return FieldReport(sampled, scenario, name, dict(params or {}), annotations)


def _color(t: float) -> str:
    # dark blue -> teal -> yellow
    stops = [(0.0, (32, 24, 96)), (0.5, (33, 145, 140)), (1.0, (253, 231, 37))]
    t = min(1.0, max(0.0, t))
    for (t0, c0), (t1, c1) in zip(stops, stops[1:]):
        if t <= t1:
            u = (t - t0) / (t1 - t0)
            r, g, b = (round(a + (b_ - a) * u) for a, b_ in zip(c0, c1))
            return f"#{r:02x}{g:02x}{b:02x}"
    return "#fde725"


def _svg(report: FieldReport, cell: float = 4.0) -> str:
    g = report.grid
    img = g.as_image()
    finite = img[np.isfinite(img)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    width, height = g.nx * cell, g.ny * cell
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f"<title>{escape(report.component)}</title>",
        f'<desc>min={lo!r} max={hi!r}</desc>',
    ]
    for iy in range(g.ny):
        row_y = (g.ny - 1 - iy) * cell  # +y (orange net) at the top
        for ix in range(g.nx):
            v = img[iy, ix]
            fill = _color((v - lo) / span) if np.isfinite(v) else "#000000"
            lines.append(f'<rect x="{ix * cell:g}" y="{row_y:g}" width="{cell:g}" height="{cell:g}" fill="{fill}"/>')
    for a in report.annotations:
        ix = (a.index % g.nx) * cell + cell / 2
        iy = (g.ny - 1 - a.index // g.nx) * cell + cell / 2
        lines.append(f'<circle cx="{ix:g}" cy="{iy:g}" r="{2 * cell:g}" fill="none" stroke="white"/>')
        lines.append(f'<text x="{ix + 2 * cell:g}" y="{iy:g}" fill="white" font-size="{3 * cell:g}">'
                     f"{escape(a.label)} {a.value:.3f}</text>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def export_field(report: FieldReport, fmt: str) -> bytes:
    """Serialize ``report`` as ``csv`` (x,y,value rows), ``json`` or an ``svg`` heatmap."""
    fmt = fmt.lower()
    if fmt == "csv":
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for (x, y, _), v in zip(report.grid.positions.tolist(), report.grid.values.tolist()):
            w.writerow([repr(x), repr(y), repr(v)])
        return out.getvalue().encode()
    if fmt == "json":
        return json.dumps(report.to_dict()).encode()
    if fmt == "svg":
        return _svg(report).encode()
    raise ParameterError(f"unknown export format {fmt!r}; expected one of {FORMATS}")


def load_report(data: bytes | str) -> FieldReport:
    return FieldReport.from_dict(json.loads(data))


def render_figure(report: FieldReport, path: str, contour_levels: int = 80, figsize=(6, 7.5)) -> None:
    """Contour plot of the field with annotated players and ball, saved to ``path``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    g = report.grid
    fig, ax = plt.subplots(figsize=figsize)
    cs = ax.contourf(g.xs, g.ys, g.as_image(), levels=contour_levels, cmap="viridis")
    fig.colorbar(cs, ax=ax, label=report.component)
    bx, by, _ = report.scenario.ball.position
    ax.scatter([bx], [by], s=64, c="white", edgecolors="black", label="ball", zorder=3)
    for a in report.annotations:
        if a.label == "ball":
            continue
        color = "tab:blue" if a.label.startswith("blue") else "tab:orange"
        ax.scatter([a.position[0]], [a.position[1]], s=64, c=color, edgecolors="black", zorder=3)
        ax.annotate(f"{a.value:.3f}", (a.position[0], a.position[1]), xytext=(6, 6),
                    textcoords="offset points", color="white")
    ax.set_xlabel("x (uu)")
    ax.set_ylabel("y (uu)")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


__all__ = [
    "ArenaGrid", "Annotation", "FieldReport", "GridConfig", "Scenario",
    "build_report", "export_field", "load_report", "nearest_grid_lookup", "render_figure", "sample_field",
]
