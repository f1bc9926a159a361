"""Reward trees: linear sums, kinesthetic (signed geometric mean) combinations,
potential-based shaping and team-spirit distribution.

A :class:`RewardSpec` holds two trees. ``reward`` is the event reward ``R``
and ``potential`` is the general utility ``Phi``; the shaped reward is
``R' = R + gamma * Phi(s') - Phi(s)``, which is then mixed across teammates
and opponents with the team-spirit factor.
"""

from __future__ import annotations

import inspect
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, Union

from .arena import DEFAULT_ARENA, ArenaConstants, GameState, Team, load_config
from .components import (
    REGISTRY,
    STATEFUL,
    ComponentContext,
    EventFlags,
    align_ball_to_goal,
    player_to_ball_distance,
    player_to_ball_velocity,
    register,
)
from .errors import ParameterError, SpecError, StateError


def krc_combine(values: Sequence[float]) -> float:
    """Signed geometric mean of ``values``.

    Positive only when every value is strictly positive, negative otherwise;
    any zero makes the result 0.
    """
    n = len(values)
    if n == 0:
        raise ParameterError("krc_combine needs at least one value")
    if n == 1:
        return float(values[0])
    positive = True
    log_sum = 0.0
    for v in values:
        if not math.isfinite(v):
            raise ParameterError(f"non-finite KRC input {v}")
        if v == 0.0:
            return 0.0
        if v < 0.0:
            positive = False
        log_sum += math.log(abs(v))
    magnitude = math.exp(log_sum / n)
    return magnitude if positive else -magnitude


def offensive_potential(ctx: ComponentContext, dispersion: float = 1.0, density: float = 1.0) -> float:
    """KRC of alignment, parameterized player-ball closeness and player-to-ball velocity."""
    return krc_combine([
        align_ball_to_goal(ctx),
        player_to_ball_distance(ctx, dispersion, density),
        player_to_ball_velocity(ctx),
    ])


def distance_weighted_alignment(ctx: ComponentContext, dispersion: float = 1.0, density: float = 1.0) -> float:
    """KRC of alignment and parameterized player-ball closeness."""
    return krc_combine([align_ball_to_goal(ctx), player_to_ball_distance(ctx, dispersion, density)])


register("offensive_potential", offensive_potential, (-1.0, 1.0))
register("distance_weighted_alignment", distance_weighted_alignment, (-1.0, 1.0))


# -- reward trees ---------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    name: str
    params: Mapping[str, float] = field(default_factory=dict)
    weight: float = 1.0
    label: Optional[str] = None

    @property
    def key(self) -> str:
        return self.label or self.name


@dataclass(frozen=True)
class Linear:
    children: tuple[Node, ...]
    weight: float = 1.0
    label: Optional[str] = None

    @property
    def key(self) -> str:
        return self.label or "linear"


@dataclass(frozen=True)
class KRC:
    children: tuple[Node, ...]
    weight: float = 1.0
    label: Optional[str] = None

    @property
    def key(self) -> str:
        return self.label or "krc"


Node = Union[Leaf, Linear, KRC]


@dataclass(frozen=True)
class RewardSpec:
    reward: Node
    potential: Optional[Node] = None
    shaping_gamma: float = 1.0
    team_spirit: float = 0.0
    name: str = "custom"

    def __post_init__(self) -> None:
        if not 0.0 <= self.team_spirit <= 1.0:
            raise SpecError(f"team_spirit must be in [0, 1], got {self.team_spirit}")
        if not math.isfinite(self.shaping_gamma):
            raise SpecError("shaping_gamma must be finite")
        validate_node(self.reward)
        if self.potential is not None:
            validate_node(self.potential)


def validate_node(node: Node) -> None:
    if not math.isfinite(node.weight):
        raise SpecError(f"non-finite weight on {node.key!r}")
    if isinstance(node, Leaf):
        fn = REGISTRY.get(node.name)
        if fn is None:
            raise SpecError(f"unknown component {node.name!r}")
        try:
            inspect.signature(fn).bind(None, **node.params)
        except TypeError as exc:
            raise SpecError(f"bad params for {node.name!r}: {exc}") from None
        return
    if not node.children:
        raise SpecError(f"{type(node).__name__} node {node.key!r} has no children")
    if isinstance(node, KRC):
        for child in node.children:
            if child.weight != 1.0:
                # Weighted KRC (powers inside the root) is deliberately unsupported.
                raise SpecError(f"KRC child {child.key!r} must not carry a weight")
    else:
        keys = [c.key for c in node.children]
        dupes = {k for k in keys if keys.count(k) > 1}
        if dupes:
            raise SpecError(f"duplicate child labels {sorted(dupes)} in {node.key!r}")
    for child in node.children:
        validate_node(child)


def evaluate_node(node: Node, ctx: ComponentContext) -> float:
    """Unweighted value of ``node`` (the node's own weight is applied by its parent)."""
    if isinstance(node, Leaf):
        return REGISTRY[node.name](ctx, **node.params)
    if isinstance(node, KRC):
        return krc_combine([evaluate_node(c, ctx) for c in node.children])
    return sum(c.weight * evaluate_node(c, ctx) for c in node.children)


def evaluate_breakdown(node: Optional[Node], ctx: ComponentContext) -> tuple[float, dict[str, float]]:
    """Aggregate value of a root node plus its weighted top-level terms.

    For a linear root every child becomes one breakdown entry; any other
    root is a single entry. Entries sum to the aggregate.
    """
    if node is None:
        return 0.0, {}
    if isinstance(node, Linear):
        terms = {c.key: node.weight * c.weight * evaluate_node(c, ctx) for c in node.children}
        return sum(terms.values()), terms
    value = node.weight * evaluate_node(node, ctx)
    return value, {node.key: value}


def evaluate_spec(spec: RewardSpec, ctx: ComponentContext) -> dict[str, float]:
    """Weighted breakdown for one player, keys prefixed ``reward.`` / ``potential.``."""
    _, r_terms = evaluate_breakdown(spec.reward, ctx)
    _, p_terms = evaluate_breakdown(spec.potential, ctx)
    out = {f"reward.{k}": v for k, v in r_terms.items()}
    out.update({f"potential.{k}": v for k, v in p_terms.items()})
    return out


def potential_value(spec: RewardSpec, ctx: ComponentContext) -> tuple[float, dict[str, float]]:
    """General utility Phi for ``ctx``'s player; demolished players get 0."""
    if spec.potential is None:
        return 0.0, {}
    if ctx.player.demolished:
        _, terms = evaluate_breakdown(spec.potential, ctx)
        return 0.0, {k: 0.0 for k in terms}
    return evaluate_breakdown(spec.potential, ctx)


def shaping_term(phi_prev: float, phi_now: float, gamma: float) -> float:
    return gamma * phi_now - phi_prev


def distribute_team_spirit(rewards: Sequence[float], teams: Sequence[Team], tau: float) -> list[float]:
    """``(1 - tau) * r_i + tau * mean(own team) - mean(opponents)`` per player."""
    if len(rewards) != len(teams):
        raise ParameterError("rewards and teams differ in length")
    if not 0.0 <= tau <= 1.0:
        raise ParameterError(f"tau must be in [0, 1], got {tau}")
    sums = {Team.BLUE: 0.0, Team.ORANGE: 0.0}
    counts = {Team.BLUE: 0, Team.ORANGE: 0}
    for r, t in zip(rewards, teams):
        t = Team(t)
        sums[t] += r
        counts[t] += 1
    if counts[Team.BLUE] == 0 or counts[Team.ORANGE] == 0:
        raise ParameterError("team spirit needs both teams non-empty")
    means = {t: sums[t] / counts[t] for t in sums}
    return [(1.0 - tau) * r + tau * means[Team(t)] - means[Team(t).other] for r, t in zip(rewards, teams)]


@dataclass(frozen=True)
class ShapedRewardOutput:
    """Per-player reward decomposition for one step."""

    reward: tuple[float, ...]
    potential: tuple[float, ...]
    shaping: tuple[float, ...]
    shaped: tuple[float, ...]
    distributed: tuple[float, ...]
    breakdown: tuple[dict[str, float], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "reward": list(self.reward),
            "potential": list(self.potential),
            "shaping": list(self.shaping),
            "shaped": list(self.shaped),
            "distributed": list(self.distributed),
            "breakdown": [dict(b) for b in self.breakdown],
        }


def potentials(spec: RewardSpec, state: GameState, arena: ArenaConstants = DEFAULT_ARENA) -> list[float]:
    return [potential_value(spec, ComponentContext(state, i, arena=arena))[0] for i in range(len(state.players))]


def step_rewards(
    spec: RewardSpec,
    prev_state: Optional[GameState],
    state: GameState,
    events: Sequence[EventFlags] = (),
    arena: ArenaConstants = DEFAULT_ARENA,
    prev_potentials: Optional[Sequence[float]] = None,
) -> ShapedRewardOutput:
    """Shaped and distributed rewards for every player on the transition ``prev_state -> state``.

    With no ``prev_state`` (episode start) the shaping term is 0.
    ``prev_potentials`` may be passed to skip re-evaluating Phi on ``prev_state``.
    """
    n = len(state.players)
    if prev_state is not None and prev_state.roster() != state.roster():
        raise StateError(f"roster changed between ticks {prev_state.tick} and {state.tick}")
    if events and len(events) != n:
        raise StateError(f"expected {n} event flag sets, got {len(events)}")

    if prev_state is not None and prev_potentials is None:
        prev_potentials = potentials(spec, prev_state, arena)

    rewards, phis, fs, shaped, breakdowns = [], [], [], [], []
    for i in range(n):
        ctx = ComponentContext(state, i, prev_state, events, arena)
        r, r_terms = evaluate_breakdown(spec.reward, ctx)
        phi, p_terms = potential_value(spec, ctx)
        f = 0.0 if prev_state is None else shaping_term(prev_potentials[i], phi, spec.shaping_gamma)
        terms = {f"reward.{k}": v for k, v in r_terms.items()}
        terms.update({f"potential.{k}": v for k, v in p_terms.items()})
        rewards.append(r)
        phis.append(phi)
        fs.append(f)
        shaped.append(r + f)
        breakdowns.append(terms)

    teams = state.roster()
    if Team.BLUE in teams and Team.ORANGE in teams:
        distributed = distribute_team_spirit(shaped, teams, spec.team_spirit)
    else:
        distributed = list(shaped)
    return ShapedRewardOutput(
        tuple(rewards), tuple(phis), tuple(fs), tuple(shaped), tuple(distributed), tuple(breakdowns)
    )


# -- serialization --------------------------------------------------------

def node_from_dict(data: Mapping[str, Any]) -> Node:
    kind = data.get("type", "leaf")
    weight = float(data.get("weight", 1.0))
    label = data.get("label")
    if kind == "leaf":
        if "name" not in data:
            raise SpecError("leaf node without a name")
        params = {k: float(v) for k, v in dict(data.get("params", {})).items()}
        return Leaf(data["name"], params, weight, label)
    children = tuple(node_from_dict(c) for c in data.get("children", []))
    if kind == "linear":
        return Linear(children, weight, label)
    if kind == "krc":
        return KRC(children, weight, label)
    raise SpecError(f"unknown node type {kind!r}")


def node_to_dict(node: Node) -> dict[str, Any]:
    out: dict[str, Any] = {"type": {Leaf: "leaf", Linear: "linear", KRC: "krc"}[type(node)]}
    if node.label is not None:
        out["label"] = node.label
    if node.weight != 1.0:
        out["weight"] = node.weight
    if isinstance(node, Leaf):
        out["name"] = node.name
        if node.params:
            out["params"] = dict(node.params)
    else:
        out["children"] = [node_to_dict(c) for c in node.children]
    return out


def spec_from_dict(data: Mapping[str, Any]) -> RewardSpec:
    if "reward" not in data:
        raise SpecError("reward spec needs a [reward] node")
    return RewardSpec(
        reward=node_from_dict(data["reward"]),
        potential=node_from_dict(data["potential"]) if "potential" in data else None,
        shaping_gamma=float(data.get("shaping_gamma", 1.0)),
        team_spirit=float(data.get("team_spirit", 0.0)),
        name=str(data.get("name", "custom")),
    )


def spec_to_dict(spec: RewardSpec) -> dict[str, Any]:
    out: dict[str, Any] = {
        "name": spec.name,
        "shaping_gamma": spec.shaping_gamma,
        "team_spirit": spec.team_spirit,
        "reward": node_to_dict(spec.reward),
    }
    if spec.potential is not None:
        out["potential"] = node_to_dict(spec.potential)
    return out


BUNDLED_SPECS = ("lucy_skg", "aux_ablation")


def load_spec(path: str | os.PathLike) -> RewardSpec:
    """Load a spec from a TOML/JSON file, or a bundled one by name (``lucy_skg``)."""
    p = Path(path)
    if not p.exists() and p.stem in BUNDLED_SPECS and p.parent == Path("."):
        ref = resources.files("arena_rewards") / "configs" / f"{p.stem}.toml"
        with resources.as_file(ref) as real:
            return spec_from_dict(load_config(real))
    return spec_from_dict(load_config(p))


def dumps_spec(spec: RewardSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2)


def uses_previous_state(node: Optional[Node]) -> bool:
    if node is None:
        return False
    if isinstance(node, Leaf):
        return node.name in STATEFUL
    return any(uses_previous_state(c) for c in node.children)
