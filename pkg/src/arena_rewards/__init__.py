"""Reward shaping and arena analysis for car-soccer style field games."""

from __future__ import annotations

from .arena import (
    DEFAULT_ARENA, ArenaConstants, GameState, PhysObject, PlayerState, Team, Vec3,
    load_arena, make_state, mirror_for_orange, object_distance,
)
from .auxiliary import (
    RewardClass, build_history, classify_reward, combined_loss, cross_entropy_3class,
    episode_histories, smooth_l1,
)
from .components import REGISTRY, ComponentContext, EventFlags, evaluate_component, parameterized_distance
from .composition import (
    KRC, Leaf, Linear, RewardSpec, distribute_team_spirit, evaluate_spec, krc_combine,
    load_spec, potentials, shaping_term, step_rewards,
)
from .errors import ParameterError, SchemaError, SpecError, StateError
from .field import GridConfig, Scenario, build_report, export_field, nearest_grid_lookup, sample_field
from .observation import ActionVector, AdjacencyVariant, build_adjacency, encode_observation, parse_kbm_actions
from .replay import parse_replay_csv, replay_to_rewards
from .sim import SimConfig, run_episode, simulate_step, random_state_setter

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_ARENA", "ArenaConstants", "GameState", "PhysObject", "PlayerState", "Team", "Vec3",
    "load_arena", "make_state", "mirror_for_orange", "object_distance",
    "RewardClass", "build_history", "classify_reward", "combined_loss", "cross_entropy_3class",
    "episode_histories", "smooth_l1",
    "REGISTRY", "ComponentContext", "EventFlags", "evaluate_component", "parameterized_distance",
    "KRC", "Leaf", "Linear", "RewardSpec", "distribute_team_spirit", "evaluate_spec", "krc_combine",
    "load_spec", "potentials", "shaping_term", "step_rewards",
    "ParameterError", "SchemaError", "SpecError", "StateError",
    "GridConfig", "Scenario", "build_report", "export_field", "nearest_grid_lookup", "sample_field",
    "ActionVector", "AdjacencyVariant", "build_adjacency", "encode_observation", "parse_kbm_actions",
    "parse_replay_csv", "replay_to_rewards",
    "SimConfig", "run_episode", "simulate_step", "random_state_setter",
]
