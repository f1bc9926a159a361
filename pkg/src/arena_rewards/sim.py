"""Minimal deterministic kinematic simulator for exercising the reward stack.

Cars are planar point masses (no aerials, flips or jumps); the ball is a
ballistic sphere with restitution bounces. One simulator step is one agent
action: 8 physics ticks at 120 Hz, i.e. 15 actions per simulated second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .arena import (
    BALL_MAX_SPEED,
    CAR_MAX_SPEED,
    DEFAULT_ARENA,
    ArenaConstants,
    GameState,
    PhysObject,
    PlayerState,
    Team,
    Vec3,
)
from .components import EventFlags
from .composition import RewardSpec, ShapedRewardOutput, potentials, step_rewards
from .errors import ParameterError
from .observation import ActionVector
from .replay import goal_flags, goal_scored

CAR_Z = 17.0


@dataclass(frozen=True)
class SimConfig:
    action_rate: int = 15            # actions per simulated second
    physics_hz: int = 120
    episode_seconds: float = 300.0
    no_touch_seconds: float = 45.0
    gravity: float = 650.0
    restitution: float = 0.6
    car_accel: float = 1000.0
    boost_accel: float = 1600.0
    boost_drain: float = 33.3        # boost units per second
    coast_decel: float = 525.0
    turn_rate: float = 2.5           # rad/s at full steer
    car_radius: float = 70.0         # contact radius for car-ball and car-car tests
    touch_restitution: float = 0.3
    demolish_speed: float = 2200.0
    respawn_seconds: float = 3.0
    shot_speed: float = 500.0
    save_horizon: float = 1.0
    stop_on_goal: bool = True        # False keeps playing through goals (fixed-length episodes)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.physics_hz % self.action_rate:
            raise ParameterError("physics_hz must be a multiple of action_rate")
        if not 0.0 <= self.restitution <= 1.0:
            raise ParameterError("restitution must be in [0, 1]")

    @property
    def frame_skip(self) -> int:
        return self.physics_hz // self.action_rate

    @property
    def step_seconds(self) -> float:
        return 1.0 / self.action_rate

    @property
    def max_steps(self) -> int:
        return round(self.episode_seconds * self.action_rate)

    @property
    def no_touch_steps(self) -> int:
        return round(self.no_touch_seconds * self.action_rate)

    @property
    def respawn_steps(self) -> int:
        return round(self.respawn_seconds * self.action_rate)


class Termination(str, Enum):
    GOAL = "goal"
    TIME_CAP = "time_cap"
    NO_TOUCH = "no_touch"


@dataclass(frozen=True)
class StepInfo:
    """Contacts recorded while integrating one step."""

    touches: tuple[bool, ...]
    demolitions: tuple[tuple[int, int], ...] = ()   # (attacker, victim)


# -- physics --------------------------------------------------------------

def _ball_substep(px, py, pz, vx, vy, vz, dt, arena: ArenaConstants, cfg: SimConfig):
    """Exact ballistic motion over ``dt`` with wall/floor/ceiling bounces."""
    r = arena.ball_radius
    g = cfg.gravity
    e = cfg.restitution
    floor, ceil = r, arena.ceiling_z - r
    xw = arena.half_width_x - r
    rest_speed = g / cfg.physics_hz

    remaining = dt
    for _ in range(8):
        resting = pz <= floor and abs(vz) <= rest_speed
        if resting:
            pz, vz = floor, 0.0
        acc = 0.0 if resting else g
        in_mouth = abs(px) < arena.goal_half_width - r and pz < arena.goal_height - r
        yw = arena.half_length_y + (arena.goal_depth if in_mouth else 0.0) - r

        hits = []
        if vx > 0:
            hits.append(((xw - px) / vx, "x"))
        elif vx < 0:
            hits.append(((-xw - px) / vx, "x"))
        if vy > 0:
            hits.append(((yw - py) / vy, "y"))
        elif vy < 0:
            hits.append(((-yw - py) / vy, "y"))
        if not resting:
            # floor: pz + vz t - g t^2 / 2 = floor, take the positive root
            disc = vz * vz + 2.0 * g * (pz - floor)
            if disc >= 0:
                t_floor = (vz + math.sqrt(disc)) / g
                if t_floor >= 0:
                    hits.append((t_floor, "floor"))
            if vz > 0:
                disc = vz * vz - 2.0 * g * (ceil - pz)
                if disc >= 0:
                    hits.append(((vz - math.sqrt(disc)) / g, "ceil"))
        hits = [(max(0.0, t), axis) for t, axis in hits if t <= remaining]
        if not hits:
            px += vx * remaining
            py += vy * remaining
            pz += vz * remaining - 0.5 * acc * remaining * remaining
            vz -= acc * remaining
            break
        t, axis = min(hits)
        px += vx * t
        py += vy * t
        pz += vz * t - 0.5 * acc * t * t
        vz -= acc * t
        remaining -= t
        if axis == "x":
            px = math.copysign(xw, px)
            vx = -e * vx
        elif axis == "y":
            py = math.copysign(yw, py)
            vy = -e * vy
        elif axis == "floor":
            pz = floor
            vz = -e * vz
            if abs(vz) <= rest_speed:
                vz = 0.0
        else:
            pz = ceil
            vz = -e * vz
        if remaining <= 0.0:
            break
    pz = min(max(pz, floor), ceil)
    return px, py, pz, vx, vy, vz


def _clamp_speed(vx, vy, vz, cap):
    s = math.sqrt(vx * vx + vy * vy + vz * vz)
    if s > cap:
        k = cap / s
        return vx * k, vy * k, vz * k
    return vx, vy, vz


def simulate_step(
    state: GameState,
    actions: Sequence[ActionVector],
    config: SimConfig = SimConfig(),
    arena: ArenaConstants = DEFAULT_ARENA,
) -> tuple[GameState, StepInfo]:
    """Advance one action step (``frame_skip`` physics ticks); also report contacts."""
    n = len(state.players)
    if len(actions) != n:
        raise ParameterError(f"expected {n} actions, got {len(actions)}")
    dt = 1.0 / config.physics_hz
    r_ball = arena.ball_radius
    contact = r_ball + config.car_radius

    cars = []
    for p in state.players:
        b = p.body
        yaw = math.atan2(b.forward.y, b.forward.x)
        speed = b.linear_velocity.x * math.cos(yaw) + b.linear_velocity.y * math.sin(yaw)
        cars.append([b.position.x, b.position.y, yaw, speed, p.boost, p.demolished])
    bp, bv = state.ball.position, state.ball.linear_velocity
    px, py, pz, vx, vy, vz = bp.x, bp.y, bp.z, bv.x, bv.y, bv.z

    touches = [False] * n
    demos: list[tuple[int, int]] = []
    xlim = arena.half_width_x - config.car_radius
    ylim = arena.half_length_y - config.car_radius

    for _ in range(config.frame_skip):
        for c, a in zip(cars, actions):
            if c[5]:
                continue
            x, y, yaw, speed, boost, _ = c
            yaw += a.steer * config.turn_rate * dt
            if a.boost and boost > 0.0:
                accel = config.boost_accel
                boost = max(0.0, boost - config.boost_drain * dt)
            elif a.throttle != 0.0:
                accel = a.throttle * config.car_accel
            else:
                accel = -math.copysign(min(abs(speed) / dt, config.coast_decel), speed) if speed else 0.0
            speed = max(-CAR_MAX_SPEED, min(CAR_MAX_SPEED, speed + accel * dt))
            x += speed * math.cos(yaw) * dt
            y += speed * math.sin(yaw) * dt
            if abs(x) > xlim or abs(y) > ylim:
                x = max(-xlim, min(xlim, x))
                y = max(-ylim, min(ylim, y))
                speed = 0.0
            c[:5] = [x, y, yaw, speed, boost]

        px, py, pz, vx, vy, vz = _ball_substep(px, py, pz, vx, vy, vz, dt, arena, config)

        for i, c in enumerate(cars):
            if c[5]:
                continue
            dx, dy, dz = px - c[0], py - c[1], pz - CAR_Z
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            if dist >= contact:
                continue
            touches[i] = True
            if dist == 0.0:
                nx, ny, nz = 0.0, 0.0, 1.0
            else:
                nx, ny, nz = dx / dist, dy / dist, dz / dist
            cvx, cvy = c[3] * math.cos(c[2]), c[3] * math.sin(c[2])
            rel = (cvx - vx) * nx + (cvy - vy) * ny + (0.0 - vz) * nz
            if rel > 0.0:
                k = (1.0 + config.touch_restitution) * rel
                vx, vy, vz = vx + k * nx, vy + k * ny, vz + k * nz
            px, py = c[0] + nx * contact, c[1] + ny * contact
            pz = max(r_ball, CAR_Z + nz * contact)
        vx, vy, vz = _clamp_speed(vx, vy, vz, BALL_MAX_SPEED)

        for i, ci in enumerate(cars):
            if ci[5] or abs(ci[3]) < config.demolish_speed:
                continue
            hx, hy = math.cos(ci[2]) * math.copysign(1.0, ci[3]), math.sin(ci[2]) * math.copysign(1.0, ci[3])
            for j, cj in enumerate(cars):
                if j == i or cj[5] or state.players[i].team is state.players[j].team:
                    continue
                dx, dy = cj[0] - ci[0], cj[1] - ci[1]
                if dx * dx + dy * dy < (2 * config.car_radius) ** 2 and dx * hx + dy * hy > 0:
                    cj[5] = True
                    cj[3] = 0.0
                    demos.append((i, j))

    players = []
    for p, c in zip(state.players, cars):
        x, y, yaw, speed, boost, demolished = c
        fwd = Vec3(math.cos(yaw), math.sin(yaw), 0.0)
        body = PhysObject(
            position=Vec3(x, y, p.body.position.z if demolished else CAR_Z),
            linear_velocity=Vec3(0.0, 0.0, 0.0) if demolished else fwd * speed,
            angular_velocity=p.body.angular_velocity,
            forward=fwd,
            up=Vec3(0.0, 0.0, 1.0),
        )
        players.append(replace(p, body=body, boost=boost, demolished=demolished))
    ball = PhysObject(Vec3(px, py, pz), Vec3(vx, vy, vz), state.ball.angular_velocity)
    new_state = GameState(ball=ball, players=tuple(players), tick=state.tick + 1)
    return new_state, StepInfo(tuple(touches), tuple(demos))


def step_physics(
    state: GameState,
    actions: Sequence[ActionVector],
    config: SimConfig = SimConfig(),
    arena: ArenaConstants = DEFAULT_ARENA,
) -> GameState:
    return simulate_step(state, actions, config, arena)[0]


# -- events ---------------------------------------------------------------

def _crosses_own_goal(pos: Vec3, vel: Vec3, team: Team, horizon: float, arena: ArenaConstants) -> bool:
    """Does straight-line motion enter ``team``'s goal mouth within ``horizon`` seconds?"""
    line = -arena.goal_line_y if team is Team.BLUE else arena.goal_line_y
    if vel.y == 0.0:
        return False
    t = (line - pos.y) / vel.y
    if not 0.0 <= t <= horizon:
        return False
    return arena.in_goal_mouth(pos + vel * t)


def detect_events(
    prev_state: GameState,
    state: GameState,
    config: SimConfig = SimConfig(),
    arena: ArenaConstants = DEFAULT_ARENA,
    info: Optional[StepInfo] = None,
    last_toucher: Optional[int] = None,
) -> tuple[list[EventFlags], Optional[int]]:
    """Per-player event flags for ``prev_state -> state`` and the updated last toucher.

    Without ``info`` a touch is inferred from proximity plus a ball velocity
    change beyond gravity (> 50 uu/s), and demolitions from flags turning on.
    """
    n = len(state.players)
    if info is None:
        from .replay import TOUCH_IMPULSE

        vp, vn = prev_state.ball.linear_velocity, state.ball.linear_velocity
        jump = (vn - Vec3(vp.x, vp.y, vp.z - config.gravity * config.step_seconds)).norm() > TOUCH_IMPULSE
        reach = arena.ball_radius + config.car_radius + 1.0
        touches = tuple(
            jump and not p.demolished and (state.ball.position - p.body.position).norm() <= reach
            for p in state.players
        )
        demos = []
        for j, (a, b) in enumerate(zip(prev_state.players, state.players)):
            if b.demolished and not a.demolished:
                attackers = [
                    i for i, q in enumerate(prev_state.players)
                    if q.team is not b.team and q.body.linear_velocity.norm() >= config.demolish_speed
                ]
                if attackers:
                    i = min(attackers, key=lambda i: (prev_state.players[i].body.position - a.body.position).norm())
                    demos.append((i, j))
        info = StepInfo(touches, tuple(demos))

    touches = list(info.touches)
    if any(touches):
        last_toucher = min(
            (i for i in range(n) if touches[i]),
            key=lambda i: (state.ball.position - state.players[i].body.position).norm(),
        )

    shots = [False] * n
    saves = [False] * n
    ball_prev, ball_now = prev_state.ball, state.ball
    for i, p in enumerate(state.players):
        if not touches[i]:
            continue
        target = arena.attack_target(p.team)
        d = target - ball_now.position
        dn = d.norm()
        toward = d.dot(ball_now.linear_velocity) / dn if dn else 0.0
        shots[i] = toward > config.shot_speed
        saves[i] = _crosses_own_goal(
            ball_prev.position, ball_prev.linear_velocity, p.team, config.save_horizon, arena
        ) and not _crosses_own_goal(ball_now.position, ball_now.linear_velocity, p.team, config.save_horizon, arena)

    demolish = [False] * n
    demolished = [False] * n
    for attacker, victim in info.demolitions:
        demolish[attacker] = True
        demolished[victim] = True

    scoring = goal_scored(prev_state, state, arena)
    flags = goal_flags(state, touches, scoring, last_toucher, shots, saves, demolish, demolished)
    return flags, last_toucher


# -- policies -------------------------------------------------------------

Policy = Callable[[GameState, int], ActionVector]


def idle_policy(state: GameState, index: int) -> ActionVector:
    return ActionVector()


class RandomPolicy:
    """Uniform random throttle/steer/boost, seeded."""

    def __init__(self, seed: int = 0, hold_steps: int = 8):
        self.rng = np.random.default_rng(seed)
        self.hold_steps = hold_steps
        self._cache: dict[int, tuple[int, ActionVector]] = {}

    def __call__(self, state: GameState, index: int) -> ActionVector:
        held = self._cache.get(index)
        if held is not None and held[0] > 0:
            self._cache[index] = (held[0] - 1, held[1])
            return held[1]
        t, s = self.rng.uniform(-1.0, 1.0, size=2)
        action = ActionVector(throttle=t, steer=s, boost=bool(self.rng.random() < 0.2))
        self._cache[index] = (self.hold_steps - 1, action)
        return action


class ChaseBallPolicy:
    """Drive at the ball, aiming slightly behind it relative to the opponent net; small seeded noise."""

    def __init__(self, seed: int = 0, noise: float = 0.2, arena: ArenaConstants = DEFAULT_ARENA):
        self.rng = np.random.default_rng(seed)
        self.noise = noise
        self.arena = arena

    def __call__(self, state: GameState, index: int) -> ActionVector:
        p = state.players[index]
        ball = state.ball.position
        target = self.arena.attack_target(p.team)
        to_goal = target - ball
        n = to_goal.norm() or 1.0
        aim = ball - to_goal * (150.0 / n)
        dx, dy = aim.x - p.body.position.x, aim.y - p.body.position.y
        heading = math.atan2(p.body.forward.y, p.body.forward.x)
        err = (math.atan2(dy, dx) - heading + math.pi) % (2 * math.pi) - math.pi
        steer = max(-1.0, min(1.0, 2.0 * err)) + self.noise * self.rng.standard_normal()
        return ActionVector(throttle=1.0, steer=steer, boost=abs(err) < 0.3 and p.boost > 10)


# -- episodes -------------------------------------------------------------

@dataclass(frozen=True)
class EpisodeResult:
    initial: GameState
    trajectory: tuple[GameState, ...]
    events: tuple[tuple[EventFlags, ...], ...]
    rewards: tuple[ShapedRewardOutput, ...]
    termination: Termination
    initial_potential: tuple[float, ...] = ()

    def __len__(self) -> int:
        return len(self.trajectory)

    def to_dict(self) -> dict[str, Any]:
        return {
            "termination": self.termination.value,
            "length": len(self.trajectory),
            "initial": self.initial.to_dict(),
            "initial_potential": list(self.initial_potential),
            "steps": [
                {
                    "state": s.to_dict(),
                    "events": [e.to_dict() for e in ev],
                    **out.to_dict(),
                }
                for s, ev, out in zip(self.trajectory, self.events, self.rewards)
            ],
        }


def kickoff_spawn(team: Team, slot: int, arena: ArenaConstants = DEFAULT_ARENA) -> tuple[Vec3, Vec3]:
    spots = [(-2048.0, -2560.0), (2048.0, -2560.0), (-256.0, -3840.0), (256.0, -3840.0), (0.0, -4608.0)]
    x, y = spots[slot % len(spots)]
    y = max(y, -(arena.half_length_y - 200.0))
    if team is Team.ORANGE:
        y = -y
    pos = Vec3(x, y, CAR_Z)
    d = Vec3(-x, -y, 0.0)
    n = d.norm() or 1.0
    return pos, Vec3(d.x / n, d.y / n, 0.0)


def _respawn(p: PlayerState, slot: int, arena: ArenaConstants) -> PlayerState:
    pos, fwd = kickoff_spawn(p.team, slot, arena)
    return replace(p, body=PhysObject(pos, forward=fwd), boost=33.0, demolished=False)


def _apply_respawns(state: GameState, timers: list[int], config: SimConfig, arena: ArenaConstants) -> GameState:
    """Count demolished steps per car and respawn cars whose timer ran out (mutates ``timers``)."""
    players = list(state.players)
    changed = False
    for i, p in enumerate(players):
        timers[i] = timers[i] + 1 if p.demolished else 0
        if p.demolished and timers[i] > config.respawn_steps:
            slot = state.team_indices(p.team).index(i)
            players[i] = _respawn(p, slot, arena)
            timers[i] = 0
            changed = True
    return replace(state, players=tuple(players)) if changed else state


def run_episode(
    spec: RewardSpec,
    initial: GameState,
    policy: Policy | Sequence[Policy],
    config: SimConfig = SimConfig(),
    arena: ArenaConstants = DEFAULT_ARENA,
) -> EpisodeResult:
    """Step until a goal, the no-touch timeout or the time cap; record everything."""
    n = len(initial.players)
    policies = list(policy) if isinstance(policy, Sequence) else [policy] * n
    if len(policies) != n:
        raise ParameterError(f"expected {n} policies, got {len(policies)}")

    state = initial
    phi = potentials(spec, state, arena)
    initial_phi = tuple(phi)
    trajectory, events_log, rewards = [], [], []
    last_toucher: Optional[int] = None
    since_touch = 0
    demo_timer = [0] * n
    termination = Termination.TIME_CAP

    for _ in range(config.max_steps):
        actions = [policies[i](state, i) for i in range(n)]
        new_state, info = simulate_step(state, actions, config, arena)
        new_state = _apply_respawns(new_state, demo_timer, config, arena)
        flags, last_toucher = detect_events(state, new_state, config, arena, info, last_toucher)
        out = step_rewards(spec, state, new_state, flags, arena, phi)
        trajectory.append(new_state)
        events_log.append(tuple(flags))
        rewards.append(out)
        phi = list(out.potential)
        state = new_state

        since_touch = 0 if any(f.touch for f in flags) else since_touch + 1
        if config.stop_on_goal and any(f.team_goal for f in flags):
            termination = Termination.GOAL
            break
        if since_touch >= config.no_touch_steps:
            termination = Termination.NO_TOUCH
            break

    return EpisodeResult(initial, tuple(trajectory), tuple(events_log), tuple(rewards), termination, initial_phi)


def random_state_setter(
    seed: int,
    rosters: tuple[int, int] = (2, 2),
    kind: str = "random",
    arena: ArenaConstants = DEFAULT_ARENA,
) -> GameState:
    """Seeded initial state: ``"random"`` placement or a ``"kickoff_like"`` lineup."""
    n_blue, n_orange = rosters
    if n_blue < 0 or n_orange < 0:
        raise ParameterError("roster sizes must be >= 0")
    rng = np.random.default_rng(seed)
    r = arena.ball_radius
    if kind == "kickoff_like":
        players = []
        for team, count in ((Team.BLUE, n_blue), (Team.ORANGE, n_orange)):
            for slot in range(count):
                pos, fwd = kickoff_spawn(team, slot, arena)
                players.append(PlayerState(PhysObject(pos, forward=fwd), team, 33.0))
        return GameState(PhysObject(Vec3(0.0, 0.0, r)), tuple(players))
    if kind != "random":
        raise ParameterError(f"unknown state kind {kind!r}")

    margin = 200.0
    bx = rng.uniform(-arena.half_width_x + r, arena.half_width_x - r)
    by = rng.uniform(-arena.half_length_y + r, arena.half_length_y - r)
    bz = rng.uniform(r, arena.ceiling_z - r)
    bvel = rng.normal(size=3)
    bvel *= rng.uniform(0.0, 3000.0) / (np.linalg.norm(bvel) or 1.0)
    players = []
    for team, count in ((Team.BLUE, n_blue), (Team.ORANGE, n_orange)):
        for _ in range(count):
            x = rng.uniform(-arena.half_width_x + margin, arena.half_width_x - margin)
            y = rng.uniform(-arena.half_length_y + margin, arena.half_length_y - margin)
            yaw = rng.uniform(-math.pi, math.pi)
            fwd = Vec3(math.cos(yaw), math.sin(yaw), 0.0)
            speed = rng.uniform(0.0, CAR_MAX_SPEED)
            players.append(PlayerState(
                PhysObject(Vec3(x, y, CAR_Z), fwd * speed, forward=fwd),
                team,
                float(rng.uniform(0.0, 100.0)),
            ))
    ball = PhysObject(Vec3(bx, by, bz), Vec3(*map(float, bvel)))
    return GameState(ball, tuple(players))
