"""Command-line entry point: ``arena-rewards <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data or schema error.
JSON is the canonical output; CSV and SVG are projections of it.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from .arena import GameState, PhysObject, Vec3, load_arena, state_from_dict
from .auxiliary import RP_THRESHOLD, class_balance
from .components import REGISTRY
from .composition import load_spec
from .errors import ParameterError, SchemaError, SpecError, StateError
from .field import FORMATS, GridConfig, Scenario, build_report, export_field, render_figure
from .observation import AdjacencyVariant, ActionVector, build_adjacency, encode_observation, state_positions
from .replay import parse_replay_csv, replay_to_rewards
from .sim import ChaseBallPolicy, RandomPolicy, SimConfig, idle_policy, random_state_setter, run_episode

log = logging.getLogger("arena_rewards")

DATA_ERRORS = (
    FileNotFoundError, IsADirectoryError, SchemaError, SpecError, StateError,
    ParameterError, json.JSONDecodeError, KeyError, ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here.
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _vec(text: str) -> Vec3:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z numbers, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected 3 comma-separated values, got {text!r}")
    return Vec3(*parts)


def _resolution(text: str) -> tuple[int, int]:
    try:
        nx, ny = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NXxNY, e.g. 128x160, got {text!r}") from None
    return nx, ny


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} is not a number: {value!r}") from None


def _roster(text: str) -> tuple[int, int]:
    try:
        b, o = (int(v) for v in text.lower().split("v"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected e.g. 2v2, got {text!r}") from None
    if b < 0 or o < 0 or b + o == 0:
        raise argparse.ArgumentTypeError(f"roster needs at least one player, got {text!r}")
    return b, o


def _write(out: Optional[str], data: bytes | str) -> None:
    if isinstance(data, str):
        data = data.encode("utf-8")
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        if not data.endswith(b"\n"):
            sys.stdout.buffer.write(b"\n")
        sys.stdout.flush()
    else:
        Path(out).write_bytes(data)
        log.info("wrote %s", out)


def _format_for(out: Optional[str], explicit: Optional[str], allowed: Sequence[str]) -> str:
    fmt = explicit
    if fmt is None and out not in (None, "-"):
        fmt = Path(out).suffix.lstrip(".").lower() or None
    fmt = fmt or "json"
    if fmt not in allowed:
        raise UsageError(f"format {fmt!r} not supported here; choose one of {', '.join(allowed)}")
    return fmt


def _read_json(path: str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# -- subcommands ----------------------------------------------------------

def cmd_field(args: argparse.Namespace) -> int:
    fmt = _format_for(args.out, args.format, FORMATS)
    if (args.component is None) == (args.spec is None):
        raise UsageError("give exactly one of --component or --spec")
    arena = load_arena(args.arena)
    if args.scenario:
        scenario = Scenario.from_dict(_read_json(args.scenario))
    else:
        scenario = Scenario()
    if args.ball is not None or args.ball_vel is not None:
        ball = scenario.ball
        scenario = Scenario(
            PhysObject(args.ball or ball.position, args.ball_vel or ball.linear_velocity),
            scenario.players, scenario.probe_velocity, scenario.probe_forward, scenario.probe_boost,
        )
    if args.component is not None and args.component not in REGISTRY:
        raise SpecError(f"unknown component {args.component!r}; known: {', '.join(sorted(REGISTRY))}")
    target = args.component if args.component is not None else load_spec(args.spec)
    nx, ny = args.res
    report = build_report(
        target, scenario, GridConfig(nx, ny, args.z), dict(args.param),
        args.team_spirit, args.annotate_ball, arena,
    )
    _write(args.out, export_field(report, fmt))
    if args.figure:
        render_figure(report, args.figure)
        log.info("wrote %s", args.figure)
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    fmt = _format_for(args.out, args.format, ("json", "csv"))
    column_map = _read_json(args.column_map) if args.column_map else None
    table = parse_replay_csv(args.input, column_map)
    if table.dropped:
        log.warning("dropped %d unparseable rows from %s", table.dropped, args.input)
    timeline = replay_to_rewards(table, load_spec(args.spec), args.n_skip, load_arena(args.arena))
    _write(args.out, timeline.to_json() if fmt == "json" else timeline.to_csv())
    return 0


def cmd_rollout(args: argparse.Namespace) -> int:
    _format_for(args.out, None, ("json",))
    arena = load_arena(args.arena)
    spec = load_spec(args.spec)
    config = SimConfig(seed=args.seed, episode_seconds=args.seconds)
    initial = random_state_setter(args.seed, args.players, args.kind, arena)
    n = len(initial.players)
    if args.policy == "random":
        policies = [RandomPolicy(args.seed * 1000 + i) for i in range(n)]
    elif args.policy == "chase":
        policies = [ChaseBallPolicy(args.seed * 1000 + i, arena=arena) for i in range(n)]
    else:
        policies = [idle_policy] * n
    result = run_episode(spec, initial, policies, config, arena)
    _write(args.out, json.dumps(result.to_dict(), indent=None if args.compact else 2))
    return 0


def _load_state(path: str) -> GameState:
    data = _read_json(path)
    if "state" in data:
        data = data["state"]
    return state_from_dict(data)


def cmd_graph(args: argparse.Namespace) -> int:
    state = _load_state(args.state)
    a = build_adjacency(state_positions(state), args.variant, args.dispersion, args.density,
                        args.include_self_in_mean)
    labels = ["ball"] + [f"{p.team.value}{i}" for i, p in enumerate(state.players)]
    _write(args.out, json.dumps({"variant": args.variant, "objects": labels, "adjacency": a.tolist()}, indent=2))
    return 0


def cmd_obs(args: argparse.Namespace) -> int:
    data = _read_json(args.state)
    state = state_from_dict(data["state"] if "state" in data else data)
    history = [ActionVector.from_sequence(a) for a in data.get("actions", [])]
    triplet = encode_observation(state, args.player, history, args.k, args.capacity)
    _write(args.out, json.dumps(triplet.to_dict(), indent=2))
    return 0


def _rewards_from_file(data: Any, which: str) -> list[float]:
    """Per player-step values from a replay timeline or a rollout episode."""
    rows = data.get("frames") if "frames" in data else data.get("steps")
    if rows is None:
        raise SchemaError("expected a timeline ('frames') or an episode ('steps')")
    return [float(v) for row in rows for v in row[which]]


def cmd_aux_classify(args: argparse.Namespace) -> int:
    which = "shaped" if args.undistributed else "distributed"
    values = _rewards_from_file(_read_json(args.timeline), which)
    if not values:
        raise SchemaError("timeline has no frames")
    report = {"epsilon": args.epsilon, "source": which, "count": len(values),
              **class_balance(values, args.epsilon)}
    _write(args.out, json.dumps(report, indent=2))
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arena-rewards", description="Reward shaping and arena analysis toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr (repeat for debug)")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--arena", help="TOML/JSON file with an [arena] section (default: $ARENA_REWARDS_CONFIG)")

    f = sub.add_parser("field", help="sample a reward component or spec over the arena plane")
    f.add_argument("--component", help=f"registered component name ({', '.join(sorted(REGISTRY))})")
    f.add_argument("--spec", help="reward spec file or bundled name; samples its general utility")
    f.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE",
                   help="component parameter, repeatable (e.g. dispersion=1.1)")
    f.add_argument("--ball", type=_vec, help="ball position x,y,z (uu)")
    f.add_argument("--ball-vel", type=_vec, help="ball velocity x,y,z (uu/s)")
    f.add_argument("--scenario", help="JSON scenario with ball, players and probe settings")
    f.add_argument("--z", type=float, default=300.0, help="grid height in uu (default 300)")
    f.add_argument("--res", type=_resolution, default=(128, 160), help="grid resolution NXxNY (default 128x160)")
    f.add_argument("--team-spirit", type=float, help="distribute the whole roster's values with this tau")
    f.add_argument("--annotate-ball", action="store_true", help="add the ball's nearest-grid value as an annotation")
    f.add_argument("--format", choices=FORMATS, help="output format (default: from --out suffix, else json)")
    f.add_argument("--out", help="output file (default stdout)")
    f.add_argument("--figure", help="also render a contour figure to this image path")
    common(f)
    f.set_defaults(func=cmd_field)

    r = sub.add_parser("replay", help="compute a reward timeline from a replay frame CSV")
    r.add_argument("--in", dest="input", required=True, help="replay frame CSV")
    r.add_argument("--spec", default="lucy_skg", help="reward spec file or bundled name (default lucy_skg)")
    r.add_argument("--n-skip", type=int, default=9, help="frames skipped between evaluated frames (default 9)")
    r.add_argument("--column-map", help="JSON mapping canonical column names to the file's names")
    r.add_argument("--format", choices=("json", "csv"), help="output format (default: from --out suffix, else json)")
    r.add_argument("--out", help="output file (default stdout)")
    common(r)
    r.set_defaults(func=cmd_replay)

    o = sub.add_parser("rollout", help="simulate one episode and emit the full episode record")
    o.add_argument("--spec", default="lucy_skg", help="reward spec file or bundled name (default lucy_skg)")
    o.add_argument("--seed", type=int, default=7, help="seed for state setting and policies (default 7)")
    o.add_argument("--players", type=_roster, default=(2, 2), help="roster as BvO, e.g. 2v2 (default)")
    o.add_argument("--policy", choices=("random", "chase", "idle"), default="chase", help="scripted policy (default chase)")
    o.add_argument("--kind", choices=("random", "kickoff_like"), default="kickoff_like", help="initial state kind")
    o.add_argument("--seconds", type=float, default=300.0, help="episode time cap in seconds (default 300)")
    o.add_argument("--compact", action="store_true", help="write JSON without indentation")
    o.add_argument("--out", help="output JSON file (default stdout)")
    common(o)
    o.set_defaults(func=cmd_rollout)

    g = sub.add_parser("graph", help="distance-kernel adjacency matrix for a state")
    g.add_argument("--state", required=True, help="state JSON (as written by rollout/obs)")
    g.add_argument("--variant", choices=[v.value for v in AdjacencyVariant], default="normalized_self",
                   help="self-connection handling (default normalized_self)")
    g.add_argument("--dispersion", type=float, default=1.0, help="kernel dispersion (default 1)")
    g.add_argument("--density", type=float, default=1.0, help="kernel density (default 1)")
    g.add_argument("--include-self-in-mean", action="store_true",
                   help="unit_self only: count the diagonal in the normalizing mean")
    g.add_argument("--out", help="output JSON file (default stdout)")
    g.set_defaults(func=cmd_graph)

    b = sub.add_parser("obs", help="encode a state as a query / key-value / mask triplet")
    b.add_argument("--state", required=True, help="state JSON; optional 'actions' list of 8-value rows")
    b.add_argument("--player", type=int, default=0, help="acting player index (default 0)")
    b.add_argument("--k", type=int, default=5, help="previous actions stacked in the query (default 5)")
    b.add_argument("--capacity", type=int, help="pad the object list to this many rows")
    b.add_argument("--out", help="output JSON file (default stdout)")
    b.set_defaults(func=cmd_obs)

    a = sub.add_parser("aux", help="auxiliary-objective data utilities")
    asub = a.add_subparsers(dest="aux_command", metavar="ACTION", parser_class=_Parser)
    asub.required = True
    c = asub.add_parser("classify", help="reward-prediction class balance of a timeline or episode")
    c.add_argument("--timeline", required=True, help="timeline JSON from replay, or episode JSON from rollout")
    c.add_argument("--epsilon", type=float, default=RP_THRESHOLD, help=f"zero band half-width (default {RP_THRESHOLD})")
    c.add_argument("--undistributed", action="store_true", help="classify the pre-team-spirit shaped reward")
    c.add_argument("--out", help="output JSON file (default stdout)")
    c.set_defaults(func=cmd_aux_classify)
    return p


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"arena-rewards: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"arena-rewards: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    try:
        code = dispatch()
        sys.stdout.flush()
    except BrokenPipeError:  # downstream closed early, e.g. `| head`
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
