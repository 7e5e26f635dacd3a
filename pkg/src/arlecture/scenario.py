"""Scripted sessions: a scenario file is a lecturer walk plus a timed command
list, replayed against a fresh engine on the virtual clock. Same script and
seed always produce the same timeline bytes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .engine import SessionEngine
from .protocol import ROLE_REMOTE_OPERATION, CommandIssuer


class ScriptError(Exception):
    pass


@dataclass(frozen=True)
class ScriptedCommand:
    t: float
    kind: str
    payload: dict


@dataclass
class Scenario:
    duration_ms: float
    commands: list[ScriptedCommand] = field(default_factory=list)
    lecturer: list[tuple[float, list[float]]] = field(default_factory=list)

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ScriptError("duration must be positive")
        for seq, what in ((self.commands, "command"), (self.lecturer, "waypoint")):
            times = [c.t if isinstance(c, ScriptedCommand) else c[0] for c in seq]
            if any(b < a for a, b in zip(times, times[1:])):
                raise ScriptError(f"{what} times must be non-decreasing")
            if times and (times[0] < 0 or times[-1] > self.duration_ms):
                raise ScriptError(f"{what} times must lie within the session")


def load_scenario(source) -> Scenario:
    """Accepts a path, a JSON string, or an already-parsed dict."""
    if isinstance(source, dict):
        obj = source
    elif isinstance(source, (str, Path)) and str(source).lstrip().startswith("{"):
        obj = json.loads(str(source))
    else:
        obj = json.loads(Path(source).read_text(encoding="utf-8"))
    try:
        return Scenario(
            duration_ms=float(obj["duration_ms"]),
            commands=[
                ScriptedCommand(float(t), str(kind), dict(payload))
                for t, kind, payload in obj.get("commands", [])
            ],
            lecturer=[(float(t), [float(c) for c in p]) for t, p in obj.get("lecturer", [])],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ScriptError(f"bad scenario: {e}") from e


def demo_scenario() -> Scenario:
    data = resources.files("arlecture").joinpath("data/demo_scenario.json")
    return load_scenario(json.loads(data.read_text(encoding="utf-8")))


def lecturer_path_from_waypoints(waypoints):
    """Piecewise-linear walk through (t, position) waypoints; None if empty."""
    if not waypoints:
        return None
    ts = np.array([t for t, _ in waypoints], dtype=float)
    ps = np.array([p for _, p in waypoints], dtype=float)

    def path(t_ms: float):
        return np.array([np.interp(t_ms, ts, ps[:, i]) for i in range(3)])

    return path


def run_scenario(scenario: Scenario, seed: int = 0, store=None, config=None,
                 endpoint: str = "scripted-remote"):
    """Replay a scenario; returns (engine, issuer) after the final tick."""
    eng = SessionEngine(store=store, seed=seed, config=config)
    eng.lecturer_path = lecturer_path_from_waypoints(scenario.lecturer)
    issuer = CommandIssuer(eng.clock, eng.submit)
    issuer.register(ROLE_REMOTE_OPERATION, endpoint)
    n_ticks = int(round(scenario.duration_ms * eng.tick_hz / 1000.0))
    pending = list(scenario.commands)
    qi = 0
    for tick in range(n_ticks):
        t = eng.now_for_tick(tick)
        while qi < len(pending) and pending[qi].t <= t:
            cmd = pending[qi]
            qi += 1
            eng.clock.advance_to(cmd.t)
            issuer.issue(cmd.kind, cmd.payload)
        eng.step()
    return eng, issuer
