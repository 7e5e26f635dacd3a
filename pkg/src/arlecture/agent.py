"""Lecture assistant agent: rule-driven gaze and posture plus chronological
attention pop-ups raised when the lecture progress transitions.

The agent is a per-tick deterministic state machine. It never reasons about
lecture content; it reacts to progress events (page switches, pointer use,
style changes, pins) and otherwise watches the lecturer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import as_vec3, unit

EVENT_SLIDE_SWITCHED = "slide_switched"
EVENT_POINTER_SHOWN = "pointer_shown"
EVENT_POINTER_HIDDEN = "pointer_hidden"
EVENT_STYLE_CHANGED = "style_changed"
EVENT_PIN_SET = "pin_set"
EVENT_PIN_CLEARED = "pin_cleared"
EVENT_RETAKE_MARKED = "retake_marked"

TRIGGERING_EVENTS = frozenset(
    {EVENT_SLIDE_SWITCHED, EVENT_POINTER_SHOWN, EVENT_STYLE_CHANGED, EVENT_PIN_SET}
)

POPUP_TTL_MS = 4000.0
GAZE_HOLD_MS = 2000.0
TURN_RATE_DEG_S = 180.0
HEAD_HEIGHT_M = 1.5
LECTURER_HEAD_M = 1.6
STATION_MARGIN_M = 0.5


class AgentError(Exception):
    pass


class CoincidentPoints(AgentError):
    pass


class NonTriggeringEvent(AgentError):
    pass


@dataclass(frozen=True)
class AgentEvent:
    kind: str
    page: int | None = None
    style: str | None = None


@dataclass
class PopupAnnotation:
    text: str
    created_at: float
    ttl: float = POPUP_TTL_MS
    stack_index: int = 0


def gaze_direction(head, target) -> np.ndarray:
    head, target = as_vec3(head), as_vec3(target)
    d = target - head
    n = float(np.linalg.norm(d))
    if n < 1e-12:
        raise CoincidentPoints("gaze target coincides with the head")
    return d / n


def popup_text(event: AgentEvent) -> str:
    if event.kind == EVENT_SLIDE_SWITCHED:
        return f"Now on slide {event.page}"
    if event.kind == EVENT_POINTER_SHOWN:
        return "Look here"
    if event.kind == EVENT_STYLE_CHANGED:
        return f"View changed: {event.style}"
    if event.kind == EVENT_PIN_SET:
        return f"Keeping slide {event.page} up"
    raise NonTriggeringEvent(event.kind)


def emit_attention_popup(event: AgentEvent, t: float, ttl: float = POPUP_TTL_MS) -> PopupAnnotation:
    if event.kind not in TRIGGERING_EVENTS:
        raise NonTriggeringEvent(event.kind)
    return PopupAnnotation(text=popup_text(event), created_at=t, ttl=ttl)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def station_beside_slide(plane, base_center, base_size) -> np.ndarray:
    """Default agent station: beside the slide's right edge, on the floor."""
    x = base_center[0] + base_size[0] / 2 + STATION_MARGIN_M
    p = plane.origin + x * plane.right + base_center[1] * plane.up
    return np.array([float(p[0]), 0.0, float(p[2])])


class Agent:
    """Semi-autonomous assistant; update() is called once per engine tick."""

    def __init__(
        self,
        station=(0.0, 0.0, 0.0),
        head_height: float = HEAD_HEIGHT_M,
        ttl_ms: float = POPUP_TTL_MS,
        gaze_hold_ms: float = GAZE_HOLD_MS,
        turn_rate_deg_s: float = TURN_RATE_DEG_S,
    ):
        self.station = as_vec3(station)
        self.head_height = head_height
        self.ttl_ms = ttl_ms
        self.gaze_hold_ms = gaze_hold_ms
        self.turn_rate = math.radians(turn_rate_deg_s)  # rad/s
        self.gaze_dir = np.array([0.0, 0.0, 1.0])
        self.posture_yaw = 0.0
        self.popups: list[PopupAnnotation] = []
        self._hold_target: np.ndarray | None = None
        self._hold_until = -math.inf

    @property
    def head(self) -> np.ndarray:
        return self.station + np.array([0.0, self.head_height, 0.0])

    def update(self, events, lecturer_pos, pointer, main_center, now_ms: float, dt_ms: float):
        """Advance one tick: ingest events, expire popups, steer gaze/yaw.

        Gaze priority: active pointer > recent event target (held for the
        configured window) > lecturer head. Posture yaw chases the horizontal
        gaze bearing at the configured turn rate.
        """
        # expire first so a popup created now lives a full ttl
        self.popups = [p for p in self.popups if now_ms - p.created_at < p.ttl]
        for ev in events:
            if ev.kind not in TRIGGERING_EVENTS:
                continue
            popup = emit_attention_popup(ev, now_ms, self.ttl_ms)
            popup.stack_index = len(self.popups)
            self.popups.append(popup)
            if ev.kind == EVENT_POINTER_SHOWN and pointer is not None and pointer.active:
                self._hold_target = as_vec3(pointer.world)
            elif main_center is not None:
                self._hold_target = as_vec3(main_center)
            else:
                self._hold_target = None
            self._hold_until = now_ms + self.gaze_hold_ms
        for i, p in enumerate(self.popups):
            p.stack_index = i

        if pointer is not None and pointer.active:
            target = as_vec3(pointer.world)
        elif self._hold_target is not None and now_ms < self._hold_until:
            target = self._hold_target
        elif lecturer_pos is not None:
            target = as_vec3(lecturer_pos) + np.array([0.0, LECTURER_HEAD_M, 0.0])
        else:
            target = None

        if target is not None:
            try:
                self.gaze_dir = gaze_direction(self.head, target)
            except CoincidentPoints:
                pass  # keep looking where we were

        gx, _, gz = self.gaze_dir
        if math.hypot(gx, gz) > 1e-9:
            want = math.atan2(float(gx), float(gz))
            step = _wrap_angle(want - self.posture_yaw)
            limit = self.turn_rate * (dt_ms / 1000.0)
            step = max(-limit, min(limit, step))
            self.posture_yaw = _wrap_angle(self.posture_yaw + step)
        return self

    def snapshot(self) -> dict:
        return {
            "pos": [float(c) for c in self.station],
            "head_height": self.head_height,
            "gaze": [float(c) for c in self.gaze_dir],
            "yaw": float(self.posture_yaw),
            "popups": [
                {"text": p.text, "stack_index": p.stack_index} for p in self.popups
            ],
        }
