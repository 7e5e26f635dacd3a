"""Recording-device session engine.

Wires the pieces together: the protocol session feeds validated commands into
the slide stage, stage transitions raise agent events, and a fixed-rate tick
loop drives lecturer smoothing, the agent, the camera director, and frame
composition. Runs on a virtual clock for deterministic simulation or a wall
clock behind the TCP server.
"""

from __future__ import annotations

import numpy as np

from .agent import (
    EVENT_PIN_CLEARED,
    EVENT_PIN_SET,
    EVENT_POINTER_HIDDEN,
    EVENT_POINTER_SHOWN,
    EVENT_RETAKE_MARKED,
    EVENT_SLIDE_SWITCHED,
    EVENT_STYLE_CHANGED,
    Agent,
    AgentEvent,
    PopupAnnotation,
    station_beside_slide,
)
from .clock import VirtualClock
from .director import RecordingDirector, look_at
from .geometry import (
    EmptyWindow,
    LocalizationNoise,
    PlaneRegion,
    PositionTrack,
    moving_average_position,
)
from .protocol import (
    KIND_ADJUST_SLIDE,
    KIND_AGENT_HINT,
    KIND_DISPLAY_STYLE,
    KIND_MAP_TRANSFER,
    KIND_PAGE_OP,
    KIND_PIN,
    KIND_PLACE_SLIDE,
    KIND_POINTER,
    KIND_POSITION_REPORT,
    KIND_RETAKE,
    ROLE_RECORDING,
    Session,
    SystemInfo,
)
from .stage import SlideDeck, StageError, StageState
from .store import StoreError

TICK_HZ = 30
HEARTBEAT_MS = 500.0
LECTURER_SIGMA_M = 0.02  # recording-side lecturer localization jitter


def default_wall() -> PlaneRegion:
    n = np.array([0.0, 0.0, 1.0])
    up = np.array([0.0, 1.0, 0.0])
    return PlaneRegion(
        origin=(0.0, 1.5, -2.0), normal=n, up=up, right=np.cross(n, up), extents=(3.0, 2.0)
    )


def default_camera_pose():
    return look_at((0.0, 1.5, 2.0), (0.0, 1.5, -2.0))


class SessionEngine:
    """One recording session: stage + agent + director behind a protocol
    session. `submit` is the single entry point for remote commands and
    `step` advances exactly one tick."""

    def __init__(
        self,
        store=None,
        seed: int = 0,
        tick_hz: int = TICK_HZ,
        clock=None,
        plane: PlaneRegion | None = None,
        camera_pose=None,
        config: dict | None = None,
        device_id: str = "recorder-1",
    ):
        self.clock = clock or VirtualClock()
        self.tick_hz = tick_hz
        self.tick = 0
        self.store = store
        self.plane = plane or default_wall()
        self.stage = StageState()
        self.agent = Agent()
        cfg = dict(config or {})
        cfg.setdefault("lecturer_sigma_m", LECTURER_SIGMA_M)
        self.config = cfg
        self.director = RecordingDirector(
            camera_pose or default_camera_pose(), tick_hz=tick_hz, seed=seed, config=cfg
        )
        self.session = Session(self.clock, self._apply)
        self.session.claim_role(device_id, ROLE_RECORDING)
        self.session.info_listeners.append(self._after_applied)
        self.noise = LocalizationNoise(
            sigma=cfg["lecturer_sigma_m"], bias_walk=0.0, seed=seed
        )
        self.lecturer_path = None  # callable t_ms -> feet position or None
        self.track = PositionTrack()
        self.remote_track = PositionTrack()
        self._pending_events: list[AgentEvent] = []
        self._pending_hints: list[str] = []
        self._station_set = False
        self.info_log: list[SystemInfo] = []
        self.on_info = None  # callback(SystemInfo), e.g. the TCP broadcaster
        self._last_info_t = -float("inf")

    # -- command application (single writer)

    def submit(self, env):
        return self.session.submit(env)

    def _apply(self, env) -> str | None:
        reason = self._apply_inner(env)
        self.director.note_op(
            self.tick, env.kind, env.payload, "applied" if reason is None else "rejected"
        )
        return reason

    def _apply_inner(self, env) -> str | None:
        kind, p = env.kind, env.payload
        try:
            if kind == KIND_PAGE_OP:
                self.stage.page_operation(p["op"], p.get("page"))
                self._pending_events.append(
                    AgentEvent(EVENT_SLIDE_SWITCHED, page=self.stage.deck.current)
                )
            elif kind == KIND_DISPLAY_STYLE:
                self.stage.set_display_style(p["style"])
                self._pending_events.append(AgentEvent(EVENT_STYLE_CHANGED, style=p["style"]))
            elif kind == KIND_POINTER:
                was = self.stage.pointer.active
                if p.get("active", True):
                    self.stage.map_pointer((p["u"], p["v"]))
                else:
                    self.stage.clear_pointer()
                now = self.stage.pointer.active
                if now and not was:
                    self._pending_events.append(AgentEvent(EVENT_POINTER_SHOWN))
                elif was and not now:
                    self._pending_events.append(AgentEvent(EVENT_POINTER_HIDDEN))
            elif kind == KIND_PIN:
                page = p.get("page")
                self.stage.set_pin(page)
                self._pending_events.append(
                    AgentEvent(EVENT_PIN_SET, page=page)
                    if page is not None
                    else AgentEvent(EVENT_PIN_CLEARED)
                )
            elif kind == KIND_RETAKE:
                self.director.mark_retake(p["method"], self.tick, self.clock.now_ms())
                self._pending_events.append(AgentEvent(EVENT_RETAKE_MARKED))
            elif kind == KIND_ADJUST_SLIDE:
                t = p.get("translate", (0.0, 0.0))
                self.stage.adjust_slide(
                    translate=(float(t[0]), float(t[1])),
                    scale=float(p.get("scale", 1.0)),
                    aspect=p.get("aspect"),
                )
            elif kind == KIND_PLACE_SLIDE:
                deck = self._deck_for(p)
                if deck is None:
                    return f"unknown asset {p.get('asset_id')!r}"
                w, h = p["size"]
                self.stage.place_slide(self.plane, (float(w), float(h)), deck)
                self._set_station()
            elif kind == KIND_POSITION_REPORT:
                x, y, z = p["p"]
                self.remote_track.add(self.clock.now_ms(), (float(x), float(y), float(z)))
            elif kind == KIND_MAP_TRANSFER:
                if self.store is None:
                    return "no store configured"
                self.store.get_map(p["map_id"])  # byte-exact availability check
            elif kind == KIND_AGENT_HINT:
                self._pending_hints.append(str(p["text"]))
            else:
                return f"unhandled kind {kind}"
        except (StageError, StoreError) as e:
            return f"{type(e).__name__}: {e}"
        except (KeyError, TypeError, ValueError) as e:
            return f"bad payload: {e}"
        return None

    def _deck_for(self, payload) -> SlideDeck | None:
        asset_id = payload.get("asset_id", "")
        if self.store is not None:
            try:
                asset = self.store.get_asset(asset_id)
                return SlideDeck(asset_id, asset.page_count)
            except Exception:
                pass
        if "page_count" in payload:
            return SlideDeck(asset_id or "inline", int(payload["page_count"]))
        return None

    def _set_station(self):
        self.agent.station = station_beside_slide(
            self.plane, self.stage.base_center, self.stage.base_size
        )
        self._station_set = True

    # -- tick loop

    def now_for_tick(self, tick: int) -> float:
        return (tick * 1000.0) / self.tick_hz

    def step(self):
        """Advance one tick on the virtual clock."""
        t = self.now_for_tick(self.tick)
        if hasattr(self.clock, "advance_to"):
            self.clock.advance_to(t)
        else:
            t = self.clock.now_ms()
        self._tick_at(t)

    def _tick_at(self, t: float):
        smoothed = self._update_lecturer(t)
        events, self._pending_events = self._pending_events, []
        hints, self._pending_hints = self._pending_hints, []
        dt = 1000.0 / self.tick_hz
        main_center = self.stage.main_layer().pose.position if self.stage.placed else None
        self.agent.update(events, smoothed, self.stage.pointer, main_center, t, dt)
        for text in hints:
            self.agent.popups.append(PopupAnnotation(text, t, self.agent.ttl_ms))
        for i, popup in enumerate(self.agent.popups):
            popup.stack_index = i
        agent_snap = self.agent.snapshot() if self._station_set else None
        self.director.record_tick(self.stage, agent_snap, smoothed, self.tick, t)
        if t - self._last_info_t >= HEARTBEAT_MS and self.session.registered:
            self.emit_info()
        self.tick += 1

    def _update_lecturer(self, t: float):
        if self.lecturer_path is None:
            return None
        true_pos = self.lecturer_path(t)
        if true_pos is None:
            return None
        noisy = np.asarray(true_pos, dtype=float) + self.noise.sample_offset(t)
        self.track.add(t, noisy)
        try:
            return moving_average_position(self.track, t)
        except EmptyWindow:
            return None

    def run_ticks(self, n: int):
        for _ in range(n):
            self.step()
        return self

    # -- system info feedback

    def _after_applied(self):
        self.emit_info()

    def emit_info(self):
        t = self.clock.now_ms()
        info = SystemInfo(
            current_page=self.stage.deck.current if self.stage.deck else 0,
            page_count=self.stage.deck.page_count if self.stage.deck else 0,
            style=self.stage.style,
            pin_page=self.stage.pin_page,
            pointer={
                "active": self.stage.pointer.active,
                "u": self.stage.pointer.uv[0],
                "v": self.stage.pointer.uv[1],
            },
            camera_mode=self.director.camera.state.mode,
            agent_popups=[p.text for p in self.agent.popups],
            last_ack_seq=self.session.last_ack.seq if self.session.last_ack else 0,
            t=t,
            assets=self.store.list_assets() if self.store else [],
        )
        self.info_log.append(info)
        self._last_info_t = t
        if self.on_info is not None:
            self.on_info(info)
        return info

    def timeline(self):
        return self.director.timeline()
