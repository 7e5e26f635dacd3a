"""Recording director: lecture-progress derivation from the operation log,
virtual camera with close-up modes, retake markers, and deterministic frame
timeline composition/export.

The "video" is a structured timeline: one JSON record per tick describing
camera state, far-to-near render order with projected screen rects, and
overlays. Every float written into a frame is rounded to 9 decimals so
exports are byte-stable across runs and machines.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Pose, Rotation, as_vec3, unit
from .stage import LECTURER_HEIGHT, LECTURER_RADIUS, StageState, occlusion_order

MODE_NORMAL = "normal"
MODE_MATERIAL_CLOSEUP = "material_closeup"
MODE_LECTURER_CLOSEUP = "lecturer_closeup"

DEFAULT_FOV_DEG = (60.0, 45.0)
DWELL_MS = 500.0
CLOSEUP_MARGIN = 1.05          # material close-up rect expansion
LECTURER_ZOOM = 2.0            # lecturer close-up magnification
STATIONARY_SPEED = 0.1         # m/s, smoothed
MIDLINE_DISTANCE_M = 1.0
FLASH_MS = 1000.0
RETAKE_VISUAL = "visual"
RETAKE_TEXT = "text"
OP_SNAPSHOT_LEN = 10

FULL_CROP = (0.0, 0.0, 1.0, 1.0)


class DirectorError(Exception):
    pass


def r9(x) -> float:
    v = round(float(x), 9)
    return 0.0 if v == 0.0 else v  # normalize -0.0


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> Pose:
    """Camera pose whose local +z axis points from position to target."""
    z = unit(as_vec3(target) - as_vec3(position))
    x = np.cross(as_vec3(up), z)
    n = np.linalg.norm(x)
    if n < 1e-9:
        x = np.cross(np.array([0.0, 0.0, 1.0]), z)
        n = np.linalg.norm(x)
    x = x / n
    y = np.cross(z, x)
    return Pose(position, Rotation.from_matrix(np.column_stack([x, y, z])), "world")


def project_point(pose: Pose, fov_deg, world):
    """Pinhole projection to normalized image coords, v down.

    Returns (u, v, depth) or None when the point is not in front of the
    camera (depth <= 0).
    """
    R = pose.orientation.as_matrix()
    cam = R.T @ (as_vec3(world) - pose.position)
    x, y, z = float(cam[0]), float(cam[1]), float(cam[2])
    if z <= 1e-9:
        return None
    th, tv = math.tan(math.radians(fov_deg[0]) / 2), math.tan(math.radians(fov_deg[1]) / 2)
    u = 0.5 + 0.5 * (x / z) / th
    v = 0.5 - 0.5 * (y / z) / tv
    return (u, v, z)


def project_rect(pose: Pose, fov_deg, points):
    """Bounding rect of the projectable points, or None if all are behind."""
    R = pose.orientation.as_matrix()
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = (pts - pose.position) @ R
    z = cam[:, 2]
    front = z > 1e-9
    if not np.any(front):
        return None
    th = math.tan(math.radians(fov_deg[0]) / 2)
    tv = math.tan(math.radians(fov_deg[1]) / 2)
    u = 0.5 + 0.5 * (cam[front, 0] / z[front]) / th
    v = 0.5 - 0.5 * (cam[front, 1] / z[front]) / tv
    return (float(u.min()), float(v.min()), float(u.max()), float(v.max()))


def capsule_points(feet, radius=LECTURER_RADIUS, height=LECTURER_HEIGHT) -> np.ndarray:
    """Canonical sample points of a vertical capsule anchored at the feet."""
    feet = as_vec3(feet)
    pts = [feet, feet + np.array([0.0, height, 0.0])]
    for cy in (radius, height / 2, height - radius):
        for k in range(8):
            a = math.tau * k / 8
            pts.append(feet + np.array([radius * math.cos(a), cy, radius * math.sin(a)]))
    return np.array(pts)


def rects_intersect(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def _rect_center(r):
    return ((r[0] + r[2]) / 2, (r[1] + r[3]) / 2)


def _shift_into_unit(x0, y0, x1, y1):
    w, h = x1 - x0, y1 - y0
    if w >= 1.0:
        x0, x1 = 0.0, 1.0
    else:
        if x0 < 0.0:
            x0, x1 = 0.0, w
        if x1 > 1.0:
            x0, x1 = 1.0 - w, 1.0
    if h >= 1.0:
        y0, y1 = 0.0, 1.0
    else:
        if y0 < 0.0:
            y0, y1 = 0.0, h
        if y1 > 1.0:
            y0, y1 = 1.0 - h, 1.0
    return (x0, y0, x1, y1)


def material_closeup_crop(rect):
    """Main-layer rect expanded by the margin, aspect-fitted to a square in
    normalized coordinates, shifted to stay inside the image."""
    cx, cy = _rect_center(rect)
    w = (rect[2] - rect[0]) * CLOSEUP_MARGIN
    h = (rect[3] - rect[1]) * CLOSEUP_MARGIN
    side = max(w, h)
    if side >= 1.0:
        return FULL_CROP
    return _shift_into_unit(cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2)


def lecturer_closeup_crop(rect):
    cx, cy = _rect_center(rect)
    half = 0.5 / LECTURER_ZOOM
    return _shift_into_unit(cx - half, cy - half, cx + half, cy + half)


@dataclass
class CameraState:
    pose: Pose
    fov: tuple[float, float] = DEFAULT_FOV_DEG
    mode: str = MODE_NORMAL
    crop: tuple[float, float, float, float] = FULL_CROP


def lecturer_onscreen(camera: CameraState, feet):
    """(onscreen, projected rect). Onscreen means the capsule's projected
    bounding rect intersects the image and the capsule center is in front."""
    rect = project_rect(camera.pose, camera.fov, capsule_points(feet))
    center = as_vec3(feet) + np.array([0.0, LECTURER_HEIGHT / 2, 0.0])
    front = project_point(camera.pose, camera.fov, center) is not None
    if rect is None:
        return False, None
    return front and rects_intersect(rect, (0.0, 0.0, 1.0, 1.0)), rect


class CameraDirector:
    """Per-tick camera mode machine with dwell hysteresis: a mode change
    requires its trigger condition to hold continuously for the dwell."""

    def __init__(self, pose: Pose, fov=DEFAULT_FOV_DEG, dwell_ms: float = DWELL_MS):
        self.state = CameraState(pose, fov)
        self.dwell_ms = dwell_ms
        self.changes: list[tuple[float, str]] = []
        self._candidate: str | None = None
        self._candidate_since = 0.0
        self._prev_pos: np.ndarray | None = None
        self._prev_t: float | None = None

    def _speed(self, smoothed, now_ms: float) -> float:
        if smoothed is None:
            return math.inf
        p = as_vec3(smoothed)
        if self._prev_pos is None or now_ms <= self._prev_t:
            v = math.inf  # unknown yet: treat as moving
        else:
            v = float(np.linalg.norm(p - self._prev_pos)) / ((now_ms - self._prev_t) / 1000.0)
        self._prev_pos, self._prev_t = p, now_ms
        return v

    def _desired(self, lecturer, speed, stage: StageState, pointer_active: bool):
        if lecturer is None or not stage.placed:
            return MODE_NORMAL
        onscreen, _ = lecturer_onscreen(self.state, lecturer)
        if not onscreen:
            return MODE_MATERIAL_CLOSEUP
        main_center = stage.main_layer().pose.position
        axis = main_center - self.state.pose.position
        n = np.linalg.norm(axis)
        if n > 1e-9:
            # distance of the body center from the camera-to-slide axis
            body = as_vec3(lecturer) + np.array([0.0, LECTURER_HEIGHT / 2, 0.0])
            d = body - self.state.pose.position
            along = float(d @ axis) / float(n)
            off = float(np.linalg.norm(d - along * axis / n))
            near_midline = off <= MIDLINE_DISTANCE_M
        else:
            near_midline = False
        if near_midline and not pointer_active and speed < STATIONARY_SPEED:
            return MODE_LECTURER_CLOSEUP
        return MODE_NORMAL

    def update(self, lecturer_smoothed, stage: StageState, pointer_active: bool, now_ms: float) -> CameraState:
        speed = self._speed(lecturer_smoothed, now_ms)
        desired = self._desired(lecturer_smoothed, speed, stage, pointer_active)
        if desired == self.state.mode:
            self._candidate = None
        elif self._candidate != desired:
            self._candidate = desired
            self._candidate_since = now_ms
        elif now_ms - self._candidate_since >= self.dwell_ms - 1e-6:
            self.state.mode = desired
            self._candidate = None
            self.changes.append((now_ms, desired))
        self.state.crop = self._crop_for_mode(lecturer_smoothed, stage)
        return self.state

    def _crop_for_mode(self, lecturer, stage: StageState):
        if self.state.mode == MODE_MATERIAL_CLOSEUP and stage.placed:
            rect = project_rect(self.state.pose, self.state.fov, _layer_corners(stage, stage.main_layer()))
            if rect is not None:
                return material_closeup_crop(rect)
        if self.state.mode == MODE_LECTURER_CLOSEUP and lecturer is not None:
            _, rect = lecturer_onscreen(self.state, lecturer)
            if rect is not None:
                return lecturer_closeup_crop(rect)
        return FULL_CROP


def _layer_corners(stage: StageState, layer) -> list[np.ndarray]:
    p = stage.plane
    w, h = layer.size
    c = layer.pose.position
    return [
        c + sx * w * p.right + sy * h * p.up
        for sx in (-0.5, 0.5)
        for sy in (-0.5, 0.5)
    ]


# --- operation log and lecture progress --------------------------------------


@dataclass
class LogEntry:
    tick: int
    kind: str
    payload: dict
    status: str  # applied | rejected


class OperationLog:
    def __init__(self):
        self.entries: list[LogEntry] = []

    def append(self, tick: int, kind: str, payload: dict, status: str):
        if self.entries and tick < self.entries[-1].tick:
            raise DirectorError("operation log ticks must be monotone")
        self.entries.append(LogEntry(tick, kind, dict(payload), status))


@dataclass
class LectureProgress:
    page: int = 1
    style: str = "single"
    pin: int | None = None
    pointer_active: bool = False
    last_transition_tick: int = -1
    counts: dict = field(default_factory=dict)

    def update(self, e: LogEntry):
        self.counts[e.kind] = self.counts.get(e.kind, 0) + 1
        if e.status != "applied":
            return self
        self.last_transition_tick = e.tick
        if e.kind == "PageOp":
            op = e.payload.get("op")
            if op == "next":
                self.page += 1
            elif op == "prev":
                self.page -= 1
            elif op == "goto":
                self.page = int(e.payload["page"])
        elif e.kind == "DisplayStyle":
            self.style = e.payload["style"]
        elif e.kind == "Pin":
            self.pin = e.payload.get("page")
        elif e.kind == "Pointer":
            u, v = e.payload.get("u", -1), e.payload.get("v", -1)
            self.pointer_active = bool(e.payload.get("active")) and (
                0.0 <= float(u) <= 1.0 and 0.0 <= float(v) <= 1.0
            )
        elif e.kind == "PlaceSlide":
            self.page = 1
        return self


def derive_progress(log: OperationLog) -> LectureProgress:
    prog = LectureProgress()
    for e in log.entries:
        prog.update(e)
    return prog


# --- retakes ------------------------------------------------------------------


@dataclass
class RetakeMarker:
    tick: int
    method: str
    op_snapshot: list

    def to_obj(self) -> dict:
        return {"tick": self.tick, "method": self.method, "ops": self.op_snapshot}


# --- composed frames and the timeline ----------------------------------------


def compose_frame(
    stage: StageState,
    agent_snapshot: dict | None,
    camera: CameraState,
    lecturer_pos,
    tick: int,
    t_ms: float,
    retake_flash: bool = False,
) -> dict:
    """Deterministic frame record: camera, far-to-near render list with
    projected rects (filtered to rects intersecting the crop), overlays."""
    pose, fov = camera.pose, camera.fov
    items = []
    rects = {}
    if stage.placed:
        for layer in stage.layers:
            if not layer.visible:
                continue
            oid = f"slide:{layer.role}"
            rect = project_rect(pose, fov, _layer_corners(stage, layer))
            if rect is not None:
                items.append((oid, layer.pose.position))
                rects[oid] = rect
    if agent_snapshot is not None:
        st = as_vec3(agent_snapshot["pos"])
        rect = project_rect(
            pose, fov, capsule_points(st, height=agent_snapshot["head_height"] + 0.1)
        )
        if rect is not None:
            items.append(("agent", st + np.array([0.0, agent_snapshot["head_height"] / 2, 0.0])))
            rects["agent"] = rect

    lect_rect = None
    lect_arg = None
    if lecturer_pos is not None:
        onscreen, lect_rect = lecturer_onscreen(camera, lecturer_pos)
        if onscreen:
            lect_arg = lecturer_pos
            rects["lecturer"] = lect_rect

    order = occlusion_order(pose.position, pose.orientation.as_matrix()[:, 2], items, lect_arg)
    crop = camera.crop
    render = [
        {"id": oid, "rect": [r9(c) for c in rects[oid]]}
        for oid in order
        if oid in rects and rects_intersect(rects[oid], crop)
    ]

    pointer = stage.pointer
    pointer_dot = None
    if pointer.active:
        hit = project_point(pose, fov, pointer.world)
        if hit is not None:
            pointer_dot = [r9(hit[0]), r9(hit[1])]

    snap = stage.snapshot()
    frame = {
        "tick": tick,
        "t_ms": r9(t_ms),
        "camera": {
            "mode": camera.mode,
            "crop": [r9(c) for c in crop],
            "pos": [r9(c) for c in pose.position],
            "quat": [r9(c) for c in pose.orientation.wxyz],
        },
        "stage": {
            "page": snap["page"],
            "page_count": snap["page_count"],
            "style": snap["style"],
            "pin": snap["pin"],
            "pointer": {
                "active": pointer.active,
                "u": r9(pointer.uv[0]),
                "v": r9(pointer.uv[1]),
            },
        },
        "render": render,
        "lecturer": {"rect": [r9(c) for c in lect_rect]} if lect_arg is not None else "offscreen",
        "overlays": {
            "popups": [
                {"text": p["text"], "i": p["stack_index"]}
                for p in (agent_snapshot or {}).get("popups", [])
            ],
            "pointer": pointer_dot,
            "retake_flash": bool(retake_flash),
        },
    }
    if agent_snapshot is not None:
        frame["agent"] = {
            "gaze": [r9(c) for c in agent_snapshot["gaze"]],
            "yaw": r9(agent_snapshot["yaw"]),
        }
    return frame


@dataclass
class SessionTimeline:
    header: dict
    frames: list = field(default_factory=list)
    markers: list = field(default_factory=list)  # marker dicts

    def __post_init__(self):
        ticks = [f["tick"] for f in self.frames]
        if ticks and ticks != list(range(ticks[0], ticks[0] + len(ticks))):
            raise DirectorError("timeline ticks must be contiguous")


def make_header(tick_hz: int, seed: int, config: dict) -> dict:
    return {"v": 1, "tick_hz": tick_hz, "seed": seed, "config": config}


def export_timeline(timeline: SessionTimeline, path) -> None:
    path = Path(path)
    header = dict(timeline.header)
    header["markers"] = timeline.markers
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for frame in timeline.frames:
            f.write(json.dumps(frame, sort_keys=True, separators=(",", ":")) + "\n")


def load_timeline(path) -> SessionTimeline:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        lines = [line for line in f.read().split("\n") if line]
    if not lines:
        raise DirectorError("empty timeline file")
    header = json.loads(lines[0])
    markers = header.pop("markers", [])
    frames = [json.loads(line) for line in lines[1:]]
    return SessionTimeline(header=header, frames=frames, markers=markers)


class RecordingDirector:
    """Owns the per-session recording state: operation log, camera, markers,
    retake text log lines, and the growing frame list."""

    def __init__(self, camera_pose: Pose, fov=DEFAULT_FOV_DEG, tick_hz: int = 30,
                 seed: int = 0, config: dict | None = None):
        self.tick_hz = tick_hz
        self.camera = CameraDirector(camera_pose, fov)
        self.oplog = OperationLog()
        self.markers: list[RetakeMarker] = []
        self.frames: list[dict] = []
        self.retake_lines: list[dict] = []
        self._flash_until_tick = -1
        self.header = make_header(tick_hz, seed, config or {})

    def note_op(self, tick: int, kind: str, payload: dict, status: str):
        self.oplog.append(tick, kind, payload, status)

    def flash_active(self, tick: int) -> bool:
        return tick < self._flash_until_tick

    def mark_retake(self, method: str, tick: int, now_ms: float) -> RetakeMarker:
        if method not in (RETAKE_VISUAL, RETAKE_TEXT):
            raise DirectorError(f"unknown retake method {method!r}")
        snapshot = [
            {"kind": e.kind, "payload": e.payload}
            for e in self.oplog.entries[-OP_SNAPSHOT_LEN:]
        ]
        marker = RetakeMarker(tick, method, snapshot)
        self.markers.append(marker)
        if method == RETAKE_VISUAL:
            self._flash_until_tick = tick + int(round(FLASH_MS / 1000.0 * self.tick_hz))
        else:
            self.retake_lines.append({"ts_ms": now_ms, "tick": tick, "ops": snapshot})
        return marker

    def record_tick(self, stage: StageState, agent_snapshot, lecturer_smoothed,
                    tick: int, now_ms: float) -> dict:
        cam = self.camera.update(lecturer_smoothed, stage, stage.pointer.active, now_ms)
        frame = compose_frame(
            stage, agent_snapshot, cam, lecturer_smoothed, tick, now_ms,
            retake_flash=self.flash_active(tick),
        )
        self.frames.append(frame)
        return frame

    def timeline(self) -> SessionTimeline:
        return SessionTimeline(
            header=self.header,
            frames=list(self.frames),
            markers=[m.to_obj() for m in self.markers],
        )

    def write_retake_log(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as f:
            for line in self.retake_lines:
                f.write(json.dumps(line, sort_keys=True, separators=(",", ":")) + "\n")
