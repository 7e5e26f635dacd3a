"""AR slide stage: placement on a detected wall plane, display styles,
page operations, the pin slot, pointer mapping, and occlusion ordering.

Geometry convention: a slide lives in its plane's (right, up) basis with the
plane center as origin. Image-style uv coordinates run u rightward, v downward
from the slide's top-left corner. Layer orientation is the proper rotation
with columns [right, up, -normal].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PlaneRegion, Pose, Rotation, as_vec3

STYLE_SINGLE = "single"
STYLE_REAL_MATERIAL = "real_material"
STYLE_MULTI_SLIDE = "multi_slide"
STYLES = (STYLE_SINGLE, STYLE_REAL_MATERIAL, STYLE_MULTI_SLIDE)

ROLE_MAIN = "main"
ROLE_PREV = "prev"
ROLE_NEXT = "next"
ROLE_PINNED = "pinned"

# Layout defaults; fixed so layouts (and golden timelines) are reproducible.
REAL_MATERIAL_SCALE = 0.35  # style (b): shrink toward the slide's own top-left
SIDE_SCALE = 0.6            # style (c): prev/next slides
SIDE_GAP_FRAC = 0.1         # edge-to-edge gap, fraction of base width
SIDE_SETBACK_M = 0.05       # side slides sit slightly behind the main plane
PLANE_ENVELOPE = 1.8        # visible layers must stay within extents * this

# Lecturer body stand-in for people occlusion: a vertical capsule.
LECTURER_RADIUS = 0.25
LECTURER_HEIGHT = 1.7


class StageError(Exception):
    pass


class NotPlaced(StageError):
    pass


class NoPlane(StageError):
    pass


class PlaneTooSmall(StageError):
    pass


class OutOfPlane(StageError):
    pass


class PageOutOfRange(StageError):
    pass


@dataclass
class SlideDeck:
    asset_id: str
    page_count: int
    current: int = 1  # 1-based

    def __post_init__(self):
        if self.page_count < 1:
            raise StageError("deck needs at least one page")
        if not 1 <= self.current <= self.page_count:
            raise PageOutOfRange(f"page {self.current} outside 1..{self.page_count}")


@dataclass(frozen=True)
class SlideLayer:
    role: str
    page: int
    pose: Pose
    size: tuple[float, float]
    visible: bool


@dataclass(frozen=True)
class PointerState:
    active: bool = False
    uv: tuple[float, float] = (0.0, 0.0)
    world: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _plane_rotation(plane: PlaneRegion) -> Rotation:
    # third column completes a proper rotation whatever the basis handedness
    m = np.column_stack([plane.right, plane.up, np.cross(plane.right, plane.up)])
    return Rotation.from_matrix(m)


def _plane_point(plane: PlaneRegion, x: float, y: float, setback: float = 0.0) -> np.ndarray:
    return plane.origin + x * plane.right + y * plane.up - setback * plane.normal


@dataclass(frozen=True)
class _Slot:
    role: str
    x: float
    y: float
    w: float
    h: float
    setback: float = 0.0


def _layout_slots(cx, cy, w, h, style, pinned: bool) -> list[_Slot]:
    """Slot geometry in plane coordinates for one style, pin aside."""
    if style == STYLE_REAL_MATERIAL:
        # shrink toward the base placement's own top-left corner
        mw, mh = REAL_MATERIAL_SCALE * w, REAL_MATERIAL_SCALE * h
        main = _Slot(ROLE_MAIN, cx - w / 2 + mw / 2, cy + h / 2 - mh / 2, mw, mh)
    else:
        main = _Slot(ROLE_MAIN, cx, cy, w, h)
    slots = [main]
    side_w, side_h = SIDE_SCALE * w, SIDE_SCALE * h
    # side slot centers: half main + gap + half side from the base center
    off = w / 2 + SIDE_GAP_FRAC * w + side_w / 2
    if style == STYLE_MULTI_SLIDE and not pinned:
        slots.append(_Slot(ROLE_PREV, cx - off, cy, side_w, side_h, SIDE_SETBACK_M))
    if style == STYLE_MULTI_SLIDE:
        slots.append(_Slot(ROLE_NEXT, cx + off, cy, side_w, side_h, SIDE_SETBACK_M))
    if pinned:
        # the pin occupies the left slot in every style, suppressing prev
        slots.append(_Slot(ROLE_PINNED, cx - off, cy, side_w, side_h, SIDE_SETBACK_M))
    return slots


class StageState:
    """Single-writer slide stage; every operation re-derives the full layer
    list from (base placement, style, pin, deck), so recomputation from
    scratch always equals the incremental state."""

    def __init__(self):
        self.deck: SlideDeck | None = None
        self.plane: PlaneRegion | None = None
        self.base_center = (0.0, 0.0)   # plane coordinates
        self.base_size = (0.0, 0.0)
        self.style = STYLE_SINGLE
        self.pin_page: int | None = None
        self.pointer = PointerState()
        self.layers: list[SlideLayer] = []

    @property
    def placed(self) -> bool:
        return self.plane is not None

    # -- layout

    def _require_placed(self):
        if not self.placed:
            raise NotPlaced("no slide placed yet")

    def _check_bounds(self, cx, cy, w, h):
        pw, ph = self.plane.extents
        if abs(cx) + w / 2 > pw / 2 + 1e-12 or abs(cy) + h / 2 > ph / 2 + 1e-12:
            raise OutOfPlane(
                f"base {w:.3g}x{h:.3g} at ({cx:.3g},{cy:.3g}) leaves {pw:.3g}x{ph:.3g} plane"
            )

    def _derive_layers(self, cx, cy, w, h, style, pin_page) -> list[SlideLayer]:
        deck, plane = self.deck, self.plane
        rot = _plane_rotation(plane)
        pw, ph = plane.extents
        layers = []
        for slot in _layout_slots(cx, cy, w, h, style, pin_page is not None):
            if slot.role == ROLE_MAIN:
                page, visible = deck.current, True
            elif slot.role == ROLE_PREV:
                page, visible = deck.current - 1, deck.current > 1
            elif slot.role == ROLE_NEXT:
                page, visible = deck.current + 1, deck.current < deck.page_count
            else:
                page, visible = pin_page, True
            if visible and (
                abs(slot.x) + slot.w / 2 > PLANE_ENVELOPE * pw / 2 + 1e-12
                or abs(slot.y) + slot.h / 2 > PLANE_ENVELOPE * ph / 2 + 1e-12
            ):
                raise OutOfPlane(f"{slot.role} layer leaves the plane envelope")
            pos = _plane_point(plane, slot.x, slot.y, slot.setback)
            layers.append(
                SlideLayer(
                    role=slot.role,
                    page=max(1, min(deck.page_count, page)),
                    pose=Pose(pos, rot, plane_frame(plane)),
                    size=(slot.w, slot.h),
                    visible=visible,
                )
            )
        return layers

    def _relayout(self, cx=None, cy=None, w=None, h=None, style=None, pin_page="keep"):
        """Validate then commit a new base/style/pin; atomic on failure."""
        cx = self.base_center[0] if cx is None else cx
        cy = self.base_center[1] if cy is None else cy
        w = self.base_size[0] if w is None else w
        h = self.base_size[1] if h is None else h
        style = self.style if style is None else style
        pin_page = self.pin_page if pin_page == "keep" else pin_page
        self._check_bounds(cx, cy, w, h)
        layers = self._derive_layers(cx, cy, w, h, style, pin_page)
        self.base_center, self.base_size = (cx, cy), (w, h)
        self.style, self.pin_page, self.layers = style, pin_page, layers

    # -- operations

    def place_slide(self, plane: PlaneRegion | None, size: tuple[float, float], deck: SlideDeck):
        if plane is None or not plane.is_vertical():
            raise NoPlane("need a detected vertical plane")
        w, h = size
        if w <= 0 or h <= 0:
            raise StageError("slide size must be positive")
        pw, ph = plane.extents
        if w > pw or h > ph:
            raise PlaneTooSmall(f"{w:.3g}x{h:.3g} slide on {pw:.3g}x{ph:.3g} plane")
        self.deck = deck
        self.plane = plane
        self.pointer = PointerState()
        self._relayout(cx=0.0, cy=0.0, w=w, h=h, style=self.style)
        return self

    def adjust_slide(self, translate=(0.0, 0.0), scale=1.0, aspect=None):
        self._require_placed()
        if scale <= 0:
            raise StageError("scale must be positive")
        cx = self.base_center[0] + translate[0]
        cy = self.base_center[1] + translate[1]
        w = self.base_size[0] * scale
        h = self.base_size[1] * scale
        if aspect is not None:
            if aspect <= 0:
                raise StageError("aspect must be positive")
            h = w / aspect
        self._relayout(cx=cx, cy=cy, w=w, h=h)
        return self

    def set_display_style(self, style: str):
        self._require_placed()
        if style not in STYLES:
            raise StageError(f"unknown style {style!r}")
        self._relayout(style=style)
        return self

    def page_operation(self, op: str, page: int | None = None):
        self._require_placed()
        cur, n = self.deck.current, self.deck.page_count
        if op == "next":
            target = cur + 1
        elif op == "prev":
            target = cur - 1
        elif op == "goto":
            target = page if page is not None else cur
        else:
            raise StageError(f"unknown page op {op!r}")
        if not 1 <= target <= n:
            raise PageOutOfRange(f"page {target} outside 1..{n}")
        self.deck.current = target
        self._relayout()
        return self

    def set_pin(self, page: int | None):
        self._require_placed()
        if page is not None and not 1 <= page <= self.deck.page_count:
            raise PageOutOfRange(f"pin page {page} outside 1..{self.deck.page_count}")
        self._relayout(pin_page=page)
        return self

    # -- pointer

    def main_layer(self) -> SlideLayer:
        self._require_placed()
        return next(l for l in self.layers if l.role == ROLE_MAIN)

    def map_pointer(self, uv: tuple[float, float]) -> PointerState:
        self._require_placed()
        u, v = float(uv[0]), float(uv[1])
        if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
            # out-of-range uv from the remote means release
            self.pointer = PointerState()
            return self.pointer
        main = self.main_layer()
        w, h = main.size
        plane = self.plane
        top_left = main.pose.position - (w / 2) * plane.right + (h / 2) * plane.up
        world = top_left + u * w * plane.right - v * h * plane.up
        self.pointer = PointerState(True, (u, v), tuple(float(c) for c in world))
        return self.pointer

    def pointer_to_uv(self, world) -> tuple[float, float]:
        """Inverse of map_pointer on the Main layer plane."""
        main = self.main_layer()
        w, h = main.size
        plane = self.plane
        top_left = main.pose.position - (w / 2) * plane.right + (h / 2) * plane.up
        d = as_vec3(world) - top_left
        return (float(d @ plane.right) / w, -float(d @ plane.up) / h)

    def clear_pointer(self):
        self.pointer = PointerState()
        return self

    # -- serialization

    def snapshot(self) -> dict:
        layers = [
            {
                "role": l.role,
                "page": l.page,
                "visible": l.visible,
                "pos": [float(c) for c in l.pose.position],
                "quat": [float(c) for c in l.pose.orientation.wxyz],
                "size": [float(l.size[0]), float(l.size[1])],
            }
            for l in self.layers
        ]
        return {
            "asset": self.deck.asset_id if self.deck else None,
            "page": self.deck.current if self.deck else 0,
            "page_count": self.deck.page_count if self.deck else 0,
            "style": self.style,
            "pin": self.pin_page,
            "pointer": {
                "active": self.pointer.active,
                "u": self.pointer.uv[0],
                "v": self.pointer.uv[1],
                "world": list(self.pointer.world),
            },
            "layers": layers,
        }


def plane_frame(plane: PlaneRegion) -> str:
    return getattr(plane, "frame", "world")


def occlusion_order(
    camera_pos,
    camera_forward,
    items: list[tuple[str, np.ndarray]],
    lecturer_pos=None,
) -> list[str]:
    """Far-to-near render order along the camera forward axis.

    The lecturer enters as a capsule anchored at the smoothed foot position;
    its depth is taken at the capsule center. Ties break on object id so the
    order is stable across runs.
    """
    cam = as_vec3(camera_pos)
    fwd = as_vec3(camera_forward)
    fwd = fwd / np.linalg.norm(fwd)
    entries = [(str(oid), float((as_vec3(p) - cam) @ fwd)) for oid, p in items]
    if lecturer_pos is not None:
        center = as_vec3(lecturer_pos) + np.array([0.0, LECTURER_HEIGHT / 2, 0.0])
        entries.append(("lecturer", float((center - cam) @ fwd)))
    entries.sort(key=lambda e: (-e[1], e[0]))
    return [oid for oid, _ in entries]
