"""Geometry foundation: coordinate frames, rigid alignment from shared anchors,
simulated self-localization, moving-average smoothing, and vertical-plane
detection.

Conventions used throughout the package:
    - Right-handed world frame, +y opposite gravity (gravity points along -y).
    - Positions are float64 numpy arrays of shape (3,), in meters.
    - Rotations are unit quaternions stored scalar-first [w, x, y, z].
    - Timestamps are milliseconds (float).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY_DIR = np.array([0.0, -1.0, 0.0])
UP = np.array([0.0, 1.0, 0.0])
VERTICALITY_TOL = 0.05


class GeometryError(ValueError):
    """Base class for geometry failures."""


class InsufficientAnchors(GeometryError):
    """Fewer than 3 id-matched anchors between two maps."""


class DegenerateGeometry(GeometryError):
    """Matched anchors are collinear; the rotation is not determined."""


class FrameMismatch(GeometryError):
    """A pose was supplied in a frame the transform does not accept."""


class EmptyWindow(GeometryError):
    """No position samples at or before the query time."""


def vec3(x: float, y: float, z: float) -> np.ndarray:
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite vector components: {v}")
    return v


def as_vec3(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise GeometryError(f"expected shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"non-finite vector components: {v}")
    return v


def unit(v: np.ndarray) -> np.ndarray:
    v = as_vec3(v)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise GeometryError("cannot normalize near-zero vector")
    return v / n


@dataclass(frozen=True, eq=False)
class Rotation:
    """Unit quaternion, scalar first.

    The stored quaternion is normalized and sign-canonicalized (w >= 0;
    if w == 0 the first nonzero vector component is positive) so equal
    rotations serialize to identical bytes.
    """

    wxyz: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.wxyz, dtype=float)
        if q.shape != (4,) or not np.all(np.isfinite(q)):
            raise GeometryError(f"bad quaternion: {q}")
        n = float(np.linalg.norm(q))
        if abs(n - 1.0) > 1e-6:
            if n < 1e-12:
                raise GeometryError("zero-norm quaternion")
        q = q / n
        # canonical sign
        for c in q:
            if c > 0:
                break
            if c < 0:
                q = -q
                break
        object.__setattr__(self, "wxyz", q)

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.array([1.0, 0.0, 0.0, 0.0]))

    @staticmethod
    def from_axis_angle(axis, angle_rad: float) -> "Rotation":
        a = unit(as_vec3(axis))
        h = 0.5 * angle_rad
        return Rotation(np.concatenate(([math.cos(h)], math.sin(h) * a)))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Rotation":
        m = np.asarray(m, dtype=float)
        t = np.trace(m)
        if t > 0:
            s = math.sqrt(t + 1.0) * 2
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        else:
            i = int(np.argmax(np.diag(m)))
            if i == 0:
                s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
                w = (m[2, 1] - m[1, 2]) / s
                x = 0.25 * s
                y = (m[0, 1] + m[1, 0]) / s
                z = (m[0, 2] + m[2, 0]) / s
            elif i == 1:
                s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
                w = (m[0, 2] - m[2, 0]) / s
                x = (m[0, 1] + m[1, 0]) / s
                y = 0.25 * s
                z = (m[1, 2] + m[2, 1]) / s
            else:
                s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
                w = (m[1, 0] - m[0, 1]) / s
                x = (m[0, 2] + m[2, 0]) / s
                y = (m[1, 2] + m[2, 1]) / s
                z = 0.25 * s
        return Rotation(np.array([w, x, y, z]))

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.wxyz
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
                [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
                [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
            ]
        )

    def compose(self, other: "Rotation") -> "Rotation":
        """Hamilton product self * other (apply `other` first)."""
        w1, x1, y1, z1 = self.wxyz
        w2, x2, y2, z2 = other.wxyz
        return Rotation(
            np.array(
                [
                    w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
                    w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
                    w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
                    w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
                ]
            )
        )

    def inverse(self) -> "Rotation":
        w, x, y, z = self.wxyz
        return Rotation(np.array([w, -x, -y, -z]))

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return self.as_matrix() @ as_vec3(v)

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic angle between two rotations, radians.

        Uses the quaternion chord (|q1 - q2| = 2 sin(angle/4)) instead of
        acos of the dot product, which loses precision near identity.
        """
        d = min(
            float(np.linalg.norm(self.wxyz - other.wxyz)),
            float(np.linalg.norm(self.wxyz + other.wxyz)),
        )
        return 4.0 * math.asin(min(1.0, d / 2.0))

    def approx_equal(self, other: "Rotation", tol: float = 1e-9) -> bool:
        return self.angle_to(other) <= tol


@dataclass(eq=False)
class Pose:
    position: np.ndarray
    orientation: Rotation
    frame: str

    def __post_init__(self):
        self.position = as_vec3(self.position)


@dataclass(eq=False)
class RigidTransform:
    """Maps points/poses expressed in `from_frame` into `to_frame`."""

    rotation: Rotation
    translation: np.ndarray
    from_frame: str
    to_frame: str

    def __post_init__(self):
        self.translation = as_vec3(self.translation)

    @staticmethod
    def identity(frame: str) -> "RigidTransform":
        return RigidTransform(Rotation.identity(), np.zeros(3), frame, frame)

    def apply_point(self, p: np.ndarray) -> np.ndarray:
        return self.rotation.rotate(p) + self.translation

    def inverse(self) -> "RigidTransform":
        rinv = self.rotation.inverse()
        return RigidTransform(
            rinv, -rinv.rotate(self.translation), self.to_frame, self.from_frame
        )

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """Transform equivalent to applying `inner` first, then self."""
        if inner.to_frame != self.from_frame:
            raise FrameMismatch(
                f"cannot compose {inner.to_frame!r} into {self.from_frame!r}"
            )
        return RigidTransform(
            self.rotation.compose(inner.rotation),
            self.rotation.rotate(inner.translation) + self.translation,
            inner.from_frame,
            self.to_frame,
        )


def apply_transform(t: RigidTransform, p: Pose) -> Pose:
    """Re-express a pose in the transform's target frame."""
    if p.frame != t.from_frame:
        raise FrameMismatch(f"pose in {p.frame!r}, transform expects {t.from_frame!r}")
    return Pose(
        position=t.apply_point(p.position),
        orientation=t.rotation.compose(p.orientation),
        frame=t.to_frame,
    )


# --- AR maps and anchor-based alignment --------------------------------------


@dataclass(frozen=True)
class AnchorPoint:
    id: str
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))


@dataclass
class ARMap:
    frame: str
    anchors: list[AnchorPoint] = field(default_factory=list)

    def __post_init__(self):
        ids = [a.id for a in self.anchors]
        if len(ids) != len(set(ids)):
            raise GeometryError("duplicate anchor ids in ARMap")

    def anchor_by_id(self) -> dict[str, AnchorPoint]:
        return {a.id: a for a in self.anchors}


def map_to_bytes(m: ARMap) -> bytes:
    """Canonical UTF-8 JSON serialization, reused byte-exactly by the store
    and the wire protocol."""
    obj = {
        "frame": m.frame,
        "anchors": [{"id": a.id, "p": [float(c) for c in a.position]} for a in m.anchors],
    }
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def map_from_bytes(data: bytes) -> ARMap:
    try:
        obj = json.loads(data.decode("utf-8"))
        return ARMap(
            frame=obj["frame"],
            anchors=[AnchorPoint(a["id"], np.array(a["p"], dtype=float)) for a in obj["anchors"]],
        )
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as e:
        raise GeometryError(f"invalid ARMap serialization: {e}") from e


def _collinear(points: np.ndarray, tol: float = 1e-8) -> bool:
    c = points - points.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return bool(s[1] <= tol * max(s[0], 1.0))


def align_frames(map_a: ARMap, map_b: ARMap) -> RigidTransform:
    """Least-squares rigid transform (no scale) mapping map_b coordinates into
    map_a's frame, from id-matched anchors.

    Closed-form solution via SVD of the cross-covariance (Arun/Kabsch),
    with the determinant fix so the result is a proper rotation.
    """
    by_a = map_a.anchor_by_id()
    by_b = map_b.anchor_by_id()
    ids = sorted(set(by_a) & set(by_b))
    if len(ids) < 3:
        raise InsufficientAnchors(f"need >= 3 matched anchors, have {len(ids)}")
    A = np.array([by_a[i].position for i in ids])
    B = np.array([by_b[i].position for i in ids])
    if _collinear(A) or _collinear(B):
        raise DegenerateGeometry("matched anchors are collinear")

    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    H = (B - cb).T @ (A - ca)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = ca - R @ cb
    return RigidTransform(Rotation.from_matrix(R), t, map_b.frame, map_a.frame)


def alignment_rms(t: RigidTransform, map_a: ARMap, map_b: ARMap) -> float:
    """RMS residual of a transform over the id-matched anchors."""
    by_a = map_a.anchor_by_id()
    by_b = map_b.anchor_by_id()
    ids = sorted(set(by_a) & set(by_b))
    if not ids:
        raise InsufficientAnchors("no matched anchors")
    res = [t.apply_point(by_b[i].position) - by_a[i].position for i in ids]
    return float(np.sqrt(np.mean(np.sum(np.square(res), axis=1))))


# --- position smoothing -------------------------------------------------------


@dataclass
class PositionTrack:
    """Time-ordered position samples with a sliding averaging window."""

    window_ms: float = 5000.0
    samples: list[tuple[float, np.ndarray]] = field(default_factory=list)

    def add(self, t_ms: float, position: np.ndarray) -> None:
        p = as_vec3(position)
        if self.samples and t_ms <= self.samples[-1][0]:
            raise GeometryError("sample timestamps must be strictly increasing")
        self.samples.append((float(t_ms), p))


def moving_average_position(track: PositionTrack, now_ms: float) -> np.ndarray:
    """Unweighted mean of samples in the window [now - w, now].

    When every sample has already left the window the most recent sample at
    or before `now_ms` is held; EmptyWindow only if no sample exists yet.
    """
    lo = now_ms - track.window_ms
    inside = [p for (t, p) in track.samples if lo <= t <= now_ms]
    if inside:
        return np.mean(inside, axis=0)
    before = [(t, p) for (t, p) in track.samples if t <= now_ms]
    if before:
        return before[-1][1]
    raise EmptyWindow(f"no samples at or before t={now_ms}")


# --- simulated self-localization ----------------------------------------------


@dataclass
class LocalizationNoise:
    """Simulation stand-in for SLAM self-localization error.

    Per-call isotropic Gaussian jitter of scale `sigma` plus a random-walk
    bias accumulating at `bias_walk` meters per sqrt-second. Deterministic
    given (seed, call order).
    """

    sigma: float = 0.0
    bias_walk: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.bias_walk < 0:
            raise GeometryError("noise scales must be >= 0")
        self._rng = np.random.default_rng(self.seed)
        self._bias = np.zeros(3)
        self._last_t: float | None = None

    def sample_offset(self, session_time_ms: float) -> np.ndarray:
        dt_s = 0.0
        if self._last_t is not None:
            dt_s = max(0.0, (session_time_ms - self._last_t) / 1000.0)
        self._last_t = float(session_time_ms)
        # draws happen unconditionally so the stream is stable across configs
        self._bias = self._bias + self._rng.normal(0.0, 1.0, 3) * (
            self.bias_walk * math.sqrt(dt_s)
        )
        jitter = self._rng.normal(0.0, 1.0, 3) * self.sigma
        return jitter + self._bias


def simulate_localization(
    true_pose: Pose, noise: LocalizationNoise, session_time_ms: float
) -> Pose:
    """Noisy observation of a true pose; orientation passes through unchanged."""
    return Pose(
        position=true_pose.position + noise.sample_offset(session_time_ms),
        orientation=true_pose.orientation,
        frame=true_pose.frame,
    )


# --- plane detection ------------------------------------------------------------


@dataclass(eq=False)
class PlaneRegion:
    """Bounded rectangular plane patch.

    `origin` is the rectangle center; `right`/`up` span the plane and
    `extents = (width, height)` are the full side lengths in meters.
    """

    origin: np.ndarray
    normal: np.ndarray
    up: np.ndarray
    right: np.ndarray
    extents: tuple[float, float]

    def __post_init__(self):
        self.origin = as_vec3(self.origin)
        self.normal = unit(self.normal)
        self.up = unit(self.up)
        self.right = unit(self.right)
        w, h = self.extents
        if w <= 0 or h <= 0:
            raise GeometryError("plane extents must be positive")
        for a, b in ((self.normal, self.up), (self.normal, self.right), (self.up, self.right)):
            if abs(float(np.dot(a, b))) > 1e-6:
                raise GeometryError("plane basis vectors must be orthogonal")

    @property
    def width(self) -> float:
        return self.extents[0]

    @property
    def height(self) -> float:
        return self.extents[1]

    @property
    def area(self) -> float:
        return self.extents[0] * self.extents[1]

    def is_vertical(self) -> bool:
        return abs(float(np.dot(self.normal, GRAVITY_DIR))) < VERTICALITY_TOL


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(right, up) spanning a vertical plane, up as close to world-up as possible.

    right = normal x up so that, seen from the side the normal points to,
    u grows to the viewer's right.
    """
    n = unit(normal)
    up = UP - float(np.dot(UP, n)) * n
    up = unit(up)
    right = unit(np.cross(n, up))
    return right, up


def detect_vertical_planes(
    points: np.ndarray,
    normals: np.ndarray,
    *,
    distance_tol: float = 0.02,
    angle_tol_deg: float = 10.0,
    min_points: int = 5,
) -> list[PlaneRegion]:
    """Cluster oriented points into vertical planes.

    Greedy deterministic clustering: points join a cluster when their normal
    is near-parallel to the seed normal (within `angle_tol_deg`) and they lie
    within `distance_tol` of the seed plane. Clusters failing the verticality
    test or smaller than `min_points` are dropped. Regions are returned
    sorted by area, largest first.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    if len(points) == 0:
        raise GeometryError("point set is empty")
    norms = np.linalg.norm(normals, axis=1)
    normals = normals / norms[:, None]

    cos_tol = math.cos(math.radians(angle_tol_deg))
    unassigned = np.ones(len(points), dtype=bool)
    regions: list[PlaneRegion] = []

    for seed in range(len(points)):
        if not unassigned[seed]:
            continue
        n0 = normals[seed]
        p0 = points[seed]
        parallel = np.abs(normals @ n0) >= cos_tol
        coplanar = np.abs((points - p0) @ n0) <= distance_tol
        members = unassigned & parallel & coplanar
        # one refinement pass against the fitted plane
        signs = np.where(normals[members] @ n0 >= 0, 1.0, -1.0)
        n_fit = unit((normals[members] * signs[:, None]).sum(axis=0))
        c_fit = points[members].mean(axis=0)
        parallel = np.abs(normals @ n_fit) >= cos_tol
        coplanar = np.abs((points - c_fit) @ n_fit) <= distance_tol
        members = unassigned & parallel & coplanar
        unassigned[members] = False
        idx = np.flatnonzero(members)
        if len(idx) < min_points:
            continue

        signs = np.where(normals[idx] @ n_fit >= 0, 1.0, -1.0)
        n_mean = unit((normals[idx] * signs[:, None]).sum(axis=0))
        if abs(float(np.dot(n_mean, GRAVITY_DIR))) >= VERTICALITY_TOL:
            continue
        right, up = _plane_basis(n_mean)
        pts = points[idx]
        centroid = pts.mean(axis=0)
        u = (pts - centroid) @ right
        v = (pts - centroid) @ up
        width = float(u.max() - u.min())
        height = float(v.max() - v.min())
        if width <= 0 or height <= 0:
            continue
        center = centroid + right * float(u.max() + u.min()) / 2 + up * float(v.max() + v.min()) / 2
        regions.append(
            PlaneRegion(center, n_mean, up, right, (width, height))
        )

    regions.sort(key=lambda r: -r.area)
    return regions
