import math

import numpy as np
import pytest

from arlecture.geometry import (
    ARMap,
    AnchorPoint,
    DegenerateGeometry,
    EmptyWindow,
    FrameMismatch,
    InsufficientAnchors,
    LocalizationNoise,
    PlaneRegion,
    Pose,
    PositionTrack,
    RigidTransform,
    Rotation,
    align_frames,
    alignment_rms,
    apply_transform,
    detect_vertical_planes,
    map_from_bytes,
    map_to_bytes,
    moving_average_position,
    simulate_localization,
    vec3,
)


def random_rotation(rng) -> Rotation:
    q = rng.normal(size=4)
    return Rotation(q / np.linalg.norm(q))


def random_transform(rng, frame_from="b", frame_to="a") -> RigidTransform:
    return RigidTransform(random_rotation(rng), rng.uniform(-3, 3, 3), frame_from, frame_to)


def make_maps(anchors_b, transform: RigidTransform, ids=None):
    """map_b holds `anchors_b` (its own frame); map_a holds their images under
    `transform`, so align_frames(a, b) should recover `transform` exactly."""
    ids = ids or [f"n{i}" for i in range(len(anchors_b))]
    b = ARMap(transform.from_frame, [AnchorPoint(i, p) for i, p in zip(ids, anchors_b)])
    a = ARMap(
        transform.to_frame,
        [AnchorPoint(i, transform.apply_point(p)) for i, p in zip(ids, anchors_b)],
    )
    return a, b


# --- rotations / transforms ---------------------------------------------------


def test_rotation_roundtrip_matrix():
    rng = np.random.default_rng(7)
    for _ in range(200):
        r = random_rotation(rng)
        r2 = Rotation.from_matrix(r.as_matrix())
        assert r.angle_to(r2) < 1e-9


def test_rotation_compose_matches_matrix_product():
    rng = np.random.default_rng(8)
    for _ in range(100):
        r1, r2 = random_rotation(rng), random_rotation(rng)
        m = r1.as_matrix() @ r2.as_matrix()
        assert np.allclose(r1.compose(r2).as_matrix(), m, atol=1e-12)


def test_apply_transform_identity():
    p = Pose(vec3(1, 2, 3), Rotation.identity(), "a")
    out = apply_transform(RigidTransform.identity("a"), p)
    assert np.allclose(out.position, p.position)
    assert out.frame == "a"


def test_apply_transform_pure_translation():
    t = RigidTransform(Rotation.identity(), vec3(1, 2, 3), "a", "b")
    p = Pose(vec3(0, 0, 0), Rotation.identity(), "a")
    assert np.allclose(apply_transform(t, p).position, [1, 2, 3])


def test_apply_transform_frame_mismatch():
    t = RigidTransform(Rotation.identity(), vec3(0, 0, 0), "a", "b")
    with pytest.raises(FrameMismatch):
        apply_transform(t, Pose(vec3(0, 0, 0), Rotation.identity(), "c"))


def test_apply_transform_inverse_roundtrip():
    rng = np.random.default_rng(9)
    for _ in range(100):
        t = random_transform(rng)
        p = Pose(rng.uniform(-5, 5, 3), random_rotation(rng), "b")
        back = apply_transform(t.inverse(), apply_transform(t, p))
        assert np.allclose(back.position, p.position, atol=1e-9)
        assert back.orientation.angle_to(p.orientation) < 1e-9


def test_apply_transform_is_isometry():
    rng = np.random.default_rng(10)
    for _ in range(100):
        t = random_transform(rng)
        p1 = rng.uniform(-5, 5, 3)
        p2 = rng.uniform(-5, 5, 3)
        d0 = np.linalg.norm(p1 - p2)
        d1 = np.linalg.norm(t.apply_point(p1) - t.apply_point(p2))
        assert abs(d0 - d1) < 1e-9


def test_transform_compose_with_inverse_is_identity():
    rng = np.random.default_rng(11)
    t = random_transform(rng)
    ident = t.compose(t.inverse())
    assert np.allclose(ident.translation, 0, atol=1e-9)
    assert ident.rotation.angle_to(Rotation.identity()) < 1e-9


# --- alignment ------------------------------------------------------------------


def test_align_identical_maps_identity():
    anchors = [vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)]
    a, b = make_maps(anchors, RigidTransform.identity("a"))
    t = align_frames(a, b)
    assert np.allclose(t.translation, 0, atol=1e-12)
    assert t.rotation.angle_to(Rotation.identity()) < 1e-12
    assert alignment_rms(t, a, b) < 1e-12


def test_align_recovers_constructed_rotation():
    truth = RigidTransform(
        Rotation.from_axis_angle([0, 1, 0], math.pi / 2), vec3(1, 0, 0), "b", "a"
    )
    anchors = [vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)]
    a, b = make_maps(anchors, truth)
    t = align_frames(a, b)
    assert t.from_frame == "b" and t.to_frame == "a"
    assert t.rotation.angle_to(truth.rotation) < 1e-9
    assert np.allclose(t.translation, truth.translation, atol=1e-9)
    assert alignment_rms(t, a, b) < 1e-9


def test_align_noiseless_random_transforms():
    # 1000 seeded random rigid transforms, >= 4 non-coplanar anchors
    rng = np.random.default_rng(42)
    for _ in range(1000):
        truth = random_transform(rng)
        n = rng.integers(4, 9)
        anchors = list(rng.uniform(-2, 2, (n - 4, 3)))
        anchors += [vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)]
        a, b = make_maps(anchors, truth)
        t = align_frames(a, b)
        assert t.rotation.angle_to(truth.rotation) < 1e-9
        assert np.allclose(t.translation, truth.translation, atol=1e-9)


def test_align_noisy_monte_carlo():
    # Gaussian sigma=0.01 m anchor perturbation: residual RMS <= 0.03 m,
    # transform within 0.02 m / 1 deg of truth, over 1000 seeded trials.
    rng = np.random.default_rng(123)
    cube = np.array(
        [(x, y, z) for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float
    )
    worst_rms, worst_t, worst_ang = 0.0, 0.0, 0.0
    for _ in range(1000):
        truth = random_transform(rng)
        anchors = list(cube + rng.uniform(-0.2, 0.2, (8, 3)))
        a, b = make_maps(anchors, truth)
        b = ARMap(
            b.frame,
            [AnchorPoint(x.id, x.position + rng.normal(0, 0.01, 3)) for x in b.anchors],
        )
        t = align_frames(a, b)
        worst_rms = max(worst_rms, alignment_rms(t, a, b))
        worst_t = max(worst_t, float(np.linalg.norm(t.translation - truth.translation)))
        worst_ang = max(worst_ang, t.rotation.angle_to(truth.rotation))
    assert worst_rms <= 0.03
    assert worst_t <= 0.02
    assert worst_ang <= math.radians(1.0)


def test_align_insufficient_anchors():
    a = ARMap("a", [AnchorPoint("x", vec3(0, 0, 0)), AnchorPoint("y", vec3(1, 0, 0))])
    b = ARMap("b", [AnchorPoint("x", vec3(0, 0, 0)), AnchorPoint("y", vec3(1, 0, 0))])
    with pytest.raises(InsufficientAnchors):
        align_frames(a, b)


def test_align_collinear_anchors():
    pts = [vec3(0, 0, 0), vec3(1, 0, 0), vec3(2, 0, 0), vec3(3, 0, 0)]
    a, b = make_maps(pts, RigidTransform.identity("a"))
    with pytest.raises(DegenerateGeometry):
        align_frames(a, b)


def test_align_matches_only_shared_ids():
    truth = RigidTransform(Rotation.from_axis_angle([0, 1, 0], 0.3), vec3(0.5, 0, -1), "b", "a")
    anchors = [vec3(0, 0, 0), vec3(1, 0, 0), vec3(0, 1, 0), vec3(0, 0, 1)]
    a, b = make_maps(anchors, truth)
    a.anchors.append(AnchorPoint("only_a", vec3(9, 9, 9)))
    b.anchors.append(AnchorPoint("only_b", vec3(-9, 9, 9)))
    t = align_frames(a, b)
    assert t.rotation.angle_to(truth.rotation) < 1e-9


def grid_search_rms(map_a: ARMap, map_b: ARMap) -> float:
    """Brute-force oracle: yaw rotations in 1-degree steps, translation on a
    1 cm grid around the per-rotation closed-form optimum. The least-squares
    solution searches a superset, so its residual can never exceed this."""
    by_a, by_b = map_a.anchor_by_id(), map_b.anchor_by_id()
    ids = sorted(set(by_a) & set(by_b))
    A = np.array([by_a[i].position for i in ids])
    B = np.array([by_b[i].position for i in ids])
    best = math.inf
    offsets = np.array(
        [(dx, dy, dz) for dx in (-0.01, 0, 0.01) for dy in (-0.01, 0, 0.01) for dz in (-0.01, 0, 0.01)]
    )
    for deg in range(360):
        r = Rotation.from_axis_angle([0, 1, 0], math.radians(deg)).as_matrix()
        rb = B @ r.T
        t0 = A.mean(axis=0) - rb.mean(axis=0)
        t0 = np.round(t0, 2)  # snap to the 1 cm grid
        for off in offsets:
            res = rb + (t0 + off) - A
            rms = math.sqrt(float(np.mean(np.sum(res * res, axis=1))))
            best = min(best, rms)
    return best


def test_align_never_worse_than_grid_search():
    rng = np.random.default_rng(55)
    for _ in range(5):
        yaw = rng.uniform(0, 2 * math.pi)
        truth = RigidTransform(
            Rotation.from_axis_angle([0, 1, 0], yaw), rng.uniform(-1, 1, 3), "b", "a"
        )
        anchors = list(rng.uniform(-2, 2, (5, 3)))
        a, b = make_maps(anchors, truth)
        # perturb so the optimum is not exactly representable
        b = ARMap(
            b.frame,
            [AnchorPoint(x.id, x.position + rng.normal(0, 0.02, 3)) for x in b.anchors],
        )
        assert alignment_rms(align_frames(a, b), a, b) <= grid_search_rms(a, b) + 1e-9


def test_map_serialization_roundtrip():
    rng = np.random.default_rng(3)
    m = ARMap("room", [AnchorPoint(f"a{i}", rng.uniform(-4, 4, 3)) for i in range(50)])
    data = map_to_bytes(m)
    m2 = map_from_bytes(data)
    assert map_to_bytes(m2) == data
    assert m2.frame == m.frame
    assert all(np.array_equal(x.position, y.position) for x, y in zip(m.anchors, m2.anchors))


def test_map_serialization_empty():
    data = map_to_bytes(ARMap("empty"))
    assert map_from_bytes(data).anchors == []
    assert map_to_bytes(map_from_bytes(data)) == data


# --- moving average -------------------------------------------------------------


def test_moving_average_singleton():
    tr = PositionTrack()
    tr.add(0, vec3(1, 2, 3))
    assert np.allclose(moving_average_position(tr, 100), [1, 2, 3])


def test_moving_average_two_points():
    tr = PositionTrack()
    tr.add(0, vec3(0, 0, 0))
    tr.add(4000, vec3(2, 0, 0))
    assert np.allclose(moving_average_position(tr, 5000), [1, 0, 0])


def test_moving_average_step_response_exact():
    # step 0 -> 1 m at t=10 s; samples every second; the output reaches 1
    # exactly when the last pre-step sample (t=9000 ms) leaves the 5 s
    # window [now - 5000, now], i.e. the first now > 14000 ms.
    tr = PositionTrack()
    for t in range(0, 20001, 1000):
        tr.add(t, vec3(0.0 if t < 10000 else 1.0, 0, 0))
    assert moving_average_position(tr, 14000)[0] < 1.0
    assert moving_average_position(tr, 14001)[0] == pytest.approx(1.0)


def test_moving_average_equals_bruteforce():
    rng = np.random.default_rng(77)
    for _ in range(200):
        tr = PositionTrack(window_ms=float(rng.integers(500, 8000)))
        t = 0.0
        raw = []
        for _ in range(rng.integers(1, 40)):
            t += float(rng.integers(1, 900))
            p = rng.uniform(-5, 5, 3)
            tr.add(t, p)
            raw.append((t, p))
        now = t + float(rng.integers(0, 2000))
        inside = [p for (ts, p) in raw if now - tr.window_ms <= ts <= now]
        if inside:
            expect = np.mean(inside, axis=0)
        else:
            expect = [p for (ts, p) in raw if ts <= now][-1]
        assert np.allclose(moving_average_position(tr, now), expect, atol=1e-12)


def test_moving_average_empty():
    tr = PositionTrack()
    with pytest.raises(EmptyWindow):
        moving_average_position(tr, 0)
    tr.add(100, vec3(1, 1, 1))
    with pytest.raises(EmptyWindow):
        moving_average_position(tr, 50)


def test_track_rejects_non_increasing():
    tr = PositionTrack()
    tr.add(5, vec3(0, 0, 0))
    with pytest.raises(Exception):
        tr.add(5, vec3(0, 0, 0))


# --- simulated localization -----------------------------------------------------


def test_localization_noiseless_exact():
    noise = LocalizationNoise(sigma=0.0, bias_walk=0.0, seed=1)
    pose = Pose(vec3(1, 2, 3), Rotation.identity(), "rec")
    out = simulate_localization(pose, noise, 0)
    assert np.array_equal(out.position, pose.position)


def test_localization_deterministic():
    a = LocalizationNoise(sigma=0.05, bias_walk=0.001, seed=99)
    b = LocalizationNoise(sigma=0.05, bias_walk=0.001, seed=99)
    pose = Pose(vec3(0, 0, 0), Rotation.identity(), "rec")
    seq_a = [simulate_localization(pose, a, t).position for t in range(0, 5000, 100)]
    seq_b = [simulate_localization(pose, b, t).position for t in range(0, 5000, 100)]
    assert all(np.array_equal(x, y) for x, y in zip(seq_a, seq_b))


def test_localization_sigma_statistics():
    # sample stddev per axis within 5% of sigma over 1e5 draws
    sigma = 0.2
    noise = LocalizationNoise(sigma=sigma, bias_walk=0.0, seed=7)
    draws = np.array([noise.sample_offset(float(t)) for t in range(100_000)])
    std = draws.std(axis=0)
    assert np.all(np.abs(std - sigma) < 0.05 * sigma)


# --- plane detection -------------------------------------------------------------


def wall_points(origin, normal, right, up, w, h, nu, nv):
    us = np.linspace(-w / 2, w / 2, nu)
    vs = np.linspace(-h / 2, h / 2, nv)
    pts = [np.asarray(origin) + u * np.asarray(right) + v * np.asarray(up) for u in us for v in vs]
    return np.array(pts), np.tile(np.asarray(normal, dtype=float), (len(pts), 1))


def test_detect_single_wall():
    pts, nrm = wall_points([2, 1, 0], [-1, 0, 0], [0, 0, 1], [0, 1, 0], 3.0, 2.0, 10, 10)
    regions = detect_vertical_planes(pts, nrm)
    assert len(regions) == 1
    r = regions[0]
    assert r.is_vertical()
    assert abs(abs(float(np.dot(r.normal, [1, 0, 0]))) - 1) < 1e-9
    assert abs(r.origin[0] - 2.0) < 1e-9
    assert r.width == pytest.approx(3.0)
    assert r.height == pytest.approx(2.0)


def test_detect_floor_rejected():
    pts, nrm = wall_points([0, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1], 4.0, 4.0, 12, 12)
    assert detect_vertical_planes(pts, nrm) == []


def test_detect_two_walls_with_outliers():
    rng = np.random.default_rng(21)
    p1, n1 = wall_points([0, 1.25, 3], [0, 0, -1], [1, 0, 0], [0, 1, 0], 4.0, 2.5, 20, 10)
    p2, n2 = wall_points([-2, 1.0, 1], [1, 0, 0], [0, 0, -1], [0, 1, 0], 2.0, 2.0, 14, 14)
    n_out = int(0.05 * (len(p1) + len(p2)))
    po = rng.uniform(-4, 4, (n_out, 3))
    no = rng.normal(size=(n_out, 3))
    pts = np.vstack([p1, p2, po])
    nrm = np.vstack([n1, n2, no])
    regions = detect_vertical_planes(pts, nrm)
    assert len(regions) == 2
    # sorted by area descending; areas within 10% of truth
    assert regions[0].area == pytest.approx(4.0 * 2.5, rel=0.10)
    assert regions[1].area == pytest.approx(2.0 * 2.0, rel=0.10)


def test_plane_region_invariants():
    r = PlaneRegion(vec3(0, 1, 2), vec3(0, 0, -1), vec3(0, 1, 0), vec3(-1, 0, 0), (2.0, 1.0))
    assert r.is_vertical()
    with pytest.raises(Exception):
        PlaneRegion(vec3(0, 0, 0), vec3(0, 0, 1), vec3(0, 1, 0), vec3(1, 0, 0), (0.0, 1.0))
