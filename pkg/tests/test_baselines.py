import numpy as np
import pytest

from uavsec.baselines import (
    convex_hull,
    grid_points,
    grid_search_deployment,
    heuristic_positions,
    init_mlp,
    min_enclosing_circle,
    mlp_forward,
    mrt_beamformer,
    polygon_centroid,
    train_mlp,
)
from uavsec.channel import ChannelSet, ScenarioConfig, Topology, sample_topology
from uavsec.gnn import GnnTrainConfig
from uavsec.rng import substream
from uavsec.secrecy import DegenerateInputError, secrecy_report, user_rate


def random_channels(rng, k=4, n=4, scale=1e-4):
    hu = scale * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    he = scale * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    return ChannelSet(hu, he, np.zeros(2))


# --- MRT -------------------------------------------------------------------


def test_mrt_single_user_direction():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((1, 8)) + 1j * rng.standard_normal((1, 8))
    ch = ChannelSet(h, h * 0, np.zeros(2))
    w = mrt_beamformer(ch, 4.0)
    np.testing.assert_allclose(w, 2.0 * h / np.linalg.norm(h), atol=1e-12)


def test_mrt_total_power():
    rng = np.random.default_rng(1)
    ch = random_channels(rng, k=6, n=8)
    w = mrt_beamformer(ch, 2.5)
    assert np.sum(np.abs(w) ** 2) == pytest.approx(2.5, abs=1e-9)


def test_mrt_orthogonal_users_match_direct_formula():
    # orthogonal channels, no eavesdroppers in range: interference vanishes
    k, n = 4, 4
    h = np.eye(n, dtype=complex)[:k] * 3.0
    ch = ChannelSet(h, np.zeros((k, n), dtype=complex), np.zeros(2))
    w = mrt_beamformer(ch, 1.0)
    noise = 0.5
    for i in range(k):
        expect = np.log2(1.0 + (0.25 * 9.0) / noise)
        assert user_rate(i, ch, w, noise) == pytest.approx(expect, rel=1e-12)


def test_mrt_zero_channel_degenerate():
    ch = ChannelSet(np.zeros((2, 4), dtype=complex), np.zeros((2, 4), dtype=complex), np.zeros(2))
    with pytest.raises(DegenerateInputError):
        mrt_beamformer(ch, 1.0)


# --- MLP -------------------------------------------------------------------


def test_mlp_power_budget():
    cfg = ScenarioConfig(n_users=3, n_antennas=4)
    model = init_mlp(cfg, substream(2, "mlp"))
    rng = np.random.default_rng(3)
    for _ in range(10):
        ch = random_channels(rng, k=3, n=4)
        w = mlp_forward(ch, model, cfg.power_budget)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_mlp_user_count_mismatch():
    cfg = ScenarioConfig(n_users=3, n_antennas=4)
    model = init_mlp(cfg, substream(4, "mlp"))
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError, match="retrain"):
        mlp_forward(random_channels(rng, k=5, n=4), model, 1.0)


def test_mlp_not_permutation_equivariant():
    cfg = ScenarioConfig(n_users=4, n_antennas=4)
    model = init_mlp(cfg, substream(6, "mlp"))
    rng = np.random.default_rng(7)
    diffs = []
    for _ in range(20):
        ch = random_channels(rng, k=4, n=4)
        perm = rng.permutation(4)
        while np.array_equal(perm, np.arange(4)):
            perm = rng.permutation(4)
        permed = ChannelSet(ch.user_channels[perm], ch.eve_channels[perm], ch.uav_xy)
        r1 = secrecy_report(ch, mlp_forward(ch, model, 1.0), 1e-10).sum_secrecy
        r2 = secrecy_report(permed, mlp_forward(permed, model, 1.0), 1e-10).sum_secrecy
        diffs.append(abs(r1 - r2))
    assert np.mean(np.array(diffs) > 1e-3) >= 0.95


def test_mlp_training_loss_decreases():
    cfg = ScenarioConfig(n_users=2, n_antennas=2)
    tc = GnnTrainConfig(epochs=8, batch_size=16, steps_per_epoch=4)
    _, losses = train_mlp(cfg, tc, 8)
    assert np.mean(losses[-2:]) < np.mean(losses[:2])


# --- placement heuristics ---------------------------------------------------


def brute_force_mec(points):
    """Oracle: smallest circle among all pair-diameter and triple circumcircle
    candidates that contains every point."""
    from uavsec.baselines import _circumcircle

    pts = [np.asarray(p, float) for p in points]
    best = None

    def contains_all(center, radius):
        return all(np.hypot(*(p - center)) <= radius + 1e-7 for p in pts)

    for i in range(len(pts)):
        for j in range(i, len(pts)):
            c = (pts[i] + pts[j]) / 2.0
            r = np.hypot(*(pts[i] - pts[j])) / 2.0
            if contains_all(c, r) and (best is None or r < best[1]):
                best = (c, r)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            for k in range(j + 1, len(pts)):
                cc = _circumcircle(pts[i], pts[j], pts[k])
                if cc is None:
                    continue
                c, r = cc
                if contains_all(c, r) and (best is None or r < best[1]):
                    best = (c, r)
    return best


def test_min_enclosing_circle_matches_brute_force():
    rng = np.random.default_rng(9)
    for trial in range(200):
        n = int(rng.integers(1, 10))
        pts = rng.uniform(0, 200, size=(n, 2))
        c, r = min_enclosing_circle(pts)
        bc, br = brute_force_mec(pts)
        assert r == pytest.approx(br, abs=1e-6), f"trial {trial}"
        assert all(np.hypot(*(p - c)) <= r + 1e-6 for p in pts)


def test_right_triangle_circumcenter():
    pts = np.array([[0.0, 0.0], [200.0, 0.0], [0.0, 200.0]])
    c, r = min_enclosing_circle(pts)
    np.testing.assert_allclose(c, [100.0, 100.0], atol=1e-9)
    assert r == pytest.approx(100.0 * np.sqrt(2.0))


def test_triangle_centroid():
    pts = np.array([[0.0, 0.0], [200.0, 0.0], [0.0, 200.0]])
    np.testing.assert_allclose(
        polygon_centroid(pts), [200.0 / 3.0, 200.0 / 3.0], atol=1e-9
    )


def test_polygon_centroid_degenerate_collinear():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    np.testing.assert_allclose(polygon_centroid(pts), [1.0, 1.0], atol=1e-12)


def test_convex_hull_square_with_interior_point():
    pts = np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 1]], dtype=float)
    hull = convex_hull(pts)
    assert len(hull) == 4
    assert not any(np.array_equal(h, [1.0, 1.0]) for h in hull)


def test_heuristics_coincide_for_corner_users():
    users = np.array([[0.0, 0.0], [200.0, 0.0], [200.0, 200.0], [0.0, 200.0]])
    topo = Topology(200.0, np.array([100.0, 100.0]), 100.0, users, users + 1.0)
    pos = heuristic_positions(topo)
    assert set(pos) == {"area_center", "geometric_center", "circumcenter",
                        "polygon_centroid"}
    for xy in pos.values():
        np.testing.assert_allclose(xy, [100.0, 100.0], atol=1e-9)


def test_heuristics_use_user_locations_only():
    rng = np.random.default_rng(10)
    users = rng.uniform(0, 200, size=(5, 2))
    t1 = Topology(200.0, np.zeros(2), 100.0, users, users + 1.0)
    t2 = Topology(200.0, np.zeros(2), 100.0, users, users + 13.0)
    p1, p2 = heuristic_positions(t1), heuristic_positions(t2)
    for key in p1:
        np.testing.assert_array_equal(p1[key], p2[key])


# --- grid oracle -------------------------------------------------------------


def test_grid_points_include_center_for_odd_resolution():
    pts = grid_points(200.0, 25)
    assert pts[0] == pytest.approx(4.0)
    assert pts[-1] == pytest.approx(196.0)
    assert 100.0 in pts
    assert pts[1] - pts[0] == pytest.approx(8.0)  # 200 / 25


def test_grid_search_dominates_evaluated_positions():
    from uavsec.gnn import init_gnn
    from uavsec.sac import compute_reward

    cfg = ScenarioConfig(n_users=3, n_antennas=2)
    model = init_gnn(cfg, substream(11, "init"), n_layers=2)
    topo = sample_topology(cfg, substream(12, "topo"))
    seeds = [101, 102]
    best_xy, best_r = grid_search_deployment(topo, cfg, model, 5, seeds)
    coords = grid_points(200.0, 5)
    for x in coords:
        for y in coords:
            r = compute_reward(topo.with_uav([x, y]), cfg, model, seeds)
            assert best_r >= r - 1e-12
    center_r = compute_reward(topo.with_uav([100.0, 100.0]), cfg, model, seeds)
    assert best_r >= center_r
    for xy in heuristic_positions(topo).values():
        snapped = [coords[np.argmin(np.abs(coords - xy[0]))],
                   coords[np.argmin(np.abs(coords - xy[1]))]]
        assert best_r >= compute_reward(topo.with_uav(snapped), cfg, model, seeds) - 1e-12
