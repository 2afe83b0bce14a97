"""Comparison strategies: MRT beamforming, an MLP beamformer trained with
the same unsupervised loss, four heuristic UAV placements, and the
exhaustive-grid deployment oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .channel import draw_channel_set, sample_topology
from .gnn import TrainingDivergedError, default_feature_scale
from .rng import substream
from .secrecy import (
    DegenerateInputError,
    batch_secrecy_loss,
    embeddings_to_complex,
    normalize_power,
)


def mrt_beamformer(channels, p_max):
    """Match each user's own channel direction with equal per-user power."""
    h = channels.user_channels
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("mrt_beamformer: zero channel vector")
    k = h.shape[0]
    return np.sqrt(p_max / k) * h / norms


@dataclass
class MlpModel:
    """Fully-connected beamformer fixed to one (K, N) pair."""

    n_users: int
    n_antennas: int
    weights: list
    biases: list
    slopes: list
    feature_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def params(self):
        return [*self.weights, *self.biases, *self.slopes]

    def named_params(self):
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"dense{i}.w"] = w
            out[f"dense{i}.b"] = b
        for i, s in enumerate(self.slopes):
            out[f"dense{i}.slope"] = s
        return out


def init_mlp(scenario_cfg, rng):
    k, n = scenario_cfg.n_users, scenario_cfg.n_antennas
    dims = [4 * k * n, 8 * k * n, 8 * k * n, 2 * k * n]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(ad.param(ad.glorot_uniform(rng, fan_in, fan_out)))
        biases.append(ad.param(np.zeros(fan_out)))
    slopes = [ad.param(np.array(0.25)) for _ in range(len(dims) - 2)]
    return MlpModel(
        n_users=k,
        n_antennas=n,
        weights=weights,
        biases=biases,
        slopes=slopes,
        feature_scale=default_feature_scale(scenario_cfg),
    )


def flatten_channels(channel_sets, feature_scale):
    """(B, 4KN) inputs: per user [Re h | Im h], then the eavesdropper block."""
    hu = np.stack([cs.user_channels for cs in channel_sets]) * feature_scale
    he = np.stack([cs.eve_channels for cs in channel_sets]) * feature_scale
    b = hu.shape[0]
    user_flat = np.concatenate([hu.real, hu.imag], axis=-1).reshape(b, -1)
    eve_flat = np.concatenate([he.real, he.imag], axis=-1).reshape(b, -1)
    return np.concatenate([user_flat, eve_flat], axis=-1)


def mlp_embeddings(model, channel_sets):
    """Raw (B, K, 2N) embeddings as an autodiff tensor."""
    if channel_sets[0].n_users != model.n_users:
        raise ValueError(
            "MLP was built for K="
            f"{model.n_users}, got K={channel_sets[0].n_users}; retrain required"
        )
    x = ad.tensor(flatten_channels(channel_sets, model.feature_scale))
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        x = ad.add(ad.matmul(x, w), b)
        if i < last:
            x = ad.prelu(x, model.slopes[i])
    # (B, 2KN) -> (B, K, 2N): user-major layout, [Re | Im] within a user
    return ad.reshape(x, (x.shape[0], model.n_users, 2 * model.n_antennas))


def mlp_forward(channels, model, p_max):
    """Beamformer for one scenario; the power budget binds exactly."""
    with ad.no_grad():
        emb = mlp_embeddings(model, [channels])
    return normalize_power(embeddings_to_complex(emb.data[0]), p_max)


def train_mlp(scenario_cfg, train_cfg, seed):
    """Same unsupervised budget and loss as the graph model, for fairness."""
    model = init_mlp(scenario_cfg, substream(seed, "mlp-init"))
    opt = ad.Sgd(model.params(), lr=train_cfg.learning_rate)
    losses = []
    for epoch in range(train_cfg.epochs):
        rng = substream(seed, "mlp-batch", epoch)
        epoch_losses = []
        for _ in range(train_cfg.steps_per_epoch):
            sets = []
            for _ in range(train_cfg.batch_size):
                topo = sample_topology(scenario_cfg, rng)
                topo = topo.with_uav(rng.uniform(0.0, scenario_cfg.area_side, size=2))
                sets.append(draw_channel_set(topo, scenario_cfg, rng))
            emb = mlp_embeddings(model, sets)
            loss = batch_secrecy_loss(
                sets, emb, scenario_cfg.noise_power, scenario_cfg.power_budget
            )
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss {value} at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(value)
        losses.append(float(np.mean(epoch_losses)))
    return model, losses


# ---------------------------------------------------------------------------
# deployment heuristics


def _dist(a, b):
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def _circumcircle(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-12:
        return None
    ux = (
        (a[0] ** 2 + a[1] ** 2) * (b[1] - c[1])
        + (b[0] ** 2 + b[1] ** 2) * (c[1] - a[1])
        + (c[0] ** 2 + c[1] ** 2) * (a[1] - b[1])
    ) / d
    uy = (
        (a[0] ** 2 + a[1] ** 2) * (c[0] - b[0])
        + (b[0] ** 2 + b[1] ** 2) * (a[0] - c[0])
        + (c[0] ** 2 + c[1] ** 2) * (b[0] - a[0])
    ) / d
    center = np.array([ux, uy])
    return center, _dist(center, a)


_EPS = 1e-9


def _farthest_pair_circle(points):
    best = None
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            r = _dist(points[i], points[j]) / 2.0
            if best is None or r > best[1]:
                best = ((points[i] + points[j]) / 2.0, r)
    return best


def _mec_two_boundary(points, p, q):
    center = (p + q) / 2.0
    radius = _dist(p, q) / 2.0
    for k in range(len(points)):
        if _dist(points[k], center) > radius + _EPS:
            cc = _circumcircle(p, q, points[k])
            if cc is None:
                center, radius = _farthest_pair_circle([p, q, points[k]])
            else:
                center, radius = cc
    return center, radius


def _mec_one_boundary(points, q):
    center, radius = q.copy(), 0.0
    for j in range(len(points)):
        if _dist(points[j], center) > radius + _EPS:
            center, radius = _mec_two_boundary(points[:j], points[j], q)
    return center, radius


def min_enclosing_circle(points):
    """Center and radius of the smallest circle containing all points
    (incremental Welzl construction, deterministic order)."""
    pts = [np.asarray(p, dtype=float) for p in points]
    if not pts:
        raise ValueError("min_enclosing_circle needs at least one point")
    center, radius = pts[0].copy(), 0.0
    for i in range(1, len(pts)):
        if _dist(pts[i], center) > radius + _EPS:
            center, radius = _mec_one_boundary(pts[:i], pts[i])
    return center, radius


def convex_hull(points):
    """Monotone-chain hull, counterclockwise, no repeated endpoint."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return [np.array(p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


def polygon_centroid(points):
    """Area centroid of the convex hull; degenerate hulls fall back to the
    coordinate mean."""
    pts = np.asarray(points, dtype=float)
    hull = convex_hull(pts)
    if len(hull) < 3:
        return pts.mean(axis=0)
    a = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(len(hull)):
        x0, y0 = hull[i]
        x1, y1 = hull[(i + 1) % len(hull)]
        w = x0 * y1 - x1 * y0
        a += w
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    if abs(a) < 1e-12:
        return pts.mean(axis=0)
    a *= 0.5
    return np.array([cx / (6.0 * a), cy / (6.0 * a)])


def heuristic_positions(topology):
    """The four fixed placements evaluated as deployment baselines."""
    users = topology.users
    center = np.array([topology.area_side / 2.0, topology.area_side / 2.0])
    circ, _ = min_enclosing_circle(users)
    return {
        "area_center": center,
        "geometric_center": users.mean(axis=0),
        "circumcenter": circ,
        "polygon_centroid": polygon_centroid(users),
    }


def grid_points(area_side, resolution):
    """Cell-center grid coordinates; odd resolutions include the area center."""
    pitch = area_side / resolution
    return (np.arange(resolution) + 0.5) * pitch


def grid_search_deployment(topology, cfg, model, resolution, seeds):
    """Exhaustive reward evaluation on a resolution^2 grid; ties keep the
    lowest scan index."""
    from .sac import compute_reward

    coords = grid_points(topology.area_side, resolution)
    best_xy = None
    best_reward = -np.inf
    for x in coords:
        for y in coords:
            cand = topology.with_uav(np.array([x, y]))
            r = compute_reward(cand, cfg, model, seeds)
            if r > best_reward:
                best_reward = r
                best_xy = np.array([x, y])
    return best_xy, float(best_reward)
