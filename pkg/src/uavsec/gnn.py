"""Graph-convolutional beamformer trained unsupervised on the secrecy sum.

Each user/eavesdropper pair is one graph node carrying its two channel
vectors and a learned embedding. A layer generates a message per node,
aggregates the other nodes' transformed messages by elementwise max,
concatenates own message with the aggregate, and maps the result back to
an embedding through a small MLP. Layer parameters are shared across
nodes, which makes the network permutation-equivariant and lets a trained
model run on any number of users.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .channel import draw_channel_set, path_gain, sample_topology
from .rng import substream
from .secrecy import (
    DegenerateInputError,
    batch_secrecy_loss,
    embeddings_to_complex,
    normalize_power,
)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class GcnLayer:
    gen_w: ad.Tensor
    gen_b: ad.Tensor
    aggr_w: ad.Tensor
    aggr_b: ad.Tensor
    aggr_slope: ad.Tensor
    out1_w: ad.Tensor
    out1_b: ad.Tensor
    out_slope: ad.Tensor
    out2_w: ad.Tensor
    out2_b: ad.Tensor

    def params(self):
        return [
            self.gen_w, self.gen_b, self.aggr_w, self.aggr_b, self.aggr_slope,
            self.out1_w, self.out1_b, self.out_slope, self.out2_w, self.out2_b,
        ]


@dataclass
class GnnModel:
    """Layer-shared parameters plus the sizing metadata needed to rebuild."""

    n_antennas: int
    n_layers: int
    msg_width: int
    aggr_width: int
    hidden_width: int
    layers: list
    feature_scale: float = 1.0
    meta: dict = field(default_factory=dict)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def named_params(self):
        names = [
            "gen_w", "gen_b", "aggr_w", "aggr_b", "aggr_slope",
            "out1_w", "out1_b", "out_slope", "out2_w", "out2_b",
        ]
        out = {}
        for d, layer in enumerate(self.layers):
            for name, p in zip(names, layer.params()):
                out[f"layer{d}.{name}"] = p
        return out


@dataclass
class GnnTrainConfig:
    learning_rate: float = 0.005
    epochs: int = 100
    batch_size: int = 128
    steps_per_epoch: int = 10
    n_layers: int = 5


def default_feature_scale(cfg):
    """1/sqrt(gain at the nadir distance): brings channel entries to O(1)."""
    return 1.0 / np.sqrt(
        path_gain(cfg.altitude, cfg.pathloss_intercept_db, cfg.pathloss_slope_db)
    )


def init_gnn(scenario_cfg, rng, n_layers=5):
    """Fresh model sized relative to the antenna count."""
    n = scenario_cfg.n_antennas
    feat = 6 * n
    msg = 4 * n
    aggr = 4 * n
    hidden = 8 * n
    layers = []
    for _ in range(n_layers):
        layers.append(
            GcnLayer(
                gen_w=ad.param(ad.glorot_uniform(rng, feat, msg)),
                gen_b=ad.param(np.zeros(msg)),
                aggr_w=ad.param(ad.glorot_uniform(rng, msg, aggr)),
                aggr_b=ad.param(np.zeros(aggr)),
                aggr_slope=ad.param(np.array(0.25)),
                out1_w=ad.param(ad.glorot_uniform(rng, msg + aggr, hidden)),
                out1_b=ad.param(np.zeros(hidden)),
                out_slope=ad.param(np.array(0.25)),
                out2_w=ad.param(ad.glorot_uniform(rng, hidden, 2 * n)),
                out2_b=ad.param(np.zeros(2 * n)),
            )
        )
    return GnnModel(
        n_antennas=n,
        n_layers=n_layers,
        msg_width=msg,
        aggr_width=aggr,
        hidden_width=hidden,
        layers=layers,
        feature_scale=default_feature_scale(scenario_cfg),
    )


def init_embeddings(channels):
    """Matched-filter warm start: e_k = h_k / ||h_k||."""
    h = channels.user_channels
    norms = np.linalg.norm(h, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateInputError("init_embeddings: zero channel vector")
    return h / norms


def _roll_nodes(t, shift):
    k = t.shape[-2]
    head = ad.slice_axis(t, -2, shift, k)
    tail = ad.slice_axis(t, -2, 0, shift)
    return ad.concat([head, tail], axis=-2)


def gcn_layer(features, layer):
    """One message-passing round on (..., K, 6N) features; returns updated
    features with the channel blocks re-attached."""
    feat_dim = features.shape[-1]
    emb_dim = feat_dim // 3  # 2N of 6N
    k = features.shape[-2]
    m = ad.add(ad.matmul(features, layer.gen_w), layer.gen_b)
    t = ad.prelu(ad.add(ad.matmul(m, layer.aggr_w), layer.aggr_b), layer.aggr_slope)
    if k == 1:
        a = ad.tensor(np.zeros(t.shape))
    else:
        a = ad.reduce_max_over_set([_roll_nodes(t, j) for j in range(1, k)])
    c = ad.concat([m, a], axis=-1)
    h = ad.prelu(ad.add(ad.matmul(c, layer.out1_w), layer.out1_b), layer.out_slope)
    e = ad.add(ad.matmul(h, layer.out2_w), layer.out2_b)
    chan = ad.slice_axis(features, -1, 0, feat_dim - emb_dim)
    return ad.concat([chan, e], axis=-1)


def node_features(channel_sets, feature_scale):
    """(B, K, 4N) constant channel block, scaled for conditioning, plus the
    (B, K, 2N) matched-filter initial embeddings."""
    hu = np.stack([cs.user_channels for cs in channel_sets]) * feature_scale
    he = np.stack([cs.eve_channels for cs in channel_sets]) * feature_scale
    chan = np.concatenate([hu.real, hu.imag, he.real, he.imag], axis=-1)
    e0 = np.stack([init_embeddings(cs) for cs in channel_sets])
    e0 = np.concatenate([e0.real, e0.imag], axis=-1)
    return chan, e0


def forward_embeddings(model, channel_sets):
    """Raw final-layer embeddings (B, K, 2N) as an autodiff tensor."""
    chan, e0 = node_features(channel_sets, model.feature_scale)
    z = ad.concat([ad.tensor(chan), ad.tensor(e0)], axis=-1)
    for layer in model.layers:
        z = gcn_layer(z, layer)
    emb_dim = 2 * model.n_antennas
    return ad.slice_axis(z, -1, z.shape[-1] - emb_dim, z.shape[-1])


def gnn_forward(channels, model, p_max):
    """Beamformer for one scenario; meets the power budget exactly."""
    if channels.n_antennas != model.n_antennas:
        raise ValueError("channel length does not match the model antenna count")
    with ad.no_grad():
        emb = forward_embeddings(model, [channels])
    return normalize_power(embeddings_to_complex(emb.data[0]), p_max)


def sample_training_batch(scenario_cfg, batch_size, rng):
    """Fresh scenarios: random topology, uniform UAV position, fresh fading."""
    sets = []
    for _ in range(batch_size):
        topo = sample_topology(scenario_cfg, rng)
        topo = topo.with_uav(rng.uniform(0.0, scenario_cfg.area_side, size=2))
        sets.append(draw_channel_set(topo, scenario_cfg, rng))
    return sets


def _train(model, scenario_cfg, train_cfg, seed, stream_label):
    opt = ad.Sgd(model.params(), lr=train_cfg.learning_rate)
    losses = []
    for epoch in range(train_cfg.epochs):
        rng = substream(seed, stream_label, epoch)
        epoch_losses = []
        for _ in range(train_cfg.steps_per_epoch):
            sets = sample_training_batch(scenario_cfg, train_cfg.batch_size, rng)
            emb = forward_embeddings(model, sets)
            loss = batch_secrecy_loss(
                sets, emb, scenario_cfg.noise_power, scenario_cfg.power_budget
            )
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss {value} at epoch {epoch}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_losses.append(value)
        losses.append(float(np.mean(epoch_losses)))
    return model, losses


def train_gnn(scenario_cfg, train_cfg, seed):
    """Unsupervised training on freshly sampled scenarios; returns the model
    and the per-epoch mean loss curve."""
    model = init_gnn(scenario_cfg, substream(seed, "gnn-init"), train_cfg.n_layers)
    return _train(model, scenario_cfg, train_cfg, seed, "gnn-batch")


def clone_model(model):
    cloned = copy.deepcopy(model)
    for p in cloned.params():
        p.grad = None
    return cloned


def transfer_train(pretrained, scenario_cfg, train_cfg, seed):
    """Fine-tune a trained model on a new scenario (typically a new user
    count); parameter sharing makes the K change free."""
    if scenario_cfg.n_antennas != pretrained.n_antennas:
        raise ValueError("transfer requires the same antenna count")
    model = clone_model(pretrained)
    model.feature_scale = default_feature_scale(scenario_cfg)
    return _train(model, scenario_cfg, train_cfg, seed, "gnn-transfer")
