import numpy as np
import pytest

from uavsec import autodiff as ad
from uavsec.channel import ChannelSet, ScenarioConfig, draw_channel_set, sample_topology
from uavsec.gnn import (
    GnnTrainConfig,
    forward_embeddings,
    gcn_layer,
    gnn_forward,
    init_embeddings,
    init_gnn,
    node_features,
    train_gnn,
    transfer_train,
)
from uavsec.rng import substream
from uavsec.secrecy import DegenerateInputError, secrecy_report


def small_cfg(k=4, n=4):
    return ScenarioConfig(n_users=k, n_antennas=n)


def random_channels(rng, k=4, n=4, scale=1e-4):
    hu = scale * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    he = scale * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n)))
    return ChannelSet(hu, he, np.zeros(2))


def permute_channels(ch, perm):
    return ChannelSet(ch.user_channels[perm], ch.eve_channels[perm], ch.uav_xy)


def test_init_embeddings_normalized_and_collinear():
    rng = np.random.default_rng(0)
    ch = random_channels(rng)
    e0 = init_embeddings(ch)
    np.testing.assert_allclose(np.linalg.norm(e0, axis=1), 1.0, atol=1e-12)
    # collinearity: |<e0, h>| = ||e0|| * ||h||
    for k in range(ch.n_users):
        lhs = np.abs(np.vdot(e0[k], ch.user_channels[k]))
        rhs = np.linalg.norm(ch.user_channels[k])
        assert lhs == pytest.approx(rhs, rel=1e-12)
    e0b = init_embeddings(ch)
    np.testing.assert_array_equal(e0, e0b)


def test_init_embeddings_zero_channel():
    ch = ChannelSet(np.zeros((2, 4), dtype=complex), np.ones((2, 4), dtype=complex), np.zeros(2))
    with pytest.raises(DegenerateInputError):
        init_embeddings(ch)


def test_single_node_layer_uses_zero_aggregate():
    cfg = small_cfg(k=1)
    model = init_gnn(cfg, substream(0, "init"), n_layers=1)
    rng = np.random.default_rng(1)
    ch = random_channels(rng, k=1)
    chan, e0 = node_features([ch], model.feature_scale)
    z = ad.concat([ad.tensor(chan), ad.tensor(e0)], axis=-1)
    out = gcn_layer(z, model.layers[0])
    # oracle: replay the layer arithmetic with the aggregate forced to zero
    layer = model.layers[0]
    m = z.data @ layer.gen_w.data + layer.gen_b.data
    c = np.concatenate([m, np.zeros_like(m)], axis=-1)
    s = float(layer.out_slope.data)
    h = c @ layer.out1_w.data + layer.out1_b.data
    h = np.where(h < 0, s * h, h)
    e = h @ layer.out2_w.data + layer.out2_b.data
    np.testing.assert_allclose(out.data[..., -e.shape[-1]:], e, atol=1e-12)


def test_dominant_neighbor_wins_aggregation():
    # if one neighbor's transformed message dominates elementwise, the
    # aggregate equals it exactly
    cfg = small_cfg(k=3)
    model = init_gnn(cfg, substream(2, "init"), n_layers=1)
    layer = model.layers[0]
    rng = np.random.default_rng(3)
    ch = random_channels(rng, k=3)
    chan, e0 = node_features([ch], model.feature_scale)
    feats = np.concatenate([chan, e0], axis=-1)

    def transformed(z_row):
        m = z_row @ layer.gen_w.data + layer.gen_b.data
        t = m @ layer.aggr_w.data + layer.aggr_b.data
        s = float(layer.aggr_slope.data)
        return np.where(t < 0, s * t, t), m

    t_all = []
    for k in range(3):
        t, _ = transformed(feats[0, k])
        t_all.append(t)
    # node 0 aggregates max over nodes 1 and 2
    expect = np.maximum(t_all[1], t_all[2])
    z = ad.concat([ad.tensor(chan), ad.tensor(e0)], axis=-1)
    from uavsec.gnn import _roll_nodes

    t = ad.prelu(
        ad.add(ad.matmul(ad.add(ad.matmul(z, layer.gen_w), layer.gen_b), layer.aggr_w),
               layer.aggr_b),
        layer.aggr_slope,
    )
    agg = ad.reduce_max_over_set([_roll_nodes(t, 1), _roll_nodes(t, 2)])
    np.testing.assert_allclose(agg.data[0, 0], expect, atol=1e-12)


def test_forward_power_budget_binds():
    cfg = small_cfg()
    model = init_gnn(cfg, substream(4, "init"))
    rng = np.random.default_rng(5)
    for _ in range(20):
        ch = random_channels(rng)
        w = gnn_forward(ch, model, cfg.power_budget)
        assert np.sum(np.abs(w) ** 2) == pytest.approx(cfg.power_budget, abs=1e-9)


def test_permutation_equivariance():
    cfg = small_cfg(k=6, n=4)
    model = init_gnn(cfg, substream(6, "init"))
    rng = np.random.default_rng(7)
    for _ in range(20):
        ch = random_channels(rng, k=6)
        perm = rng.permutation(6)
        w = gnn_forward(ch, model, 1.0)
        w_perm = gnn_forward(permute_channels(ch, perm), model, 1.0)
        np.testing.assert_allclose(w_perm, w[perm], atol=1e-9)
        r = secrecy_report(ch, w, 1e-10).sum_secrecy
        r_perm = secrecy_report(permute_channels(ch, perm), w_perm, 1e-10).sum_secrecy
        assert abs(r - r_perm) <= 1e-9


def test_generalizes_across_user_counts():
    cfg = small_cfg(k=8, n=4)
    model = init_gnn(cfg, substream(8, "init"))
    rng = np.random.default_rng(9)
    ch12 = random_channels(rng, k=12, n=4)
    w = gnn_forward(ch12, model, 1.0)
    assert w.shape == (12, 4)
    assert np.sum(np.abs(w) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_antenna_mismatch_rejected():
    cfg = small_cfg(k=4, n=4)
    model = init_gnn(cfg, substream(10, "init"))
    rng = np.random.default_rng(11)
    with pytest.raises(ValueError):
        gnn_forward(random_channels(rng, k=4, n=8), model, 1.0)


def test_training_improves_loss_smoke():
    cfg = small_cfg(k=3, n=2)
    tc = GnnTrainConfig(epochs=8, batch_size=16, steps_per_epoch=4, n_layers=2)
    model, losses = train_gnn(cfg, tc, 21)
    assert len(losses) == 8
    assert np.mean(losses[-2:]) < np.mean(losses[:2])


def test_training_determinism():
    cfg = small_cfg(k=2, n=2)
    tc = GnnTrainConfig(epochs=2, batch_size=8, steps_per_epoch=2, n_layers=1)
    _, l1 = train_gnn(cfg, tc, 33)
    _, l2 = train_gnn(cfg, tc, 33)
    assert l1 == l2


def test_transfer_zero_epochs_keeps_model():
    cfg = small_cfg(k=3, n=2)
    tc = GnnTrainConfig(epochs=4, batch_size=8, steps_per_epoch=2, n_layers=2)
    model, _ = train_gnn(cfg, tc, 44)
    cfg12 = small_cfg(k=5, n=2)
    tuned, losses = transfer_train(model, cfg12, GnnTrainConfig(epochs=0, n_layers=2), 45)
    assert losses == []
    for p, q in zip(model.params(), tuned.params()):
        np.testing.assert_array_equal(p.data, q.data)


def test_transfer_starts_below_scratch_init():
    cfg = small_cfg(k=3, n=2)
    tc = GnnTrainConfig(epochs=10, batch_size=16, steps_per_epoch=4, n_layers=2)
    model, _ = train_gnn(cfg, tc, 55)
    cfg_new = small_cfg(k=5, n=2)
    from uavsec.gnn import sample_training_batch
    from uavsec.secrecy import batch_secrecy_loss

    scratch = init_gnn(cfg_new, substream(56, "gnn-init"), n_layers=2)
    sets = sample_training_batch(cfg_new, 64, substream(57, "probe"))

    def eval_loss(m):
        with ad.no_grad():
            emb = forward_embeddings(m, sets)
        return batch_secrecy_loss(sets, ad.tensor(emb.data), cfg_new.noise_power,
                                  cfg_new.power_budget).item()

    assert eval_loss(model) < eval_loss(scratch)


def test_forward_cost_scales_quadratically_in_users():
    cfg = small_cfg(k=4, n=4)
    model = init_gnn(cfg, substream(60, "init"))
    rng = np.random.default_rng(61)

    def madds(k):
        ch = random_channels(rng, k=k)
        with ad.count_madds() as counter:
            with ad.no_grad():
                forward_embeddings(model, [ch])
        return counter["madds"]

    c8, c16, c32 = madds(8), madds(16), madds(32)
    # doubling K should grow work superlinearly but at most ~quadratically
    assert 2.0 < c16 / c8 < 4.5
    assert 2.0 < c32 / c16 < 4.5


def test_forward_cost_scales_with_antennas_squared():
    rng = np.random.default_rng(62)

    def madds(n):
        cfg = small_cfg(k=4, n=n)
        model = init_gnn(cfg, substream(63, "init"))
        ch = random_channels(rng, k=4, n=n)
        with ad.count_madds() as counter:
            with ad.no_grad():
                forward_embeddings(model, [ch])
        return counter["madds"]

    c4, c8 = madds(4), madds(8)
    assert 3.0 < c8 / c4 < 4.6
