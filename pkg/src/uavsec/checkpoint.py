"""Versioned JSON checkpoints with value-exact round trips.

One document per model: a type tag, sizing metadata, and named parameter
arrays serialized as decimal floating point (Python's shortest round-trip
repr, so load(save(m)) reproduces every value exactly).
"""

from __future__ import annotations

import json

import numpy as np

from . import autodiff as ad
from .baselines import MlpModel
from .gnn import GcnLayer, GnnModel
from .sac import DenseNet, SacModel

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _params_payload(named):
    return {
        name: {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
        for name, p in named.items()
    }


def _restore_params(payload, named):
    for name, p in named.items():
        if name not in payload:
            raise CheckpointError(f"missing parameter {name}")
        entry = payload[name]
        data = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if data.shape != p.data.shape:
            raise CheckpointError(f"shape mismatch for {name}")
        p.data = data


def _describe(model):
    if isinstance(model, GnnModel):
        return "gnn", {
            "n_antennas": model.n_antennas,
            "n_layers": model.n_layers,
            "msg_width": model.msg_width,
            "aggr_width": model.aggr_width,
            "hidden_width": model.hidden_width,
            "feature_scale": model.feature_scale,
            **model.meta,
        }
    if isinstance(model, MlpModel):
        return "mlp", {
            "n_users": model.n_users,
            "n_antennas": model.n_antennas,
            "feature_scale": model.feature_scale,
            **model.meta,
        }
    if isinstance(model, SacModel):
        return "sac", {
            "state_dim": model.state_dim,
            "hidden_width": model.hidden_width,
            **model.meta,
        }
    raise CheckpointError(f"cannot checkpoint {type(model).__name__}")


def save_model(path, model):
    kind, meta = _describe(model)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "params": _params_payload(model.named_params()),
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def _blank_gnn(meta):
    n = int(meta["n_antennas"])
    layers = []
    for _ in range(int(meta["n_layers"])):
        msg, aggr, hidden = (
            int(meta["msg_width"]),
            int(meta["aggr_width"]),
            int(meta["hidden_width"]),
        )
        layers.append(
            GcnLayer(
                gen_w=ad.param(np.zeros((6 * n, msg))),
                gen_b=ad.param(np.zeros(msg)),
                aggr_w=ad.param(np.zeros((msg, aggr))),
                aggr_b=ad.param(np.zeros(aggr)),
                aggr_slope=ad.param(np.array(0.0)),
                out1_w=ad.param(np.zeros((msg + aggr, hidden))),
                out1_b=ad.param(np.zeros(hidden)),
                out_slope=ad.param(np.array(0.0)),
                out2_w=ad.param(np.zeros((hidden, 2 * n))),
                out2_b=ad.param(np.zeros(2 * n)),
            )
        )
    return GnnModel(
        n_antennas=n,
        n_layers=int(meta["n_layers"]),
        msg_width=int(meta["msg_width"]),
        aggr_width=int(meta["aggr_width"]),
        hidden_width=int(meta["hidden_width"]),
        layers=layers,
        feature_scale=float(meta["feature_scale"]),
    )


def _blank_mlp(meta):
    k, n = int(meta["n_users"]), int(meta["n_antennas"])
    dims = [4 * k * n, 8 * k * n, 8 * k * n, 2 * k * n]
    weights = [ad.param(np.zeros((a, b))) for a, b in zip(dims[:-1], dims[1:])]
    biases = [ad.param(np.zeros(b)) for b in dims[1:]]
    slopes = [ad.param(np.array(0.0)) for _ in range(len(dims) - 2)]
    return MlpModel(
        n_users=k,
        n_antennas=n,
        weights=weights,
        biases=biases,
        slopes=slopes,
        feature_scale=float(meta["feature_scale"]),
    )


def _blank_dense(dims):
    weights = [ad.param(np.zeros((a, b))) for a, b in zip(dims[:-1], dims[1:])]
    biases = [ad.param(np.zeros(b)) for b in dims[1:]]
    slopes = [ad.param(np.array(0.0)) for _ in range(len(dims) - 2)]
    return DenseNet(weights, biases, slopes)


def _blank_sac(meta):
    s, h = int(meta["state_dim"]), int(meta["hidden_width"])
    return SacModel(
        actor=_blank_dense([s, h, h, 4]),
        critic1=_blank_dense([s + 2, h, h, 1]),
        critic2=_blank_dense([s + 2, h, h, 1]),
        target1=_blank_dense([s + 2, h, h, 1]),
        target2=_blank_dense([s + 2, h, h, 1]),
        log_alpha=ad.param(np.array(0.0)),
        state_dim=s,
        hidden_width=h,
    )


_BUILDERS = {"gnn": _blank_gnn, "mlp": _blank_mlp, "sac": _blank_sac}


def load_model(path, expect=None):
    """Load a checkpoint; `expect` pins the model kind ('gnn'/'mlp'/'sac')."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    except json.JSONDecodeError as e:
        raise CheckpointError(f"corrupt checkpoint {path}: {e}") from None
    for key in ("format_version", "kind", "meta", "params"):
        if key not in doc:
            raise CheckpointError(f"corrupt checkpoint {path}: missing {key}")
    if doc["format_version"] != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {doc['format_version']} "
            f"(expected {FORMAT_VERSION})"
        )
    kind = doc["kind"]
    if expect is not None and kind != expect:
        raise CheckpointError(f"expected a {expect} checkpoint, found {kind}")
    if kind not in _BUILDERS:
        raise CheckpointError(f"unknown checkpoint kind {kind}")
    model = _BUILDERS[kind](doc["meta"])
    _restore_params(doc["params"], model.named_params())
    known = {"n_antennas", "n_layers", "msg_width", "aggr_width", "hidden_width",
             "feature_scale", "n_users", "state_dim"}
    model.meta = {k: v for k, v in doc["meta"].items() if k not in known}
    return model
