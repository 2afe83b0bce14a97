"""Experiment orchestration: run configuration, seeded evaluation sets,
result tables, and the figure-suite experiments (sweeps, CDF, deployment
comparison, timing)."""

from __future__ import annotations

import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .baselines import (
    grid_search_deployment,
    heuristic_positions,
    mlp_forward,
    mrt_beamformer,
)
from .channel import ScenarioConfig, draw_channel_set, sample_topology
from .gnn import GnnTrainConfig, gnn_forward
from .rng import fading_seeds, substream
from .sac import SacConfig, compute_reward
from .secrecy import secrecy_report


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    n_scenarios: int = 200
    grid_resolution: int = 25
    bench_repeats: int = 400
    power_factors: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    noise_factors: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    sweep_users: tuple = (4, 6, 8, 10, 12)
    deploy_topologies: int = 3


@dataclass
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    gnn: GnnTrainConfig = field(default_factory=GnnTrainConfig)
    mlp: GnnTrainConfig = field(default_factory=GnnTrainConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def to_dict(self):
        return asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# Full-scale settings from the reference simulation table; the desk-scale
# defaults above keep the whole suite fast enough for routine runs.
PRESETS = {
    "default": {},
    "full": {
        "gnn": {"epochs": 300, "batch_size": 512},
        "mlp": {"epochs": 300, "batch_size": 512},
        "sac": {"episodes": 500},
    },
}


def _build_section(cls, data, section):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key '{section}.{unknown[0]}'")
    try:
        return cls(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid section '{section}': {e}") from None


def config_from_dict(data):
    known = {"scenario", "gnn", "mlp", "sac", "eval", "seed"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    sections = {}
    for name, cls in [
        ("scenario", ScenarioConfig),
        ("gnn", GnnTrainConfig),
        ("mlp", GnnTrainConfig),
        ("sac", SacConfig),
        ("eval", EvalConfig),
    ]:
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"section '{name}' must be a mapping")
        if name == "eval":
            raw = {
                k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()
            }
        sections[name] = _build_section(cls, raw, name)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return RunConfig(seed=seed, **sections)


def load_config(spec):
    """Accept a preset name or a path to a JSON config file."""
    if spec in PRESETS:
        return config_from_dict(PRESETS[spec])
    try:
        with open(spec) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config not found: {spec}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return config_from_dict(data)


def write_csv(path, header, rows):
    """Rectangular CSV; floats carry 12 significant digits."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("ragged result table row")
            writer.writerow(
                [f"{v:.12g}" if isinstance(v, float) else v for v in row]
            )


def write_manifest(path, cfg, seed, command):
    lines = [
        f"command: {command}",
        f"seed: {seed}",
        f"uavsec_version: {__version__}",
        f"python_version: {sys.version.split()[0]}",
        f"numpy_version: {np.__version__}",
        f"config_hash: {cfg.config_hash()}",
        "config: " + json.dumps(cfg.to_dict(), sort_keys=True),
    ]
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def heldout_scenarios(cfg, n_scenarios, label="heldout"):
    """Frozen evaluation set: random topology, random UAV spot, fresh fading."""
    out = []
    for i in range(n_scenarios):
        rng = substream(cfg.seed, label, i)
        topo = sample_topology(cfg.scenario, rng)
        topo = topo.with_uav(rng.uniform(0.0, cfg.scenario.area_side, size=2))
        out.append(draw_channel_set(topo, cfg.scenario, rng))
    return out


def _scheme_forward(scheme, gnn_model, mlp_model):
    if scheme == "gnn":
        return lambda ch, p: gnn_forward(ch, gnn_model, p)
    if scheme == "mlp":
        return lambda ch, p: mlp_forward(ch, mlp_model, p)
    if scheme == "mrt":
        return lambda ch, p: mrt_beamformer(ch, p)
    raise ValueError(f"unknown scheme {scheme}")


def mean_sum_secrecy(channel_sets, forward, p_max, noise_power):
    vals = [
        secrecy_report(ch, forward(ch, p_max), noise_power).sum_secrecy
        for ch in channel_sets
    ]
    return float(np.mean(vals)), float(np.std(vals))


def run_eval(cfg, gnn_model, mlp_model=None):
    """Held-out mean sum secrecy per scheme at the configured scenario."""
    sets = heldout_scenarios(cfg, cfg.eval.n_scenarios)
    rows = []
    schemes = ["gnn", "mrt"] + (["mlp"] if mlp_model is not None else [])
    for scheme in schemes:
        fwd = _scheme_forward(scheme, gnn_model, mlp_model)
        mean, std = mean_sum_secrecy(
            sets, fwd, cfg.scenario.power_budget, cfg.scenario.noise_power
        )
        rows.append([scheme, cfg.scenario.n_users, mean, std, len(sets)])
    return ["scheme", "n_users", "mean_sum_secrecy", "std_sum_secrecy", "scenarios"], rows


def run_sweep(kind, cfg, gnn_model, mlp_model=None):
    """Mean sum secrecy versus users / power budget / noise power.

    The MLP is tied to its trained user count: other sweep points are
    recorded as needing a retrain instead of being evaluated.
    """
    rows = []
    header = ["scheme", "sweep", "value", "mean_sum_secrecy", "std_sum_secrecy",
              "evaluated"]
    if kind == "users":
        points = [("users", float(k)) for k in cfg.eval.sweep_users]
    elif kind == "power":
        points = [("power", cfg.scenario.power_budget * f) for f in cfg.eval.power_factors]
    elif kind == "noise":
        points = [("noise", cfg.scenario.noise_power * f) for f in cfg.eval.noise_factors]
    else:
        raise ValueError(f"unknown sweep kind {kind}")
    for sweep_name, value in points:
        sweep_cfg = cfg
        p_max = cfg.scenario.power_budget
        noise = cfg.scenario.noise_power
        if sweep_name == "users":
            sweep_cfg = replace(cfg, scenario=replace(cfg.scenario, n_users=int(value)))
        elif sweep_name == "power":
            p_max = value
        else:
            noise = value
        sets = heldout_scenarios(sweep_cfg, cfg.eval.n_scenarios, label=f"sweep-{sweep_name}")
        for scheme in ["gnn", "mlp", "mrt"]:
            if scheme == "mlp" and mlp_model is None:
                continue
            if (
                scheme == "mlp"
                and sweep_cfg.scenario.n_users != mlp_model.n_users
            ):
                rows.append([scheme, sweep_name, value, float("nan"), float("nan"), 0])
                continue
            fwd = _scheme_forward(scheme, gnn_model, mlp_model)
            mean, std = mean_sum_secrecy(sets, fwd, p_max, noise)
            rows.append([scheme, sweep_name, value, mean, std, 1])
    return header, rows


def run_cdf(cfg, gnn_model, mlp_model=None):
    """Sorted per-user secrecy rates with empirical CDF values, at the
    trained user count and at the generalization count 12."""
    header = ["scheme", "n_users", "rate", "cdf"]
    rows = []
    for k in [cfg.scenario.n_users, 12]:
        k_cfg = replace(cfg, scenario=replace(cfg.scenario, n_users=k))
        sets = heldout_scenarios(k_cfg, cfg.eval.n_scenarios, label=f"cdf-{k}")
        for scheme in ["gnn", "mlp", "mrt"]:
            if scheme == "mlp" and (mlp_model is None or mlp_model.n_users != k):
                continue
            fwd = _scheme_forward(scheme, gnn_model, mlp_model)
            samples = []
            for ch in sets:
                rep = secrecy_report(
                    ch,
                    fwd(ch, cfg.scenario.power_budget),
                    cfg.scenario.noise_power,
                )
                samples.extend(rep.secrecy_rates.tolist())
            samples.sort()
            n = len(samples)
            for i, r in enumerate(samples):
                rows.append([scheme, k, r, (i + 1) / n])
    return header, rows


def deploy_eval_seeds(cfg, topo_index):
    return fading_seeds(
        cfg.seed, "deploy", topo_index, n=cfg.sac.fading_draws
    )


def run_deploy_compare(cfg, gnn_model, sac_positions, topologies):
    """Reward at the learned position versus the grid oracle and the four
    heuristic placements, on fixed topologies with frozen fading."""
    header = ["topology", "strategy", "x", "y", "reward"]
    rows = []
    for i, topo in enumerate(topologies):
        seeds = deploy_eval_seeds(cfg, i)
        entries = []
        sac_xy = np.asarray(sac_positions[i], float)
        entries.append(("sac", sac_xy))
        oracle_xy, oracle_reward = grid_search_deployment(
            topo, cfg.scenario, gnn_model, cfg.eval.grid_resolution, seeds
        )
        entries.append(("grid_oracle", oracle_xy))
        for name, xy in heuristic_positions(topo).items():
            entries.append((name, xy))
        for name, xy in entries:
            if name == "grid_oracle":
                reward = oracle_reward
            else:
                reward = compute_reward(
                    topo.with_uav(xy), cfg.scenario, gnn_model, seeds
                )
            rows.append([i, name, float(xy[0]), float(xy[1]), reward])
    return header, rows


def bench_inference(cfg, gnn_model, mlp_model=None, k_list=(8, 12), repeats=None):
    """Wall-clock totals over repeated forward passes, plus the grid oracle
    as the optimization-cost reference point."""
    repeats = repeats or cfg.eval.bench_repeats
    header = ["scheme", "n_users", "repeats", "total_seconds", "seconds_per_run"]
    rows = []
    for k in k_list:
        k_cfg = replace(cfg, scenario=replace(cfg.scenario, n_users=int(k)))
        sets = heldout_scenarios(k_cfg, min(repeats, 32), label=f"bench-{k}")
        for scheme in ["gnn", "mlp", "mrt"]:
            if scheme == "mlp" and (mlp_model is None or mlp_model.n_users != k):
                continue
            fwd = _scheme_forward(scheme, gnn_model, mlp_model)
            start = time.perf_counter()
            for i in range(repeats):
                fwd(sets[i % len(sets)], cfg.scenario.power_budget)
            total = time.perf_counter() - start
            rows.append([scheme, k, repeats, total, total / repeats])
    # oracle timing at the default user count
    topo = sample_topology(cfg.scenario, substream(cfg.seed, "bench-topo"))
    seeds = fading_seeds(cfg.seed, "bench", n=cfg.sac.fading_draws)
    start = time.perf_counter()
    grid_search_deployment(
        topo, cfg.scenario, gnn_model, cfg.eval.grid_resolution, seeds
    )
    total = time.perf_counter() - start
    rows.append(["grid_oracle", cfg.scenario.n_users, 1, total, total])
    return header, rows


def smoothed(values, window):
    """Trailing moving average with a partial first window."""
    out = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(float(np.mean(values[lo : i + 1])))
    return out
