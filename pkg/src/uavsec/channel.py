"""Scenario geometry and stochastic air-to-ground channel generation.

A scenario is a square service area with K single-antenna users, each
paired with an eavesdropper a fixed distance away, and an N-antenna UAV
at constant altitude. Channels follow Rician fading around a line-of-sight
steering vector, with log-distance path loss.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical scenario parameters (defaults: the standard simulation setup)."""

    area_side: float = 200.0
    n_users: int = 8
    n_antennas: int = 8
    altitude: float = 100.0
    rician_factor_db: float = 10.0
    pathloss_intercept_db: float = 30.0
    pathloss_slope_db: float = 22.0
    eve_distance: float = 20.0
    power_budget: float = 1.0
    noise_power: float = 1.2e-13
    seed: int = 0

    def __post_init__(self):
        if self.area_side <= 0 or self.altitude <= 0:
            raise ValueError("area_side and altitude must be positive")
        if self.n_users < 1 or self.n_antennas < 1:
            raise ValueError("n_users and n_antennas must be >= 1")
        if self.power_budget <= 0 or self.noise_power <= 0:
            raise ValueError("power_budget and noise_power must be positive")
        if not 0 < self.eve_distance < self.area_side:
            raise ValueError("eve_distance must lie in (0, area_side)")


@dataclass
class Topology:
    """Large-scale geometry: UAV position, users, and paired eavesdroppers."""

    area_side: float
    uav_xy: np.ndarray
    altitude: float
    users: np.ndarray  # (K, 2)
    eves: np.ndarray  # (K, 2), index-paired with users

    @property
    def n_users(self):
        return self.users.shape[0]

    def with_uav(self, uav_xy):
        return replace(self, uav_xy=np.asarray(uav_xy, dtype=float))


@dataclass
class ChannelSet:
    """Complex channel vectors for every UAV-to-node link of one fading draw."""

    user_channels: np.ndarray  # (K, N) complex
    eve_channels: np.ndarray  # (K, N) complex
    uav_xy: np.ndarray

    @property
    def n_users(self):
        return self.user_channels.shape[0]

    @property
    def n_antennas(self):
        return self.user_channels.shape[1]


def sample_topology(cfg, rng):
    """Users uniform over the area; eavesdroppers at the paired distance,
    uniform angle, redrawn until inside the area; UAV at the area center."""
    side = cfg.area_side
    users = rng.uniform(0.0, side, size=(cfg.n_users, 2))
    eves = np.empty_like(users)
    for k in range(cfg.n_users):
        while True:
            ang = rng.uniform(0.0, 2.0 * np.pi)
            cand = users[k] + cfg.eve_distance * np.array([np.cos(ang), np.sin(ang)])
            if 0.0 <= cand[0] <= side and 0.0 <= cand[1] <= side:
                eves[k] = cand
                break
    center = np.array([side / 2.0, side / 2.0])
    return Topology(side, center, cfg.altitude, users, eves)


def distance_3d(uav_xy, altitude, ground_xy):
    """Euclidean UAV-to-ground distance including altitude."""
    uav_xy = np.asarray(uav_xy, dtype=float)
    ground_xy = np.asarray(ground_xy, dtype=float)
    dxy = ground_xy - uav_xy
    return float(np.sqrt(np.sum(dxy * dxy) + altitude * altitude))


def path_gain(d, intercept_db=30.0, slope_db=22.0):
    """Linear power gain of the log-distance path-loss law
    loss_dB = intercept + slope * log10(d)."""
    if d <= 0:
        raise ValueError("path_gain requires d > 0")
    loss_db = intercept_db + slope_db * np.log10(d)
    return float(10.0 ** (-loss_db / 10.0))


def steering_vector(n_antennas, cos_axis):
    """Unit-modulus response of a half-wavelength uniform linear array for a
    ray whose direction cosine along the array axis is `cos_axis`."""
    n = np.arange(n_antennas)
    return np.exp(1j * np.pi * n * cos_axis)


def draw_channel(uav_xy, altitude, ground_xy, cfg, rng):
    """One Rician fading draw for a single UAV-to-node link."""
    d = distance_3d(uav_xy, altitude, ground_xy)
    g = path_gain(d, cfg.pathloss_intercept_db, cfg.pathloss_slope_db)
    kappa = 10.0 ** (cfg.rician_factor_db / 10.0)
    # array lies along x; direction cosine of the UAV->node ray
    cos_axis = (float(ground_xy[0]) - float(uav_xy[0])) / d
    los = steering_vector(cfg.n_antennas, cos_axis)
    scatter = (
        rng.standard_normal(cfg.n_antennas) + 1j * rng.standard_normal(cfg.n_antennas)
    ) / np.sqrt(2.0)
    h = np.sqrt(kappa / (1.0 + kappa)) * los + np.sqrt(1.0 / (1.0 + kappa)) * scatter
    return np.sqrt(g) * h


def draw_channel_set(topology, cfg, rng):
    """Independent small-scale draws for all 2K links at the current UAV spot."""
    k = topology.n_users
    hu = np.empty((k, cfg.n_antennas), dtype=complex)
    he = np.empty((k, cfg.n_antennas), dtype=complex)
    for i in range(k):
        hu[i] = draw_channel(topology.uav_xy, topology.altitude, topology.users[i], cfg, rng)
    for i in range(k):
        he[i] = draw_channel(topology.uav_xy, topology.altitude, topology.eves[i], cfg, rng)
    return ChannelSet(hu, he, np.array(topology.uav_xy, dtype=float))
