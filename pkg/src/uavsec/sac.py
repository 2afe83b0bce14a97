"""Soft actor-critic UAV deployment on top of the frozen beamformer.

The agent moves the UAV in continuous 2D steps; the reward of a position is
the sum secrecy rate achieved by the trained graph beamformer there,
averaged over a few frozen fading draws. Double critics with soft-updated
targets and a learned entropy temperature follow the standard recipe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .channel import draw_channel_set, path_gain, sample_topology
from .gnn import TrainingDivergedError, gnn_forward
from .rng import fading_seeds, substream
from .secrecy import secrecy_report

LOG_2PI = float(np.log(2.0 * np.pi))
LOGSTD_MIN = -20.0
LOGSTD_MAX = 2.0


@dataclass
class SacConfig:
    learning_rate: float = 3e-4
    episodes: int = 200
    steps_per_episode: int = 50
    batch_size: int = 64
    buffer_capacity: int = 1_000_000
    discount: float = 0.99
    tau: float = 0.005
    target_entropy: float = -2.0
    init_alpha: float = 0.2
    step_scale: float = 10.0
    warmup_transitions: int = 1000
    fading_draws: int = 4
    hidden_width: int = 256
    momentum: float = 0.9
    grad_clip: float = 10.0
    resample_topology: bool = False


@dataclass
class DenseNet:
    """Plain fully-connected body with PReLU activations between layers."""

    weights: list
    biases: list
    slopes: list

    def params(self):
        return [*self.weights, *self.biases, *self.slopes]

    def forward(self, x):
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.add(ad.matmul(x, w), b)
            if i < last:
                x = ad.prelu(x, self.slopes[i])
        return x


def init_dense(dims, rng):
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(ad.param(ad.glorot_uniform(rng, fan_in, fan_out)))
        biases.append(ad.param(np.zeros(fan_out)))
    slopes = [ad.param(np.array(0.25)) for _ in range(len(dims) - 2)]
    return DenseNet(weights, biases, slopes)


@dataclass
class SacModel:
    actor: DenseNet
    critic1: DenseNet
    critic2: DenseNet
    target1: DenseNet
    target2: DenseNet
    log_alpha: ad.Tensor
    state_dim: int
    hidden_width: int
    meta: dict = field(default_factory=dict)

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha.data))

    def named_params(self):
        out = {"log_alpha": self.log_alpha}
        for net_name, net in [
            ("actor", self.actor),
            ("critic1", self.critic1),
            ("critic2", self.critic2),
            ("target1", self.target1),
            ("target2", self.target2),
        ]:
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                out[f"{net_name}.dense{i}.w"] = w
                out[f"{net_name}.dense{i}.b"] = b
            for i, s in enumerate(net.slopes):
                out[f"{net_name}.dense{i}.slope"] = s
        return out


def init_sac(state_dim, cfg, rng):
    h = cfg.hidden_width
    actor = init_dense([state_dim, h, h, 4], rng)
    critic1 = init_dense([state_dim + 2, h, h, 1], rng)
    critic2 = init_dense([state_dim + 2, h, h, 1], rng)
    model = SacModel(
        actor=actor,
        critic1=critic1,
        critic2=critic2,
        target1=init_dense([state_dim + 2, h, h, 1], rng),
        target2=init_dense([state_dim + 2, h, h, 1], rng),
        log_alpha=ad.param(np.array(np.log(cfg.init_alpha))),
        state_dim=state_dim,
        hidden_width=h,
    )
    soft_update(model, 1.0)  # hard-copy critics into the targets
    return model


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform minibatch sampling."""

    def __init__(self, capacity):
        self.capacity = int(capacity)
        self._storage = []
        self._next = 0

    def __len__(self):
        return len(self._storage)

    def push(self, state, action, reward, next_state):
        item = (
            np.asarray(state, float),
            np.asarray(action, float),
            float(reward),
            np.asarray(next_state, float),
        )
        if len(self._storage) < self.capacity:
            self._storage.append(item)
        else:
            self._storage[self._next] = item  # overwrite strictly oldest-first
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size, rng):
        idx = rng.choice(len(self._storage), size=batch_size, replace=False)
        states = np.stack([self._storage[i][0] for i in idx])
        actions = np.stack([self._storage[i][1] for i in idx])
        rewards = np.array([self._storage[i][2] for i in idx])
        next_states = np.stack([self._storage[i][3] for i in idx])
        return states, actions, rewards, next_states


def state_dim(n_users, n_antennas):
    return 2 + 4 * n_users * n_antennas


def encode_state(topology, channels, cfg):
    """Flatten position and channels: [x, y] / side, then for every user
    Re h | Im h, then the eavesdropper block, scaled by the nadir gain."""
    scale = 1.0 / np.sqrt(
        path_gain(cfg.altitude, cfg.pathloss_intercept_db, cfg.pathloss_slope_db)
    )
    pos = np.asarray(topology.uav_xy, float) / topology.area_side
    hu = channels.user_channels * scale
    he = channels.eve_channels * scale
    blocks = [pos]
    blocks.append(np.concatenate([hu.real, hu.imag], axis=-1).ravel())
    blocks.append(np.concatenate([he.real, he.imag], axis=-1).ravel())
    return np.concatenate(blocks)


def _clamp_range(x, lo, hi):
    x = ad.clamp_min(x, lo)
    return ad.scalar_mul(ad.clamp_min(ad.scalar_mul(x, -1.0), -hi), -1.0)


def _policy_heads(actor, states):
    out = actor.forward(states)
    mean = ad.slice_axis(out, -1, 0, 2)
    logstd = _clamp_range(ad.slice_axis(out, -1, 2, 4), LOGSTD_MIN, LOGSTD_MAX)
    return mean, logstd


def _rsample(actor, states, eps):
    """Reparameterized tanh-Gaussian actions with their log-probabilities."""
    mean, logstd = _policy_heads(actor, states)
    std = ad.exp(logstd)
    u = ad.add(mean, ad.mul(std, eps))
    action = ad.tanh(u)
    base = ad.sub(ad.scalar_mul(ad.square(ad.tensor(eps)), -0.5), logstd)
    logp = ad.add(ad.reduce_sum(base, axis=-1), -LOG_2PI)
    # tanh change of variables, clamped away from the |a| = 1 singularity
    corr = ad.reduce_sum(
        ad.log(ad.clamp_min(ad.sub(1.0, ad.square(action)), 1e-6)), axis=-1
    )
    return action, ad.sub(logp, corr)


def actor_sample(state, actor, rng, deterministic=False):
    """One action for environment interaction; log-prob via the same
    change-of-variables expression the updates use."""
    s = np.asarray(state, float)[None]
    with ad.no_grad():
        if deterministic:
            mean, _ = _policy_heads(actor, ad.tensor(s))
            return np.tanh(mean.data[0]), 0.0
        eps = rng.standard_normal((1, 2))
        action, logp = _rsample(actor, ad.tensor(s), eps)
    return action.data[0], float(logp.data[0])


def apply_action(topology, action, step_scale):
    """Scaled move, clipped to the service area."""
    new_xy = np.clip(
        np.asarray(topology.uav_xy, float) + step_scale * np.asarray(action, float),
        0.0,
        topology.area_side,
    )
    return topology.with_uav(new_xy)


def compute_reward(topology, cfg, gnn_model, seeds):
    """Sum secrecy rate of the frozen beamformer at the current position,
    averaged over the given fading seeds."""
    total = 0.0
    for s in seeds:
        rng = np.random.default_rng(s)
        channels = draw_channel_set(topology, cfg, rng)
        w = gnn_forward(channels, gnn_model, cfg.power_budget)
        total += secrecy_report(channels, w, cfg.noise_power).sum_secrecy
    return total / len(seeds)


def _critic_eval(net, states, actions):
    x = ad.concat([ad.tensor(states) if not isinstance(states, ad.Tensor) else states,
                   actions if isinstance(actions, ad.Tensor) else ad.tensor(actions)],
                  axis=-1)
    return net.forward(x)


def critic_targets(batch, model, discount, rng):
    """Bootstrapped targets y = r + eta * (min_i Qhat_i(s', a') - alpha log pi)."""
    states, actions, rewards, next_states = batch
    with ad.no_grad():
        eps = rng.standard_normal((next_states.shape[0], 2))
        a2, logp2 = _rsample(model.actor, ad.tensor(next_states), eps)
        q1 = _critic_eval(model.target1, next_states, a2).data[:, 0]
        q2 = _critic_eval(model.target2, next_states, a2).data[:, 0]
        soft_value = np.minimum(q1, q2) - model.alpha * logp2.data
    return rewards + discount * soft_value


def update_critics(batch, model, optimizers, discount, rng):
    """One MSE step per critic against shared targets."""
    states, actions, rewards, next_states = batch
    y = critic_targets(batch, model, discount, rng)
    losses = []
    for net, opt in zip((model.critic1, model.critic2), optimizers):
        opt.zero_grad()
        q = _critic_eval(net, states, actions)
        err = ad.sub(q, y[:, None])
        loss = ad.scalar_mul(ad.reduce_sum(ad.square(err)), 1.0 / len(y))
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite critic loss {value}")
        loss.backward()
        opt.step()
        losses.append(value)
    return tuple(losses)


def update_actor(batch, model, optimizer, rng):
    """Minimize E[alpha * log pi - min_i Q_i] with reparameterized actions."""
    states = batch[0]
    eps = rng.standard_normal((states.shape[0], 2))
    optimizer.zero_grad()
    actions, logp = _rsample(model.actor, ad.tensor(states), eps)
    q1 = _critic_eval(model.critic1, states, actions)
    q2 = _critic_eval(model.critic2, states, actions)
    qmin = ad.scalar_mul(
        ad.reduce_max_over_set([ad.scalar_mul(q1, -1.0), ad.scalar_mul(q2, -1.0)]),
        -1.0,
    )
    gap = ad.sub(ad.scalar_mul(logp, model.alpha), ad.reduce_sum(qmin, axis=-1))
    loss = ad.scalar_mul(ad.reduce_sum(gap), 1.0 / states.shape[0])
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDivergedError(f"non-finite actor loss {value}")
    loss.backward()
    optimizer.step()
    return value


def update_alpha(batch, model, lr, target_entropy, rng):
    """Temperature step in log-space on L(alpha) = E[-alpha (log pi + target)]."""
    states = batch[0]
    with ad.no_grad():
        eps = rng.standard_normal((states.shape[0], 2))
        _, logp = _rsample(model.actor, ad.tensor(states), eps)
    gap = float(np.mean(logp.data)) + target_entropy
    # d L / d log(alpha) = -alpha * E[log pi + target]
    model.log_alpha.data = model.log_alpha.data - lr * (-model.alpha * gap)
    return model.alpha


def soft_update(model, tau):
    """target <- tau * predicted + (1 - tau) * target, elementwise."""
    for target, live in (
        (model.target1, model.critic1),
        (model.target2, model.critic2),
    ):
        for t, p in zip(target.params(), live.params()):
            t.data = tau * p.data + (1.0 - tau) * t.data


def greedy_rollout(model, topology, scenario_cfg, sac_cfg, gnn_model, seeds):
    """Deterministic (mean-action) trajectory from the area center; returns
    [(step, x, y, reward)] including the starting position."""
    center = np.array([topology.area_side / 2.0, topology.area_side / 2.0])
    topo = topology.with_uav(center)
    rows = []
    reward = compute_reward(topo, scenario_cfg, gnn_model, seeds)
    rows.append((0, topo.uav_xy[0], topo.uav_xy[1], reward))
    channels = draw_channel_set(topo, scenario_cfg, np.random.default_rng(seeds[0]))
    for t in range(1, sac_cfg.steps_per_episode + 1):
        state = encode_state(topo, channels, scenario_cfg)
        action, _ = actor_sample(state, model.actor, None, deterministic=True)
        topo = apply_action(topo, action, sac_cfg.step_scale)
        reward = compute_reward(topo, scenario_cfg, gnn_model, seeds)
        channels = draw_channel_set(topo, scenario_cfg, np.random.default_rng(seeds[0]))
        rows.append((t, topo.uav_xy[0], topo.uav_xy[1], reward))
    return rows


def train_sac(scenario_cfg, sac_cfg, gnn_model, seed, topology=None):
    """Episode loop per the standard recipe: sample action, move, reward via
    the frozen beamformer, store, minibatch updates, soft target update.

    Returns the model, per-episode curve rows (episode, cumulative reward,
    final secrecy rate), and the greedy trajectory rows of the trained policy.
    """
    sdim = state_dim(scenario_cfg.n_users, scenario_cfg.n_antennas)
    model = init_sac(sdim, sac_cfg, substream(seed, "sac-init"))
    buffer = ReplayBuffer(sac_cfg.buffer_capacity)
    opt_c1 = ad.Sgd(
        model.critic1.params(), sac_cfg.learning_rate, sac_cfg.momentum,
        clip_norm=sac_cfg.grad_clip,
    )
    opt_c2 = ad.Sgd(
        model.critic2.params(), sac_cfg.learning_rate, sac_cfg.momentum,
        clip_norm=sac_cfg.grad_clip,
    )
    opt_actor = ad.Sgd(
        model.actor.params(), sac_cfg.learning_rate, sac_cfg.momentum,
        clip_norm=sac_cfg.grad_clip,
    )
    action_rng = substream(seed, "sac-actions")
    update_rng = substream(seed, "sac-updates")
    sample_rng = substream(seed, "sac-sample")
    if topology is None:
        topology = sample_topology(scenario_cfg, substream(seed, "sac-topo"))
    center = np.array([scenario_cfg.area_side / 2.0, scenario_cfg.area_side / 2.0])

    episode_rows = []
    for episode in range(sac_cfg.episodes):
        if sac_cfg.resample_topology:
            topology = sample_topology(scenario_cfg, substream(seed, "sac-topo", episode))
        seeds = fading_seeds(seed, "sac", episode, n=sac_cfg.fading_draws)
        topo = topology.with_uav(center)
        channels = draw_channel_set(topo, scenario_cfg, np.random.default_rng(seeds[0]))
        cumulative = 0.0
        reward = 0.0
        for _ in range(sac_cfg.steps_per_episode):
            state = encode_state(topo, channels, scenario_cfg)
            action, _ = actor_sample(state, model.actor, action_rng)
            topo = apply_action(topo, action, sac_cfg.step_scale)
            reward = compute_reward(topo, scenario_cfg, gnn_model, seeds)
            channels = draw_channel_set(
                topo, scenario_cfg, np.random.default_rng(seeds[0])
            )
            next_state = encode_state(topo, channels, scenario_cfg)
            buffer.push(state, action, reward, next_state)
            cumulative += reward
            if len(buffer) >= sac_cfg.warmup_transitions:
                batch = buffer.sample(sac_cfg.batch_size, sample_rng)
                update_critics(
                    batch, model, (opt_c1, opt_c2), sac_cfg.discount, update_rng
                )
                update_actor(batch, model, opt_actor, update_rng)
                update_alpha(
                    batch, model, sac_cfg.learning_rate, sac_cfg.target_entropy,
                    update_rng,
                )
                soft_update(model, sac_cfg.tau)
        episode_rows.append((episode, cumulative, reward))

    eval_seeds = fading_seeds(seed, "sac-eval", n=sac_cfg.fading_draws)
    trace_rows = greedy_rollout(
        model, topology, scenario_cfg, sac_cfg, gnn_model, eval_seeds
    )
    return model, episode_rows, trace_rows
