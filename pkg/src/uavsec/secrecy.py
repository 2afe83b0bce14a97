"""Secrecy-rate mathematics.

Complex-domain rate/report functions for evaluation, plus a real-domain
recast of the same quantities that is differentiable through the autodiff
engine: for each (receiver, stream) pair the 2-vector

    gamma = [Re(h^H) -Im(h^H); Im(h^H) Re(h^H)] [Re(w); Im(w)]

satisfies ||gamma||^2 = |h^H w|^2, so SINRs and rates can be computed on
real tensors only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

LOG2 = float(np.log(2.0))


class DegenerateInputError(ValueError):
    """All-zero embeddings or channels where a direction is required."""


@dataclass
class RateReport:
    """Per-user legitimate, wiretap, and clamped secrecy rates (bits/s/Hz)."""

    user_rates: np.ndarray
    eve_rates: np.ndarray
    secrecy_rates: np.ndarray
    sum_secrecy: float


def _pair_powers(h, w):
    """|h_k^H w_l|^2 for all pairs; h, w are (K, N) complex."""
    inner = np.conj(h) @ w.T  # [k, l] = h_k^H w_l
    return np.abs(inner) ** 2


def user_rate(k, channels, beamformer, noise_power):
    """log2(1 + SINR) of user k under the given beamformer."""
    p = _pair_powers(channels.user_channels, beamformer)
    signal = p[k, k]
    interference = p[k].sum() - signal
    return float(np.log2(1.0 + signal / (interference + noise_power)))


def eve_rate(k, channels, beamformer, noise_power):
    """Wiretap rate of the eavesdropper paired with user k."""
    p = _pair_powers(channels.eve_channels, beamformer)
    signal = p[k, k]
    interference = p[k].sum() - signal
    return float(np.log2(1.0 + signal / (interference + noise_power)))


def secrecy_report(channels, beamformer, noise_power):
    """All per-user rates and the clamped secrecy sum."""
    pu = _pair_powers(channels.user_channels, beamformer)
    pe = _pair_powers(channels.eve_channels, beamformer)
    sig_u = np.diag(pu)
    sig_e = np.diag(pe)
    int_u = pu.sum(axis=1) - sig_u
    int_e = pe.sum(axis=1) - sig_e
    ru = np.log2(1.0 + sig_u / (int_u + noise_power))
    re = np.log2(1.0 + sig_e / (int_e + noise_power))
    rsec = np.maximum(ru - re, 0.0)
    return RateReport(ru, re, rsec, float(rsec.sum()))


def gamma_recast(h, w):
    """Real 2-vector whose squared norm equals |h^H w|^2."""
    h = np.asarray(h)
    w = np.asarray(w)
    if h.shape != w.shape:
        raise ValueError("gamma_recast length mismatch")
    re_h, im_h = h.real, h.imag
    re_w, im_w = w.real, w.imag
    return np.array(
        [re_h @ re_w + im_h @ im_w, -im_h @ re_w + re_h @ im_w]
    )


def normalize_power(embeddings, p_max):
    """Scale K embedding vectors into a beamformer meeting the power budget
    with equality: w_k = sqrt(p_max) * e_k / sqrt(sum_l ||e_l||^2)."""
    e = np.asarray(embeddings, dtype=complex)
    total = float(np.sum(np.abs(e) ** 2))
    if total <= 0.0:
        raise DegenerateInputError("normalize_power: all embeddings are zero")
    return np.sqrt(p_max) * e / np.sqrt(total)


def embeddings_to_complex(emb_real):
    """(..., K, 2N) real block [Re | Im] -> (..., K, N) complex."""
    emb_real = np.asarray(emb_real)
    n = emb_real.shape[-1] // 2
    return emb_real[..., :n] + 1j * emb_real[..., n:]


def channel_real_parts(h):
    """Real matrices of a complex channel block h (..., K, N):
    rows [Re h | Im h] and [-Im h | Re h], each (..., K, 2N)."""
    a = np.concatenate([h.real, h.imag], axis=-1)
    b = np.concatenate([-h.imag, h.real], axis=-1)
    return a, b


def _rates_real(w_real, c1_t, c2_t, noise_power):
    """Per-user rate tensor (..., K) from a real beamformer tensor (..., K, 2N)
    and constant transposed channel parts (..., 2N, K)."""
    g1 = ad.matmul(w_real, c1_t)  # [..., l, k] = Re(h_k^H w_l)
    g2 = ad.matmul(w_real, c2_t)  # [..., l, k] = Im(h_k^H w_l)
    q = ad.add(ad.square(g1), ad.square(g2))  # |h_k^H w_l|^2
    k = q.shape[-1]
    signal = ad.reduce_sum(ad.mul(q, np.eye(k)), axis=-2)
    total = ad.reduce_sum(q, axis=-2)
    interference = ad.sub(total, signal)
    # log2(1 + S/(I + n)) = (log(S+I+n) - log(I+n)) / log 2
    rate = ad.sub(ad.log(ad.add(total, noise_power)), ad.log(ad.add(interference, noise_power)))
    return ad.scalar_mul(rate, 1.0 / LOG2)


def normalize_power_real(emb, p_max):
    """Autodiff version of normalize_power on a (..., K, 2N) real tensor."""
    total = ad.reduce_sum(ad.square(emb), axis=(-2, -1), keepdims=True)
    if np.any(total.data <= 0.0):
        raise DegenerateInputError("normalize_power: all embeddings are zero")
    inv_norm = ad.exp(ad.scalar_mul(ad.log(total), -0.5))
    return ad.mul(emb, ad.scalar_mul(inv_norm, np.sqrt(p_max)))


def secrecy_sum_real(hu, he, embeddings, noise_power, p_max):
    """Clamped secrecy sums from raw embeddings, fully in the real domain.

    hu/he are (.., K, N) complex channel blocks; `embeddings` is a matching
    (.., K, 2N) autodiff tensor. Returns a (..,)-shaped tensor of per-scenario
    sums; normalization to the power budget happens inside.
    """
    emb = embeddings if isinstance(embeddings, ad.Tensor) else ad.tensor(embeddings)
    u1, u2 = channel_real_parts(hu)
    e1, e2 = channel_real_parts(he)
    w = normalize_power_real(emb, p_max)
    rate_u = _rates_real(w, np.swapaxes(u1, -1, -2), np.swapaxes(u2, -1, -2), noise_power)
    rate_e = _rates_real(w, np.swapaxes(e1, -1, -2), np.swapaxes(e2, -1, -2), noise_power)
    sec = ad.clamp_min(ad.sub(rate_u, rate_e), 0.0)
    return ad.reduce_sum(sec, axis=-1)


def secrecy_loss_real(channels, embeddings, noise_power, p_max):
    """Negative clamped secrecy sum of one scenario, differentiable in the
    raw (K, 2N) embedding tensor."""
    total = secrecy_sum_real(
        channels.user_channels, channels.eve_channels, embeddings, noise_power, p_max
    )
    return ad.scalar_mul(total, -1.0)


def batch_secrecy_loss(channel_sets, embeddings, noise_power, p_max):
    """Mean over scenarios of the negative clamped secrecy sum; `embeddings`
    is a (B, K, 2N) autodiff tensor of raw network outputs."""
    hu = np.stack([cs.user_channels for cs in channel_sets])
    he = np.stack([cs.eve_channels for cs in channel_sets])
    sums = secrecy_sum_real(hu, he, embeddings, noise_power, p_max)
    return ad.scalar_mul(ad.reduce_sum(sums), -1.0 / len(channel_sets))
