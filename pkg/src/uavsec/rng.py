"""Deterministic random-stream derivation from a single master seed."""

import zlib

import numpy as np


def _key_int(key):
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    k = int(key)
    if k < 0:
        raise ValueError("stream keys must be non-negative")
    return k


def substream(master_seed, *keys):
    """Independent generator for (master seed, key path)."""
    entropy = [_key_int(master_seed)] + [_key_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def fading_seeds(master_seed, *keys, n=4):
    """n frozen integer seeds for repeatable small-scale fading draws."""
    rng = substream(master_seed, "fading", *keys)
    return [int(s) for s in rng.integers(0, 2**63, size=n)]
