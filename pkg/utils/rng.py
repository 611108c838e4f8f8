# utils/rng.py

import hashlib

import numpy as np


def _key_words(key):
    digest = hashlib.sha256(repr(tuple(str(part) for part in key)).encode('utf-8')).digest()
    return [int.from_bytes(digest[i:i + 4], 'little') for i in range(0, 16, 4)]


def make_rng(seed, *key):
    """Counter-based Philox stream for (seed, key).

    Distinct keys give independent streams, so each parameter group, shuffle
    or probe can draw without disturbing the others.
    """
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF] + _key_words(key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def glorot_uniform(rng, shape, fan_in, fan_out):
    """Uniform in +-sqrt(6 / (fan_in + fan_out))"""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def derive_seed(seed, *key):
    """Integer sub-seed for a nested run identified by key"""
    return int(make_rng(seed, 'derive', *key).integers(0, 2 ** 63 - 1))
