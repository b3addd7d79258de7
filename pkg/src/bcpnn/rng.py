"""Counter-based random streams.

Every random draw that the simulation makes for a unit is a pure function of
``(seed, stream tag, unit index, step index)``.  No generator state is carried
between steps, so units can be evaluated in any order (or in parallel) and a
checkpoint only needs the step counter to resume a stream.

The mixing function is SplitMix64's finalizer applied twice per draw.
"""

from __future__ import annotations

import hashlib

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)

# stream tags
INPUT_SPIKES = 1
HIDDEN_SPIKES = 2


@nb.njit(cache=True, inline="always")
def _mix64(x):
    x = x ^ (x >> np.uint64(30))
    x = x * np.uint64(0xBF58476D1CE4E5B9)
    x = x ^ (x >> np.uint64(27))
    x = x * np.uint64(0x94D049BB133111EB)
    x = x ^ (x >> np.uint64(31))
    return x


@nb.njit(cache=True, inline="always")
def counter_uniform(key, step):
    """Uniform double in [0, 1) for one (unit key, step) pair."""
    h = _mix64(_mix64(key + np.uint64(step) * np.uint64(0x9E3779B97F4A7C15)))
    return np.float64(h >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True)
def _derive_keys(seed, tag, n):
    base = _mix64(_mix64(np.uint64(seed)) ^ (np.uint64(tag) * np.uint64(0xD1B54A32D192ED03)))
    out = np.empty(n, dtype=np.uint64)
    for u in range(n):
        out[u] = _mix64(base + np.uint64(u) * np.uint64(0x9E3779B97F4A7C15))
    return out


@nb.njit(cache=True)
def _uniforms(keys, step, out):
    for u in range(keys.shape[0]):
        out[u] = counter_uniform(keys[u], step)


class CounterStream:
    """Per-unit substreams of one layer.

    ``stream.uniforms(t)`` returns one uniform per unit for step ``t``; calling
    it twice with the same ``t`` returns the same numbers.
    """

    def __init__(self, seed: int, tag: int, n_units: int):
        self.seed = int(seed)
        self.tag = int(tag)
        self.keys = _derive_keys(np.uint64(self.seed % 2**64), np.uint64(tag), n_units)

    def __len__(self):
        return self.keys.shape[0]

    def uniforms(self, step: int) -> np.ndarray:
        out = np.empty(self.keys.shape[0])
        _uniforms(self.keys, np.uint64(step), out)
        return out


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts.

    Used for sweep cells, so ``derive_seed(master, tau_z, f_max)`` does not
    depend on which other cells exist in the grid.
    """
    text = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def generator(seed: int, *spawn_key: int) -> np.random.Generator:
    """numpy Generator for bulk, non-per-step randomness (wiring, shuffles)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key)))
