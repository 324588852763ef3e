"""Counter-based random bits for reproducible bond configurations.

Every edge state is a pure function of ``(seed, sample_index, edge_index)``::

    k0  = mix(seed ^ SEED_SALT)
    ks  = mix(k0 + (sample_index + 1) * GOLDEN)      # stream key
    x   = mix(ks + (edge_index + 1) * GOLDEN)
    u   = (x >> 11) * 2**-53                          # uniform in [0, 1)
    open  <=>  u < p

where ``mix`` is the splitmix64 finalizer and all arithmetic wraps modulo
2**64.  Nothing depends on call order, batch size or thread count, so any
sharding of sample indices reproduces the same configurations.

The scheme is frozen as ``RNG_VERSION``; changing any constant must bump it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RNG_VERSION = "splitmix64-counter/1"

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
SEED_SALT = np.uint64(0x6A09E667F3BCC909)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def stream_key(seed, sample_index):
    k0 = mix64(np.uint64(seed) ^ SEED_SALT)
    return mix64(k0 + (np.uint64(sample_index) + _ONE) * GOLDEN)


@njit(cache=True, inline="always")
def edge_uniform(key, edge_index):
    x = mix64(key + (np.uint64(edge_index) + _ONE) * GOLDEN)
    return np.float64(x >> _S11) * _INV53


def seed_to_uint64(seed: int) -> int:
    """Reduce an arbitrary Python integer seed to 64 bits."""
    return int(seed) & 0xFFFFFFFFFFFFFFFF


def reference_uniforms(seed: int, sample_index: int, n_edges: int) -> np.ndarray:
    """Pure-numpy evaluation of the stream, used to pin the compiled path."""
    with np.errstate(over="ignore"):
        def mix(z):
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
            return z ^ (z >> np.uint64(31))

        s = np.array([seed_to_uint64(seed)], dtype=np.uint64)
        k0 = mix(s ^ SEED_SALT)
        ks = mix(k0 + np.array([sample_index + 1], dtype=np.uint64) * GOLDEN)
        j = np.arange(1, n_edges + 1, dtype=np.uint64)
        x = mix(ks + j * GOLDEN)
    return (x >> np.uint64(11)).astype(np.float64) * _INV53


def derive_seed(seed: int, *labels) -> int:
    """Deterministic child seed for an independent sub-experiment.

    Labels may be ints or strings; the result depends only on their values.
    """
    import hashlib

    h = hashlib.sha256(str(seed_to_uint64(seed)).encode())
    for lab in labels:
        h.update(b"\x00" + str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")
