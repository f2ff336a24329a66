"""Seeded random streams.

Every stream is a Philox-4x64 counter-based generator keyed by a 64-bit seed
and a stream id, so one seed can feed several independent streams (UE
position, noise, shuffling) without any shared state. Gaussian variates come
from Box-Muller on the generator's 53-bit uniforms, which keeps the sequence
reproducible from the documented generator alone.
"""
import numpy as np

SEED_MASK = (1 << 64) - 1

STREAM_POSITION = 0
STREAM_NOISE = 1
STREAM_SHUFFLE = 2
STREAM_SPLIT = 3


def stream(seed, stream_id=0):
    """Generator for ``(seed, stream_id)``; both are reduced to 64 bits."""
    key = (int(seed) & SEED_MASK) | ((int(stream_id) & SEED_MASK) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform(gen, size=None):
    """Uniform doubles in [0, 1)."""
    return gen.random(size)


def standard_normal(gen, size):
    """Standard normal variates via Box-Muller, consuming pairs of uniforms."""
    count = int(np.prod(size))
    pairs = (count + 1) // 2
    u = gen.random((pairs, 2))
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u lies in (0, 1]
    phase = 2.0 * np.pi * u[:, 1]
    z = np.empty((pairs, 2))
    z[:, 0] = radius * np.cos(phase)
    z[:, 1] = radius * np.sin(phase)
    return z.reshape(-1)[:count].reshape(size)


def complex_normal(gen, size, variance=1.0):
    """Circularly-symmetric complex Gaussian with ``E|z|^2 = variance``."""
    size = (size,) if np.isscalar(size) else tuple(size)
    z = standard_normal(gen, size + (2,))
    return np.sqrt(variance / 2.0) * (z[..., 0] + 1j * z[..., 1])
