"""Spherical-wave uplink channel and noisy multi-snapshot observations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DegenerateGeometryError, DomainError
from .geometry import ElementLayout, PolarPoint

# relative to the larger of the two ranges
_COINCIDENCE_TOL = 1e-9


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float
    sigma2: float
    seed: int


@dataclass(frozen=True)
class SnapshotSet:
    """``samples[k]`` is the received vector at time step ``k`` (shape ``K x N``)."""

    samples: np.ndarray
    pilot: np.ndarray
    noise: NoiseSpec
    truth: PolarPoint | None = None

    @property
    def snapshots(self):
        return self.samples.shape[0]

    @property
    def num_elements(self):
        return self.samples.shape[1]


def ue_element_distances(layout: ElementLayout, ue: PolarPoint) -> np.ndarray:
    """Distances from the UE to every element, by the law of cosines."""
    r_s, r_n = ue.range, layout.ranges
    d2 = r_s**2 + r_n**2 - 2 * r_s * r_n * np.cos(ue.angle - layout.angles)
    d = np.sqrt(np.maximum(d2, 0.0))
    scale = np.maximum(r_s, r_n)
    bad = d <= _COINCIDENCE_TOL * scale
    if np.any(bad):
        n = int(np.flatnonzero(bad)[0]) + 1
        raise DegenerateGeometryError(f"UE at {ue} coincides with element {n}")
    return d


def ue_element_distance(layout: ElementLayout, ue: PolarPoint, n: int) -> float:
    """Distance from the UE to element ``n`` (1-based)."""
    el = layout.element(n)
    d2 = ue.range**2 + el.range**2 - 2 * ue.range * el.range * math.cos(ue.angle - el.angle)
    d = math.sqrt(max(d2, 0.0))
    if d <= _COINCIDENCE_TOL * max(ue.range, el.range):
        raise DegenerateGeometryError(f"UE at {ue} coincides with element {n}")
    return d


def spherical_channel(layout: ElementLayout, ue: PolarPoint, wavelength: float) -> np.ndarray:
    """Channel vector with entries ``exp(-j 2 pi d_n / lambda) / d_n``."""
    d = ue_element_distances(layout, ue)
    return np.exp(-2j * np.pi * d / wavelength) / d


def noise_power_for_snr(h, pilot_power=1.0, snr_db=0.0):
    """Noise variance giving ``snr_db`` against the array-averaged signal power.

    ``snr_db = inf`` yields a noiseless setup (variance 0).
    """
    h = np.asarray(h)
    signal = pilot_power * float(np.mean(np.abs(h) ** 2))
    if not signal > 0:
        raise DomainError("channel (or pilot) has zero power; SNR is undefined")
    return signal / 10.0 ** (snr_db / 10.0)


def synthesize_snapshots(h, K, snr_db, seed, truth=None, pilot_power=1.0) -> SnapshotSet:
    """Draw ``K`` snapshots ``y_k = h s_k + n_k`` with a constant unit-modulus pilot.

    Noise is CN(0, sigma2) per entry from the noise stream of ``seed``.
    """
    h = np.asarray(h, dtype=np.complex128)
    if K < 1:
        raise DomainError(f"need at least one snapshot, got K={K}")
    sigma2 = noise_power_for_snr(h, pilot_power, snr_db)
    pilot = np.full(K, math.sqrt(pilot_power), dtype=np.complex128)
    samples = pilot[:, None] * h[None, :]
    if sigma2 > 0:
        gen = rng.stream(seed, rng.STREAM_NOISE)
        samples = samples + rng.complex_normal(gen, (K, h.shape[0]), sigma2)
    return SnapshotSet(samples, pilot, NoiseSpec(snr_db, sigma2, int(seed)), truth)
