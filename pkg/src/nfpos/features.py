"""Network inputs built from snapshot sets, and label scaling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SnapshotSet
from .errors import DataIntegrityError, DegenerateNormalizationError, DomainError
from .geometry import PolarPoint

SCALE_FLOOR = 1e-30
HERMITIAN_TOL = 1e-9


@dataclass(frozen=True)
class CovarianceFeature:
    """Real/imaginary planes ``[2, N, N]`` of a covariance divided by ``scale``."""

    planes: np.ndarray
    scale: float

    def to_complex(self):
        return self.scale * (self.planes[0] + 1j * self.planes[1])


@dataclass(frozen=True)
class CsiFeature:
    """Real/imaginary planes ``[2, K, N]`` of a snapshot matrix divided by ``scale``."""

    planes: np.ndarray
    scale: float

    def to_complex(self):
        return self.scale * (self.planes[0] + 1j * self.planes[1])


def _samples(S):
    return S.samples if isinstance(S, SnapshotSet) else np.asarray(S)


def sample_covariance(S) -> np.ndarray:
    """``(1/K) sum_k y_k y_k^H`` for the rows ``y_k`` of a snapshot matrix.

    The upper triangle is mirrored onto the lower one and the diagonal made
    real, so the result is Hermitian bit-for-bit.
    """
    Y = _samples(S)
    if Y.ndim != 2 or Y.shape[0] < 1:
        raise DomainError(f"expected a non-empty K x N snapshot matrix, got shape {Y.shape}")
    K = Y.shape[0]
    R = (Y.T @ Y.conj()) / K
    upper = np.triu(R, 1)
    return upper + upper.conj().T + np.diag(R.diagonal().real).astype(R.dtype)


def covariance_to_feature(Rc) -> CovarianceFeature:
    Rc = np.asarray(Rc)
    if Rc.ndim != 2 or Rc.shape[0] != Rc.shape[1]:
        raise DataIntegrityError(f"covariance must be square, got shape {Rc.shape}")
    re, im = Rc.real, Rc.imag
    scale = max(float(np.max(np.abs(re))), float(np.max(np.abs(im))), SCALE_FLOOR)
    asym = float(np.max(np.abs(Rc - Rc.conj().T)))
    if asym > HERMITIAN_TOL * max(scale, 1.0):
        raise DataIntegrityError(f"covariance is not Hermitian (max asymmetry {asym:.3e})")
    return CovarianceFeature(np.stack([re, im]) / scale, scale)


def csi_to_feature(S) -> CsiFeature:
    Y = _samples(S)
    scale = max(float(np.max(np.abs(Y.real))), float(np.max(np.abs(Y.imag))))
    if scale == 0.0:
        raise DegenerateNormalizationError("snapshot matrix is all zeros")
    return CsiFeature(np.stack([Y.real, Y.imag]) / scale, scale)


@dataclass(frozen=True)
class LabelCodec:
    """Affine map between physical ``(range, angle)`` labels and ``[0, 1]^2``.

    Label vectors are ordered ``[range, angle]`` to match the regression head.
    """

    r_min: float
    r_max: float
    eta_min: float
    eta_max: float

    def __post_init__(self):
        if not self.r_min < self.r_max or not self.eta_min < self.eta_max:
            raise DomainError(f"empty label box {self}")

    @property
    def low(self):
        return np.array([self.r_min, self.eta_min])

    @property
    def span(self):
        return np.array([self.r_max - self.r_min, self.eta_max - self.eta_min])

    def encode(self, labels, check=True):
        """Normalize an ``(n, 2)`` (or ``(2,)``) array of ``[range, angle]`` rows."""
        labels = np.asarray(labels, dtype=np.float64)
        u = (labels - self.low) / self.span
        if check and (np.any(u < -1e-12) or np.any(u > 1 + 1e-12)):
            raise DomainError("label outside the codec bounds")
        return u

    def decode(self, u):
        return self.low + np.asarray(u, dtype=np.float64) * self.span


def encode_label(codec: LabelCodec, p: PolarPoint):
    return tuple(codec.encode([p.range, p.angle]))


def decode_label(codec: LabelCodec, pair) -> PolarPoint:
    r, eta = codec.decode(pair)
    return PolarPoint(float(eta), float(r))
