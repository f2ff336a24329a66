"""Array geometries and near-field analysis formulas.

The circular array used throughout is a 60 degree sector: ``N`` elements
spread uniformly over the arc from 30 to 90 degrees on a circle of radius
``R``. Element and UE positions are kept in polar form (angle in radians,
range in meters) with the array center at the origin.

The linear array is analysis-only. It is used to contrast the nearly linear
angle-range coupling of a ULA with the circular case, through the Fresnel
region bounds and the second-order expansion of the path difference.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299_792_458.0

ARC_START = math.pi / 6
ARC_SPAN = math.pi / 3

# Fresnel lower bound 0.62*sqrt(D^3/lambda) with D = N*Delta/2 and
# Delta = lambda/2 rearranges to (N*Delta/r)^2 <= 1/(0.62^2/16) / N.
NEAR_FIELD_RATIO_CONSTANT = 1.0 / (0.62**2 / 16.0)  # 41.623...


class ArrayKind(str, enum.Enum):
    UCA = "UCA"
    ULA = "ULA"


def wavelength_from_frequency(frequency):
    """Free-space wavelength in meters for a carrier ``frequency`` in Hz."""
    if frequency <= 0:
        raise DomainError(f"carrier frequency must be positive, got {frequency}")
    return SPEED_OF_LIGHT / frequency


@dataclass(frozen=True)
class ArrayConfig:
    """Array description.

    Exactly one of ``radius`` (UCA) and ``spacing`` (ULA) is set.
    """

    kind: ArrayKind
    num_elements: int
    wavelength: float
    radius: float | None = None
    spacing: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ArrayKind(self.kind))
        if int(self.num_elements) != self.num_elements or self.num_elements < 2:
            raise ConfigError(f"num_elements must be an integer >= 2, got {self.num_elements}")
        if not self.wavelength > 0:
            raise ConfigError(f"wavelength must be positive, got {self.wavelength}")
        if (self.radius is None) == (self.spacing is None):
            raise ConfigError("exactly one of radius and spacing must be set")
        if self.kind is ArrayKind.UCA:
            if self.radius is None or not self.radius > 0:
                raise ConfigError(f"UCA needs a positive radius, got {self.radius}")
        else:
            if self.spacing is None or not self.spacing > 0:
                raise ConfigError(f"ULA needs a positive spacing, got {self.spacing}")

    @classmethod
    def uca(cls, num_elements=64, radius=1.0, frequency=3.5e9, wavelength=None):
        if wavelength is None:
            wavelength = wavelength_from_frequency(frequency)
        return cls(ArrayKind.UCA, num_elements, wavelength, radius=radius)

    @classmethod
    def ula(cls, num_elements, spacing=None, frequency=3.5e9, wavelength=None):
        """Linear array; ``spacing`` defaults to half a wavelength."""
        if wavelength is None:
            wavelength = wavelength_from_frequency(frequency)
        if spacing is None:
            spacing = wavelength / 2
        return cls(ArrayKind.ULA, num_elements, wavelength, spacing=spacing)

    @property
    def frequency(self):
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def aperture(self):
        """Default aperture for Fresnel checks.

        Chord of the 60 degree arc (``2R sin(pi/6) = R``) for the UCA and
        ``N * spacing / 2`` for the ULA.
        """
        if self.kind is ArrayKind.UCA:
            return 2 * self.radius * math.sin(ARC_SPAN / 2)
        return self.num_elements * self.spacing / 2


@dataclass(frozen=True)
class PolarPoint:
    """Position in the array plane; ``angle`` in radians, ``range`` in meters."""

    angle: float
    range: float

    def __post_init__(self):
        if not self.range > 0:
            raise DomainError(f"range must be positive, got {self.range}")

    def to_cartesian(self):
        return self.range * math.cos(self.angle), self.range * math.sin(self.angle)


@dataclass(frozen=True)
class ElementLayout:
    """Element positions as parallel ``angles``/``ranges`` arrays (index 0 is n=1)."""

    angles: np.ndarray
    ranges: np.ndarray

    def __len__(self):
        return len(self.angles)

    def __getitem__(self, i):
        return PolarPoint(float(self.angles[i]), float(self.ranges[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def element(self, n):
        """Element ``n`` using 1-based indexing."""
        if not 1 <= n <= len(self):
            raise DomainError(f"element index {n} outside 1..{len(self)}")
        return self[n - 1]


@dataclass(frozen=True)
class FresnelBounds:
    lower: float
    upper: float
    aperture: float

    def contains(self, r):
        return self.lower <= r <= self.upper


def uca_element_coordinate(cfg: ArrayConfig, n: int) -> PolarPoint:
    """Polar coordinate of element ``n`` (1-based) of a sectored UCA."""
    if cfg.kind is not ArrayKind.UCA:
        raise ConfigError(f"expected a UCA config, got {cfg.kind.value}")
    N = cfg.num_elements
    if int(n) != n or not 1 <= n <= N:
        raise DomainError(f"element index {n} outside 1..{N}")
    return PolarPoint(ARC_START + (n - 1) * math.pi / (3 * (N - 1)), cfg.radius)


def uca_angles(num_elements):
    n = np.arange(1, num_elements + 1, dtype=np.float64)
    return ARC_START + (n - 1) * np.pi / (3 * (num_elements - 1))


def build_layout(cfg: ArrayConfig) -> ElementLayout:
    N = cfg.num_elements
    if cfg.kind is ArrayKind.UCA:
        return ElementLayout(uca_angles(N), np.full(N, float(cfg.radius)))
    # ULA along the zero-angle axis, element n at n*spacing from the origin
    return ElementLayout(np.zeros(N), cfg.spacing * np.arange(1, N + 1, dtype=np.float64))


def fresnel_bounds(aperture, wavelength) -> FresnelBounds:
    """Radiating near-field region ``0.62 sqrt(D^3/lambda) <= r <= D^2/lambda``."""
    if not aperture > 0 or not wavelength > 0:
        raise DomainError(
            f"aperture and wavelength must be positive, got D={aperture}, lambda={wavelength}"
        )
    return FresnelBounds(
        lower=0.62 * math.sqrt(aperture**3 / wavelength),
        upper=aperture**2 / wavelength,
        aperture=aperture,
    )


def ula_path_difference_exact(r_s, eta_s, n, spacing):
    """Exact extra path from element ``n`` relative to the origin element.

    Works elementwise on numpy arrays.
    """
    x = n * spacing
    return np.sqrt(r_s**2 + x**2 - 2 * r_s * x * np.cos(eta_s)) - r_s


def ula_path_difference_taylor(r_s, eta_s, n, spacing):
    """Second-order expansion of :func:`ula_path_difference_exact` in ``n*spacing/r_s``.

    ``-x cos(eta) + x^2 sin^2(eta) / (2 r)``: a linear angle term plus a
    range-dependent curvature term. The remainder is third order, bounded by
    ``x^3 / r^2`` while ``x / r <= 0.05``.
    """
    x = n * spacing
    return -x * np.cos(eta_s) + x**2 * np.sin(eta_s) ** 2 / (2 * r_s)


def near_field_ratio(num_elements, spacing, r_s):
    """``(N * spacing / r_s)^2``; compare against :func:`near_field_ratio_limit`."""
    if num_elements <= 0 or spacing <= 0 or r_s <= 0:
        raise DomainError("near_field_ratio needs positive arguments")
    return (num_elements * spacing / r_s) ** 2


def near_field_ratio_limit(num_elements):
    """Largest ratio still inside the Fresnel region for a half-wavelength ULA (about 41.6/N)."""
    return NEAR_FIELD_RATIO_CONSTANT / num_elements
