"""Labeled dataset generation, persistence and splitting.

A dataset directory holds a ``manifest`` plus four tensor files:

* ``features.bin``: float32 ``[n, 2, H, W]`` network inputs
* ``labels.bin``: float32 ``[n, 2]`` physical labels ``[range_m, angle_rad]``
* ``scales.bin``: float32 ``[n]`` normalization divisors
* ``seeds.bin``: uint64 ``[n]`` per-sample seeds

Sample ``i`` is fully determined by ``base_seed + i``: the UE position is
drawn from its position stream and the noise from its noise stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import rng, tensorio
from .channel import spherical_channel, synthesize_snapshots
from .errors import ConfigError, CorruptionError, DomainError, FormatError
from .features import LabelCodec, covariance_to_feature, csi_to_feature, sample_covariance
from .geometry import ArrayConfig, ArrayKind, PolarPoint, build_layout

FEATURE_KINDS = ("covariance", "csi")
TENSOR_FILES = ("features", "labels", "scales", "seeds")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Simulation scenario; defaults reproduce the reference setup (64-element UCA, 3.5 GHz)."""

    array: ArrayConfig = field(default_factory=ArrayConfig.uca)
    r_range: tuple = (2.0, 10.0)
    eta_range: tuple = (math.radians(30.0), math.radians(150.0))
    snr_db: float = 20.0
    snapshots: int = 100
    feature_kind: str = "covariance"
    n_train: int = 8000
    n_test: int = 2000
    base_seed: int = 0

    def __post_init__(self):
        if self.array.kind is not ArrayKind.UCA:
            raise ConfigError("datasets are generated for the UCA only")
        if self.feature_kind not in FEATURE_KINDS:
            raise ConfigError(f"feature_kind must be one of {FEATURE_KINDS}, got {self.feature_kind!r}")
        lo, hi = self.r_range
        if not 0 < lo <= hi:
            raise ConfigError(f"r_range must satisfy 0 < min <= max, got {self.r_range}")
        if not self.eta_range[0] <= self.eta_range[1]:
            raise ConfigError(f"eta_range is empty: {self.eta_range}")
        if self.snapshots < 1:
            raise ConfigError(f"snapshots must be positive, got {self.snapshots}")
        if self.n_train < 1 or self.n_test < 0:
            raise ConfigError(f"bad sample counts ({self.n_train}, {self.n_test})")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must fit in 64 bits")

    @property
    def n_total(self):
        return self.n_train + self.n_test

    @property
    def feature_shape(self):
        N = self.array.num_elements
        if self.feature_kind == "covariance":
            return (2, N, N)
        return (2, self.snapshots, N)

    def label_codec(self):
        return LabelCodec(self.r_range[0], self.r_range[1], self.eta_range[0], self.eta_range[1])

    def to_sections(self):
        a = self.array
        return {
            "scenario": {
                "array_kind": a.kind.value,
                "num_elements": a.num_elements,
                "radius_m": float(a.radius),
                "wavelength_m": float(a.wavelength),
                "r_range_m": tuple(float(x) for x in self.r_range),
                "eta_range_rad": tuple(float(x) for x in self.eta_range),
                "snr_db": float(self.snr_db),
                "snapshots": self.snapshots,
                "feature_kind": self.feature_kind,
                "n_train": self.n_train,
                "n_test": self.n_test,
                "base_seed": self.base_seed,
            }
        }

    @classmethod
    def from_section(cls, s):
        array = ArrayConfig(
            ArrayKind(s["array_kind"]),
            int(s["num_elements"]),
            float(s["wavelength_m"]),
            radius=float(s["radius_m"]),
        )
        return cls(
            array=array,
            r_range=tensorio.parse_floats(s["r_range_m"]),
            eta_range=tensorio.parse_floats(s["eta_range_rad"]),
            snr_db=float(s["snr_db"]),
            snapshots=int(s["snapshots"]),
            feature_kind=s["feature_kind"],
            n_train=int(s["n_train"]),
            n_test=int(s["n_test"]),
            base_seed=int(s["base_seed"]),
        )


@dataclass
class Dataset:
    """In-memory dataset; ``labels`` are physical ``[range_m, angle_rad]`` rows."""

    scenario: ScenarioConfig
    features: np.ndarray
    labels: np.ndarray
    scales: np.ndarray
    seeds: np.ndarray
    indices: np.ndarray | None = None

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        base = self.indices if self.indices is not None else np.arange(len(self))
        return Dataset(
            self.scenario, self.features[idx], self.labels[idx], self.scales[idx], self.seeds[idx], base[idx]
        )

    def train_test(self):
        """Split with the scenario's ``n_train / n_total`` fraction, seeded by ``base_seed``."""
        return split(self, self.scenario.n_train / len(self), seed=self.scenario.base_seed)

    @property
    def feature_shape(self):
        return tuple(self.features.shape[1:])


def sample_ue_position(gen, r_range, eta_range) -> PolarPoint:
    """Independent uniform range and angle draws."""
    u_r, u_eta = gen.random(2)
    r = r_range[0] + u_r * (r_range[1] - r_range[0])
    eta = eta_range[0] + u_eta * (eta_range[1] - eta_range[0])
    return PolarPoint(float(eta), float(r))


def generate_sample(cfg: ScenarioConfig, index, layout=None):
    """Build sample ``index``; returns ``(feature_planes, label, scale, seed)``."""
    seed = (cfg.base_seed + index) & rng.SEED_MASK
    layout = build_layout(cfg.array) if layout is None else layout
    ue = sample_ue_position(rng.stream(seed, rng.STREAM_POSITION), cfg.r_range, cfg.eta_range)
    h = spherical_channel(layout, ue, cfg.array.wavelength)
    snaps = synthesize_snapshots(h, cfg.snapshots, cfg.snr_db, seed, truth=ue)
    if cfg.feature_kind == "covariance":
        feat = covariance_to_feature(sample_covariance(snaps))
    else:
        feat = csi_to_feature(snaps)
    return feat.planes, (ue.range, ue.angle), feat.scale, seed


def generate_dataset(cfg: ScenarioConfig, out_dir=None, progress=None) -> Dataset:
    """Generate ``n_train + n_test`` samples, optionally persisting them to ``out_dir``."""
    n = cfg.n_total
    layout = build_layout(cfg.array)
    features = np.empty((n,) + cfg.feature_shape, dtype=np.float32)
    labels = np.empty((n, 2), dtype=np.float32)
    scales = np.empty(n, dtype=np.float32)
    seeds = np.empty(n, dtype=np.uint64)
    for i in range(n):
        planes, label, scale, seed = generate_sample(cfg, i, layout)
        features[i] = planes
        labels[i] = label
        scales[i] = scale
        seeds[i] = seed
        if progress is not None:
            progress(i + 1, n)
    ds = Dataset(cfg, features, labels, scales, seeds)
    if out_dir is not None:
        save_dataset(ds, out_dir)
    return ds


def save_dataset(ds: Dataset, out_dir):
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {out}: {exc}") from exc
    files = {}
    for name in TENSOR_FILES:
        arr = getattr(ds, name)
        dtype, crc = tensorio.write_tensor(out / f"{name}.bin", arr)
        files[name] = (arr.shape, dtype, crc)
    sections = ds.scenario.to_sections()
    sections["format"] = {"name": "NFPD", "version": FORMAT_VERSION}
    sections["counts"] = {
        "total": len(ds),
        "n_train": ds.scenario.n_train,
        "n_test": ds.scenario.n_test,
    }
    sections["tensors"] = {}
    for name, (shape, dtype, crc) in files.items():
        sections["tensors"][f"{name}.shape"] = tuple(shape)
        sections["tensors"][f"{name}.dtype"] = dtype
        sections["tensors"][f"{name}.crc32"] = f"{crc:08x}"
    tensorio.write_manifest(out / "manifest", sections)
    return out


def load_dataset(path) -> Dataset:
    path = Path(path)
    manifest = tensorio.read_manifest(path / "manifest")
    version = int(manifest.get("format", {}).get("version", -1))
    if version != FORMAT_VERSION:
        raise FormatError(f"{path / 'manifest'}: unsupported dataset format version {version}")
    scenario = ScenarioConfig.from_section(manifest["scenario"])
    tensors = manifest["tensors"]
    arrays = {}
    for name in TENSOR_FILES:
        arr = tensorio.read_tensor(
            path / f"{name}.bin",
            dtype=tensors[f"{name}.dtype"],
            checksum=int(tensors[f"{name}.crc32"], 16),
        )
        expected = tensorio.parse_ints(tensors[f"{name}.shape"])
        if arr.shape != expected:
            raise CorruptionError(f"{path / (name + '.bin')}: shape {arr.shape} != manifest {expected}")
        arrays[name] = arr
    return Dataset(scenario, **arrays)


def split(ds: Dataset, fraction=0.8, seed=0):
    """Deterministic random split; the train side gets ``floor(n * fraction)`` samples."""
    if not 0 < fraction < 1:
        raise DomainError(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(ds)
    n_train = math.floor(round(n * fraction, 9))
    perm = rng.stream(seed, rng.STREAM_SPLIT).permutation(n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))


def with_overrides(cfg: ScenarioConfig, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides)
