"""Near-field UE positioning with a sectored uniform circular array.

Submodules:

* :mod:`nfpos.geometry`: array layouts, Fresnel bounds, path-difference expansions
* :mod:`nfpos.channel`: spherical-wave channels and noisy snapshots
* :mod:`nfpos.features`: sample covariance / CSI input tensors, label scaling
* :mod:`nfpos.dataset`: seeded dataset generation and the NFPD file format
* :mod:`nfpos.model`: attention CNN regressor and baselines
* :mod:`nfpos.harness`: training, metrics, reports
"""
from .channel import SnapshotSet, spherical_channel, synthesize_snapshots
from .dataset import Dataset, ScenarioConfig, generate_dataset, load_dataset, split
from .features import LabelCodec, covariance_to_feature, csi_to_feature, sample_covariance
from .geometry import ArrayConfig, PolarPoint, build_layout, fresnel_bounds
from .harness import EvalReport, TrainConfig, evaluate, train
from .model import ModelConfig, build_model, parameter_footprint

__version__ = "0.1.0"
