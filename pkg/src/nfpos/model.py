"""Channel/spatial attention CNN for polar position regression, plus baselines.

Default configuration (``width=128``, 64x64 input)::

    input            (B,   2, 64, 64)
    input block      (B, 128, 64, 64)   4 x [3x3 conv, BN, ReLU]
    channel attn     (B, 128, 64, 64)   shared 1x1 convs 128->8->128 on GAP and GMP
    deep features    (B, 128, 16, 16)   2 stages x (2 residual blocks, 2x2 max-pool)
    spatial attn     (B, 128, 16, 16)   7x7 conv over [channel mean; channel max]
    regression       (B, 2)             32768 -> 128 -> 128 -> 2

``baseline-cnn`` is the same network with both attention blocks removed;
``baseline-mlp`` is a plain 3-layer perceptron on the flattened input.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import tensorio
from .errors import ContractError, FormatError

VARIANTS = ("proposed", "baseline-cnn", "baseline-mlp")


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "proposed"
    in_planes: int = 2
    input_size: tuple = (64, 64)
    width: int = 128
    input_convs: int = 4
    ca_hidden: int | None = None  # defaults to width // 16
    blocks_per_stage: int = 2
    pool_stages: int = 2
    sa_kernel: int = 7
    mlp_hidden: tuple = (128, 128)
    baseline_mlp_hidden: tuple = (512, 256)
    out_dim: int = 2
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "input_size", tuple(int(s) for s in self.input_size))
        object.__setattr__(self, "mlp_hidden", tuple(int(s) for s in self.mlp_hidden))
        object.__setattr__(self, "baseline_mlp_hidden", tuple(int(s) for s in self.baseline_mlp_hidden))
        if self.ca_hidden is None:
            object.__setattr__(self, "ca_hidden", max(1, self.width // 16))
        if self.sa_kernel % 2 != 1:
            raise ValueError("sa_kernel must be odd")

    @classmethod
    def for_input(cls, feature_shape, **kw):
        """Config sized for a ``[planes, H, W]`` feature (covariance or CSI variant)."""
        planes, h, w = feature_shape
        return cls(in_planes=planes, input_size=(h, w), **kw)

    @property
    def uses_attention(self):
        return self.variant == "proposed"

    @property
    def pooled_size(self):
        h, w = self.input_size
        f = 2**self.pool_stages
        return math.ceil(h / f), math.ceil(w / f)

    @property
    def flatten_width(self):
        h, w = self.pooled_size
        return self.width * h * w

    def to_section(self):
        out = {}
        for k, v in asdict(self).items():
            out[k] = tuple(v) if isinstance(v, (tuple, list)) else v
        return out

    @classmethod
    def from_section(cls, s):
        kw = {}
        for f in fields(cls):
            if f.name not in s:
                continue
            text = s[f.name]
            if f.name == "variant":
                kw[f.name] = text
            elif f.name in ("input_size", "mlp_hidden", "baseline_mlp_hidden"):
                kw[f.name] = tensorio.parse_ints(text)
            elif f.name in ("bn_momentum", "bn_eps"):
                kw[f.name] = float(text)
            else:
                kw[f.name] = int(text)
        return cls(**kw)


def _check_shape(x, expected, where):
    if x.dim() != len(expected) + 1 or tuple(x.shape[1:]) != tuple(expected):
        raise ContractError(f"{where}: expected (B, {', '.join(map(str, expected))}), got {tuple(x.shape)}")


class ConvBNReLU(nn.Sequential):
    def __init__(self, cin, cout, kernel=3, momentum=0.1, eps=1e-5):
        super().__init__(
            nn.Conv2d(cin, cout, kernel, stride=1, padding=kernel // 2),
            nn.BatchNorm2d(cout, eps=eps, momentum=momentum),
            nn.ReLU(inplace=True),
        )


class InputBlock(nn.Module):
    """Stacked conv/BN/ReLU units lifting ``in_planes`` to ``width`` channels."""

    def __init__(self, in_planes, width, n_convs=4, momentum=0.1, eps=1e-5):
        super().__init__()
        chans = [in_planes] + [width] * n_convs
        self.units = nn.Sequential(
            *(ConvBNReLU(chans[i], chans[i + 1], 3, momentum, eps) for i in range(n_convs))
        )

    def forward(self, x):
        return self.units(x)


class ChannelAttention(nn.Module):
    """Per-channel gates from global average and max pooling through shared 1x1 convs.

    Returns ``(gated_features, gates)`` with gates of shape ``[B, C, 1, 1]``.
    """

    def __init__(self, channels, hidden):
        super().__init__()
        self.squeeze = nn.Conv2d(channels, hidden, 1)
        self.excite = nn.Conv2d(hidden, channels, 1)

    def logits(self, x):
        def path(p):
            return self.excite(torch.relu(self.squeeze(p)))

        avg = x.mean(dim=(2, 3), keepdim=True)
        mx = x.amax(dim=(2, 3), keepdim=True)
        return path(avg) + path(mx)

    def forward(self, x):
        gates = torch.sigmoid(self.logits(x))
        return x * gates, gates


class BasicBlock(nn.Module):
    """``relu(bn(conv(relu(bn(conv(x))))) + shortcut(x))``."""

    def __init__(self, cin, cout, momentum=0.1, eps=1e-5):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.bn1 = nn.BatchNorm2d(cout, eps=eps, momentum=momentum)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.bn2 = nn.BatchNorm2d(cout, eps=eps, momentum=momentum)
        if cin == cout:
            self.shortcut = nn.Identity()
        else:
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1), nn.BatchNorm2d(cout, eps=eps, momentum=momentum)
            )

    def forward(self, x):
        y = torch.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return torch.relu(y + self.shortcut(x))


class DeepFeatureExtractor(nn.Module):
    """Residual stages, each closed by a 2x2 stride-2 max-pool (ceil mode for odd sizes)."""

    def __init__(self, width, blocks_per_stage=2, stages=2, momentum=0.1, eps=1e-5):
        super().__init__()
        layers = []
        for _ in range(stages):
            layers += [BasicBlock(width, width, momentum, eps) for _ in range(blocks_per_stage)]
            layers.append(nn.MaxPool2d(2, 2, ceil_mode=True))
        self.layers = nn.Sequential(*layers)

    def forward(self, x):
        return self.layers(x)


class SpatialAttention(nn.Module):
    """Per-pixel gates from a wide conv over the channel mean and channel max maps."""

    def __init__(self, kernel=7):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, kernel, padding=kernel // 2)

    def logits(self, x):
        pooled = torch.cat([x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1)
        return self.conv(pooled)

    def forward(self, x):
        gates = torch.sigmoid(self.logits(x))
        return x * gates, gates


class RegressionHead(nn.Module):
    def __init__(self, in_features, hidden=(128, 128), out_dim=2):
        super().__init__()
        dims = [in_features, *hidden]
        layers = [nn.Flatten()]
        for a, b in zip(dims[:-1], dims[1:]):
            layers += [nn.Linear(a, b), nn.ReLU(inplace=True)]
        layers.append(nn.Linear(dims[-1], out_dim))
        self.mlp = nn.Sequential(*layers)
        self.in_features = in_features

    def forward(self, x):
        if x[0].numel() != self.in_features:
            raise ContractError(f"regression head expects {self.in_features} features, got {x[0].numel()}")
        return self.mlp(x)


class PositioningNet(nn.Module):
    """Proposed network (``variant='proposed'``) or its attention-free ablation."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        m, e = cfg.bn_momentum, cfg.bn_eps
        self.input_block = InputBlock(cfg.in_planes, cfg.width, cfg.input_convs, m, e)
        self.channel_attention = ChannelAttention(cfg.width, cfg.ca_hidden) if cfg.uses_attention else None
        self.features = DeepFeatureExtractor(cfg.width, cfg.blocks_per_stage, cfg.pool_stages, m, e)
        self.spatial_attention = SpatialAttention(cfg.sa_kernel) if cfg.uses_attention else None
        self.head = RegressionHead(cfg.flatten_width, cfg.mlp_hidden, cfg.out_dim)

    def forward_intermediates(self, x):
        """Forward pass returning every block output and the attention gates."""
        _check_shape(x, (self.cfg.in_planes, *self.cfg.input_size), "input")
        out = {"input": x}
        f = out["input_block"] = self.input_block(x)
        if self.channel_attention is not None:
            f, out["channel_gates"] = self.channel_attention(f)
            out["channel_attention"] = f
        f = out["deep_features"] = self.features(f)
        if self.spatial_attention is not None:
            f, out["spatial_gates"] = self.spatial_attention(f)
            out["spatial_attention"] = f
        out["flatten"] = f.flatten(1)
        out["output"] = self.head(f)
        return out

    def forward(self, x):
        return self.forward_intermediates(x)["output"]


class MLPBaseline(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        n_in = cfg.in_planes * cfg.input_size[0] * cfg.input_size[1]
        self.head = RegressionHead(n_in, cfg.baseline_mlp_hidden, cfg.out_dim)

    def forward(self, x):
        _check_shape(x, (self.cfg.in_planes, *self.cfg.input_size), "input")
        return self.head(x)


def init_weights(model):
    """Conv: fan-out scaled Gaussian; dense: fan-in scaled uniform; BN: (1, 0); biases zero."""
    for mod in model.modules():
        if isinstance(mod, nn.Conv2d):
            nn.init.kaiming_normal_(mod.weight, mode="fan_out", nonlinearity="relu")
            if mod.bias is not None:
                nn.init.zeros_(mod.bias)
        elif isinstance(mod, nn.Linear):
            bound = 1.0 / math.sqrt(mod.in_features)
            nn.init.uniform_(mod.weight, -bound, bound)
            nn.init.zeros_(mod.bias)
        elif isinstance(mod, nn.BatchNorm2d):
            nn.init.ones_(mod.weight)
            nn.init.zeros_(mod.bias)
    return model


def build_model(cfg: ModelConfig, seed=0):
    torch.manual_seed(seed)
    model = MLPBaseline(cfg) if cfg.variant == "baseline-mlp" else PositioningNet(cfg)
    return init_weights(model)


def parameter_footprint(cfg: ModelConfig):
    """Closed-form trainable parameter count and its size in bytes at float32."""

    def conv(cin, cout, k):
        return cin * cout * k * k + cout

    def dense(a, b):
        return a * b + b

    bn = 2 * cfg.width
    if cfg.variant == "baseline-mlp":
        dims = [cfg.in_planes * cfg.input_size[0] * cfg.input_size[1], *cfg.baseline_mlp_hidden, cfg.out_dim]
        count = sum(dense(a, b) for a, b in zip(dims[:-1], dims[1:]))
        return count, 4 * count
    count = conv(cfg.in_planes, cfg.width, 3) + bn
    count += (cfg.input_convs - 1) * (conv(cfg.width, cfg.width, 3) + bn)
    count += cfg.pool_stages * cfg.blocks_per_stage * 2 * (conv(cfg.width, cfg.width, 3) + bn)
    if cfg.uses_attention:
        count += conv(cfg.width, cfg.ca_hidden, 1) + conv(cfg.ca_hidden, cfg.width, 1)
        count += conv(2, 1, cfg.sa_kernel)
    dims = [cfg.flatten_width, *cfg.mlp_hidden, cfg.out_dim]
    count += sum(dense(a, b) for a, b in zip(dims[:-1], dims[1:]))
    return count, 4 * count


def save_checkpoint(model, path, provenance=None):
    """Write every state tensor as an NFPD file plus a manifest with the config."""
    path = Path(path)
    (path / "params").mkdir(parents=True, exist_ok=True)
    sections = {"format": {"name": "NFPD", "version": tensorio.VERSION, "kind": "checkpoint"}}
    sections["model"] = model.cfg.to_section()
    sections["provenance"] = dict(provenance or {})
    tensors = {}
    for name, t in model.state_dict().items():
        arr = t.detach().cpu().numpy()
        dtype, crc = tensorio.write_tensor(path / "params" / f"{name}.bin", arr)
        tensors[f"{name}.shape"] = tuple(arr.shape)
        tensors[f"{name}.dtype"] = dtype
        tensors[f"{name}.crc32"] = f"{crc:08x}"
    sections["tensors"] = tensors
    tensorio.write_manifest(path / "manifest", sections)
    return path


def load_checkpoint(path):
    """Returns ``(model, manifest)`` with the model in evaluation mode."""
    path = Path(path)
    manifest = tensorio.read_manifest(path / "manifest")
    if manifest.get("format", {}).get("kind") != "checkpoint":
        raise FormatError(f"{path}: not a checkpoint directory")
    cfg = ModelConfig.from_section(manifest["model"])
    model = build_model(cfg)
    tensors = manifest["tensors"]
    state = {}
    for name, ref in model.state_dict().items():
        if f"{name}.dtype" not in tensors:
            raise FormatError(f"{path}: checkpoint lacks tensor {name}")
        arr = tensorio.read_tensor(
            path / "params" / f"{name}.bin",
            dtype=tensors[f"{name}.dtype"],
            checksum=int(tensors[f"{name}.crc32"], 16),
        )
        state[name] = torch.from_numpy(arr.astype(np.int64) if arr.dtype.kind == "u" else arr).to(ref.dtype)
    model.load_state_dict(state)
    model.eval()
    return model, manifest


def with_overrides(cfg: ModelConfig, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "width" in overrides and "ca_hidden" not in overrides:
        overrides["ca_hidden"] = max(1, overrides["width"] // 16)
    return replace(cfg, **overrides)
