"""Training loop, positioning metrics, reports and experiment sweeps."""
from __future__ import annotations

import copy
import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import rng
from .errors import ContractError, DomainError, TrainingDiverged, UndefinedGapError
from .features import LabelCodec
from .geometry import PolarPoint

LOSS_SPACES = ("normalized", "raw")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 32
    epochs: int = 200
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    seed: int = 0
    loss_space: str = "normalized"

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1 or self.eps <= 0:
            raise ValueError(f"invalid training hyperparameters: {self}")
        if self.loss_space not in LOSS_SPACES:
            raise ValueError(f"loss_space must be one of {LOSS_SPACES}")


@dataclass
class TrainRecord:
    train_loss: list = field(default_factory=list)
    heldout_loss: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    best_epoch: int | None = None
    best_heldout: float = math.inf
    steps: int = 0
    checkpoint: str | None = None

    @property
    def epochs(self):
        return len(self.train_loss)

    def write_curve(self, path):
        """Loss curve as CSV (no wall-clock, so reruns compare byte-for-byte)."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "heldout_loss"])
            for i, tr in enumerate(self.train_loss):
                ho = self.heldout_loss[i] if i < len(self.heldout_loss) else float("nan")
                w.writerow([i + 1, repr(float(tr)), repr(float(ho))])


def mse_loss(preds, labels):
    """Sum of squared range and angle errors, averaged over the batch."""
    if preds.shape != labels.shape or preds.dim() != 2:
        raise ContractError(f"mse_loss: shapes {tuple(preds.shape)} and {tuple(labels.shape)} differ")
    return ((preds - labels) ** 2).sum(dim=1).mean()


def _targets(labels, codec, loss_space):
    labels = np.asarray(labels, dtype=np.float64)
    return codec.encode(labels) if loss_space == "normalized" else labels


def _batches(n, batch_size, order):
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def predict(model, features, batch_size=64):
    """Evaluation-mode outputs for a feature array, as float64 numpy."""
    model.eval()
    dtype = next(iter(model.parameters()), torch.empty(0)).dtype
    outs = []
    with torch.no_grad():
        for start in range(0, len(features), batch_size):
            x = torch.as_tensor(np.asarray(features[start : start + batch_size]), dtype=dtype)
            outs.append(model(x).double().numpy())
    return np.concatenate(outs) if outs else np.empty((0, 2))


def heldout_loss(model, features, targets, batch_size=64):
    preds = predict(model, features, batch_size)
    return float(np.mean(np.sum((preds - targets) ** 2, axis=1)))


def train(model, train_set, heldout_set, cfg: TrainConfig, codec: LabelCodec = None, log=None):
    """Adam on shuffled mini-batches; the model ends with its best held-out parameters.

    ``train_set``/``heldout_set`` are datasets with ``features`` and physical
    ``labels``; ``heldout_set`` may be ``None``, in which case the final
    epoch is kept. Shuffling uses a per-epoch stream of ``cfg.seed``.
    """
    codec = codec or train_set.scenario.label_codec()
    expected = (model.cfg.in_planes, *model.cfg.input_size)
    if tuple(train_set.features.shape[1:]) != expected:
        raise ContractError(f"dataset feature shape {tuple(train_set.features.shape[1:])} != model input {expected}")
    dtype = next(model.parameters()).dtype
    x_all = torch.as_tensor(train_set.features, dtype=dtype)
    y_all = torch.as_tensor(_targets(train_set.labels, codec, cfg.loss_space), dtype=dtype)
    if heldout_set is not None:
        y_held = _targets(heldout_set.labels, codec, cfg.loss_space)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, betas=tuple(cfg.betas), eps=cfg.eps)
    record = TrainRecord()
    best_state = None
    n = len(x_all)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        model.train()
        order = rng.stream(cfg.seed, (rng.STREAM_SHUFFLE << 32) + epoch).permutation(n)
        total = 0.0
        for idx in _batches(n, cfg.batch_size, order):
            idx = torch.as_tensor(idx)
            opt.zero_grad(set_to_none=True)
            loss = mse_loss(model(x_all[idx]), y_all[idx])
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}, step {record.steps + 1}", record)
            loss.backward()
            opt.step()
            record.steps += 1
            total += float(loss.detach()) * len(idx)
        record.train_loss.append(total / n)
        if heldout_set is not None:
            ho = heldout_loss(model, heldout_set.features, y_held, cfg.batch_size)
            record.heldout_loss.append(ho)
            if ho < record.best_heldout:
                record.best_heldout, record.best_epoch = ho, epoch + 1
                best_state = copy.deepcopy(model.state_dict())
        record.seconds.append(time.perf_counter() - t0)
        if log is not None:
            log(epoch + 1, record)
    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        record.best_epoch = record.epochs
    model.eval()
    return model, record


def positioning_error(est, truth):
    """Planar Euclidean distance between polar points (or ``[range, angle]`` arrays)."""
    if isinstance(est, PolarPoint) and isinstance(truth, PolarPoint):
        return math.hypot(
            est.range * math.cos(est.angle) - truth.range * math.cos(truth.angle),
            est.range * math.sin(est.angle) - truth.range * math.sin(truth.angle),
        )
    est, truth = np.asarray(est, dtype=np.float64), np.asarray(truth, dtype=np.float64)
    r1, a1 = est[..., 0], est[..., 1]
    r2, a2 = truth[..., 0], truth[..., 1]
    return np.hypot(r1 * np.cos(a1) - r2 * np.cos(a2), r1 * np.sin(a1) - r2 * np.sin(a2))


def cdf(errors):
    """Empirical CDF as ``(value, P[error <= value])`` pairs, ties collapsed."""
    e = np.sort(np.asarray(errors, dtype=np.float64).ravel())
    if e.size == 0:
        raise DomainError("cannot build a CDF from an empty error list")
    values, counts = np.unique(e, return_counts=True)
    return list(zip(values.tolist(), (np.cumsum(counts) / e.size).tolist()))


def to_db(error_m):
    """Error in dB relative to 1 m."""
    return 10.0 * math.log10(error_m) if error_m > 0 else -math.inf


@dataclass
class EvalReport:
    """Per-sample positioning errors (meters) and their summary statistics."""

    errors: np.ndarray
    scenario: dict = field(default_factory=dict)

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=np.float64).ravel()
        if self.errors.size == 0:
            raise DomainError("empty evaluation report")
        if np.any(self.errors < 0) or not np.all(np.isfinite(self.errors)):
            raise DomainError("errors must be finite and non-negative")

    @property
    def mean(self):
        return float(np.mean(self.errors))

    @property
    def median(self):
        return float(np.median(self.errors))

    @property
    def rmse(self):
        return float(np.sqrt(np.mean(self.errors**2)))

    @property
    def mean_db(self):
        return to_db(self.mean)

    @property
    def median_db(self):
        return to_db(self.median)

    def cdf(self):
        return cdf(self.errors)


def evaluate(model, dataset, codec: LabelCodec = None, loss_space="normalized", batch_size=64):
    """Decode the model's outputs and measure planar positioning errors."""
    codec = codec or dataset.scenario.label_codec()
    cfg = getattr(model, "cfg", None)
    if cfg is not None and tuple(dataset.features.shape[1:]) != (cfg.in_planes, *cfg.input_size):
        raise ContractError(
            f"dataset feature shape {tuple(dataset.features.shape[1:])} != model input "
            f"{(cfg.in_planes, *cfg.input_size)}"
        )
    out = predict(model, dataset.features, batch_size)
    est = codec.decode(out) if loss_space == "normalized" else out
    errors = positioning_error(est, np.asarray(dataset.labels, dtype=np.float64))
    scenario = {}
    if hasattr(dataset, "scenario"):
        s = dataset.scenario
        scenario = {"snr_db": s.snr_db, "snapshots": s.snapshots, "feature_kind": s.feature_kind}
    return EvalReport(errors, scenario)


def db_gap(report_a, report_b, statistic="mean"):
    """``10 log10(stat_b / stat_a)``: positive when run ``b`` has larger errors."""
    a, b = getattr(report_a, statistic), getattr(report_b, statistic)
    if a == 0 or b == 0:
        raise UndefinedGapError(f"{statistic} error is zero; dB gap is undefined")
    return 10.0 * math.log10(b / a)


def _fmt(x):
    return f"{x:.9g}"


SUMMARY_FIELDS = ("count", "mean_m", "median_m", "rmse_m", "mean_db", "median_db")


def _summary_row(errors):
    r = EvalReport(errors)
    return [str(len(errors)), _fmt(r.mean), _fmt(r.median), _fmt(r.rmse), _fmt(r.mean_db), _fmt(r.median_db)]


def export_report(report: EvalReport, out_dir):
    """Write ``errors.csv``, ``summary.csv`` and ``cdf.csv`` (9 significant digits).

    The summary is computed from the errors as stored, so recomputing it from
    ``errors.csv`` reproduces ``summary.csv`` exactly.
    """
    if report is None or len(report.errors) == 0:
        raise DomainError("cannot export an empty report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        stored = [_fmt(e) for e in report.errors]
        _write_csv(out / "errors.csv", ["error_m"], [[s] for s in stored])
        stored_vals = np.array([float(s) for s in stored])
        _write_csv(out / "summary.csv", SUMMARY_FIELDS, [_summary_row(stored_vals)])
        _write_csv(out / "cdf.csv", ["error_m", "probability"], [[_fmt(v), _fmt(p)] for v, p in cdf(stored_vals)])
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def load_report(report_dir):
    _, rows = read_csv(Path(report_dir) / "errors.csv")
    return EvalReport([float(r[0]) for r in rows])


def compare(reports, names=None):
    """Rows of ``name, mean, median, rmse, gap vs first (mean dB), gap vs first (median dB)``."""
    if len(reports) < 2:
        raise DomainError("compare needs at least two reports")
    names = names or [f"run{i}" for i in range(len(reports))]
    ref = reports[0]
    rows = []
    for name, r in zip(names, reports):
        rows.append(
            {
                "run": name,
                "mean_m": r.mean,
                "median_m": r.median,
                "rmse_m": r.rmse,
                "gap_mean_db": db_gap(ref, r, "mean"),
                "gap_median_db": db_gap(ref, r, "median"),
            }
        )
    return rows


class LabelOracle(torch.nn.Module):
    """Test hook: replays the encoded true labels in dataset order.

    Only meaningful with :func:`predict`, which visits samples sequentially.
    """

    def __init__(self, dataset, codec=None, loss_space="normalized"):
        super().__init__()
        codec = codec or dataset.scenario.label_codec()
        self.targets = torch.as_tensor(_targets(dataset.labels, codec, loss_space))
        self.cursor = 0

    def forward(self, x):
        out = self.targets[self.cursor : self.cursor + len(x)]
        self.cursor = (self.cursor + len(x)) % len(self.targets)
        return out


def heldout_split(train_set, fraction=0.1, seed=0):
    """Carve a held-out subset off the training split for checkpoint selection."""
    from .dataset import split

    fit, held = split(train_set, 1.0 - fraction, seed=seed)
    return fit, held


def run_experiment(scenario, model_cfg, train_cfg, seeds=(0, 1, 2), dataset=None, heldout_fraction=0.1, log=None):
    """Train and evaluate one (scenario, model) pair for several training seeds.

    The dataset is generated once from ``scenario`` (unless given); seeds
    only change initialization, shuffling and the held-out carve-out.
    Returns ``(reports, records)`` with reports measured on the test split.
    """
    from dataclasses import replace

    from .dataset import generate_dataset
    from .model import build_model

    ds = dataset if dataset is not None else generate_dataset(scenario)
    train_set, test_set = ds.train_test()
    reports, records = [], []
    for seed in seeds:
        fit, held = heldout_split(train_set, heldout_fraction, seed)
        model = build_model(model_cfg, seed=seed)
        model, rec = train(model, fit, held, replace(train_cfg, seed=seed), log=log)
        reports.append(evaluate(model, test_set, loss_space=train_cfg.loss_space))
        records.append(rec)
    return reports, records
