"""Command-line entry point: ``nfpos {gen-data,train,eval,compare,fresnel}``.

Runs are driven by an INI config file (sections ``[scenario]``, ``[model]``,
``[train]``); command-line flags override individual fields and are echoed
into the output manifest. Angles are read and printed in degrees.

Exit codes: 0 success, 2 usage/config error, 3 data or shape mismatch,
4 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import geometry, harness, tensorio
from .dataset import ScenarioConfig, generate_dataset, load_dataset
from .errors import ContractError, CorruptionError, FormatError, NfposError, TrainingDiverged
from .model import ModelConfig, build_model, load_checkpoint, parameter_footprint, save_checkpoint

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
DATA_DIR_ENV = "NFPOS_DATA_DIR"


class UsageError(Exception):
    pass


class DataMismatch(Exception):
    pass


def _read_config(path):
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not Path(path).is_file():
            raise UsageError(f"--config: file not found: {path}")
        parser.read(path, encoding="utf-8")
    return {s: dict(parser[s]) for s in parser.sections()}


def _get(section, key, cast, default):
    if key not in section:
        return default
    try:
        return cast(section[key])
    except ValueError as exc:
        raise UsageError(f"config field {key!r}: {exc}") from None


def scenario_from_config(cfg, args):
    s = cfg.get("scenario", {})
    try:
        array = geometry.ArrayConfig.uca(
            num_elements=_get(s, "num_elements", int, 64),
            radius=_get(s, "radius_m", float, 1.0),
            frequency=_get(s, "frequency_ghz", float, 3.5) * 1e9,
        )
        eta_deg = _get(s, "eta_range_deg", tensorio.parse_floats, (30.0, 150.0))
        scenario = ScenarioConfig(
            array=array,
            r_range=_get(s, "r_range_m", tensorio.parse_floats, (2.0, 10.0)),
            eta_range=tuple(math.radians(x) for x in eta_deg),
            snr_db=_pick(getattr(args, "snr", None), _get(s, "snr_db", float, 20.0)),
            snapshots=_pick(getattr(args, "snapshots", None), _get(s, "snapshots", int, 100)),
            feature_kind=_pick(getattr(args, "feature", None), s.get("feature", "covariance")),
            n_train=_pick(getattr(args, "n_train", None), _get(s, "n_train", int, 8000)),
            n_test=_pick(getattr(args, "n_test", None), _get(s, "n_test", int, 2000)),
            base_seed=_pick(getattr(args, "seed", None), _get(s, "seed", int, 0)),
        )
    except (ValueError, NfposError) as exc:
        raise UsageError(f"invalid scenario: {exc}") from None
    return scenario


def train_from_config(cfg, args):
    t = cfg.get("train", {})
    try:
        return harness.TrainConfig(
            learning_rate=_pick(getattr(args, "lr", None), _get(t, "learning_rate", float, 3e-4)),
            batch_size=_pick(getattr(args, "batch_size", None), _get(t, "batch_size", int, 32)),
            epochs=_pick(getattr(args, "epochs", None), _get(t, "epochs", int, 200)),
            seed=_pick(getattr(args, "seed", None), _get(t, "seed", int, 0)),
            loss_space=t.get("loss_space", "normalized"),
        )
    except ValueError as exc:
        raise UsageError(f"invalid [train] section: {exc}") from None


def model_from_config(cfg, args, feature_shape):
    m = cfg.get("model", {})
    variant = _pick(getattr(args, "model", None), m.get("variant", "proposed"))
    width = _pick(getattr(args, "width", None), _get(m, "width", int, 128))
    try:
        mc = ModelConfig.for_input(feature_shape, variant=variant, width=width)
        if "input_size" in m:
            mc = replace(mc, input_size=tensorio.parse_ints(m["input_size"]))
    except ValueError as exc:
        raise UsageError(f"invalid [model] section: {exc}") from None
    return mc


def _pick(override, value):
    return value if override is None else override


def _data_dir(args, flag="--data"):
    path = getattr(args, "data", None) or os.environ.get(DATA_DIR_ENV)
    if not path:
        raise UsageError(f"{flag} is required (or set {DATA_DIR_ENV})")
    return Path(path)


def cmd_gen_data(args):
    cfg = _read_config(args.config)
    scenario = scenario_from_config(cfg, args)
    out = args.out
    if out is None:
        root = os.environ.get(DATA_DIR_ENV)
        if not root:
            raise UsageError(f"--out is required (or set {DATA_DIR_ENV})")
        out = Path(root) / (
            f"{scenario.feature_kind}_snr{scenario.snr_db:g}_K{scenario.snapshots}_seed{scenario.base_seed}"
        )
    ds = generate_dataset(scenario, out)
    print(
        f"wrote {len(ds)} samples ({scenario.n_train} train / {scenario.n_test} test) "
        f"feature shape {list(ds.feature_shape)} base_seed {scenario.base_seed} -> {out}"
    )
    return EXIT_OK


def cmd_train(args):
    if args.out is None:
        raise UsageError("--out is required")
    cfg = _read_config(args.config)
    data_dir = _data_dir(args)
    if not (data_dir / "manifest").is_file():
        raise UsageError(f"--data: no dataset at {data_dir}")
    ds = load_dataset(data_dir)
    tc = train_from_config(cfg, args)
    mc = model_from_config(cfg, args, ds.feature_shape)
    if (mc.in_planes, *mc.input_size) != ds.feature_shape:
        raise DataMismatch(f"dataset feature shape {ds.feature_shape} != model input shape {(mc.in_planes, *mc.input_size)}")
    train_set, _ = ds.train_test()
    if args.n_train is not None:
        train_set = train_set.subset(np.arange(min(args.n_train, len(train_set))))
    heldout_fraction = _get(cfg.get("train", {}), "heldout_fraction", float, 0.1)
    fit, held = harness.heldout_split(train_set, heldout_fraction, tc.seed)
    model = build_model(mc, seed=tc.seed)

    def log(epoch, rec):
        if not args.quiet:
            ho = rec.heldout_loss[-1] if rec.heldout_loss else float("nan")
            print(f"epoch {epoch:4d}  train {rec.train_loss[-1]:.6g}  heldout {ho:.6g}  {rec.seconds[-1]:.1f}s")

    model, rec = harness.train(model, fit, held, tc, log=log)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    provenance = {
        "dataset": str(data_dir),
        "train_samples": len(fit),
        "heldout_samples": len(held),
        "learning_rate": tc.learning_rate,
        "batch_size": tc.batch_size,
        "epochs": tc.epochs,
        "seed": tc.seed,
        "loss_space": tc.loss_space,
        "best_epoch": rec.best_epoch,
        "best_heldout_loss": rec.best_heldout,
        "steps": rec.steps,
    }
    save_checkpoint(model, out / "checkpoint", provenance)
    rec.checkpoint = str(out / "checkpoint")
    rec.write_curve(out / "curve.csv")
    with open(out / "timing.log", "w", encoding="utf-8") as fh:
        for i, sec in enumerate(rec.seconds):
            fh.write(f"epoch {i + 1} {sec:.3f}s\n")
    count, nbytes = parameter_footprint(mc)
    print(
        f"trained {mc.variant} ({count} params, {nbytes / 1e6:.2f} MB) for {rec.epochs} epochs; "
        f"best heldout loss {rec.best_heldout:.6g} at epoch {rec.best_epoch}"
    )
    return EXIT_OK


def cmd_eval(args):
    if args.out is None:
        raise UsageError("--out is required")
    data_dir = _data_dir(args)
    ds = load_dataset(data_dir)
    _, test_set = ds.train_test()
    if args.oracle:
        model, loss_space = harness.LabelOracle(test_set), "normalized"
    else:
        if args.checkpoint is None or not (Path(args.checkpoint) / "manifest").is_file():
            raise UsageError(f"--checkpoint: no checkpoint at {args.checkpoint}")
        model, manifest = load_checkpoint(args.checkpoint)
        loss_space = manifest.get("provenance", {}).get("loss_space", "normalized")
        expected = (model.cfg.in_planes, *model.cfg.input_size)
        if expected != ds.feature_shape:
            raise DataMismatch(f"checkpoint expects input {expected}, dataset provides {ds.feature_shape}")
    report = harness.evaluate(model, test_set, loss_space=loss_space)
    harness.export_report(report, args.out)
    print(
        f"n={len(report.errors)}  mean {report.mean:.4f} m  median {report.median:.4f} m  "
        f"rmse {report.rmse:.4f} m  ({report.mean_db:.2f} dB)"
    )
    return EXIT_OK


def cmd_compare(args):
    if len(args.reports) < 2:
        raise UsageError("compare needs at least two report directories")
    reports = []
    for d in args.reports:
        if not (Path(d) / "errors.csv").is_file():
            raise UsageError(f"no errors.csv in {d}")
        reports.append(harness.load_report(d))
    names = args.names.split(",") if args.names else [Path(d).name for d in args.reports]
    if len(names) != len(reports):
        raise UsageError("--names must list one name per report")
    rows = harness.compare(reports, names)
    cols = ["run", "mean_m", "median_m", "rmse_m", "gap_mean_db", "gap_median_db"]
    print(f"{'run':<24}{'mean (m)':>12}{'median (m)':>12}{'rmse (m)':>12}{'gap mean dB':>13}{'gap med dB':>12}")
    for r in rows:
        print(
            f"{r['run']:<24}{r['mean_m']:>12.4f}{r['median_m']:>12.4f}{r['rmse_m']:>12.4f}"
            f"{r['gap_mean_db']:>13.3f}{r['gap_median_db']:>12.3f}"
        )
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([r["run"]] + [f"{r[c]:.9g}" for c in cols[1:]])
    return EXIT_OK


def cmd_fresnel(args):
    try:
        if args.ula:
            wavelength = geometry.wavelength_from_frequency(args.freq_ghz * 1e9)
            cfg = geometry.ArrayConfig.ula(args.n, spacing=args.delta, wavelength=wavelength)
        else:
            cfg = geometry.ArrayConfig.uca(args.n, radius=args.radius, frequency=args.freq_ghz * 1e9)
        aperture = args.aperture if args.aperture is not None else cfg.aperture
        bounds = geometry.fresnel_bounds(aperture, cfg.wavelength)
    except NfposError as exc:
        raise UsageError(str(exc)) from None
    print(f"array {cfg.kind.value}  N={cfg.num_elements}  f={cfg.frequency / 1e9:g} GHz  lambda={cfg.wavelength:.6f} m")
    print(f"aperture D = {aperture:.6g} m")
    print(f"Fresnel region: {bounds.lower:.6g} m <= r <= {bounds.upper:.6g} m")
    spacing = cfg.spacing if args.ula else cfg.wavelength / 2
    r_lo = bounds.lower
    ratio = geometry.near_field_ratio(cfg.num_elements, spacing, r_lo)
    limit = geometry.near_field_ratio_limit(cfg.num_elements)
    verdict = "within" if ratio <= limit * (1 + 1e-9) else "exceeds"
    print(
        f"near-field ratio (N*Delta/r)^2 at r={r_lo:.4g} m with Delta={spacing:.4g} m: {ratio:.6g} "
        f"({verdict} limit {limit:.6g} = 41.6/N)"
    )
    print()
    print(f"{'n':>6}{'r_s (m)':>10}{'eta (deg)':>11}{'exact (m)':>16}{'taylor (m)':>16}{'|diff| (m)':>13}")
    ns = sorted({1, max(1, cfg.num_elements // 4), max(1, cfg.num_elements // 2), cfg.num_elements})
    for n in ns:
        for r in args.ranges:
            for eta_deg in (30.0, 60.0, 90.0):
                eta = math.radians(eta_deg)
                ex = float(geometry.ula_path_difference_exact(r, eta, n, spacing))
                ty = float(geometry.ula_path_difference_taylor(r, eta, n, spacing))
                print(f"{n:>6}{r:>10.3g}{eta_deg:>11.1f}{ex:>16.9f}{ty:>16.9f}{abs(ex - ty):>13.3e}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nfpos", description="Near-field UE positioning: data generation, training, evaluation.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="INI run config")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--seed", type=int, metavar="U64", help="seed override")

    g = sub.add_parser("gen-data", help="generate and persist a dataset")
    common(g)
    g.add_argument("--snr", type=float, help="SNR in dB (reference runs use 0 or 20)")
    g.add_argument("--snapshots", type=int, help="snapshots per sample (reference runs use 50 or 100)")
    g.add_argument("--feature", choices=["covariance", "csi"])
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-test", type=int)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a model on a dataset")
    common(t)
    t.add_argument("--data", metavar="DIR", help=f"dataset directory (default ${DATA_DIR_ENV})")
    t.add_argument("--model", choices=["proposed", "baseline-cnn", "baseline-mlp"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--n-train", type=int, help="use only the first N training samples")
    t.add_argument("--width", type=int, help="conv channel width (default 128)")
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    common(e)
    e.add_argument("--checkpoint", metavar="DIR")
    e.add_argument("--data", metavar="DIR", help=f"dataset directory (default ${DATA_DIR_ENV})")
    e.add_argument("--oracle", action="store_true", help="use a perfect predictor (test hook)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="compare evaluation reports")
    c.add_argument("reports", nargs="*", metavar="REPORT_DIR")
    c.add_argument("--names", help="comma-separated run names")
    c.add_argument("--out", metavar="CSV", help="write the table as CSV")
    c.set_defaults(func=cmd_compare)

    f = sub.add_parser("fresnel", help="near-field region analysis")
    f.add_argument("--n", type=int, default=64, help="number of elements")
    f.add_argument("--radius", type=float, default=1.0, help="UCA radius (m)")
    f.add_argument("--freq-ghz", type=float, default=3.5)
    f.add_argument("--ula", action="store_true", help="analyse a linear array instead")
    f.add_argument("--delta", type=float, help="ULA spacing (m), default lambda/2")
    f.add_argument("--aperture", type=float, help="aperture D (m), default from the geometry")
    f.add_argument("--ranges", type=float, nargs="+", default=[2.0, 5.0, 10.0], help="UE ranges (m)")
    f.set_defaults(func=cmd_fresnel)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nfpos {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataMismatch, ContractError, CorruptionError, FormatError) as exc:
        print(f"nfpos {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDiverged, OSError, RuntimeError) as exc:
        print(f"nfpos {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
