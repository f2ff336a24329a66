"""
Training a small positioning network
====================================

A deliberately small run (narrow network, a few hundred samples) so it
finishes in minutes on a laptop CPU. The full-size configuration is
``ModelConfig()`` with 8000/2000 samples and 200 epochs.
"""
import numpy as np

from nfpos import (
    ModelConfig,
    ScenarioConfig,
    TrainConfig,
    build_model,
    evaluate,
    generate_dataset,
    parameter_footprint,
    train,
)
from nfpos.harness import EvalReport, cdf, db_gap, heldout_split, positioning_error

count, nbytes = parameter_footprint(ModelConfig())
print(f"full model: {count:,} parameters, {nbytes / 1e6:.2f} MB")

scenario = ScenarioConfig(snr_db=20.0, snapshots=100, n_train=400, n_test=100, base_seed=7)
ds = generate_dataset(scenario)
train_set, test_set = ds.train_test()
fit, held = heldout_split(train_set, 0.1, seed=0)
print(f"{len(fit)} fitting, {len(held)} held-out, {len(test_set)} test samples")

# %%
cfg = ModelConfig(width=16)
print(f"demo model: {parameter_footprint(cfg)[0]:,} parameters")
model = build_model(cfg, seed=0)


def log(epoch, rec):
    if epoch % 5 == 0:
        print(f"  epoch {epoch:3d}  train {rec.train_loss[-1]:.4f}  held-out {rec.heldout_loss[-1]:.4f}")


model, rec = train(model, fit, held, TrainConfig(epochs=20, batch_size=32, seed=0), log=log)
print(f"kept epoch {rec.best_epoch} (held-out loss {rec.best_heldout:.4f})")

# %%
# Errors are planar distances in meters; dB values are relative to 1 m.
report = evaluate(model, test_set)
print(f"mean {report.mean:.3f} m ({report.mean_db:.2f} dB), median {report.median:.3f} m, rmse {report.rmse:.3f} m")

# a predictor that always answers the middle of the region, for scale
center = np.tile([np.mean(scenario.r_range), np.mean(scenario.eta_range)], (len(test_set), 1))
naive = EvalReport(positioning_error(center, test_set.labels))
print(f"center guess: mean {naive.mean:.3f} m; network is {db_gap(report, naive):.2f} dB better")

# %%
# A few points of the empirical CDF.
pts = cdf(report.errors)
for q in (0.25, 0.5, 0.9):
    v = next(v for v, p in pts if p >= q)
    print(f"  {int(q * 100)}% of users within {v:.3f} m")
