import math

import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from nfpos.dataset import ScenarioConfig, generate_dataset
from nfpos.errors import ContractError, DomainError, TrainingDiverged, UndefinedGapError
from nfpos.geometry import PolarPoint
from nfpos.harness import (
    EvalReport,
    LabelOracle,
    TrainConfig,
    cdf,
    compare,
    db_gap,
    evaluate,
    export_report,
    heldout_split,
    load_report,
    mse_loss,
    positioning_error,
    read_csv,
    to_db,
    train,
)
from nfpos.model import ModelConfig, build_model

TINY_MODEL = ModelConfig(width=4, input_size=(64, 64), mlp_hidden=(8,))


@pytest.fixture(scope="module")
def tiny_ds():
    return generate_dataset(ScenarioConfig(n_train=24, n_test=8, base_seed=21))


# loss ------------------------------------------------------------------------


def test_mse_examples():
    z = torch.zeros(3, 2)
    assert mse_loss(z, z).item() == 0.0
    assert mse_loss(torch.tensor([[1.0, 2.0]]), torch.tensor([[0.0, 0.0]])).item() == 5.0
    assert mse_loss(torch.tensor([[1.0, 0.0], [0.0, 0.0]]), torch.zeros(2, 2)).item() == 0.5
    with pytest.raises(ContractError):
        mse_loss(torch.zeros(2, 2), torch.zeros(2, 3))


def test_mse_loop_oracle():
    gen = np.random.default_rng(0)
    p, t = gen.standard_normal((17, 2)), gen.standard_normal((17, 2))
    ref = sum((p[i, 0] - t[i, 0]) ** 2 + (p[i, 1] - t[i, 1]) ** 2 for i in range(17)) / 17
    assert mse_loss(torch.tensor(p), torch.tensor(t)).item() == pytest.approx(ref, rel=1e-14)


# optimizer --------------------------------------------------------------------


def test_adam_matches_hand_update():
    gen = np.random.default_rng(1)
    w0 = gen.standard_normal(5)
    grads = [gen.standard_normal(5) for _ in range(3)]
    lr, b1, b2, eps = 3e-4, 0.9, 0.999, 1e-8
    w = torch.tensor(w0, requires_grad=True)
    opt = torch.optim.Adam([w], lr=lr, betas=(b1, b2), eps=eps)
    m = v = np.zeros(5)
    ref = w0.copy()
    for t, g in enumerate(grads, start=1):
        w.grad = torch.tensor(g)
        opt.step()
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        ref = ref - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    np.testing.assert_allclose(w.detach().numpy(), ref, rtol=0, atol=1e-10)


# training loop ----------------------------------------------------------------


def test_zero_learning_rate_keeps_parameters(tiny_ds):
    train_set, _ = tiny_ds.train_test()
    model = build_model(TINY_MODEL, seed=0)
    before = [p.detach().clone() for p in model.parameters()]
    cfg = TrainConfig(learning_rate=0.0, batch_size=len(train_set), epochs=3)
    model, rec = train(model, train_set, None, cfg)
    for a, b in zip(before, model.parameters()):
        assert torch.equal(a, b)
    assert rec.train_loss == pytest.approx([rec.train_loss[0]] * 3, rel=1e-6)
    assert rec.steps == 3


def test_training_is_deterministic(tiny_ds, tmp_path):
    train_set, _ = tiny_ds.train_test()
    fit, held = heldout_split(train_set, 0.25, seed=0)
    cfg = TrainConfig(batch_size=8, epochs=2, seed=3)
    runs = []
    for i in range(2):
        model, rec = train(build_model(TINY_MODEL, seed=3), fit, held, cfg)
        rec.write_curve(tmp_path / f"c{i}.csv")
        runs.append((model, rec))
    assert (tmp_path / "c0.csv").read_bytes() == (tmp_path / "c1.csv").read_bytes()
    for p, q in zip(runs[0][0].parameters(), runs[1][0].parameters()):
        assert torch.equal(p, q)
    rec = runs[0][1]
    assert rec.best_epoch in (1, 2) and rec.best_heldout == min(rec.heldout_loss)
    assert rec.steps == 2 * math.ceil(len(fit) / 8)


def test_best_heldout_state_is_restored(tiny_ds):
    train_set, _ = tiny_ds.train_test()
    fit, held = heldout_split(train_set, 0.25, seed=1)
    model, rec = train(build_model(TINY_MODEL, seed=0), fit, held, TrainConfig(learning_rate=1e-2, batch_size=6, epochs=4))
    from nfpos.harness import heldout_loss

    codec = train_set.scenario.label_codec()
    assert heldout_loss(model, held.features, codec.encode(held.labels)) == pytest.approx(rec.best_heldout, rel=1e-9)


def test_divergence_is_reported(tiny_ds):
    train_set, _ = tiny_ds.train_test()
    bad = train_set.subset(np.arange(len(train_set)))
    bad.features = bad.features.copy()
    bad.features[0, 0, 0, 0] = np.inf
    with pytest.raises(TrainingDiverged) as info:
        train(build_model(TINY_MODEL), bad, None, TrainConfig(batch_size=len(bad), epochs=2))
    assert info.value.record.steps == 0


def test_train_rejects_mismatched_features(tiny_ds):
    train_set, _ = tiny_ds.train_test()
    model = build_model(ModelConfig(width=4, input_size=(100, 64)))
    with pytest.raises(ContractError):
        train(model, train_set, None, TrainConfig(epochs=1))
    with pytest.raises(ContractError):
        evaluate(model, train_set)


# positioning error --------------------------------------------------------------


def test_positioning_error_examples():
    assert positioning_error(PolarPoint(0.0, 5.0), PolarPoint(0.0, 5.0)) == 0.0
    assert positioning_error(PolarPoint(0.0, 3.0), PolarPoint(math.pi / 2, 2.0)) == pytest.approx(math.sqrt(13))
    assert positioning_error(PolarPoint(0.0, 2.0), PolarPoint(math.pi, 2.0)) == pytest.approx(4.0)
    # same angle, different range: plain range difference
    assert positioning_error(np.array([[7.0, 1.1]]), np.array([[4.0, 1.1]]))[0] == pytest.approx(3.0)


polar = st.tuples(st.floats(1e-3, 20.0), st.floats(-math.pi, math.pi)).map(lambda t: PolarPoint(t[1], t[0]))


@settings(deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(polar, polar, polar)
def test_positioning_error_is_a_metric(a, b, c):
    ab, ba = positioning_error(a, b), positioning_error(b, a)
    assert ab == pytest.approx(ba, abs=1e-12)
    assert positioning_error(a, c) <= ab + positioning_error(b, c) + 1e-9
    assert positioning_error(a, a) == 0.0


def test_vectorized_error_matches_points():
    gen = np.random.default_rng(2)
    est = np.stack([gen.uniform(2, 10, 50), gen.uniform(0.5, 2.6, 50)], axis=1)
    tru = np.stack([gen.uniform(2, 10, 50), gen.uniform(0.5, 2.6, 50)], axis=1)
    vec = positioning_error(est, tru)
    for i in range(50):
        p = positioning_error(PolarPoint(est[i, 1], est[i, 0]), PolarPoint(tru[i, 1], tru[i, 0]))
        assert vec[i] == pytest.approx(p, rel=1e-14)


# evaluation ---------------------------------------------------------------------


def test_perfect_oracle_has_zero_error(tiny_ds):
    _, test_set = tiny_ds.train_test()
    report = evaluate(LabelOracle(test_set), test_set, batch_size=3)
    assert np.max(report.errors) < 1e-12


def test_constant_center_predictor_matches_quadrature():
    s = ScenarioConfig()
    (r0, r1), (a0, a1) = s.r_range, s.eta_range
    rc, ac = (r0 + r1) / 2, (a0 + a1) / 2
    # midpoint quadrature over the uniform (range, angle) rectangle
    r, a = np.meshgrid(np.linspace(r0, r1, 2001)[:-1] + (r1 - r0) / 4000, np.linspace(a0, a1, 2001)[:-1] + (a1 - a0) / 4000)
    expected = float(np.mean(np.hypot(r * np.cos(a) - rc * np.cos(ac), r * np.sin(a) - rc * np.sin(ac))))
    gen = np.random.default_rng(3)
    truth = np.stack([gen.uniform(r0, r1, 20_000), gen.uniform(a0, a1, 20_000)], axis=1)
    report = EvalReport(positioning_error(np.tile([rc, ac], (20_000, 1)), truth))
    assert report.mean == pytest.approx(expected, rel=0.02)


def test_report_statistics():
    r = EvalReport([1.0, 2.0, 3.0])
    assert (r.mean, r.median) == (2.0, 2.0)
    assert r.rmse == pytest.approx(math.sqrt(14 / 3))
    assert r.mean_db == pytest.approx(10 * math.log10(2))
    assert to_db(1.0) == 0.0 and to_db(0.0) == -math.inf
    for bad in ([], [-1.0], [math.nan]):
        with pytest.raises(DomainError):
            EvalReport(bad)


# CDF --------------------------------------------------------------------------


def test_cdf_examples():
    assert cdf([3.0, 1.0, 2.0]) == [(1.0, 1 / 3), (2.0, 2 / 3), (3.0, 1.0)]
    assert cdf([1.0, 1.0, 2.0]) == [(1.0, 2 / 3), (2.0, 1.0)]
    assert cdf([0.5]) == [(0.5, 1.0)]
    with pytest.raises(DomainError):
        cdf([])


def test_cdf_close_to_true_distribution():
    gen = np.random.default_rng(4)
    x = gen.exponential(1.0, 5000)
    values, probs = map(np.array, zip(*cdf(x)))
    ks = np.max(np.abs(probs - (1 - np.exp(-values))))
    assert ks < 1.36 / math.sqrt(5000)  # 5% KS critical value


# dB gaps ------------------------------------------------------------------------


def test_db_gap_examples():
    a, b = EvalReport([0.8]), EvalReport([1.0])
    assert db_gap(a, b) == pytest.approx(0.969, abs=1e-3)
    assert db_gap(a, a) == 0.0
    assert db_gap(EvalReport([1.0]), EvalReport([10.0])) == pytest.approx(10.0)
    assert db_gap(b, a) == pytest.approx(-db_gap(a, b))
    with pytest.raises(UndefinedGapError):
        db_gap(EvalReport([0.0]), b)


def test_compare_rows():
    rows = compare([EvalReport([1.0, 1.0]), EvalReport([2.0, 4.0])], ["a", "b"])
    assert rows[0]["gap_mean_db"] == 0.0
    assert rows[1]["gap_mean_db"] == pytest.approx(10 * math.log10(3))
    with pytest.raises(DomainError):
        compare([EvalReport([1.0])])


# export -------------------------------------------------------------------------


def test_export_roundtrip_and_consistency(tmp_path):
    gen = np.random.default_rng(5)
    report = EvalReport(gen.uniform(0, 3, 200))
    out = export_report(report, tmp_path / "rep")
    back = load_report(out)
    np.testing.assert_allclose(back.errors, report.errors, rtol=1e-8)
    header, rows = read_csv(out / "summary.csv")
    assert header == ["count", "mean_m", "median_m", "rmse_m", "mean_db", "median_db"]
    stats = dict(zip(header, rows[0]))
    assert int(stats["count"]) == 200
    assert stats["mean_m"] == f"{back.mean:.9g}"
    assert stats["median_m"] == f"{back.median:.9g}"
    assert stats["rmse_m"] == f"{back.rmse:.9g}"
    _, cdf_rows = read_csv(out / "cdf.csv")
    assert float(cdf_rows[-1][1]) == 1.0
    export_report(back, tmp_path / "again")
    assert (tmp_path / "again" / "summary.csv").read_bytes() == (out / "summary.csv").read_bytes()


def test_export_rejects_empty(tmp_path):
    with pytest.raises(DomainError):
        export_report(None, tmp_path)
