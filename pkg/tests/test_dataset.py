import math
import struct
import zlib

import numpy as np
import pytest

from nfpos import rng, tensorio
from nfpos.dataset import (
    ScenarioConfig,
    generate_dataset,
    generate_sample,
    load_dataset,
    sample_ue_position,
    split,
)
from nfpos.errors import ConfigError, CorruptionError, DomainError, FormatError

SMALL = ScenarioConfig(n_train=8, n_test=2, base_seed=11)


def test_tensor_roundtrip(tmp_path):
    arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4) / 7
    name, crc = tensorio.write_tensor(tmp_path / "a.bin", arr)
    assert name == "float32"
    back = tensorio.read_tensor(tmp_path / "a.bin", checksum=crc)
    np.testing.assert_array_equal(back, arr)
    seeds = np.array([1, 2**63 + 5], dtype=np.uint64)
    name, crc = tensorio.write_tensor(tmp_path / "s.bin", seeds)
    assert name == "uint64"
    np.testing.assert_array_equal(tensorio.read_tensor(tmp_path / "s.bin"), seeds)


def test_tensor_header_layout(tmp_path):
    arr = np.ones((2, 3), dtype=np.float32)
    tensorio.write_tensor(tmp_path / "a.bin", arr)
    data = (tmp_path / "a.bin").read_bytes()
    assert data[:4] == b"NFPD"
    assert struct.unpack_from("<II", data, 4) == (1, 2)
    assert struct.unpack_from("<2Q", data, 12) == (2, 3)
    payload = data[28:]
    assert payload == arr.astype("<f4").tobytes()


def test_tensor_truncated(tmp_path):
    p = tmp_path / "a.bin"
    tensorio.write_tensor(p, np.ones((4, 4), dtype=np.float32))
    p.write_bytes(p.read_bytes()[:-3])
    with pytest.raises(CorruptionError, match="a.bin"):
        tensorio.read_tensor(p, dtype="float32")
    with pytest.raises(CorruptionError, match="a.bin"):
        tensorio.read_tensor(p)


def test_tensor_foreign_endian_and_version(tmp_path):
    p = tmp_path / "be.bin"
    p.write_bytes(b"DPFN" + struct.pack(">II", 1, 1) + struct.pack(">Q", 1) + struct.pack(">f", 1.0))
    with pytest.raises(FormatError, match="big-endian"):
        tensorio.read_tensor(p)
    p.write_bytes(b"NFPD" + struct.pack("<II", 2, 1) + struct.pack("<Q", 1) + struct.pack("<f", 1.0))
    with pytest.raises(FormatError, match="version"):
        tensorio.read_tensor(p)
    p.write_bytes(b"XXXX" + b"\0" * 20)
    with pytest.raises(FormatError):
        tensorio.read_tensor(p)


def test_tensor_checksum_mismatch(tmp_path):
    p = tmp_path / "a.bin"
    _, crc = tensorio.write_tensor(p, np.ones(8, dtype=np.float32))
    data = bytearray(p.read_bytes())
    data[-1] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(CorruptionError, match="CRC"):
        tensorio.read_tensor(p, checksum=crc)


def test_manifest_roundtrip(tmp_path):
    tensorio.write_manifest(tmp_path / "m", {"a": {"x": 1.5, "y": (1, 2), "z": "hi"}})
    m = tensorio.read_manifest(tmp_path / "m")
    assert m == {"a": {"x": "1.5", "y": "1, 2", "z": "hi"}}
    assert tensorio.parse_ints(m["a"]["y"]) == (1, 2)


def test_sample_position_degenerate_and_moments():
    gen = rng.stream(0)
    p = sample_ue_position(gen, (3.0, 3.0), (1.0, 1.0))
    assert (p.range, p.angle) == (3.0, 1.0)
    gen = rng.stream(1)
    n = 100_000
    draws = [sample_ue_position(gen, (2.0, 10.0), (math.radians(30), math.radians(150))) for _ in range(n)]
    r = np.array([d.range for d in draws])
    eta = np.degrees([d.angle for d in draws])
    assert abs(r.mean() - 6.0) < 3 * (8 / math.sqrt(12)) / math.sqrt(n)
    assert abs(eta.mean() - 90.0) < 3 * (120 / math.sqrt(12)) / math.sqrt(n)
    a = [sample_ue_position(rng.stream(5), (2, 10), (0, 1)) for _ in range(3)]
    b = [sample_ue_position(rng.stream(5), (2, 10), (0, 1)) for _ in range(3)]
    assert a == b


def test_label_coverage():
    gen = rng.stream(2)
    pts = [sample_ue_position(gen, (2.0, 10.0), (0.5, 2.6)) for _ in range(10_000)]
    r = np.array([p.range for p in pts])
    eta = np.array([p.angle for p in pts])
    assert r.min() - 2.0 < 0.08 and 10.0 - r.max() < 0.08
    assert eta.min() - 0.5 < 0.021 and 2.6 - eta.max() < 0.021


def test_scenario_defaults():
    s = ScenarioConfig()
    assert s.array.num_elements == 64 and s.array.radius == 1.0
    assert s.array.frequency == pytest.approx(3.5e9)
    assert s.r_range == (2.0, 10.0)
    assert s.eta_range == (math.radians(30), math.radians(150))
    assert (s.n_train, s.n_test) == (8000, 2000)
    assert s.feature_shape == (2, 64, 64)
    with pytest.raises(ConfigError):
        ScenarioConfig(feature_kind="raw")


def test_generate_small_dataset(tmp_path):
    ds = generate_dataset(SMALL, tmp_path / "d")
    assert len(ds) == 10
    assert ds.features.shape == (10, 2, 64, 64) and ds.features.dtype == np.float32
    m = tensorio.read_manifest(tmp_path / "d" / "manifest")
    assert (m["counts"]["n_train"], m["counts"]["n_test"]) == ("8", "2")
    np.testing.assert_array_equal(ds.seeds, 11 + np.arange(10))
    r, eta = ds.labels[:, 0], ds.labels[:, 1]
    assert np.all((r >= 2) & (r <= 10))
    assert np.all((eta >= np.float32(math.radians(30))) & (eta <= np.float32(math.radians(150))))
    # sample i depends only on base_seed + i
    shifted = ScenarioConfig(n_train=8, n_test=2, base_seed=12)
    planes, label, _, seed = generate_sample(shifted, 0)
    assert seed == 12
    np.testing.assert_array_equal(planes.astype(np.float32), ds.features[1])


def test_generate_deterministic_bytes(tmp_path):
    generate_dataset(SMALL, tmp_path / "a")
    generate_dataset(SMALL, tmp_path / "b")
    for name in ("features.bin", "labels.bin", "scales.bin", "seeds.bin", "manifest"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_csi_dataset_shape():
    ds = generate_dataset(ScenarioConfig(n_train=2, n_test=1, feature_kind="csi", snapshots=50))
    assert ds.features.shape == (3, 2, 50, 64)


def test_save_load_roundtrip(tmp_path):
    ds = generate_dataset(SMALL, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert back.scenario == SMALL
    for name in ("features", "labels", "scales", "seeds"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ds, name))


def test_load_detects_truncation(tmp_path):
    generate_dataset(SMALL, tmp_path / "d")
    p = tmp_path / "d" / "features.bin"
    p.write_bytes(p.read_bytes()[:-100])
    with pytest.raises(CorruptionError, match="features.bin"):
        load_dataset(tmp_path / "d")


def test_load_detects_bitflip(tmp_path):
    generate_dataset(SMALL, tmp_path / "d")
    p = tmp_path / "d" / "labels.bin"
    data = bytearray(p.read_bytes())
    data[40] ^= 1
    p.write_bytes(bytes(data))
    with pytest.raises(CorruptionError, match="labels.bin"):
        load_dataset(tmp_path / "d")


def test_split_contract():
    ds = generate_dataset(SMALL)
    a, b = split(ds, 0.8, seed=3)
    assert (len(a), len(b)) == (8, 2)
    assert set(a.indices).isdisjoint(b.indices)
    assert sorted(set(a.indices) | set(b.indices)) == list(range(10))
    a2, _ = split(ds, 0.8, seed=3)
    np.testing.assert_array_equal(a.indices, a2.indices)
    nine = ds.subset(np.arange(9))
    a, b = split(nine, 0.8, seed=0)
    assert (len(a), len(b)) == (7, 2)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            split(ds, bad)


def test_train_test_uses_scenario_counts():
    ds = generate_dataset(SMALL)
    tr, te = ds.train_test()
    assert (len(tr), len(te)) == (8, 2)
    np.testing.assert_array_equal(tr.features, ds.features[tr.indices])
