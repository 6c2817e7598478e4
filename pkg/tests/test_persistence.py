import json

import numpy as np
import pytest

from expand_sparsify.approximator import fit_readout, predict_batch, prune_dead
from expand_sparsify.exceptions import ChecksumError, ModelFileError, VersionError
from expand_sparsify.persistence import describe, load_model, read_header, save_model
from expand_sparsify.projection import sample_projection
from expand_sparsify.sparsify import estimate_thresholds


@pytest.fixture(scope="module")
def model():
    r = np.random.default_rng(0)
    W = sample_projection(8, 300, seed=11)
    X = r.normal(size=(400, 8))
    tau = estimate_thresholds(W, X, 10, source_seed=11)
    return fit_readout(W, tau, X[:100], r.normal(size=100))


@pytest.fixture(scope="module")
def probes():
    return np.random.default_rng(1).normal(size=(100, 8))


@pytest.mark.parametrize("encoding", ["binary", "decimal"])
def test_round_trip_bit_exact(model, probes, tmp_path, encoding):
    path = tmp_path / f"m.{encoding}"
    save_model(model, path, encoding=encoding)
    back = load_model(path)
    a, ea = predict_batch(model, probes, fallback="global_mean")
    b, eb = predict_batch(back, probes, fallback="global_mean")
    assert a.tobytes() == b.tobytes() and np.array_equal(ea, eb)
    assert back.W.rows.tobytes() == model.W.rows.tobytes()
    assert np.array_equal(back.dead_mask, model.dead_mask) and np.array_equal(back.counts, model.counts)
    assert back.tau.k == 10 and back.tau.source_seed == 11


def test_binary_and_decimal_agree(model, probes, tmp_path):
    save_model(model, tmp_path / "b", "binary")
    save_model(model, tmp_path / "d", "decimal")
    a, _ = predict_batch(load_model(tmp_path / "b"), probes, fallback="global_mean")
    b, _ = predict_batch(load_model(tmp_path / "d"), probes, fallback="global_mean")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=0)


def test_multi_output_and_pruned(tmp_path):
    r = np.random.default_rng(2)
    W = sample_projection(5, 500, seed=3)
    tau = estimate_thresholds(W, r.normal(size=(2000, 5)), 2)
    X = r.normal(size=(30, 5))
    model = fit_readout(W, tau, X, np.eye(3)[r.integers(0, 3, size=30)], exclude_dead=True)
    pruned, removed = prune_dead(model, X)
    assert removed > 0
    save_model(pruned, tmp_path / "p")
    back = load_model(tmp_path / "p")
    assert np.array_equal(back.W.row_ids, pruned.W.row_ids) and back.exclude_dead
    a, _ = predict_batch(pruned, X, fallback="global_mean")
    b, _ = predict_batch(back, X, fallback="global_mean")
    assert a.tobytes() == b.tobytes()
    assert describe(back)["pruned"] is True


def test_truncated_file(model, tmp_path):
    path = tmp_path / "m"
    save_model(model, path)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(ChecksumError):
        load_model(path)


def test_corrupted_payload(model, tmp_path):
    path = tmp_path / "m"
    save_model(model, path)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_model(path)


def test_version_mismatch(model, tmp_path):
    path = tmp_path / "m"
    save_model(model, path)
    path.write_bytes(path.read_bytes().replace(b"EASMODEL 1\n", b"EASMODEL 2\n", 1))
    with pytest.raises(VersionError):
        load_model(path)


def test_not_a_model_file(tmp_path):
    path = tmp_path / "x"
    path.write_text("hello\n")
    with pytest.raises(ModelFileError):
        load_model(path)
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "missing")


def test_header(model, tmp_path):
    path = tmp_path / "m"
    save_model(model, path, encoding="decimal")
    header = read_header(path)
    assert (header["n"], header["d"], header["k"], header["encoding"]) == (8, 300, 10, "decimal")
    assert header["dist"] == "gaussian" and header["seed"] == 11
    assert not (tmp_path / "m.tmp").exists()


def test_unknown_encoding(model, tmp_path):
    with pytest.raises(ModelFileError):
        save_model(model, tmp_path / "m", encoding="hex")


def test_describe(model):
    info = describe(model)
    assert info["n"] == 8 and info["d"] == 300 and info["pruned"] is False
    json.dumps(info)
