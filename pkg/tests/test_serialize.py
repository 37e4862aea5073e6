"""Deterministic artifact I/O: byte stability, round trips, error wrapping."""

import json

import numpy as np
import pytest

from marketstates.errors import DataError
from marketstates.serialize import (
    format_float,
    load_arrays,
    load_state_model,
    read_json,
    save_arrays,
    save_state_model,
    sha256_file,
    write_csv,
    write_json,
)
from marketstates.states import StateModel


def test_format_float_survives_round_trip():
    values = [0.1, 1 / 3, 1e-17, -2.5e300, 0.0, float(np.float64(0.30000000000000004))]
    for v in values:
        assert float(format_float(v)) == v


def test_write_json_is_byte_stable_and_sorted(tmp_path):
    payload = {"b": [1, 2], "a": {"z": 0.1, "y": None}}
    p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
    write_json(p1, payload)
    write_json(p2, {"a": {"y": None, "z": 0.1}, "b": [1, 2]})  # same content, other order
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_text().startswith('{\n  "a"')  # keys sorted
    assert read_json(p1) == payload


def test_read_json_wraps_errors(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        read_json(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(DataError, match="not valid JSON"):
        read_json(bad)


def test_write_csv_floats_are_lossless(tmp_path):
    path = tmp_path / "rows.csv"
    rows = [(1, "d0001", 0.1 + 0.2), (2, "d0002", np.float64(1 / 3))]
    write_csv(path, ["epoch", "date", "value"], rows)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,date,value"
    for line, (_, _, value) in zip(lines[1:], rows):
        assert float(line.split(",")[2]) == float(value)


def test_save_arrays_round_trip_and_byte_identity(tmp_path):
    rng = np.random.default_rng(7)
    arrays = {
        "values": rng.standard_normal((4, 3, 3)),
        "labels": np.array(["aa", "bb", "cc"]),
        "epsilon": np.array(0.5),
    }
    p1, p2 = tmp_path / "one.npz", tmp_path / "two.npz"
    save_arrays(p1, **arrays)
    save_arrays(p2, **arrays)
    assert p1.read_bytes() == p2.read_bytes()  # no timestamps inside

    back = load_arrays(p1)
    assert sorted(back) == sorted(arrays)
    for name in arrays:
        np.testing.assert_array_equal(back[name], np.asarray(arrays[name]))
    assert back["values"].dtype == np.float64


def test_load_arrays_wraps_errors(tmp_path):
    with pytest.raises(DataError, match="cannot read"):
        load_arrays(tmp_path / "absent.npz")
    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"this is not a zip archive")
    with pytest.raises(DataError):
        load_arrays(junk)


def test_sha256_file_matches_content_not_name(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    a.write_bytes(b"payload")
    b.write_bytes(b"payload")
    assert sha256_file(a) == sha256_file(b)
    b.write_bytes(b"payload!")
    assert sha256_file(a) != sha256_file(b)


def toy_model(k=2, n_epochs=5, with_averages=True):
    rng = np.random.default_rng(3)
    averages = [rng.standard_normal((3, 3)) for _ in range(k)] if with_averages else []
    return StateModel(
        k=k,
        epsilon=0.5,
        state_of=np.array([1, 1, 2, 2, 1]),
        state_mean_corr=[0.2, 0.8],
        avg_corr_matrix=averages,
        transition_counts=np.array([[1, 1], [1, 1]]),
        labels=["x", "y", "z"],
        epoch_dates=[f"d{i}" for i in range(n_epochs)],
    )


def test_state_model_round_trip(tmp_path):
    model = toy_model()
    path = tmp_path / "model.json"
    save_state_model(model, path)
    assert (tmp_path / "model_avg_corr.npz").exists()
    back = load_state_model(path)
    assert back.k == model.k and back.epsilon == model.epsilon
    np.testing.assert_array_equal(back.state_of, model.state_of)
    assert back.state_mean_corr == model.state_mean_corr
    np.testing.assert_array_equal(back.transition_counts, model.transition_counts)
    assert back.labels == model.labels and back.epoch_dates == model.epoch_dates
    for got, want in zip(back.avg_corr_matrix, model.avg_corr_matrix):
        np.testing.assert_array_equal(got, want)


def test_state_model_without_sidecar(tmp_path):
    path = tmp_path / "model.json"
    save_state_model(toy_model(with_averages=False), path)
    assert not (tmp_path / "model_avg_corr.npz").exists()
    assert load_state_model(path).avg_corr_matrix == []


def test_state_model_missing_field_is_data_error(tmp_path):
    path = tmp_path / "model.json"
    save_state_model(toy_model(), path)
    raw = json.loads(path.read_text())
    del raw["transition_counts"]
    path.write_text(json.dumps(raw))
    with pytest.raises(DataError, match="missing state-model field"):
        load_state_model(path)
