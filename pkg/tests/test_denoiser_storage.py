import numpy as np
import pytest

from covdenoise.denoiser import (
    DenoiserConfig,
    init_weights,
    load_weights,
    save_weights,
)
from covdenoise.errors import ChecksumError, WeightsFormatError


def make_weights():
    config = DenoiserConfig(
        input_size=5, num_blocks=2, num_filters=3, kernel=3, learning_rate=2e-3,
        batch_size=4, epochs=7, validation_fraction=0.25, seed=99, mode="eigenvectors",
    )
    weights = init_weights(config)
    weights.normalizer = 1.75
    return weights


def test_roundtrip_preserves_tensors_and_config(tmp_path):
    weights = make_weights()
    path = tmp_path / "weights.cdnw"
    save_weights(weights, path)
    loaded = load_weights(path)
    assert loaded.config == weights.config
    assert loaded.normalizer == weights.normalizer
    for got, want in zip(loaded.tensors(), weights.tensors()):
        assert got.shape == want.shape
        assert np.array_equal(got.astype("<f4"), want.astype("<f4"))


def test_second_save_is_byte_identical(tmp_path):
    weights = make_weights()
    first = tmp_path / "a.cdnw"
    second = tmp_path / "b.cdnw"
    save_weights(weights, first)
    save_weights(load_weights(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_truncated_file_fails_checksum(tmp_path):
    weights = make_weights()
    path = tmp_path / "weights.cdnw"
    save_weights(weights, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-9])
    with pytest.raises((ChecksumError, WeightsFormatError)):
        load_weights(path)


def test_corrupted_payload_fails_checksum(tmp_path):
    weights = make_weights()
    path = tmp_path / "weights.cdnw"
    save_weights(weights, path)
    raw = bytearray(path.read_bytes())
    raw[40] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ChecksumError):
        load_weights(path)


def test_unknown_magic_rejected(tmp_path):
    path = tmp_path / "weights.cdnw"
    path.write_bytes(b"CDNWGT99" + b"\x00" * 32)
    with pytest.raises(WeightsFormatError):
        load_weights(path)


def test_no_temp_file_left_behind(tmp_path):
    weights = make_weights()
    path = tmp_path / "weights.cdnw"
    save_weights(weights, path)
    assert [p.name for p in tmp_path.iterdir()] == ["weights.cdnw"]
