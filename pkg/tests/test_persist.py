import json
import struct

import numpy as np
import pytest

from chadkit.data import NormalizationStats
from chadkit.errors import DataError
from chadkit.model import ChadModel, ModelConfig
from chadkit.persist import FORMAT_VERSION, load_model, save_model


@pytest.fixture
def model_and_stats(small_schema):
    model = ChadModel(small_schema, ModelConfig(encoder_sizes=(10, 5)),
                      np.random.default_rng(21))
    stats = NormalizationStats(np.zeros(4), np.ones(4) * 2.0)
    return model, stats


class TestRoundTrip:
    def test_bitwise_parameter_round_trip(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        loaded, loaded_stats = load_model(path)
        orig = model.params()
        again = loaded.params()
        assert set(orig) == set(again)
        for key in orig:
            assert np.array_equal(orig[key], again[key]), key
        assert np.array_equal(stats.mins, loaded_stats.mins)
        assert np.array_equal(stats.maxs, loaded_stats.maxs)
        assert loaded.schema.hash() == model.schema.hash()

    def test_saving_twice_is_byte_identical(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        p1, p2 = tmp_path / "a.chad", tmp_path / "b.chad"
        save_model(p1, model, stats)
        save_model(p2, model, stats)
        assert p1.read_bytes() == p2.read_bytes()

    def test_scores_survive_round_trip(self, tmp_path, model_and_stats,
                                       small_dataset):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        loaded, _ = load_model(path)
        a = model.score_records(small_dataset.cat, small_dataset.cont)
        b = loaded.score_records(small_dataset.cat, small_dataset.cont)
        assert np.array_equal(a, b)


class TestFileLayout:
    def test_header_prefix_and_payload_alignment(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        blob = path.read_bytes()
        (header_len,) = struct.unpack("<Q", blob[:8])
        header = json.loads(blob[8:8 + header_len].decode())
        assert header["format_version"] == FORMAT_VERSION
        assert header["schema_hash"] == model.schema.hash()
        total = sum(int(np.prod(e["shape"])) for e in header["params"])
        assert len(blob) - 8 - header_len == total * 8

    def test_payload_is_little_endian_float64(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        blob = path.read_bytes()
        (header_len,) = struct.unpack("<Q", blob[:8])
        header = json.loads(blob[8:8 + header_len].decode())
        first = header["params"][0]
        count = int(np.prod(first["shape"]))
        raw = np.frombuffer(blob[8 + header_len:8 + header_len + count * 8],
                            dtype="<f8")
        assert np.array_equal(raw.reshape(first["shape"]),
                              model.params()[first["name"]])


class TestCorruptFiles:
    def test_truncated_header(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        (tmp_path / "cut.chad").write_bytes(path.read_bytes()[:12])
        with pytest.raises(DataError, match="truncated"):
            load_model(tmp_path / "cut.chad")

    def test_truncated_payload(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        blob = path.read_bytes()
        (tmp_path / "cut.chad").write_bytes(blob[:len(blob) - 16])
        with pytest.raises(DataError, match="truncated"):
            load_model(tmp_path / "cut.chad")

    def test_unsupported_version(self, tmp_path, model_and_stats):
        model, stats = model_and_stats
        path = tmp_path / "m.chad"
        save_model(path, model, stats)
        blob = bytearray(path.read_bytes())
        (header_len,) = struct.unpack("<Q", bytes(blob[:8]))
        header = json.loads(bytes(blob[8:8 + header_len]).decode())
        header["format_version"] = 999
        new_header = json.dumps(header, sort_keys=True,
                                separators=(",", ":")).encode()
        out = struct.pack("<Q", len(new_header)) + new_header + bytes(
            blob[8 + header_len:])
        (tmp_path / "v999.chad").write_bytes(out)
        with pytest.raises(DataError, match="version"):
            load_model(tmp_path / "v999.chad")
