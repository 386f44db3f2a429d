import json

import numpy as np
import pytest

from smsrecon import data_io
from smsrecon.errors import DataFormatError


def _read_header_and_payload(path):
    blob = open(path, "rb").read()
    nl = blob.index(b"\n")
    return json.loads(blob[:nl]), blob[nl + 1 :]


class TestArrayFormat:
    def test_zero_scalar_case(self, tmp_path):
        path = tmp_path / "z.smsc"
        data_io.write_array(np.zeros((1, 1), dtype=np.complex64), path)
        header, payload = _read_header_and_payload(path)
        assert header["shape"] == [1, 1]
        assert header["dtype"] == "c64"
        assert payload == b"\x00" * 8

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        x = (rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))).astype(np.complex64)
        path = tmp_path / "x.smsc"
        data_io.write_array(x, path)
        back = data_io.read_array(path)
        assert back.dtype == np.complex64
        assert back.tobytes() == x.tobytes()

    @pytest.mark.parametrize("shape", [(1,), (7,), (2, 2), (3, 4, 5), (2, 1, 3, 2)])
    def test_round_trip_shapes(self, tmp_path, shape):
        rng = np.random.default_rng(hash(shape) % 2**32)
        x = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)
        path = tmp_path / "x.smsc"
        data_io.write_array(x, path)
        assert np.array_equal(data_io.read_array(path), x)

    def test_identity_pattern(self, tmp_path):
        path = tmp_path / "eye.smsc"
        data_io.write_array(np.eye(2, dtype=np.complex64), path)
        assert np.array_equal(data_io.read_array(path), np.eye(2, dtype=np.complex64))

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "t.smsc"
        data_io.write_array(np.ones((2, 2), dtype=np.complex64), path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[: len(blob) - 8])  # 24-byte payload for shape [2,2]
        with pytest.raises(DataFormatError, match="payload"):
            data_io.read_array(path)

    def test_big_endian_rejected(self, tmp_path):
        path = tmp_path / "be.smsc"
        header = {"dtype": "c64", "shape": [1], "layout": "row-major", "byte_order": "big"}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n" + b"\x00" * 8)
        with pytest.raises(DataFormatError, match="byte_order"):
            data_io.read_array(path)

    def test_hand_constructed_vector(self, tmp_path):
        # shape [3], 24-byte payload: values 1+2i, -0.5+0i, 0+1i
        path = tmp_path / "v.smsc"
        header = {"dtype": "c64", "shape": [3], "layout": "row-major", "byte_order": "little"}
        payload = np.array([1 + 2j, -0.5, 1j], dtype="<c8").tobytes()
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n" + payload)
        assert np.array_equal(data_io.read_array(path), np.array([1 + 2j, -0.5, 1j], "<c8"))

    @pytest.mark.parametrize(
        "header",
        [
            {"dtype": "f32", "shape": [1], "layout": "row-major", "byte_order": "little"},
            {"dtype": "c64", "shape": [0], "layout": "row-major", "byte_order": "little"},
            {"dtype": "c64", "shape": [], "layout": "row-major", "byte_order": "little"},
            {"dtype": "c64", "shape": [2], "layout": "column-major", "byte_order": "little"},
            {"dtype": "c64", "shape": [2], "byte_order": "little"},
        ],
    )
    def test_header_invariants_rejected(self, tmp_path, header):
        path = tmp_path / "bad.smsc"
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n" + b"\x00" * 16)
        with pytest.raises(DataFormatError):
            data_io.read_array(path)

    def test_not_json_rejected(self, tmp_path):
        path = tmp_path / "nj.smsc"
        open(path, "wb").write(b"not json at all\n" + b"\x00" * 8)
        with pytest.raises(DataFormatError, match="JSON"):
            data_io.read_array(path)


def _manifest_header(layers, blob_floats, schedule=None):
    return {
        "architecture": "rescnn-t64",
        "layers": layers,
        "schedule": schedule or {"T": 1000, "beta_0": 1e-4, "beta_T": 0.02},
        "blob_bytes": 4 * blob_floats,
    }


class TestWeightManifest:
    def test_single_conv_layer_loads(self, tmp_path):
        # 3x3 kernel, 2 in, 2 out: 3*3*2*2 == 36 floats
        layers = [{"name": "conv", "kind": "conv2d", "shapes": [[2, 2, 3, 3]], "offsets": [0]}]
        blob = np.arange(36, dtype=np.float32)
        path = tmp_path / "w.smsw"
        data_io.write_weights(_manifest_header(layers, 36), blob, path)
        man = data_io.load_weights(path)
        assert man.layer("conv")[0].shape == (2, 2, 3, 3)
        assert np.array_equal(man.layer("conv")[0].ravel(), blob)

    def test_count_mismatch_rejected(self, tmp_path):
        layers = [{"name": "conv", "kind": "conv2d", "shapes": [[2, 2, 3, 3]], "offsets": [0]}]
        blob = np.arange(35, dtype=np.float32)  # one float short
        path = tmp_path / "w.smsw"
        data_io.write_weights(_manifest_header(layers, 35), blob, path)
        with pytest.raises(DataFormatError, match="offset|floats"):
            data_io.load_weights(path)

    def test_overlapping_offsets_rejected(self, tmp_path):
        layers = [
            {"name": "a", "kind": "dense", "shapes": [[2, 2]], "offsets": [0]},
            {"name": "b", "kind": "dense", "shapes": [[2, 2]], "offsets": [8]},
        ]
        blob = np.zeros(6, dtype=np.float32)
        path = tmp_path / "w.smsw"
        data_io.write_weights(_manifest_header(layers, 6), blob, path)
        with pytest.raises(DataFormatError, match="overlap"):
            data_io.load_weights(path)

    def test_unknown_kind_rejected(self, tmp_path):
        layers = [{"name": "a", "kind": "gru", "shapes": [[2]], "offsets": [0]}]
        path = tmp_path / "w.smsw"
        data_io.write_weights(_manifest_header(layers, 2), np.zeros(2, np.float32), path)
        with pytest.raises(DataFormatError, match="kind"):
            data_io.load_weights(path)

    @pytest.mark.parametrize(
        "schedule",
        [
            {"T": 0, "beta_0": 1e-4, "beta_T": 0.02},
            {"T": 10, "beta_0": 0.0, "beta_T": 0.02},
            {"T": 10, "beta_0": 0.03, "beta_T": 0.02},
            {"T": 10, "beta_0": 0.5, "beta_T": 1.0},
        ],
    )
    def test_bad_schedule_rejected(self, tmp_path, schedule):
        layers = [{"name": "a", "kind": "dense", "shapes": [[1]], "offsets": [0]}]
        path = tmp_path / "w.smsw"
        data_io.write_weights(_manifest_header(layers, 1, schedule), np.zeros(1, np.float32), path)
        with pytest.raises(DataFormatError, match="schedule"):
            data_io.load_weights(path)
