import json
import struct

import numpy as np
import pytest

from tga.checkpoint import (
    MAGIC,
    Checkpoint,
    from_bytes,
    load_checkpoint,
    save_checkpoint,
    to_bytes,
)
from tga.errors import BadMagicError, CheckpointError, TruncatedPayloadError, VersionMismatchError


def random_checkpoint(seed=0):
    rng = np.random.default_rng(seed)
    return Checkpoint(
        tensors={"b.first": rng.normal(size=(3, 4)), "a.second": rng.normal(size=(1, 5)), "empty": np.zeros((0, 2))},
        config={"lr": 1e-3, "nested": {"k": [1, 2]}},
        seed=seed,
        meta={"kind": "pretext", "loss_trace": [-1.5, -1.6]},
    )


def rewrite_header(blob: bytes, edit) -> bytes:
    (hlen,) = struct.unpack("<I", blob[4:8])
    header = json.loads(blob[8 : 8 + hlen])
    edit(header)
    raw = json.dumps(header).encode()
    return blob[:4] + struct.pack("<I", len(raw)) + raw + blob[8 + hlen :]


class TestRoundTrip:
    def test_file_roundtrip_bitwise(self, tmp_path):
        ckpt = random_checkpoint()
        save_checkpoint(ckpt, tmp_path / "c.tga")
        back = load_checkpoint(tmp_path / "c.tga")
        assert back.equals(ckpt)
        assert list(back.tensors) == ["b.first", "a.second", "empty"]

    def test_bytes_stable(self):
        assert to_bytes(random_checkpoint(4)) == to_bytes(random_checkpoint(4))

    def test_layout(self):
        blob = to_bytes(random_checkpoint())
        assert blob[:4] == MAGIC
        (hlen,) = struct.unpack("<I", blob[4:8])
        assert len(blob) - 8 - hlen == (12 + 5) * 8
        payload = np.frombuffer(blob[8 + hlen :], dtype="<f8")
        np.testing.assert_array_equal(payload[:12], random_checkpoint().tensors["b.first"].ravel())

    def test_special_values_survive(self):
        ckpt = Checkpoint({"w": np.array([[np.inf, -0.0, 5e-324]])})
        assert from_bytes(to_bytes(ckpt)).tensors["w"].tobytes() == ckpt.tensors["w"].tobytes()

    def test_equals_detects_single_bit(self):
        a, b = random_checkpoint(), random_checkpoint()
        b.tensors["b.first"][0, 0] = np.nextafter(b.tensors["b.first"][0, 0], np.inf)
        assert not a.equals(b)


class TestNegativeControls:
    def test_bad_magic(self):
        blob = bytearray(to_bytes(random_checkpoint()))
        blob[0:4] = b"TGA2"
        with pytest.raises(BadMagicError):
            from_bytes(bytes(blob))

    def test_version_mismatch(self):
        blob = rewrite_header(to_bytes(random_checkpoint()), lambda h: h.update(format_version=99))
        with pytest.raises(VersionMismatchError):
            from_bytes(blob)

    @pytest.mark.parametrize("cut", [1, 8, 100])
    def test_truncated_payload(self, cut):
        with pytest.raises(TruncatedPayloadError):
            from_bytes(to_bytes(random_checkpoint())[:-cut])

    def test_payload_longer_than_header(self):
        with pytest.raises(TruncatedPayloadError):
            from_bytes(to_bytes(random_checkpoint()) + b"\0" * 8)

    def test_truncated_inside_header(self):
        with pytest.raises(TruncatedPayloadError):
            from_bytes(to_bytes(random_checkpoint())[:20])

    def test_errors_are_distinct(self):
        kinds = {BadMagicError, VersionMismatchError, TruncatedPayloadError}
        assert len({k.__name__ for k in kinds}) == 3
        assert all(issubclass(k, CheckpointError) for k in kinds)

    def test_rejects_non_matrix(self):
        with pytest.raises(CheckpointError):
            to_bytes(Checkpoint({"v": np.zeros(3)}))
