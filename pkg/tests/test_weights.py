import struct
import zlib

import numpy as np
import pytest

from mcumlp.codec import TargetCodec
from mcumlp.errors import IntegrityError
from mcumlp.mlp import init_weights, predict
from mcumlp.weights import MAGIC, decode_weights, encode_weights, load_weights, save_weights


def test_layout():
    net = init_weights((2, 3, 1), 0)
    blob = encode_weights(net)
    assert blob[:4] == MAGIC
    assert struct.unpack_from("<BB", blob, 4) == (1, 2)
    assert struct.unpack_from("<3H", blob, 6) == (2, 3, 1)
    assert struct.unpack_from("<ff", blob, 12) == (0.0, 0.0)
    n_weights = 3 * 3 + 1 * 4
    assert len(blob) == 4 + 2 + 6 + 8 + 4 * n_weights + 4
    assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(blob[:-4])
    first = np.frombuffer(blob, "<f4", count=9, offset=20).reshape(3, 3)
    np.testing.assert_array_equal(first, net.weights[0])


def test_round_trip_with_codec(tmp_path):
    net = init_weights((3, 5, 2), 4)
    codec = TargetCodec(-0.5, 0.5)
    save_weights(tmp_path / "w.mlpw", net, codec)
    back, back_codec = load_weights(tmp_path / "w.mlpw")
    assert back.widths == net.widths
    assert back_codec == codec
    assert all(not m.any() for m in back.momentum)


def test_identity_codec_round_trips_as_none():
    _, codec = decode_weights(encode_weights(init_weights((2, 2, 1))))
    assert codec is None


def test_forward_bit_identical_after_round_trip():
    rng = np.random.default_rng(0)
    net = init_weights((4, 7, 3), 1)
    back, _ = decode_weights(encode_weights(net))
    x = rng.standard_normal((4, 6)).astype(np.float32)
    assert predict(back, x).tobytes() == predict(net, x).tobytes()


@pytest.mark.parametrize("cut", [0, 3, 10, -1])
def test_truncation_detected(cut):
    blob = encode_weights(init_weights((2, 2, 1)))
    with pytest.raises(IntegrityError):
        decode_weights(blob[:cut])


def test_bad_magic_with_valid_crc():
    body = b"XXXX" + encode_weights(init_weights((2, 2, 1)))[4:-4]
    with pytest.raises(IntegrityError, match="magic"):
        decode_weights(body + struct.pack("<I", zlib.crc32(body)))


def test_bad_version_with_valid_crc():
    blob = bytearray(encode_weights(init_weights((2, 2, 1)))[:-4])
    blob[4] = 2
    with pytest.raises(IntegrityError):
        decode_weights(bytes(blob) + struct.pack("<I", zlib.crc32(bytes(blob))))


def test_payload_length_mismatch_with_valid_crc():
    body = encode_weights(init_weights((2, 2, 1)))[:-4] + b"\0\0\0\0"
    with pytest.raises(IntegrityError):
        decode_weights(body + struct.pack("<I", zlib.crc32(body)))


def test_every_single_byte_flip_detected():
    blob = encode_weights(init_weights((3, 4, 2), 2))
    for i in range(len(blob)):
        bad = bytearray(blob)
        bad[i] ^= 0x5A
        with pytest.raises(IntegrityError):
            decode_weights(bytes(bad))


def test_linear_layers_refused():
    with pytest.raises(ValueError):
        encode_weights(init_weights((2, 1), activations=("linear",)))
