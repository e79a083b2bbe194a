"""Portable little-endian weights file.

Layout::

    b"MLPW"                 magic
    u8                      format version (1)
    u8                      layer count L
    u16 * (L + 1)           widths H0..HL
    f32 * 2                 target codec range lo, hi (0, 0 = no codec)
    f32 * ...               per layer, row-major H[k] x (H[k-1] + 1)
    u32                     CRC-32 of every preceding byte

Only weights travel; momentum buffers come back zeroed and every layer is
sigmoid.
"""

import struct
import zlib

import numpy as np

from .codec import TargetCodec
from .data import atomic_write
from .errors import IntegrityError
from .mlp import MlpNetwork

MAGIC = b"MLPW"
VERSION = 1
_LE_F32 = np.dtype("<f4")


def encode_weights(net, codec=None):
    if any(act != "sigmoid" for act in net.activations):
        raise ValueError("weights file only stores all-sigmoid networks")
    if net.n_layers > 0xFF:
        raise ValueError("too many layers for the weights file format")
    lo, hi = (0.0, 0.0) if codec is None else (codec.t_min, codec.t_max)
    parts = [
        MAGIC,
        struct.pack("<BB", VERSION, net.n_layers),
        struct.pack(f"<{len(net.widths)}H", *net.widths),
        struct.pack("<ff", lo, hi),
    ]
    parts += [w.astype(_LE_F32).tobytes(order="C") for w in net.weights]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_weights(blob):
    """Inverse of :func:`encode_weights`; returns ``(net, codec_or_None)``."""
    blob = bytes(blob)
    if len(blob) < 4 + 2 + 4 + 8 + 4:
        raise IntegrityError(f"weights file truncated ({len(blob)} bytes)")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise IntegrityError("weights file checksum mismatch")
    if body[:4] != MAGIC:
        raise IntegrityError(f"bad magic {body[:4]!r}")
    version, n_layers = struct.unpack_from("<BB", body, 4)
    if version != VERSION:
        raise IntegrityError(f"unsupported weights file version {version}")
    offset = 6
    widths = struct.unpack_from(f"<{n_layers + 1}H", body, offset)
    offset += 2 * (n_layers + 1)
    lo, hi = struct.unpack_from("<ff", body, offset)
    offset += 8

    weights = []
    for k in range(1, n_layers + 1):
        shape = (widths[k], widths[k - 1] + 1)
        nbytes = 4 * shape[0] * shape[1]
        chunk = body[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise IntegrityError(f"payload too short for layer {k}")
        weights.append(np.frombuffer(chunk, dtype=_LE_F32).astype(np.float32).reshape(shape))
        offset += nbytes
    if offset != len(body):
        raise IntegrityError(f"{len(body) - offset} trailing bytes after payload")
    try:
        net = MlpNetwork(widths, weights, [np.zeros_like(w) for w in weights])
        codec = None if lo == 0.0 and hi == 0.0 else TargetCodec(lo, hi)
    except ValueError as exc:
        raise IntegrityError(f"invalid content in weights file: {exc}") from None
    return net, codec


def save_weights(path, net, codec=None):
    atomic_write(path, encode_weights(net, codec))


def load_weights(path):
    with open(path, "rb") as fh:
        return decode_weights(fh.read())
