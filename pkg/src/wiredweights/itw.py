"""The ``.itw`` weight file.

Layout (little-endian)::

    magic      4 bytes  b"ITW\\x00"
    version    1 byte   (1)
    topology   7 x uint32  n_layers d_model d_ffn vocab_size
                           activation_width weight_width transfer_width
    matrices   embedding, then per layer W_q W_k W_v W_1 W_2 W_3, then head;
               each: uint32 rows, uint32 cols, int32 scale_exp,
               ceil(rows*cols/2) bytes of 4-bit two's-complement values,
               two per byte, low nibble first (odd tail padded with 0)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import LAYER_MATRICES, LayerWeights, ModelBundle, QuantizedWeightMatrix, TransformerTopology

MAGIC = b"ITW\x00"
VERSION = 1
_TOPO = struct.Struct("<7I")
_MAT = struct.Struct("<IIi")


class WeightFileError(ValueError):
    pass


class BadMagicError(WeightFileError):
    pass


class VersionMismatchError(WeightFileError):
    pass


class TruncatedFileError(WeightFileError):
    pass


class NibbleWidthError(WeightFileError):
    """Weight width does not fit a 4-bit nibble."""


def pack_nibbles(values) -> bytes:
    v = np.asarray(values, dtype=np.int64).ravel()
    if v.size and (v.min() < -8 or v.max() > 7):
        raise NibbleWidthError("values outside [-8, 7] cannot be packed into nibbles")
    nib = (v & 0xF).astype(np.uint8)
    if nib.size % 2:
        nib = np.append(nib, np.uint8(0))
    return (nib[0::2] | (nib[1::2] << 4)).tobytes()


def unpack_nibbles(data: bytes, count: int) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    nib = np.empty(b.size * 2, dtype=np.int64)
    nib[0::2] = b & 0xF
    nib[1::2] = b >> 4
    nib = nib[:count]
    return np.where(nib >= 8, nib - 16, nib)


def dumps(bundle: ModelBundle) -> bytes:
    t = bundle.topology
    if t.weight_width > 4:
        raise NibbleWidthError(f"weight_width={t.weight_width} does not fit the 4-bit packed format")
    parts = [MAGIC, bytes([VERSION]),
             _TOPO.pack(t.n_layers, t.d_model, t.d_ffn, t.vocab_size,
                        t.activation_width, t.weight_width, t.transfer_width)]
    for _, m in bundle.all_matrices():
        parts.append(_MAT.pack(m.rows, m.cols, m.scale_exp))
        parts.append(pack_nibbles(m.values))
    return b"".join(parts)


def loads(data: bytes) -> ModelBundle:
    if len(data) < len(MAGIC) or data[:4] != MAGIC:
        raise BadMagicError("not an .itw file (bad magic)")
    pos = 4
    if len(data) < pos + 1:
        raise TruncatedFileError("file ends before version byte")
    if data[pos] != VERSION:
        raise VersionMismatchError(f"unsupported .itw version {data[pos]} (expected {VERSION})")
    pos += 1

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedFileError(f"file truncated at byte {len(data)} (needed {pos + n})")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    fields = _TOPO.unpack(take(_TOPO.size))
    if fields[5] > 4:
        raise NibbleWidthError(f"header declares weight_width={fields[5]}, packed format holds at most 4")
    topo = TransformerTopology(*fields)

    def matrix():
        rows, cols, scale_exp = _MAT.unpack(take(_MAT.size))
        n = rows * cols
        vals = unpack_nibbles(take((n + 1) // 2), n).reshape(rows, cols)
        return QuantizedWeightMatrix(vals, scale_exp, topo.weight_width)

    embedding = matrix()
    layers = tuple(LayerWeights(**{n: matrix() for n in LAYER_MATRICES}) for _ in range(topo.n_layers))
    head = matrix()
    if pos != len(data):
        raise WeightFileError(f"{len(data) - pos} trailing bytes after head matrix")
    return ModelBundle(topo, layers, embedding, head)


def save_bundle(bundle: ModelBundle, path) -> None:
    Path(path).write_bytes(dumps(bundle))


def load_bundle(path) -> ModelBundle:
    return loads(Path(path).read_bytes())
