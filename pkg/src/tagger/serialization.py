"""Versioned binary model files.

Layout (all integers little-endian)::

    magic        6 bytes   b"LMEOS1"
    version      uint16
    header       uint32 vocab_size, uint32 embed_dim, uint32 hidden_dim,
                 uint8 lookahead, int64 seed
    hyperparams  uint32 length + UTF-8 JSON
    vocabulary   uint32 count, then per token: uint32 length + UTF-8 bytes (id order)
    parameters   float32 blocks E, W, b, U, c_out (row-major)
    checksum     uint32 CRC-32 of every preceding byte
"""

import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np

from lmeos.errors import TaggerError

from . import network
from .model import Hyperparams, TaggerModel
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"LMEOS1"
FORMAT_VERSION = 1

_VERSION = struct.Struct("<H")
_HEADER = struct.Struct("<IIIBq")
_LENGTH = struct.Struct("<I")
_CHECKSUM = struct.Struct("<I")
_FLOAT = np.dtype("<f4")


def _length_prefixed(data):
    return _LENGTH.pack(len(data)) + data


def dumps(model):
    hp = model.hyperparams
    parts = [
        MAGIC,
        _VERSION.pack(FORMAT_VERSION),
        _HEADER.pack(len(model.vocab), hp.embed_dim, hp.hidden_dim, int(model.lookahead),
                     model.seed),
        _length_prefixed(json.dumps(hp.to_dict(), sort_keys=True).encode("utf-8")),
        _LENGTH.pack(len(model.vocab)),
    ]
    parts.extend(_length_prefixed(token.encode("utf-8")) for token in model.vocab.tokens)
    parts.extend(array.astype(_FLOAT).tobytes() for array in model.params.arrays())
    body = b"".join(parts)
    return body + _CHECKSUM.pack(zlib.crc32(body))


class _Reader:
    def __init__(self, data, offset):
        self.data = data
        self.offset = offset

    def unpack(self, layout):
        values = layout.unpack_from(self.data, self.offset)
        self.offset += layout.size
        return values

    def take(self, size):
        if self.offset + size > len(self.data):
            raise struct.error("block runs past the end of the file")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk


def loads(data):
    if len(data) < len(MAGIC) and MAGIC.startswith(data):
        raise TaggerError("Model file is truncated", code="CHECKSUM_MISMATCH")
    if data[:len(MAGIC)] != MAGIC:
        raise TaggerError("Not a tagger model file (bad magic bytes)", code="BAD_MAGIC")
    if len(data) < len(MAGIC) + _VERSION.size + _CHECKSUM.size:
        raise TaggerError("Model file is truncated", code="CHECKSUM_MISMATCH")
    (version,) = _VERSION.unpack_from(data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise TaggerError(f"Model format version {version} is not supported "
                          f"(expected {FORMAT_VERSION})", code="VERSION_UNSUPPORTED")
    body, (stored,) = data[:-_CHECKSUM.size], _CHECKSUM.unpack(data[-_CHECKSUM.size:])
    if zlib.crc32(body) != stored:
        raise TaggerError("Model file checksum mismatch (truncated or corrupted)",
                          code="CHECKSUM_MISMATCH")

    reader = _Reader(body, len(MAGIC) + _VERSION.size)
    try:
        vocab_size, embed_dim, hidden_dim, lookahead, seed = reader.unpack(_HEADER)
        (length,) = reader.unpack(_LENGTH)
        hyperparams = Hyperparams.from_dict(json.loads(reader.take(length).decode("utf-8")))
        (count,) = reader.unpack(_LENGTH)
        tokens = []
        for _ in range(count):
            (length,) = reader.unpack(_LENGTH)
            tokens.append(reader.take(length).decode("utf-8"))

        shapes = network.Parameters.shapes(vocab_size, embed_dim, hidden_dim)
        arrays = []
        for name in network.PARAMETER_ORDER:
            shape = shapes[name]
            size = int(np.prod(shape)) * _FLOAT.itemsize
            block = np.frombuffer(reader.take(size), dtype=_FLOAT).reshape(shape)
            arrays.append(block.astype(np.float64))
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise TaggerError(f"Model file is malformed: {e}", code="CORRUPT_MODEL") from e

    if reader.offset != len(body) or count != vocab_size:
        raise TaggerError("Model file has inconsistent block sizes", code="CORRUPT_MODEL")
    if (hyperparams.embed_dim, hyperparams.hidden_dim) != (embed_dim, hidden_dim):
        raise TaggerError("Model header and hyperparameters disagree", code="DIMENSION_MISMATCH")

    return TaggerModel(
        vocab=Vocabulary(tokens),
        params=network.Parameters(*arrays),
        hyperparams=hyperparams,
        lookahead=bool(lookahead),
        seed=seed,
    )


def save(model, path):
    path = Path(path)
    try:
        path.write_bytes(dumps(model))
    except OSError as e:
        raise TaggerError(f"Cannot write model to {path}: {e}", code="IO_ERROR") from e
    logger.info("Saved %r to %s", model, path)


def load(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise TaggerError(f"Cannot read model {path}: {e}", code="IO_ERROR") from e
    model = loads(data)
    logger.info("Loaded %r from %s", model, path)
    return model
