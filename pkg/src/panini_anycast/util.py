"""Shared helpers: deterministic seed derivation and byte framing."""

import hashlib
import random
import struct


class WireError(ValueError):
    """Raised when a length-prefixed byte structure cannot be parsed."""


def derive_seed(*parts) -> int:
    """Derive a 128-bit integer seed from a mix of ints, strings, and bytes.

    Stable across processes and platforms, so every sub-component of a
    simulation can be given its own independent randomness stream that is
    reproducible from the top-level seed.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(b"b" + struct.pack(">I", len(part)) + part)
        elif isinstance(part, str):
            raw = part.encode()
            h.update(b"s" + struct.pack(">I", len(raw)) + raw)
        elif isinstance(part, int):
            raw = part.to_bytes((part.bit_length() + 8) // 8, "big", signed=True)
            h.update(b"i" + struct.pack(">I", len(raw)) + raw)
        else:
            raise TypeError(f"cannot derive a seed from {type(part).__name__}")
    return int.from_bytes(h.digest()[:16], "big")


def new_rng(*parts) -> random.Random:
    """A fresh deterministic RNG keyed by the given seed parts."""
    return random.Random(derive_seed(*parts))


def pack_chunk(data: bytes) -> bytes:
    """Length-prefix a byte string (4-byte big-endian length)."""
    return struct.pack(">I", len(data)) + data


class ByteReader:
    """Sequential reader for length-prefixed wire structures."""

    def __init__(self, data: bytes):
        if not isinstance(data, (bytes, bytearray, memoryview)):
            raise WireError("expected bytes")
        self._data = bytes(data)
        self._pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise WireError("truncated input")
        out = self._data[self._pos:self._pos + n]
        self._pos += n
        return out

    def take_u32(self) -> int:
        (value,) = struct.unpack(">I", self.take(4))
        return value

    def take_chunk(self) -> bytes:
        return self.take(self.take_u32())

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def expect_done(self) -> None:
        if self._pos != len(self._data):
            raise WireError("trailing bytes")
