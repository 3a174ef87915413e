"""ctypes bindings for the ristretto255 group in the system libsodium.

ristretto255 is a prime-order group built on Curve25519 with canonical
32-byte encodings for both points and scalars, which keeps serialization
deterministic. Values cross this boundary as plain ``bytes``; operations
that libsodium rejects (invalid encodings, zero scalars, identity results)
raise :class:`GroupError` so that callers handling adversarial inputs can
map them to a clean reject.
"""

import ctypes
import ctypes.util

POINT_BYTES = 32
SCALAR_BYTES = 32
WIDE_BYTES = 64


class GroupError(ValueError):
    """A group operation was rejected by libsodium."""


def _load() -> ctypes.CDLL:
    candidates = []
    found = ctypes.util.find_library("sodium")
    if found:
        candidates.append(found)
    candidates += ["libsodium.so.23", "libsodium.so", "libsodium.dylib"]
    last_error = None
    for name in candidates:
        try:
            lib = ctypes.CDLL(name)
        except OSError as exc:
            last_error = exc
            continue
        lib.sodium_init.restype = ctypes.c_int
        if lib.sodium_init() < 0:
            raise RuntimeError("libsodium failed to initialize")
        return lib
    raise RuntimeError(f"libsodium shared library not found ({last_error})")


_lib = _load()

_c = ctypes.c_char_p
_int = ctypes.c_int

for _name, _args in [
    ("crypto_scalarmult_ristretto255", (_c, _c, _c)),
    ("crypto_scalarmult_ristretto255_base", (_c, _c)),
    ("crypto_core_ristretto255_add", (_c, _c, _c)),
    ("crypto_core_ristretto255_sub", (_c, _c, _c)),
    ("crypto_core_ristretto255_from_hash", (_c, _c)),
    ("crypto_core_ristretto255_is_valid_point", (_c,)),
    ("crypto_core_ristretto255_scalar_reduce", (_c, _c)),
    ("crypto_core_ristretto255_scalar_add", (_c, _c, _c)),
    ("crypto_core_ristretto255_scalar_sub", (_c, _c, _c)),
    ("crypto_core_ristretto255_scalar_mul", (_c, _c, _c)),
]:
    _fn = getattr(_lib, _name)
    _fn.argtypes = list(_args)
    _fn.restype = _int


def _check_len(value: bytes, expected: int, what: str) -> bytes:
    if type(value) is not bytes:
        if not isinstance(value, (bytes, bytearray)):
            raise GroupError(f"{what} must be bytes")
        value = bytes(value)
    if len(value) != expected:
        raise GroupError(f"{what} must be {expected} bytes")
    return value


def scalar_reduce(wide: bytes) -> bytes:
    """Reduce 64 uniform bytes to a canonical scalar mod the group order."""
    wide = _check_len(wide, WIDE_BYTES, "wide input")
    out = ctypes.create_string_buffer(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_reduce(out, wide)
    return out.raw


def scalar_add(a: bytes, b: bytes) -> bytes:
    out = ctypes.create_string_buffer(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_add(out, a, b)
    return out.raw


def scalar_sub(a: bytes, b: bytes) -> bytes:
    out = ctypes.create_string_buffer(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_sub(out, a, b)
    return out.raw


def scalar_mul(a: bytes, b: bytes) -> bytes:
    out = ctypes.create_string_buffer(SCALAR_BYTES)
    _lib.crypto_core_ristretto255_scalar_mul(out, a, b)
    return out.raw


def base_mult(scalar: bytes) -> bytes:
    """Multiply the fixed base point by ``scalar``; rejects the zero scalar."""
    scalar = _check_len(scalar, SCALAR_BYTES, "scalar")
    out = ctypes.create_string_buffer(POINT_BYTES)
    if _lib.crypto_scalarmult_ristretto255_base(out, scalar) != 0:
        raise GroupError("base multiplication rejected (zero scalar)")
    return out.raw


def mult(scalar: bytes, point: bytes) -> bytes:
    """Scalar-multiply ``point``; rejects bad encodings and identity results."""
    scalar = _check_len(scalar, SCALAR_BYTES, "scalar")
    point = _check_len(point, POINT_BYTES, "point")
    out = ctypes.create_string_buffer(POINT_BYTES)
    if _lib.crypto_scalarmult_ristretto255(out, scalar, point) != 0:
        raise GroupError("scalar multiplication rejected")
    return out.raw


def add(p: bytes, q: bytes) -> bytes:
    p = _check_len(p, POINT_BYTES, "point")
    q = _check_len(q, POINT_BYTES, "point")
    out = ctypes.create_string_buffer(POINT_BYTES)
    if _lib.crypto_core_ristretto255_add(out, p, q) != 0:
        raise GroupError("point addition rejected")
    return out.raw


def from_hash(wide: bytes) -> bytes:
    """Map 64 hash bytes to a group point (uniform over the group)."""
    wide = _check_len(wide, WIDE_BYTES, "wide input")
    out = ctypes.create_string_buffer(POINT_BYTES)
    _lib.crypto_core_ristretto255_from_hash(out, wide)
    return out.raw


def is_valid_point(point: bytes) -> bool:
    if not isinstance(point, (bytes, bytearray)) or len(point) != POINT_BYTES:
        return False
    return _lib.crypto_core_ristretto255_is_valid_point(bytes(point)) == 1
