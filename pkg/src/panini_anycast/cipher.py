"""Symmetric cipher with a tag-in-plaintext selection convention.

AES-256 in counter mode: decryption is structurally total, so decrypting
with the wrong key yields garbage rather than an error. A receiver decides
whether a ciphertext was meant for it purely by comparing the first 16
plaintext bytes against the fixed public TAG. With a 16-byte tag the
false-match probability under a wrong key is 2^-128.
"""

from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .util import ByteReader, WireError

TAG = b"PANINI-TAG-00001"
KEY_BYTES = 32
NONCE_BYTES = 16

assert len(TAG) == 16


@dataclass(frozen=True)
class TaggedPlaintext:
    tag: bytes
    message: bytes

    @classmethod
    def tagged(cls, message: bytes) -> "TaggedPlaintext":
        return cls(TAG, message)

    @property
    def accepted(self) -> bool:
        """True when the tag matches the protocol constant."""
        return self.tag == TAG


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes

    def to_bytes(self) -> bytes:
        return self.nonce + self.body

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Ciphertext":
        reader = ByteReader(raw)
        nonce = reader.take(NONCE_BYTES)
        return cls(nonce, reader.take(reader.remaining))


def keygen(rng) -> bytes:
    """Draw a fresh 32-byte key from the given randomness stream."""
    return rng.randbytes(KEY_BYTES)


def _keystream_xor(key: bytes, nonce: bytes, data: bytes) -> bytes:
    if len(key) != KEY_BYTES:
        raise ValueError(f"key must be {KEY_BYTES} bytes")
    ctx = Cipher(algorithms.AES(key), modes.CTR(nonce)).encryptor()
    return ctx.update(data) + ctx.finalize()


def encrypt(plaintext: TaggedPlaintext, key: bytes, rng) -> Ciphertext:
    """Encrypt tag || message under a fresh random nonce."""
    nonce = rng.randbytes(NONCE_BYTES)
    return Ciphertext(nonce, _keystream_xor(key, nonce, plaintext.tag + plaintext.message))


def decrypt(ct: Ciphertext, key: bytes) -> TaggedPlaintext:
    """Total decryption: always returns a candidate plaintext.

    A wrong key is signaled only by ``candidate.tag != TAG``; no exception
    is raised for any 32-byte key and any ciphertext body.
    """
    if len(ct.nonce) != NONCE_BYTES:
        raise WireError("bad nonce length")
    plain = _keystream_xor(key, ct.nonce, ct.body)
    return TaggedPlaintext(plain[:16], plain[16:])
