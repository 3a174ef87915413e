"""Linkable ring signatures over ristretto255.

The construction is an LSAG-style challenge chain: a signature over a ring
of ``l`` verification keys consists of a key image, an initial challenge
scalar, and ``l`` response scalars. Verification walks the chain once
around the ring and accepts iff it closes on the initial challenge.

The key image is ``sk * Hp(vk)`` where ``Hp`` hashes the signer's own
verification key to a group point. Since ``vk`` is determined by ``sk``,
the key image depends only on the secret key: two signatures link exactly
when they were produced by the same key, regardless of message or ring.

Rings are canonicalized (sorted by key encoding) so that the order in
which a verifier collected the keys leaks nothing about the signer.
"""

import functools
import hashlib
from dataclasses import dataclass

from . import _sodium as grp
from .util import ByteReader, WireError, pack_chunk

SECURITY_BITS = 128
GROUP_NAME = "ristretto255"
HASH_NAME = "sha512"

_DOM_IMAGE = b"lrs.key-image.v1"
_DOM_RING = b"lrs.ring.v1"
_DOM_MSG = b"lrs.msg.v1"
_DOM_CHAIN = b"lrs.chain.v1"

MAX_RING = 4096

# Group order of ristretto255. Scalars must be canonical (strictly below
# this, little-endian); libsodium's scalarmult silently masks the top bit,
# so without the check a signature would tolerate high-bit flips.
GROUP_ORDER = 2**252 + 27742317777372353535851937790883648493


def _is_canonical_scalar(raw: bytes) -> bool:
    return len(raw) == 32 and int.from_bytes(raw, "little") < GROUP_ORDER


class UnsupportedSecurityLevelError(ValueError):
    pass


class SignerNotInRingError(ValueError):
    pass


@dataclass(frozen=True)
class PublicParams:
    """Fixed scheme parameters: one group, one hash, one security level."""

    group: str = GROUP_NAME
    hash_name: str = HASH_NAME
    security: int = SECURITY_BITS

    def to_bytes(self) -> bytes:
        return f"{self.group}/{self.hash_name}/{self.security}".encode()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "PublicParams":
        try:
            group, hash_name, security = raw.decode().split("/")
            params = cls(group, hash_name, int(security))
        except (UnicodeDecodeError, ValueError) as exc:
            raise WireError("malformed public parameters") from exc
        if params != cls():
            raise WireError("unknown public parameters")
        return params


@dataclass(frozen=True)
class Keypair:
    vk: bytes
    sk: bytes


class Ring:
    """Canonically ordered, duplicate-free tuple of verification keys."""

    __slots__ = ("members", "_digest")

    def __init__(self, members):
        members = tuple(sorted(members))
        if not members:
            raise ValueError("ring must have at least one member")
        if len(members) > MAX_RING:
            raise ValueError("ring too large")
        for vk in members:
            if not grp.is_valid_point(vk):
                raise ValueError("ring member is not a valid verification key")
        if len(set(members)) != len(members):
            raise ValueError("ring contains duplicate members")
        self.members = members
        h = hashlib.sha512(_DOM_RING)
        for vk in members:
            h.update(vk)
        self._digest = h.digest()

    def __len__(self):
        return len(self.members)

    def __contains__(self, vk):
        return vk in self.members

    def __eq__(self, other):
        return isinstance(other, Ring) and self.members == other.members

    def __hash__(self):
        return hash(self.members)

    def index(self, vk: bytes) -> int:
        return self.members.index(vk)

    @property
    def digest(self) -> bytes:
        return self._digest

    def to_bytes(self) -> bytes:
        out = [len(self.members).to_bytes(4, "big")]
        out.extend(self.members)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Ring":
        reader = ByteReader(raw)
        count = reader.take_u32()
        if count == 0 or count > MAX_RING:
            raise WireError("bad ring size")
        members = [reader.take(grp.POINT_BYTES) for _ in range(count)]
        reader.expect_done()
        try:
            return cls(members)
        except ValueError as exc:
            raise WireError(str(exc)) from exc


@dataclass(frozen=True)
class RingSignature:
    """Key image plus the (c0, s_0..s_{l-1}) challenge chain."""

    key_image: bytes
    challenge: bytes
    responses: tuple

    def to_bytes(self) -> bytes:
        out = [self.key_image, self.challenge, len(self.responses).to_bytes(4, "big")]
        out.extend(self.responses)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "RingSignature":
        reader = ByteReader(raw)
        key_image = reader.take(grp.POINT_BYTES)
        challenge = reader.take(grp.SCALAR_BYTES)
        count = reader.take_u32()
        if count == 0 or count > MAX_RING:
            raise WireError("bad response count")
        responses = tuple(reader.take(grp.SCALAR_BYTES) for _ in range(count))
        reader.expect_done()
        for scalar in (challenge, *responses):
            if not _is_canonical_scalar(scalar):
                raise WireError("non-canonical scalar")
        return cls(key_image, challenge, responses)


def setup(security: int = SECURITY_BITS) -> PublicParams:
    """Return the scheme's public parameters. Only the 128-bit level exists."""
    if security != SECURITY_BITS:
        raise UnsupportedSecurityLevelError(f"unsupported security level: {security}")
    return PublicParams()


def random_scalar(rng) -> bytes:
    # Reduction of 64 uniform bytes; retry on the (negligible) zero case
    # because libsodium rejects zero scalars in base multiplication.
    while True:
        scalar = grp.scalar_reduce(rng.randbytes(64))
        if scalar != bytes(32):
            return scalar


def keygen(params: PublicParams, rng) -> Keypair:
    """Generate a keypair from the given randomness stream."""
    if params != PublicParams():
        raise ValueError("unknown public parameters")
    sk = random_scalar(rng)
    return Keypair(vk=grp.base_mult(sk), sk=sk)


@functools.lru_cache(maxsize=4096)
def _hash_point(vk: bytes) -> bytes:
    return grp.from_hash(hashlib.sha512(_DOM_IMAGE + vk).digest())


def key_image(sk: bytes) -> bytes:
    """The per-secret-key linking tag: ``sk * Hp(vk)``."""
    return grp.mult(sk, _hash_point(grp.base_mult(sk)))


def _chain_hash(ring_digest, image, msg_digest, z1, z2) -> bytes:
    h = hashlib.sha512(_DOM_CHAIN)
    h.update(ring_digest)
    h.update(image)
    h.update(msg_digest)
    h.update(z1)
    h.update(z2)
    return grp.scalar_reduce(h.digest())


def _msg_digest(message: bytes) -> bytes:
    return hashlib.sha512(_DOM_MSG + message).digest()


def sign(sk: bytes, message: bytes, ring: Ring, rng) -> RingSignature:
    """Sign ``message`` against ``ring``; the signer's vk must be a member."""
    vk = grp.base_mult(sk)
    if vk not in ring:
        raise SignerNotInRingError("signer's verification key is not in the ring")
    size = len(ring)
    signer = ring.index(vk)
    image = grp.mult(sk, _hash_point(vk))
    md = _msg_digest(message)

    nonce = random_scalar(rng)
    challenges = [None] * size
    responses = [random_scalar(rng) for _ in range(size)]
    challenges[(signer + 1) % size] = _chain_hash(
        ring.digest, image, md, grp.base_mult(nonce), grp.mult(nonce, _hash_point(vk))
    )
    for step in range(1, size):
        i = (signer + step) % size
        member = ring.members[i]
        z1 = grp.add(grp.base_mult(responses[i]), grp.mult(challenges[i], member))
        z2 = grp.add(grp.mult(responses[i], _hash_point(member)), grp.mult(challenges[i], image))
        challenges[(i + 1) % size] = _chain_hash(ring.digest, image, md, z1, z2)
    responses[signer] = grp.scalar_sub(nonce, grp.scalar_mul(challenges[signer], sk))
    return RingSignature(image, challenges[0], tuple(responses))


def _coerce_signature(sig) -> "RingSignature | None":
    if isinstance(sig, RingSignature):
        return sig
    if isinstance(sig, (bytes, bytearray)):
        try:
            return RingSignature.from_bytes(bytes(sig))
        except WireError:
            return None
    return None


def verify(sig, message: bytes, ring: Ring) -> int:
    """1 iff ``sig`` is a valid signature on ``message`` under ``ring``.

    Accepts either a parsed signature or raw bytes. Malformed or invalid
    input yields 0, never an exception, so this can be run directly on
    adversary-supplied data.
    """
    parsed = _coerce_signature(sig)
    if parsed is None or len(parsed.responses) != len(ring):
        return 0
    if not grp.is_valid_point(parsed.key_image):
        return 0
    md = _msg_digest(message)
    c = parsed.challenge
    try:
        for i, member in enumerate(ring.members):
            z1 = grp.add(grp.base_mult(parsed.responses[i]), grp.mult(c, member))
            z2 = grp.add(
                grp.mult(parsed.responses[i], _hash_point(member)),
                grp.mult(c, parsed.key_image),
            )
            c = _chain_hash(ring.digest, parsed.key_image, md, z1, z2)
    except grp.GroupError:
        return 0
    return 1 if c == parsed.challenge else 0


def link(sig_a, sig_b) -> int:
    """1 iff both signatures carry the same key image; malformed input is 0."""
    a = _coerce_signature(sig_a)
    b = _coerce_signature(sig_b)
    if a is None or b is None:
        return 0
    if not (grp.is_valid_point(a.key_image) and grp.is_valid_point(b.key_image)):
        return 0
    return 1 if a.key_image == b.key_image else 0
