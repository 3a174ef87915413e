import random

import pytest
from scipy.stats import chi2_contingency

from panini_anycast import lrs
from panini_anycast.util import WireError, new_rng


def make_ring(size, seed=0):
    params = lrs.setup()
    keys = [lrs.keygen(params, new_rng(seed, i)) for i in range(size)]
    ring = lrs.Ring([k.vk for k in keys])
    return params, keys, ring


def test_setup_names_fixed_group():
    params = lrs.setup(128)
    assert params.group == "ristretto255"
    assert params.security == 128


def test_setup_is_deterministic():
    assert lrs.setup(128).to_bytes() == lrs.setup(128).to_bytes()


def test_setup_rejects_other_levels():
    with pytest.raises(lrs.UnsupportedSecurityLevelError):
        lrs.setup(512)


def test_params_round_trip():
    params = lrs.setup()
    assert lrs.PublicParams.from_bytes(params.to_bytes()) == params
    with pytest.raises(WireError):
        lrs.PublicParams.from_bytes(b"p256/sha256/128")


def test_keygen_seeds():
    params = lrs.setup()
    a = lrs.keygen(params, random.Random(0))
    b = lrs.keygen(params, random.Random(1))
    again = lrs.keygen(params, random.Random(0))
    assert a.vk != b.vk
    assert a == again


def test_keygen_thousand_distinct():
    params = lrs.setup()
    vks = {lrs.keygen(params, random.Random(i)).vk for i in range(1000)}
    assert len(vks) == 1000


def test_ring_canonical_order():
    _, keys, _ = make_ring(5)
    vks = [k.vk for k in keys]
    shuffled = list(vks)
    random.Random(9).shuffle(shuffled)
    assert lrs.Ring(vks).members == lrs.Ring(shuffled).members


def test_ring_rejects_duplicates_and_empty():
    _, keys, _ = make_ring(2)
    with pytest.raises(ValueError):
        lrs.Ring([keys[0].vk, keys[0].vk, keys[1].vk])
    with pytest.raises(ValueError):
        lrs.Ring([])


def test_ring_serialization_round_trip():
    _, _, ring = make_ring(7)
    assert lrs.Ring.from_bytes(ring.to_bytes()) == ring


def test_sign_verify_round_trip():
    _, keys, ring = make_ring(3)
    sig = lrs.sign(keys[1].sk, b"hello", ring, random.Random(5))
    assert lrs.verify(sig, b"hello", ring) == 1


def test_sign_rejects_outsider():
    params, _, ring = make_ring(3)
    outsider = lrs.keygen(params, random.Random(99))
    with pytest.raises(lrs.SignerNotInRingError):
        lrs.sign(outsider.sk, b"msg", ring, random.Random(0))


def test_key_image_constant_across_messages_and_rings():
    params, keys, ring = make_ring(4)
    other = lrs.Ring([keys[0].vk, keys[1].vk])
    sig_a = lrs.sign(keys[0].sk, b"first", ring, random.Random(1))
    sig_b = lrs.sign(keys[0].sk, b"second", other, random.Random(2))
    assert sig_a.key_image == sig_b.key_image
    assert lrs.link(sig_a, sig_b) == 1


def test_verify_rejects_flipped_message_bit():
    _, keys, ring = make_ring(3)
    sig = lrs.sign(keys[0].sk, b"payload", ring, random.Random(3))
    assert lrs.verify(sig, b"paylo`d", ring) == 0


def test_verify_rejects_substituted_ring():
    # Remove the signer's key, slot in a fresh one: the chain cannot close.
    params, keys, ring = make_ring(3)
    signer = keys[0]
    sig = lrs.sign(signer.sk, b"msg", ring, random.Random(4))
    fresh = lrs.keygen(params, random.Random(1234))
    swapped = lrs.Ring([fresh.vk] + [k.vk for k in keys if k.vk != signer.vk])
    assert lrs.verify(sig, b"msg", swapped) == 0


def test_verify_is_pure():
    _, keys, ring = make_ring(2)
    sig = lrs.sign(keys[0].sk, b"m", ring, random.Random(0))
    results = {lrs.verify(sig, b"m", ring) for _ in range(5)}
    assert results == {1}


def test_verify_malformed_bytes_returns_zero():
    _, _, ring = make_ring(2)
    assert lrs.verify(b"", b"m", ring) == 0
    assert lrs.verify(b"\x00" * 10, b"m", ring) == 0
    assert lrs.verify(b"\xff" * 200, b"m", ring) == 0


def test_verify_wrong_ring_size_returns_zero():
    _, keys, ring = make_ring(3)
    sig = lrs.sign(keys[0].sk, b"m", ring, random.Random(0))
    smaller = lrs.Ring([keys[0].vk, keys[1].vk])
    assert lrs.verify(sig, b"m", smaller) == 0


def test_link_same_key_different_messages():
    _, keys, ring = make_ring(3)
    a = lrs.sign(keys[2].sk, b"one", ring, random.Random(1))
    b = lrs.sign(keys[2].sk, b"two", ring, random.Random(2))
    assert lrs.link(a, b) == 1
    assert lrs.link(b, a) == 1


def test_link_different_keys_same_message():
    _, keys, ring = make_ring(3)
    a = lrs.sign(keys[0].sk, b"same", ring, random.Random(1))
    b = lrs.sign(keys[1].sk, b"same", ring, random.Random(2))
    assert lrs.link(a, b) == 0


def test_link_reflexive_and_malformed():
    _, keys, ring = make_ring(2)
    sig = lrs.sign(keys[0].sk, b"m", ring, random.Random(0))
    assert lrs.link(sig, sig) == 1
    assert lrs.link(sig, b"junk") == 0
    assert lrs.link(b"", b"") == 0


@pytest.mark.parametrize("size", [1, 2, 3, 5, 8])
def test_completeness_small_rings_all_positions(size):
    _, keys, ring = make_ring(size, seed=size)
    for pos, key in enumerate(keys):
        sig = lrs.sign(key.sk, b"complete", ring, random.Random(pos))
        assert lrs.verify(sig, b"complete", ring) == 1


def test_signature_serialization_round_trip_and_fixed_size():
    _, keys, ring = make_ring(4)
    raw_sizes = set()
    for i, key in enumerate(keys):
        sig = lrs.sign(key.sk, b"sized", ring, random.Random(i))
        raw = sig.to_bytes()
        raw_sizes.add(len(raw))
        assert lrs.RingSignature.from_bytes(raw) == sig
    assert len(raw_sizes) == 1


def test_signatures_rerandomized_per_call():
    # Same key, message, ring: everything except the key image must change
    # when the signing randomness changes.
    _, keys, ring = make_ring(4)
    a = lrs.sign(keys[0].sk, b"m", ring, random.Random(1))
    b = lrs.sign(keys[0].sk, b"m", ring, random.Random(2))
    assert a.key_image == b.key_image
    assert a.challenge != b.challenge
    assert a.responses != b.responses
    assert lrs.verify(a, b"m", ring) == 1 and lrs.verify(b, b"m", ring) == 1


def test_anonymity_smoke_statistic():
    # 400 signatures with uniformly chosen signer in a fixed ring of 4:
    # a coarse independence test between signer index and signature bytes
    # (excluding the key image) should not separate signers at 5%.
    _, keys, ring = make_ring(4, seed=42)
    rng = random.Random(2024)
    table = [[0] * 4 for _ in range(4)]
    for _ in range(400):
        signer = rng.randrange(4)
        sig = lrs.sign(keys[signer].sk, b"anon", ring, rng)
        bucket = sig.challenge[0] >> 6
        table[signer][bucket] += 1
    _, p, _, _ = chi2_contingency(table)
    assert p > 0.05


def test_bit_flip_rejection_sample():
    # The exhaustive sweep lives in the acceptance suite; spot-check here.
    _, keys, ring = make_ring(2)
    sig = lrs.sign(keys[0].sk, b"flip", ring, random.Random(0))
    raw = bytearray(sig.to_bytes())
    for bit in [0, 7, 250, 300, len(raw) * 8 - 1]:
        mutated = bytearray(raw)
        mutated[bit // 8] ^= 1 << (bit % 8)
        assert lrs.verify(bytes(mutated), b"flip", ring) == 0
