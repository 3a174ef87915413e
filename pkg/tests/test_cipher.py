import random

from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from panini_anycast import cipher


def test_tag_constant():
    assert cipher.TAG == b"PANINI-TAG-00001"
    assert len(cipher.TAG) == 16


def test_keygen_deterministic_and_length():
    a = cipher.keygen(random.Random(7))
    b = cipher.keygen(random.Random(7))
    assert a == b
    assert len(a) == 32


def test_keygen_thousand_distinct():
    keys = {cipher.keygen(random.Random(seed)) for seed in range(1000)}
    assert len(keys) == 1000


def test_round_trip():
    key = cipher.keygen(random.Random(1))
    pt = cipher.TaggedPlaintext.tagged(b"hello")
    ct = cipher.encrypt(pt, key, random.Random(2))
    out = cipher.decrypt(ct, key)
    assert out == pt
    assert out.accepted


def test_encryption_is_probabilistic():
    key = cipher.keygen(random.Random(1))
    pt = cipher.TaggedPlaintext.tagged(b"same plaintext")
    rng = random.Random(3)
    a = cipher.encrypt(pt, key, rng)
    b = cipher.encrypt(pt, key, rng)
    assert a.to_bytes() != b.to_bytes()


def test_body_length_is_tag_plus_message():
    key = cipher.keygen(random.Random(1))
    for size in [0, 1, 15, 16, 17, 1000]:
        ct = cipher.encrypt(cipher.TaggedPlaintext.tagged(b"x" * size), key, random.Random(size))
        assert len(ct.body) == 16 + size


def test_wrong_key_tag_mismatch():
    rng = random.Random(0)
    pt = cipher.TaggedPlaintext.tagged(b"secret")
    mismatches = 0
    trials = 10_000
    for _ in range(trials):
        ct = cipher.encrypt(pt, cipher.keygen(rng), rng)
        out = cipher.decrypt(ct, cipher.keygen(rng))
        mismatches += 0 if out.accepted else 1
    assert mismatches == trials


def test_all_zero_ciphertext_rejected():
    ct = cipher.Ciphertext(nonce=bytes(16), body=bytes(64))
    out = cipher.decrypt(ct, cipher.keygen(random.Random(5)))
    assert not out.accepted


def test_decryption_is_total_for_any_body():
    key = cipher.keygen(random.Random(0))
    for body in [b"", b"\x01", b"short", bytes(range(256))]:
        out = cipher.decrypt(cipher.Ciphertext(bytes(16), body), key)
        assert isinstance(out, cipher.TaggedPlaintext)
        assert not out.accepted


def test_serialization_round_trip():
    key = cipher.keygen(random.Random(1))
    ct = cipher.encrypt(cipher.TaggedPlaintext.tagged(b"wire"), key, random.Random(2))
    again = cipher.Ciphertext.from_bytes(ct.to_bytes())
    assert again == ct


def test_large_round_trip():
    key = cipher.keygen(random.Random(11))
    message = random.Random(12).randbytes(1 << 20)
    ct = cipher.encrypt(cipher.TaggedPlaintext.tagged(message), key, random.Random(13))
    assert cipher.decrypt(ct, key).message == message


@given(message=st.binary(max_size=2048), key_seed=st.integers(0, 2**32), nonce_seed=st.integers(0, 2**32))
@settings(max_examples=50, deadline=None)
def test_round_trip_property(message, key_seed, nonce_seed):
    key = cipher.keygen(random.Random(key_seed))
    ct = cipher.encrypt(cipher.TaggedPlaintext.tagged(message), key, random.Random(nonce_seed))
    out = cipher.decrypt(ct, key)
    assert out.accepted and out.message == message


def test_ciphertext_byte_frequency_indistinguishable():
    # Encrypt two fixed equal-length messages under hidden random keys and
    # compare coarse byte histograms; they should not separate at 5%.
    rng = random.Random(77)
    m0, m1 = b"\x00" * 256, b"\xff" * 256
    hist = [[0] * 4, [0] * 4]
    for _ in range(200):
        which = rng.getrandbits(1)
        ct = cipher.encrypt(
            cipher.TaggedPlaintext.tagged(m0 if which == 0 else m1),
            cipher.keygen(rng),
            rng,
        )
        for byte in ct.body:
            hist[which][byte >> 6] += 1
    _, p, _, _ = chi2_contingency(hist)
    assert p > 0.05
