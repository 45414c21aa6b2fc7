import random

import pytest
import sympy
from hypothesis import given, settings, strategies as st

from contactchain.crypto import (CERT_BYTES, COMPRESSED_BYTES, ORDER, P_MOD, POINT_BYTES, AggregateSignature,
                                 Certificate, CertStatus, PrivateKey, PublicKey, Signature, aggregate,
                                 aggregate_verify, issue_certificate, keygen, sign, validate_certificate, verify)
from contactchain.crypto import group
from contactchain.opcount import COUNTER

msgs = st.binary(min_size=1, max_size=64)
seeds = st.integers(min_value=0, max_value=2**64)


# ---- group parameters, checked with an independent primality oracle

def test_group_order_and_field_are_prime():
    assert sympy.isprime(ORDER)
    assert sympy.isprime(P_MOD)
    assert P_MOD % 4 == 3  # supersingular y^2 = x^3 + x has p + 1 points
    assert (P_MOD + 1) % ORDER == 0


def test_generator_has_prime_order():
    g = group.GENERATOR
    assert group.is_on_curve(g)
    assert group.mul(ORDER, g) is None
    assert group.mul(ORDER - 1, g) == group.neg(g)


def test_pairing_is_bilinear_and_non_degenerate():
    rng = random.Random(7)
    g = group.GENERATOR
    e = group.pairing(g, g)
    assert e != group.GT_ONE
    for _ in range(3):
        a, b = rng.randrange(1, ORDER), rng.randrange(1, ORDER)
        lhs = group.pairing(group.mul(a, g), group.mul(b, g))
        assert lhs == group.gt_pow(e, a * b % ORDER)
    assert group.gt_pow(e, ORDER) == group.GT_ONE


def test_point_addition_matches_scalar_multiplication():
    g = group.GENERATOR
    acc = None
    for k in range(1, 12):
        acc = group.add(acc, g)
        assert acc == group.mul(k, g)


# ---- serialization sizes

def test_encoded_sizes():
    sk, pk = keygen(seed=1)
    sig = sign(sk, b"m")
    assert len(pk.to_bytes()) == COMPRESSED_BYTES == 29
    assert len(sig.to_bytes()) == POINT_BYTES == 56
    cert = issue_certificate(sk, pk, 0, 10)
    assert len(cert.to_bytes()) == CERT_BYTES == 93


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_key_roundtrip(seed):
    sk, pk = keygen(seed=seed)
    assert PublicKey.from_bytes(pk.to_bytes()) == pk
    assert PrivateKey.from_bytes(sk.to_bytes()) == sk
    assert sk.public_key() == pk


def test_decompress_rejects_garbage():
    with pytest.raises(ValueError):
        PublicKey.from_bytes(b"\x05" + bytes(28))
    with pytest.raises(ValueError):
        PublicKey.from_bytes(bytes(28))
    with pytest.raises(ValueError):
        PublicKey.from_bytes(bytes(29))  # identity is not a key


def test_keygen_is_deterministic():
    assert keygen(seed=b"abc") == keygen(seed=b"abc")
    assert keygen(seed=b"abc")[1] != keygen(seed=b"abd")[1]


# ---- signatures

@settings(max_examples=100, deadline=None)
@given(seeds, msgs)
def test_sign_verify_completeness(seed, msg):
    sk, pk = keygen(seed=seed)
    sig = sign(sk, msg)
    assert verify(pk, msg, sig)
    assert verify(pk.to_bytes(), msg, sig.to_bytes())


@settings(max_examples=20, deadline=None)
@given(seeds, msgs, msgs)
def test_signature_does_not_transfer(seed, m1, m2):
    sk, pk = keygen(seed=seed)
    _, other = keygen(seed=seed + 1)
    sig = sign(sk, m1)
    if m1 != m2:
        assert not verify(pk, m2, sig)
    assert not verify(other, m1, sig)


def test_empty_message_rejected():
    sk, pk = keygen(seed=3)
    with pytest.raises(ValueError):
        sign(sk, b"")
    assert not verify(pk, b"", sign(sk, b"x"))


def test_verify_handles_malformed_inputs():
    sk, pk = keygen(seed=3)
    assert not verify(pk, b"x", b"\x00" * 10)
    assert not verify(b"\x07" * 29, b"x", sign(sk, b"x"))


def _batch(m, seed=0):
    keys = [keygen(seed=b"agg%d-%d" % (seed, i)) for i in range(m)]
    ms = [b"message %d/%d" % (seed, i) for i in range(m)]
    sigs = [sign(sk, x) for (sk, _), x in zip(keys, ms)]
    return [pk for _, pk in keys], ms, sigs


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=1, max_value=64), st.integers(min_value=0, max_value=1000))
def test_aggregate_completeness(m, seed):
    pks, ms, sigs = _batch(m, seed)
    assert aggregate_verify(pks, ms, aggregate(sigs))


@settings(max_examples=12, deadline=None)
@given(st.integers(min_value=2, max_value=24), st.data())
def test_corrupting_one_record_breaks_the_aggregate(m, data):
    pks, ms, sigs = _batch(m, m)
    i = data.draw(st.integers(min_value=0, max_value=m - 1))
    which = data.draw(st.sampled_from(["message", "key", "signature"]))
    if which == "message":
        ms[i] = ms[i] + b"!"
    elif which == "key":
        pks[i] = keygen(seed=b"intruder")[1]
    else:
        sigs[i] = sign(keygen(seed=b"intruder")[0], ms[i])
    assert not aggregate_verify(pks, ms, aggregate(sigs))


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=2, max_value=16), st.randoms(use_true_random=False))
def test_aggregation_is_order_independent(m, rnd):
    pks, ms, sigs = _batch(m, 99)
    shuffled = sigs[:]
    rnd.shuffle(shuffled)
    assert aggregate(shuffled).point == aggregate(sigs).point
    idx = list(range(m))
    rnd.shuffle(idx)
    assert aggregate_verify([pks[i] for i in idx], [ms[i] for i in idx], aggregate(sigs))


def test_incremental_aggregate_matches_batch():
    pks, ms, sigs = _batch(5)
    acc = AggregateSignature(sigs[0].point, 1)
    for s in sigs[1:]:
        acc = acc.extend(s)
    assert acc == aggregate(sigs)
    assert AggregateSignature.from_bytes(acc.to_bytes(), 5) == acc


def test_aggregate_length_mismatch():
    pks, ms, sigs = _batch(3)
    with pytest.raises(ValueError):
        aggregate_verify(pks[:2], ms, aggregate(sigs))
    with pytest.raises(ValueError):
        aggregate([])


@pytest.mark.parametrize("m", [1, 4, 9])
def test_aggregate_verify_costs_m_plus_one_pairings(m):
    pks, ms, sigs = _batch(m, 5)
    agg = aggregate(sigs)
    with COUNTER.in_phase("probe-agg"):
        before = COUNTER.get("pairing", "probe-agg")
        assert aggregate_verify(pks, ms, agg)
        assert COUNTER.get("pairing", "probe-agg") - before == m + 1
        before = COUNTER.get("pairing", "probe-agg")
        assert verify(pks[0], ms[0], sigs[0])
        assert COUNTER.get("pairing", "probe-agg") - before == 2


# ---- certificates

def test_certificate_window_is_half_open():
    kdc_sk, kdc_pk = keygen(seed=b"kdc")
    _, pk = keygen(seed=b"user")
    cert = issue_certificate(kdc_sk, pk, 100, 200)
    assert validate_certificate(kdc_pk, cert, 99) == CertStatus.EXPIRED
    assert validate_certificate(kdc_pk, cert, 100) == CertStatus.VALID
    assert validate_certificate(kdc_pk, cert, 199) == CertStatus.VALID
    assert validate_certificate(kdc_pk, cert, 200) == CertStatus.EXPIRED


def test_certificate_signature_checked():
    kdc_sk, kdc_pk = keygen(seed=b"kdc")
    _, pk = keygen(seed=b"user")
    _, other = keygen(seed=b"other")
    cert = issue_certificate(kdc_sk, pk, 0, 200)
    forged = Certificate(other, cert.not_after, cert.signature)
    assert validate_certificate(kdc_pk, forged, 10) == CertStatus.BAD_SIGNATURE
    stretched = Certificate(pk, 10**9, cert.signature)
    assert validate_certificate(kdc_pk, stretched, 10) == CertStatus.BAD_SIGNATURE
    assert validate_certificate(other, cert, 10) == CertStatus.BAD_SIGNATURE


def test_certificate_roundtrip_and_errors():
    kdc_sk, _ = keygen(seed=b"kdc")
    _, pk = keygen(seed=b"user")
    cert = issue_certificate(kdc_sk, pk, 0, 12345)
    assert Certificate.from_bytes(cert.to_bytes()) == cert
    with pytest.raises(ValueError):
        Certificate.from_bytes(cert.to_bytes()[:-1])
    with pytest.raises(ValueError):
        issue_certificate(kdc_sk, pk, 5, 5)


def test_signature_roundtrip():
    sk, _ = keygen(seed=1)
    sig = sign(sk, b"hello")
    assert Signature.from_bytes(sig.to_bytes()) == sig
