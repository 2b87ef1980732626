import random

import pytest
from hypothesis import given, settings, strategies as st

from mibe.backend import Mirrored, backend_for_id, get_backend, production, toy
from mibe.errors import BackendError, DecodeError, InvalidElementError


def test_toy_pair_oracle():
    b = toy()
    assert b.pair(5, 11) == 55


def test_toy_scalar_mul_wraps():
    assert toy().scalar_mul(7, 29) == 1


def test_toy_gt_pow():
    assert toy().gt_pow(11, 5) == 55


def test_toy_encoding_is_little_endian():
    b = toy()
    assert b.serialize(29, "g1") == (29).to_bytes(8, "little")
    assert b.deserialize((29).to_bytes(8, "little"), "g2") == 29


def test_toy_rejects_out_of_range():
    b = toy()
    with pytest.raises(DecodeError):
        b.deserialize((101).to_bytes(8, "little"), "g1")
    with pytest.raises(DecodeError):
        b.deserialize(b"\x01" * 7, "g1")


def test_toy_requires_prime_order():
    with pytest.raises((ValueError, BackendError)):
        toy(100)


def test_pair_with_identity(backend):
    assert backend.is_identity(backend.pair(backend.identity("g1"), backend.generator("g2")), "gt")


def test_scalar_mul_edge_scalars(backend):
    g = backend.generator("g1")
    assert backend.eq(backend.scalar_mul(1, g), g)
    assert backend.is_identity(backend.scalar_mul(backend.order, g), "g1")
    assert backend.is_identity(backend.scalar_mul(0, backend.generator("g2")), "g2")


def test_gt_pow_laws(backend):
    rng = random.Random(3)
    g = backend.pair(backend.generator("g1"), backend.generator("g2"))
    assert backend.eq(backend.gt_pow(g, 1), g)
    for _ in range(5):
        a, c = backend.random_scalar(rng), backend.random_scalar(rng)
        assert backend.eq(backend.gt_pow(backend.gt_pow(g, a), c), backend.gt_pow(g, a * c % backend.order))


def test_bilinearity_100_trials(backend):
    rng = random.Random(11)
    P, Q = backend.generator("g1"), backend.generator("g2")
    base = backend.pair(P, Q)
    for _ in range(100):
        x, y = backend.random_scalar(rng), backend.random_scalar(rng)
        lhs = backend.pair(backend.scalar_mul(x, P), backend.scalar_mul(y, Q))
        assert backend.eq(lhs, backend.gt_pow(base, x * y))


def test_non_degenerate(backend):
    assert not backend.is_identity(backend.pair(backend.generator("g1"), backend.generator("g2")), "gt")


@pytest.mark.parametrize("kind", ["g1", "g2"])
def test_roundtrip_canonical(backend, kind):
    rng = random.Random(5)
    for _ in range(10):
        g = backend.scalar_mul(backend.random_scalar(rng), backend.generator(kind))
        data = backend.serialize(g, kind)
        assert len(data) == backend.descriptor.size(kind)
        assert backend.serialize(backend.deserialize(data, kind), kind) == data
    ident = backend.serialize(backend.identity(kind), kind)
    assert backend.is_identity(backend.deserialize(ident, kind), kind)


@pytest.mark.parametrize("kind", ["g1", "g2"])
def test_production_rejects_all_ff(kind):
    b = production()
    with pytest.raises(DecodeError):
        b.deserialize(b"\xff" * b.descriptor.size(kind), kind)


@pytest.mark.parametrize("kind", ["g1", "g2"])
def test_production_rejects_wrong_length(kind):
    b = production()
    with pytest.raises(DecodeError):
        b.deserialize(b"\x00" * (b.descriptor.size(kind) - 1), kind)


def test_production_hash_to_curve_rfc9380_vector():
    b = production()
    dst = b"QUUX-V01-CS02-with-BLS12381G1_XMD:SHA-256_SSWU_RO_"
    got = b.serialize(b.hash_to_g1(b"", dst), "g1").hex()
    assert got == (
        "852926add2207b76ca4fa57a8734416c8dc95e24501772c814278700eed6d1e4"
        "e8cf62d9c09db0fac349612b759e79a1"
    )


def test_random_scalar_nonzero():
    b = toy(3)
    rng = random.Random(0)
    assert all(b.random_scalar(rng) in (1, 2) for _ in range(200))


def test_scalar_inverse_rejects_zero(backend):
    with pytest.raises((ValueError, InvalidElementError)):
        backend.scalar_inverse(0)


def test_mirrored_consistency(backend):
    rng = random.Random(9)
    gen = Mirrored(backend.generator("g1"), backend.generator("g2"))
    good = Mirrored.from_scalar(backend, backend.random_scalar(rng), gen)
    assert good.is_consistent(backend, gen)
    bad = Mirrored(good.g1, backend.scalar_mul(2, good.g2))
    assert not bad.is_consistent(backend, gen)
    assert Mirrored.decode(backend, good.encode(backend)).encode(backend) == good.encode(backend)


def test_backend_lookup():
    assert get_backend("production").backend_id == production().backend_id
    assert backend_for_id(toy().backend_id, 101).order == 101
    with pytest.raises(BackendError):
        get_backend("nonsense")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 100), st.integers(0, 100))
def test_toy_pairing_matches_exponent_product(a, c):
    assert toy().pair(a, c) == a * c % 101
