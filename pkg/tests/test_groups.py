"""
Tests for the bilinear group layer
"""

import pytest

from privsso.core import groups
from privsso.core.errors import DeserializationError, GroupError
from privsso.core.groups import GroupId, Scalar


def test_setup_default_level(params):
    assert params.curve == "BLS12-381"
    assert params.lengths["scalar"] == 32
    assert params.lengths["g1"] == 48
    assert params.lengths["g2"] == 96


def test_setup_rejects_unknown_level():
    with pytest.raises(GroupError):
        groups.setup(80)


def test_scalar_range_and_reduce():
    with pytest.raises(GroupError):
        Scalar(groups.ORDER)
    with pytest.raises(GroupError):
        Scalar(-1)
    assert Scalar.reduce(groups.ORDER + 5) == Scalar(5)
    assert Scalar.reduce(-1) == Scalar(groups.ORDER - 1)


def test_scalar_arithmetic(rng):
    a, b = Scalar.random_nonzero(rng), Scalar.random_nonzero(rng)
    assert a + b - b == a
    assert a * a.inverse() == Scalar(1)
    assert -a + a == Scalar(0)
    with pytest.raises(GroupError):
        Scalar(0).inverse()


def test_scalar_bytes_are_fixed_length_and_canonical(rng):
    k = Scalar.random(rng)
    assert len(k.to_bytes()) == 32
    assert Scalar.from_bytes(k.to_bytes()) == k
    with pytest.raises(DeserializationError):
        Scalar.from_bytes(groups.ORDER.to_bytes(32, "big"))
    with pytest.raises(DeserializationError):
        Scalar.from_bytes(b"\x01" * 31)


def test_scalar_repr_hides_value():
    assert "12345" not in repr(Scalar(12345))


def test_identity_round_trip():
    for group in (GroupId.G1, GroupId.G2):
        ident = groups.identity(group)
        data = groups.serialize(ident)
        assert data == bytes(groups.element_length(group))
        assert groups.deserialize(data, group) == ident


def test_deserialize_rejects_malformed(params):
    data = groups.serialize(params.g)
    with pytest.raises(DeserializationError):
        groups.deserialize(data[:-1], GroupId.G1)
    with pytest.raises(DeserializationError):
        groups.deserialize(b"\xff" * len(data), GroupId.G1)
    with pytest.raises(GroupError):
        groups.serialize(groups.pairing(params.g, params.g_tilde))


def test_hash_to_g1_deterministic_and_distinct():
    assert groups.hash_to_g1("rp.example") == groups.hash_to_g1(b"rp.example")
    points = {groups.serialize(groups.hash_to_g1(f"domain-{i}")) for i in range(200)}
    assert len(points) == 200


@pytest.mark.slow
def test_hash_to_g1_no_collisions_large():
    points = {groups.serialize(groups.hash_to_g1(f"domain-{i}")) for i in range(10_000)}
    assert len(points) == 10_000


def test_multi_exp_matches_naive_fold(params, rng):
    for _ in range(100):
        size = rng.randrange(0, 5)
        bases = [groups.exp(params.g, Scalar.random(rng)) for _ in range(size)]
        scalars = [Scalar.random(rng) for _ in range(size)]
        naive = groups.identity(GroupId.G1)
        for base, k in zip(bases, scalars):
            naive = naive * groups.exp(base, k)
        assert groups.multi_exp(bases, scalars) == naive


def test_multi_exp_length_mismatch(params):
    with pytest.raises(GroupError):
        groups.multi_exp([params.g], [])


def test_pairing_bilinearity(params, rng):
    for _ in range(100):
        a, b = Scalar.random_nonzero(rng), Scalar.random_nonzero(rng)
        left = groups.pairing(groups.exp(params.g, a), groups.exp(params.g_tilde, b))
        right = groups.exp_gt(groups.pairing(params.g, params.g_tilde), a * b)
        assert left == right


def test_group_of_rejects_non_elements():
    with pytest.raises(GroupError):
        groups.group_of(42)
