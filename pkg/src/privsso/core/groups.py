#!/usr/bin/env python3
"""
Bilinear group layer over BLS12-381 (type-3 pairing, petrelic backend).

Every other module goes through this one for curve arithmetic, scalars,
hashing to G1 and the canonical byte encodings:

- Scalar: fixed 32-byte big-endian, always reduced modulo the group order.
- G1 / G2: the backend's compressed encoding, fixed length per group. The
  identity element is encoded as an all-zero string of the group length;
  an all-zero string therefore decodes to the identity.
"""

import hashlib
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, Optional, Protocol, Sequence, Union

from petrelic.bn import Bn
from petrelic.multiplicative.pairing import (
    G1, G2, GT, G1Element, G2Element, GTElement,
)

from .errors import DeserializationError, GroupError

CURVE_NAME = "BLS12-381"
SUPPORTED_LEVELS = {128: CURVE_NAME}
HASH_TO_G1_DST = b"PRIVSSO-V01-BLS12381G1-H2C:"

ORDER: int = int.from_bytes(G1.order().binary(), "big")
SCALAR_BYTES = (ORDER.bit_length() + 7) // 8

G1Elem = G1Element
G2Elem = G2Element
GtElem = GTElement
Element = Union[G1Element, G2Element]


class Rng(Protocol):
    """Anything with random.Random's randrange; tests inject seeded instances"""

    def randrange(self, start: int, stop: int = ...) -> int: ...


_system_rng = random.SystemRandom()


class GroupId(str, Enum):
    G1 = "G1"
    G2 = "G2"
    GT = "GT"


def _to_bn(value: int) -> Bn:
    return Bn.from_binary(value.to_bytes(SCALAR_BYTES, "big"))


@dataclass(frozen=True)
class Scalar:
    """Element of the scalar field Z_p"""

    value: int

    def __post_init__(self):
        if not 0 <= self.value < ORDER:
            raise GroupError("scalar out of range; use Scalar.reduce for arbitrary integers")

    @classmethod
    def reduce(cls, value: int) -> "Scalar":
        return cls(value % ORDER)

    @classmethod
    def random(cls, rng: Optional[Rng] = None) -> "Scalar":
        return cls((rng or _system_rng).randrange(ORDER))

    @classmethod
    def random_nonzero(cls, rng: Optional[Rng] = None) -> "Scalar":
        return cls((rng or _system_rng).randrange(1, ORDER))

    @classmethod
    def from_hash(cls, *parts: bytes) -> "Scalar":
        # 512-bit digest reduced mod p: bias is negligible
        h = hashlib.sha512()
        for part in parts:
            h.update(len(part).to_bytes(4, "big"))
            h.update(part)
        return cls(int.from_bytes(h.digest(), "big") % ORDER)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Scalar":
        if len(data) != SCALAR_BYTES:
            raise DeserializationError(f"scalar must be {SCALAR_BYTES} bytes, got {len(data)}")
        value = int.from_bytes(data, "big")
        if value >= ORDER:
            raise DeserializationError("non-canonical scalar encoding")
        return cls(value)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(SCALAR_BYTES, "big")

    @property
    def bn(self) -> Bn:
        return _to_bn(self.value)

    def inverse(self) -> "Scalar":
        if self.value == 0:
            raise GroupError("zero has no inverse")
        return Scalar(pow(self.value, -1, ORDER))

    def _other(self, other) -> int:
        return other.value if isinstance(other, Scalar) else int(other)

    def __add__(self, other) -> "Scalar":
        return Scalar((self.value + self._other(other)) % ORDER)

    __radd__ = __add__

    def __sub__(self, other) -> "Scalar":
        return Scalar((self.value - self._other(other)) % ORDER)

    def __rsub__(self, other) -> "Scalar":
        return Scalar((self._other(other) - self.value) % ORDER)

    def __mul__(self, other) -> "Scalar":
        return Scalar((self.value * self._other(other)) % ORDER)

    __rmul__ = __mul__

    def __neg__(self) -> "Scalar":
        return Scalar((-self.value) % ORDER)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        # never print the value: scalars are usually secrets
        return "Scalar(<hidden>)"


ScalarLike = Union[Scalar, int]


def as_scalar(k: ScalarLike) -> Scalar:
    return k if isinstance(k, Scalar) else Scalar.reduce(int(k))


@dataclass(frozen=True)
class PublicParams:
    """Public parameters shared by every party of a deployment"""

    curve: str
    security_level: int
    order: int
    g: G1Element = field(compare=False)
    g_tilde: G2Element = field(compare=False)
    lengths: Dict[str, int] = field(compare=False)

    def to_bytes(self) -> bytes:
        return b"|".join([
            self.curve.encode(),
            str(self.security_level).encode(),
            self.order.to_bytes(SCALAR_BYTES, "big"),
            serialize(self.g),
            serialize(self.g_tilde),
        ])

    @property
    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()


@lru_cache(maxsize=None)
def _length_table() -> Dict[str, int]:
    return {
        "scalar": SCALAR_BYTES,
        "g1": len(G1.generator().to_binary()),
        "g2": len(G2.generator().to_binary()),
    }


def setup(security_level: int = 128) -> PublicParams:
    """Return the public parameters for a supported security level"""
    if security_level not in SUPPORTED_LEVELS:
        raise GroupError(f"unsupported security level: {security_level}")
    return PublicParams(
        curve=SUPPORTED_LEVELS[security_level],
        security_level=security_level,
        order=ORDER,
        g=G1.generator(),
        g_tilde=G2.generator(),
        lengths=dict(_length_table()),
    )


def group_of(elem) -> GroupId:
    if isinstance(elem, G1Element):
        return GroupId.G1
    if isinstance(elem, G2Element):
        return GroupId.G2
    if isinstance(elem, GTElement):
        return GroupId.GT
    raise GroupError(f"not a group element: {type(elem).__name__}")


def identity(group: GroupId):
    if group == GroupId.G1:
        return G1.neutral_element()
    if group == GroupId.G2:
        return G2.neutral_element()
    return GT.neutral_element()


def generator(group: GroupId):
    return {GroupId.G1: G1, GroupId.G2: G2, GroupId.GT: GT}[group].generator()


def is_identity(elem) -> bool:
    return elem == identity(group_of(elem))


def exp(base, k: ScalarLike):
    return base ** as_scalar(k).bn


def multi_exp(bases: Sequence, scalars: Sequence[ScalarLike], group: GroupId = GroupId.G1):
    """prod(bases[i] ** scalars[i]); the empty product is the identity of `group`"""
    if len(bases) != len(scalars):
        raise GroupError(f"multi_exp length mismatch: {len(bases)} bases, {len(scalars)} scalars")
    acc = identity(group_of(bases[0]) if bases else group)
    for base, k in zip(bases, scalars):
        k = as_scalar(k)
        if k.value:
            acc = acc * (base ** k.bn)
    return acc


def pairing(p: G1Element, q: G2Element) -> GTElement:
    return p.pair(q)


def exp_gt(elem: GTElement, k: ScalarLike) -> GTElement:
    return elem ** as_scalar(k).bn


def hash_to_g1(data: Union[bytes, str]) -> G1Element:
    """Deterministic hash onto the prime-order subgroup of G1"""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return G1.hash_to_point(HASH_TO_G1_DST + data)


def in_subgroup(elem) -> bool:
    return elem ** _to_bn(ORDER) == identity(group_of(elem))


def element_length(group: GroupId) -> int:
    return _length_table()[group.value.lower()]


def serialize(elem) -> bytes:
    group = group_of(elem)
    if group == GroupId.GT:
        raise GroupError("GT elements have no wire encoding")
    if elem == identity(group):
        return bytes(element_length(group))
    return elem.to_binary()


def deserialize(data: bytes, group: GroupId):
    """Decode a canonical G1/G2 encoding, rejecting anything off-curve or outside the subgroup"""
    if group == GroupId.GT:
        raise GroupError("GT elements have no wire encoding")
    expected = element_length(group)
    if len(data) != expected:
        raise DeserializationError(f"{group.value} element must be {expected} bytes, got {len(data)}")
    if not any(data):
        return identity(group)
    cls = G1Element if group == GroupId.G1 else G2Element
    try:
        elem = cls.from_binary(bytes(data))
    except Exception as exc:
        raise DeserializationError(f"invalid {group.value} encoding: {exc}") from exc
    if elem.to_binary() != bytes(data):
        raise DeserializationError(f"non-canonical {group.value} encoding")
    if elem == identity(group) or not in_subgroup(elem):
        raise DeserializationError(f"{group.value} element outside the prime-order subgroup")
    return elem