#!/usr/bin/env python3
"""
Pointcheval-Sanders anonymous credentials: key generation, blind issuance
over hidden and IdP-supplied attributes, unblinding, and unlinkable
re-randomized showing with selective disclosure.

Showing follows the standard PS form: the credential is randomized as
``(s1^r, (s2 * s1^t)^r)`` and the holder commits to the hidden attributes
and ``t`` in G2 (``theta1``); the verifier folds the disclosed attributes
into ``theta1`` before the pairing check.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from . import groups, nizk
from .errors import (
    CredentialError, DeserializationError, ForbiddenDisclosureError, ProofError, SchemaError,
)
from .groups import G1Elem, G2Elem, GroupId, PublicParams, Rng, Scalar
from .nizk import LabeledEquation, SigmaProof, StatementBuilder

logger = logging.getLogger(__name__)

FORMAT_TAG = 0x01
ISSUE_CONTEXT = b"privsso/issue"
SHOW_CONTEXT = b"privsso/show"
BLIND_LABEL = "blind"

# Fixed slots of the sign-on layout
SECRET_INDEX = 0
GAMMA_INDEX = 1
EXPIRY_INDEX = 2


def attr_label(index: int) -> str:
    return f"attr:{index}"


class AttributeKind(str, Enum):
    ALWAYS_HIDDEN = "always-hidden"
    IDP_ASSIGNED = "idp-assigned"
    USER_INFO = "user-info"


class AttributeEncoding(str, Enum):
    SCALAR = "scalar"
    INT = "int"
    STRING = "string"


@dataclass(frozen=True)
class AttributeSpec:
    label: str
    kind: AttributeKind
    encoding: AttributeEncoding = AttributeEncoding.STRING
    disclosable: bool = True


AttributeValue = Union[Scalar, int, str]


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attribute vector certified by one IdP key"""

    attributes: Tuple[AttributeSpec, ...]
    layout: str = "signon"

    def __post_init__(self):
        labels = [a.label for a in self.attributes]
        if len(set(labels)) != len(labels):
            raise SchemaError("duplicate attribute labels")
        if self.layout == "signon":
            if self.n < 3:
                raise SchemaError("sign-on schemas need at least s, gamma and tp")
            if labels[:3] != ["s", "gamma", "tp"]:
                raise SchemaError("sign-on schemas start with s, gamma, tp")
        elif self.layout == "device":
            if self.n < 1:
                raise SchemaError("device schemas certify at least one attribute")
        else:
            raise SchemaError(f"unknown schema layout: {self.layout}")

    @classmethod
    def signon(cls, info: Sequence[Union[str, Tuple[str, str]]] = (), two_fa: bool = False) -> "AttributeSchema":
        specs = [
            AttributeSpec("s", AttributeKind.ALWAYS_HIDDEN, AttributeEncoding.SCALAR, disclosable=False),
            AttributeSpec("gamma", AttributeKind.IDP_ASSIGNED, AttributeEncoding.SCALAR, disclosable=False),
            AttributeSpec("tp", AttributeKind.IDP_ASSIGNED, AttributeEncoding.INT),
        ]
        if two_fa:
            specs.append(
                AttributeSpec("s_d", AttributeKind.ALWAYS_HIDDEN, AttributeEncoding.SCALAR, disclosable=False)
            )
        for item in info:
            label, encoding = (item, "string") if isinstance(item, str) else item
            specs.append(AttributeSpec(label, AttributeKind.USER_INFO, AttributeEncoding(encoding)))
        return cls(tuple(specs), "signon")

    @classmethod
    def device(cls) -> "AttributeSchema":
        return cls(
            (AttributeSpec("s_new", AttributeKind.ALWAYS_HIDDEN, AttributeEncoding.SCALAR, disclosable=False),),
            "device",
        )

    @property
    def n(self) -> int:
        return len(self.attributes)

    @property
    def labels(self) -> List[str]:
        return [a.label for a in self.attributes]

    @property
    def two_fa(self) -> bool:
        return "s_d" in self.labels

    @property
    def info_labels(self) -> List[str]:
        return [a.label for a in self.attributes if a.kind == AttributeKind.USER_INFO]

    @property
    def undisclosable(self) -> Set[int]:
        return {i for i, a in enumerate(self.attributes) if not a.disclosable}

    def index_of(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SchemaError(f"unknown attribute label: {label}") from None

    def encode(self, index: int, value: AttributeValue) -> Scalar:
        """Map an attribute value onto the scalar field"""
        spec = self.attributes[index]
        if isinstance(value, Scalar):
            return value
        if spec.encoding == AttributeEncoding.INT or isinstance(value, int):
            value = int(value)
            if not 0 <= value < groups.ORDER:
                raise SchemaError(f"integer attribute {spec.label} out of range")
            return Scalar(value)
        return Scalar.from_hash(b"privsso/attr", spec.label.encode(), str(value).encode("utf-8"))

    def to_dict(self) -> dict:
        return {
            "layout": self.layout,
            "attributes": [
                {"label": a.label, "kind": a.kind.value, "encoding": a.encoding.value, "disclosable": a.disclosable}
                for a in self.attributes
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttributeSchema":
        try:
            specs = tuple(
                AttributeSpec(a["label"], AttributeKind(a["kind"]), AttributeEncoding(a["encoding"]),
                              bool(a.get("disclosable", True)))
                for a in data["attributes"]
            )
            return cls(specs, data.get("layout", "signon"))
        except (KeyError, TypeError, ValueError) as exc:
            raise DeserializationError(f"invalid attribute schema: {exc}") from exc

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttributeSchema":
        try:
            return cls.from_dict(json.loads(data.decode("utf-8")))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DeserializationError(f"invalid attribute schema: {exc}") from exc

    @property
    def schema_id(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]


# -- byte helpers shared by the serializers below -------------------------

def _put(buf: bytearray, data: bytes) -> None:
    buf += len(data).to_bytes(4, "big")
    buf += data


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise DeserializationError("truncated encoding")
        chunk = bytes(self.data[self.pos:self.pos + size])
        self.pos += size
        return chunk

    def field(self) -> bytes:
        return self.take(int.from_bytes(self.take(4), "big"))

    def done(self) -> None:
        if self.pos != len(self.data):
            raise DeserializationError("trailing bytes after encoding")


def _tag(reader: _Reader) -> None:
    if reader.take(1)[0] != FORMAT_TAG:
        raise DeserializationError("unknown format tag")


@dataclass(frozen=True)
class IdpPublicKey:
    g: G1Elem
    Y: Tuple[G1Elem, ...]
    g_tilde: G2Elem
    X_tilde: G2Elem
    Y_tilde: Tuple[G2Elem, ...]
    schema: AttributeSchema

    def is_consistent(self) -> bool:
        """Shape plus the pairing checks e(Y_i, g~) = e(g, Y~_i)"""
        n = self.schema.n
        if len(self.Y) != n or len(self.Y_tilde) != n:
            return False
        if groups.is_identity(self.g) or groups.is_identity(self.g_tilde) or groups.is_identity(self.X_tilde):
            return False
        left = groups.pairing(self.g, self.g_tilde)
        for Y_i, Yt_i in zip(self.Y, self.Y_tilde):
            if groups.is_identity(Y_i):
                return False
            if groups.pairing(Y_i, self.g_tilde) != groups.pairing(self.g, Yt_i):
                return False
        return left != groups.identity(GroupId.GT)

    def to_bytes(self) -> bytes:
        buf = bytearray([FORMAT_TAG, self.schema.n])
        buf += groups.serialize(self.g)
        buf += b"".join(groups.serialize(Y_i) for Y_i in self.Y)
        buf += groups.serialize(self.g_tilde)
        buf += groups.serialize(self.X_tilde)
        buf += b"".join(groups.serialize(Yt_i) for Yt_i in self.Y_tilde)
        _put(buf, self.schema.to_bytes())
        return bytes(buf)

    @classmethod
    def from_bytes(cls, data: bytes) -> "IdpPublicKey":
        reader = _Reader(data)
        _tag(reader)
        n = reader.take(1)[0]
        l1, l2 = groups.element_length(GroupId.G1), groups.element_length(GroupId.G2)
        g = groups.deserialize(reader.take(l1), GroupId.G1)
        Y = tuple(groups.deserialize(reader.take(l1), GroupId.G1) for _ in range(n))
        g_tilde = groups.deserialize(reader.take(l2), GroupId.G2)
        X_tilde = groups.deserialize(reader.take(l2), GroupId.G2)
        Y_tilde = tuple(groups.deserialize(reader.take(l2), GroupId.G2) for _ in range(n))
        schema = AttributeSchema.from_bytes(reader.field())
        reader.done()
        if schema.n != n:
            raise DeserializationError("schema size does not match key size")
        return cls(g, Y, g_tilde, X_tilde, Y_tilde, schema)


@dataclass(frozen=True)
class IdpKeyPair:
    X: G1Elem = field(repr=False)
    pk: IdpPublicKey

    def is_consistent(self) -> bool:
        return (groups.pairing(self.X, self.pk.g_tilde) == groups.pairing(self.pk.g, self.pk.X_tilde)
                and self.pk.is_consistent())

    def to_bytes(self) -> bytes:
        buf = bytearray([FORMAT_TAG])
        buf += groups.serialize(self.X)
        _put(buf, self.pk.to_bytes())
        return bytes(buf)

    @classmethod
    def from_bytes(cls, data: bytes) -> "IdpKeyPair":
        reader = _Reader(data)
        _tag(reader)
        X = groups.deserialize(reader.take(groups.element_length(GroupId.G1)), GroupId.G1)
        pk = IdpPublicKey.from_bytes(reader.field())
        reader.done()
        return cls(X, pk)


@dataclass(frozen=True)
class BlindSignRequest:
    commitment: G1Elem
    proof: SigmaProof
    hidden_indices: Tuple[int, ...]

    def to_bytes(self) -> bytes:
        buf = bytearray([FORMAT_TAG])
        buf += groups.serialize(self.commitment)
        buf += bytes([len(self.hidden_indices)]) + bytes(self.hidden_indices)
        _put(buf, self.proof.to_bytes())
        return bytes(buf)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlindSignRequest":
        reader = _Reader(data)
        _tag(reader)
        commitment = groups.deserialize(reader.take(groups.element_length(GroupId.G1)), GroupId.G1)
        hidden = tuple(reader.take(reader.take(1)[0]))
        proof = SigmaProof.from_bytes(reader.field())
        reader.done()
        return cls(commitment, proof, hidden)


@dataclass(frozen=True)
class BlindedCredential:
    sigma1: G1Elem
    sigma2: G1Elem

    def to_bytes(self) -> bytes:
        return bytes([FORMAT_TAG]) + groups.serialize(self.sigma1) + groups.serialize(self.sigma2)

    @classmethod
    def from_bytes(cls, data: bytes) -> "BlindedCredential":
        sigma1, sigma2 = _two_g1(data)
        return cls(sigma1, sigma2)


@dataclass(frozen=True)
class Credential:
    sigma1: G1Elem
    sigma2: G1Elem

    def to_bytes(self) -> bytes:
        return bytes([FORMAT_TAG]) + groups.serialize(self.sigma1) + groups.serialize(self.sigma2)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Credential":
        sigma1, sigma2 = _two_g1(data)
        return cls(sigma1, sigma2)


def _disclosed_bytes(disclosed: Mapping[int, Scalar]) -> bytes:
    buf = bytearray([len(disclosed)])
    for index in sorted(disclosed):
        buf += bytes([index]) + disclosed[index].to_bytes()
    return bytes(buf)


def _two_g1(data: bytes) -> Tuple[G1Elem, G1Elem]:
    reader = _Reader(data)
    _tag(reader)
    size = groups.element_length(GroupId.G1)
    first = groups.deserialize(reader.take(size), GroupId.G1)
    second = groups.deserialize(reader.take(size), GroupId.G1)
    reader.done()
    return first, second


@dataclass(frozen=True)
class ShowProof:
    sigma1: G1Elem
    sigma2: G1Elem
    theta1: G2Elem
    theta2: SigmaProof
    disclosed: Dict[int, Scalar] = field(hash=False)

    def to_bytes(self) -> bytes:
        buf = bytearray([FORMAT_TAG])
        buf += groups.serialize(self.sigma1)
        buf += groups.serialize(self.sigma2)
        buf += groups.serialize(self.theta1)
        _put(buf, self.theta2.to_bytes())
        buf += _disclosed_bytes(self.disclosed)
        return bytes(buf)

    @classmethod
    def from_bytes(cls, data: bytes) -> "ShowProof":
        reader = _Reader(data)
        _tag(reader)
        l1, l2 = groups.element_length(GroupId.G1), groups.element_length(GroupId.G2)
        sigma1 = groups.deserialize(reader.take(l1), GroupId.G1)
        sigma2 = groups.deserialize(reader.take(l1), GroupId.G1)
        theta1 = groups.deserialize(reader.take(l2), GroupId.G2)
        theta2 = SigmaProof.from_bytes(reader.field())
        disclosed: Dict[int, Scalar] = {}
        for _ in range(reader.take(1)[0]):
            index = reader.take(1)[0]
            if index in disclosed:
                raise DeserializationError("duplicate disclosed index")
            disclosed[index] = Scalar.from_bytes(reader.take(groups.SCALAR_BYTES))
        reader.done()
        return cls(sigma1, sigma2, theta1, theta2, disclosed)


# -- scheme ----------------------------------------------------------------

def keygen(params: PublicParams, schema: AttributeSchema, rng: Optional[Rng] = None) -> IdpKeyPair:
    """Generate an IdP key; the exponents x, y_i do not outlive this call"""
    x = Scalar.random_nonzero(rng)
    ys = [Scalar.random_nonzero(rng) for _ in range(schema.n)]
    pk = IdpPublicKey(
        g=params.g,
        Y=tuple(groups.exp(params.g, y) for y in ys),
        g_tilde=params.g_tilde,
        X_tilde=groups.exp(params.g_tilde, x),
        Y_tilde=tuple(groups.exp(params.g_tilde, y) for y in ys),
        schema=schema,
    )
    X = groups.exp(params.g, x)
    del x, ys
    logger.info("🔑 generated IdP key for schema %s (n=%d)", schema.schema_id, schema.n)
    return IdpKeyPair(X, pk)


def _issue_builder(pk: IdpPublicKey, commitment: G1Elem, hidden_indices: Iterable[int]) -> StatementBuilder:
    builder = StatementBuilder(ISSUE_CONTEXT + pk.schema.schema_id.encode())
    terms = [(pk.g, BLIND_LABEL)] + [(pk.Y[i], attr_label(i)) for i in hidden_indices]
    return builder.add(commitment, terms)


def _check_indices(schema: AttributeSchema, indices: Iterable[int]) -> None:
    for index in indices:
        if not 0 <= index < schema.n:
            raise SchemaError(f"attribute index {index} outside schema of size {schema.n}")


def prepare_blind_sign(pk: IdpPublicKey, hidden: Mapping[int, Scalar],
                       rng: Optional[Rng] = None) -> Tuple[Scalar, BlindSignRequest]:
    """Commit to the hidden attributes; returns the blinding factor d and the request"""
    _check_indices(pk.schema, hidden)
    indices = tuple(sorted(hidden))
    d = Scalar.random(rng)
    commitment = groups.multi_exp(
        [pk.g] + [pk.Y[i] for i in indices],
        [d] + [hidden[i] for i in indices],
    )
    builder = _issue_builder(pk, commitment, indices)
    witnesses = builder.witnesses({BLIND_LABEL: d, **{attr_label(i): hidden[i] for i in indices}})
    proof = nizk.prove(builder.build(), witnesses, rng)
    return d, BlindSignRequest(commitment, proof, indices)


def verify_blind_sign_request(pk: IdpPublicKey, request: BlindSignRequest) -> bool:
    try:
        _check_indices(pk.schema, request.hidden_indices)
        if len(set(request.hidden_indices)) != len(request.hidden_indices):
            return False
        statement = _issue_builder(pk, request.commitment, request.hidden_indices).build()
    except Exception:
        return False
    return nizk.verify(statement, request.proof)


def blind_sign(kp: IdpKeyPair, public_attrs: Mapping[int, Scalar], request: BlindSignRequest,
               rng: Optional[Rng] = None) -> BlindedCredential:
    pk = kp.pk
    _check_indices(pk.schema, public_attrs)
    hidden = set(request.hidden_indices)
    if hidden & set(public_attrs):
        raise CredentialError("public and hidden attribute indices overlap")
    if hidden | set(public_attrs) != set(range(pk.schema.n)):
        raise CredentialError("public and hidden attributes must cover the whole schema")
    if not verify_blind_sign_request(pk, request):
        raise ProofError("blind-sign request proof does not verify")

    indices = sorted(public_attrs)
    full_commitment = request.commitment * groups.multi_exp(
        [pk.Y[i] for i in indices], [public_attrs[i] for i in indices]
    )
    u = Scalar.random_nonzero(rng)
    return BlindedCredential(groups.exp(pk.g, u), groups.exp(kp.X * full_commitment, u))


def unblind(d: Scalar, blinded: BlindedCredential) -> Credential:
    return Credential(blinded.sigma1, blinded.sigma2 / groups.exp(blinded.sigma1, d))


def verify_credential(pk: IdpPublicKey, cred: Credential, attrs: Sequence[Scalar]) -> bool:
    """Direct PS signature check over the full attribute vector (holder-side)"""
    if len(attrs) != pk.schema.n or groups.is_identity(cred.sigma1):
        return False
    aggregate = pk.X_tilde * groups.multi_exp(list(pk.Y_tilde), list(attrs), GroupId.G2)
    return groups.pairing(cred.sigma1, aggregate) == groups.pairing(cred.sigma2, pk.g_tilde)


def _show_builder(pk: IdpPublicKey, sigma1: G1Elem, sigma2: G1Elem, theta1: G2Elem,
                  disclosed: Mapping[int, Scalar], extra: Sequence[LabeledEquation],
                  context: bytes) -> StatementBuilder:
    hidden = [i for i in range(pk.schema.n) if i not in disclosed]
    builder = StatementBuilder(
        SHOW_CONTEXT + pk.schema.schema_id.encode()
        + groups.serialize(sigma1) + groups.serialize(sigma2)
        + _disclosed_bytes(disclosed) + context
    )
    builder.add(
        theta1 / pk.X_tilde,
        [(pk.g_tilde, BLIND_LABEL)] + [(pk.Y_tilde[i], attr_label(i)) for i in hidden],
    )
    hidden_labels = {attr_label(i) for i in hidden}
    for eq in extra:
        for _, label in eq.terms:
            if label.startswith("attr:") and label not in hidden_labels:
                raise ForbiddenDisclosureError(f"statement fragment references non-hidden {label}")
    return builder.extend(extra)


def prove(pk: IdpPublicKey, cred: Credential, attrs: Sequence[Scalar], disclose: Iterable[int],
          extra: Sequence[LabeledEquation] = (), extra_witnesses: Optional[Mapping[str, Scalar]] = None,
          context: bytes = b"", rng: Optional[Rng] = None, blind: Optional[Scalar] = None) -> ShowProof:
    """
    Show a credential, disclosing `disclose` and proving `extra` over the hidden attributes.

    `blind` fixes the randomizer t inside theta1 so a caller can later prove
    statements about theta1 itself (see `opening_fragment`); it must be fresh
    and secret like any other witness.
    """
    schema = pk.schema
    disclose = set(disclose)
    _check_indices(schema, disclose)
    forbidden = disclose & schema.undisclosable
    if forbidden:
        labels = ", ".join(schema.labels[i] for i in sorted(forbidden))
        raise ForbiddenDisclosureError(f"attributes can never be disclosed: {labels}")
    attrs = list(attrs)
    if not verify_credential(pk, cred, attrs):
        raise CredentialError("credential does not certify the supplied attributes")

    r = Scalar.random_nonzero(rng)
    t = blind if blind is not None else Scalar.random_nonzero(rng)
    sigma1 = groups.exp(cred.sigma1, r)
    sigma2 = groups.exp(cred.sigma2 * groups.exp(cred.sigma1, t), r)
    hidden = [i for i in range(schema.n) if i not in disclose]
    theta1 = pk.X_tilde * groups.multi_exp(
        [pk.g_tilde] + [pk.Y_tilde[i] for i in hidden], [t] + [attrs[i] for i in hidden], GroupId.G2
    )
    disclosed = {i: attrs[i] for i in sorted(disclose)}

    builder = _show_builder(pk, sigma1, sigma2, theta1, disclosed, extra, context)
    values = {BLIND_LABEL: t, **{attr_label(i): attrs[i] for i in hidden}, **(extra_witnesses or {})}
    theta2 = nizk.prove(builder.build(), builder.witnesses(values), rng)
    return ShowProof(sigma1, sigma2, theta1, theta2, disclosed)


def verify(pk: IdpPublicKey, proof: ShowProof, extra: Sequence[LabeledEquation] = (),
           context: bytes = b"") -> bool:
    try:
        schema = pk.schema
        if any(not 0 <= i < schema.n for i in proof.disclosed):
            return False
        if set(proof.disclosed) & schema.undisclosable:
            return False
        if groups.is_identity(proof.sigma1):
            return False
        builder = _show_builder(pk, proof.sigma1, proof.sigma2, proof.theta1, proof.disclosed, extra, context)
        if not nizk.verify(builder.build(), proof.theta2):
            return False
        indices = sorted(proof.disclosed)
        aggregate = proof.theta1 * groups.multi_exp(
            [pk.Y_tilde[i] for i in indices], [proof.disclosed[i] for i in indices], GroupId.G2
        )
        return groups.pairing(proof.sigma1, aggregate) == groups.pairing(proof.sigma2, pk.g_tilde)
    except Exception as exc:
        logger.debug("🔍 show proof rejected: %s", exc)
        return False


def equality_fragment(pk: IdpPublicKey, index: int, value: Scalar) -> List[LabeledEquation]:
    """Prove a hidden attribute equals a public value without disclosing it"""
    return [LabeledEquation(groups.exp(pk.Y[index], value), ((pk.Y[index], attr_label(index)),))]


def opening_fragment(pk: IdpPublicKey, proof: ShowProof, prefix: str,
                     shared: Optional[Mapping[int, str]] = None) -> List[LabeledEquation]:
    """
    The opening of a show's theta1 as a statement fragment. Witness labels are
    namespaced by `prefix` so openings of several shows can sit in one proof;
    attribute indices listed in `shared` use the given label instead, which
    forces those attributes to be equal across the shows.
    """
    shared = shared or {}
    hidden = [i for i in range(pk.schema.n) if i not in proof.disclosed]
    terms = ((pk.g_tilde, prefix + BLIND_LABEL),) + tuple(
        (pk.Y_tilde[i], shared.get(i, prefix + attr_label(i))) for i in hidden
    )
    return [LabeledEquation(proof.theta1 / pk.X_tilde, terms)]


def opening_witnesses(schema: AttributeSchema, attrs: Sequence[Scalar], disclose: Iterable[int], blind: Scalar,
                      prefix: str, shared: Optional[Mapping[int, str]] = None) -> Dict[str, Scalar]:
    shared = shared or {}
    disclose = set(disclose)
    values = {prefix + BLIND_LABEL: blind}
    for i in range(schema.n):
        if i not in disclose:
            values[shared.get(i, prefix + attr_label(i))] = attrs[i]
    return values
