#!/usr/bin/env python3
"""
Message-level single sign-on protocol.

Setup phase: request_id (client) -> provide_id (IdP) -> unblind_id (client).
Sign-on phase: prove_id (client) -> verify_id (RP), with the per-domain
pseudonym zeta, the optional device pseudonym zeta_d and the optional
identity-retrieval token E all proven against the credential's hidden
attributes in one conjunctive proof. Also covers guest and no-retrieval
sign-ons, 2FA, secret rotation and replay protection.
"""

import json
import logging
import threading
import time
import uuid
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from . import groups, nizk, pscred, retrieval
from .devices import _raw_public, open_sealed, seal
from .errors import (
    CredentialError, ExpiredCredentialError, ForbiddenDisclosureError,
    PrivSSOError, ProtocolError, RevokedDeviceError, RotationError,
    UnknownAttributeError, UnsupportedPredicateError, WireError,
)
from .groups import G1Elem, GroupId, PublicParams, Rng, Scalar
from .nizk import LabeledEquation, SigmaProof, StatementBuilder
from .pscred import (
    EXPIRY_INDEX, GAMMA_INDEX, SECRET_INDEX, AttributeKind, AttributeSchema, BlindedCredential,
    BlindSignRequest, Credential, IdpKeyPair, IdpPublicKey, ShowProof, attr_label,
)
from .retrieval import AuthorityPublicInfo, RetrievalToken
from .wire import Envelope, MessageType

logger = logging.getLogger(__name__)

DAY_SECONDS = 86400
GAMMA_SEAL_INFO = b"privsso/gamma/v1"
SIGNON_PURPOSE = b"signon"
ROTATE_OLD_PURPOSE = b"rotate-old"
ROTATE_NEW_PURPOSE = b"rotate-new"
# guest records live beside pseudonym keys; ":" never occurs in a hex key
GUEST_PREFIX = "guest:"

Clock = Union[datetime, float, int]


def _epoch(now: Optional[Clock]) -> float:
    if now is None:
        return time.time()
    if isinstance(now, datetime):
        if now.tzinfo is None:
            now = now.replace(tzinfo=timezone.utc)
        return now.timestamp()
    return float(now)


def day_number(now: Optional[Clock] = None) -> int:
    """Days since the Unix epoch (UTC)"""
    return int(_epoch(now) // DAY_SECONDS)


@dataclass(frozen=True)
class IssuancePolicy:
    validity_days: int = 7
    granularity_days: int = 1

    def expiry(self, now: Optional[Clock] = None) -> int:
        """Last valid day, rounded up to the IdP's denomination"""
        last = day_number(now) + self.validity_days
        step = max(1, self.granularity_days)
        return -(-last // step) * step


# -- user side state -------------------------------------------------------

@dataclass
class UserSecrets:
    s: Scalar = field(repr=False)
    s_d: Optional[Scalar] = field(default=None, repr=False)

    @classmethod
    def generate(cls, rng: Optional[Rng] = None, two_fa: bool = True) -> "UserSecrets":
        return cls(Scalar.random_nonzero(rng), Scalar.random_nonzero(rng) if two_fa else None)


@dataclass
class PendingIssuance:
    """Client-side state between request_id and unblind_id"""

    d: Scalar = field(repr=False)
    reply_key: X25519PrivateKey = field(repr=False)
    schema: AttributeSchema


@dataclass(frozen=True)
class RequestIDMsg:
    schema: AttributeSchema
    request: BlindSignRequest
    reply_key: bytes

    def to_envelope(self) -> Envelope:
        return Envelope(MessageType.REQUEST_ID, {
            "schema": self.schema.to_bytes(),
            "request": self.request.to_bytes(),
            "reply_key": self.reply_key,
        })

    @classmethod
    def from_envelope(cls, env: Envelope) -> "RequestIDMsg":
        _expect(env, MessageType.REQUEST_ID)
        return cls(
            AttributeSchema.from_bytes(env.require("schema")),
            BlindSignRequest.from_bytes(env.require("request")),
            env.require("reply_key"),
        )


def _expect(env: Envelope, kind: MessageType) -> None:
    if env.type != kind:
        raise WireError(f"expected {kind.name}, got {env.type.name}")


def build_signon_schema(catalog: Mapping[str, str], info_request: Sequence[str],
                        two_fa: bool = False) -> AttributeSchema:
    """Sign-on schema for the requested info labels; `catalog` maps the IdP's labels to encodings"""
    unknown = [label for label in info_request if label not in catalog]
    if unknown:
        raise UnknownAttributeError(f"IdP does not certify: {', '.join(unknown)}")
    ordered = [label for label in catalog if label in set(info_request)]
    return AttributeSchema.signon([(label, catalog[label]) for label in ordered], two_fa=two_fa)


def request_id(pk: IdpPublicKey, secrets: UserSecrets,
               rng: Optional[Rng] = None) -> Tuple[PendingIssuance, RequestIDMsg]:
    """Blind the user's secrets (s, and s_d for 2FA-capable schemas) for issuance"""
    schema = pk.schema
    hidden = {SECRET_INDEX: secrets.s}
    if schema.two_fa:
        if secrets.s_d is None:
            raise ProtocolError("2FA-capable credentials need a device secret")
        hidden[schema.index_of("s_d")] = secrets.s_d
    d, request = pscred.prepare_blind_sign(pk, hidden, rng)
    reply_key = X25519PrivateKey.generate()
    msg = RequestIDMsg(schema, request, _raw_public(reply_key.public_key()))
    return PendingIssuance(d, reply_key, schema), msg


# -- IdP side --------------------------------------------------------------

@dataclass
class DeviceRecord:
    device_id: str
    label: str = "device"
    revoked: bool = False
    created_at: float = 0.0

    def to_dict(self) -> dict:
        return {"device_id": self.device_id, "label": self.label, "revoked": self.revoked,
                "created_at": self.created_at}

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceRecord":
        return cls(data["device_id"], data.get("label", "device"), bool(data.get("revoked", False)),
                   float(data.get("created_at", 0.0)))


@dataclass
class UserRecord:
    login_id: str
    gamma: Scalar = field(repr=False)
    info: Dict[str, Union[str, int]] = field(default_factory=dict)
    devices: Dict[str, DeviceRecord] = field(default_factory=dict)
    password_hash: str = field(default="", repr=False)

    @classmethod
    def create(cls, login_id: str, info: Optional[Mapping] = None, rng: Optional[Rng] = None,
               password_hash: str = "") -> "UserRecord":
        return cls(login_id, Scalar.random_nonzero(rng), dict(info or {}), {}, password_hash)

    @property
    def h_gamma(self) -> G1Elem:
        return groups.exp(retrieval.retrieval_base(), self.gamma)

    def add_device(self, label: str = "device", now: Optional[Clock] = None) -> DeviceRecord:
        device = DeviceRecord(uuid.uuid4().hex[:12], label, False, _epoch(now))
        self.devices[device.device_id] = device
        return device

    def to_dict(self) -> dict:
        return {
            "login_id": self.login_id,
            "gamma": self.gamma.to_bytes().hex(),
            "info": self.info,
            "devices": {k: v.to_dict() for k, v in self.devices.items()},
            "password_hash": self.password_hash,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserRecord":
        return cls(
            login_id=data["login_id"],
            gamma=Scalar.from_bytes(bytes.fromhex(data["gamma"])),
            info=dict(data.get("info", {})),
            devices={k: DeviceRecord.from_dict(v) for k, v in data.get("devices", {}).items()},
            password_hash=data.get("password_hash", ""),
        )


@dataclass(frozen=True)
class BlindedCredentialMsg:
    blinded: BlindedCredential
    sealed_gamma: bytes
    tp: int
    attributes: Dict[str, Union[str, int]]
    schema_id: str

    def to_envelope(self) -> Envelope:
        return Envelope(MessageType.BLINDED_CREDENTIAL, {
            "blinded": self.blinded.to_bytes(),
            "sealed_gamma": self.sealed_gamma,
            "tp": self.tp.to_bytes(8, "big"),
            "attributes": _json_bytes(self.attributes),
            "schema_id": self.schema_id.encode(),
        })

    @classmethod
    def from_envelope(cls, env: Envelope) -> "BlindedCredentialMsg":
        _expect(env, MessageType.BLINDED_CREDENTIAL)
        return cls(
            BlindedCredential.from_bytes(env.require("blinded")),
            env.require("sealed_gamma"),
            int.from_bytes(env.require("tp"), "big"),
            _json_load(env.get("attributes") or b"{}"),
            env.require("schema_id").decode(),
        )


def _json_bytes(value) -> bytes:
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _json_load(data: bytes):
    try:
        return json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"invalid JSON field: {exc}") from exc


def provide_id(kp: IdpKeyPair, user: UserRecord, msg: RequestIDMsg, now: Optional[Clock] = None,
               device_id: Optional[str] = None, policy: IssuancePolicy = IssuancePolicy(),
               rng: Optional[Rng] = None) -> BlindedCredentialMsg:
    """Blind-sign the request over (gamma, tp, verified info)"""
    schema = kp.pk.schema
    if device_id is not None:
        device = user.devices.get(device_id)
        if device is None:
            raise ProtocolError(f"unknown device {device_id}")
        if device.revoked:
            raise RevokedDeviceError(f"device {device_id} was reported lost or stolen")
    if msg.schema.schema_id != schema.schema_id:
        raise ProtocolError("request schema does not match the signing key")
    always_hidden = {i for i, a in enumerate(schema.attributes) if a.kind == AttributeKind.ALWAYS_HIDDEN}
    if set(msg.request.hidden_indices) != always_hidden:
        raise ProtocolError("only the user secrets may be hidden at issuance")
    missing = [label for label in schema.info_labels if label not in user.info]
    if missing:
        raise UnknownAttributeError(f"no verified value for: {', '.join(missing)}")

    tp = policy.expiry(now)
    public = {GAMMA_INDEX: user.gamma, EXPIRY_INDEX: Scalar(tp)}
    for label in schema.info_labels:
        index = schema.index_of(label)
        public[index] = schema.encode(index, user.info[label])
    blinded = pscred.blind_sign(kp, public, msg.request, rng)
    sealed = seal(msg.reply_key, user.gamma.to_bytes(), GAMMA_SEAL_INFO)
    values = {label: user.info[label] for label in schema.info_labels}
    return BlindedCredentialMsg(blinded, sealed, tp, values, schema.schema_id)


@dataclass
class CredentialBundle:
    """Everything the client needs to show a credential"""

    schema: AttributeSchema
    credential: Credential
    attrs: List[Scalar] = field(repr=False)
    values: Dict[str, Union[str, int]]
    tp: int
    issuer: str = ""

    @property
    def gamma(self) -> Scalar:
        return self.attrs[GAMMA_INDEX]

    def is_expired(self, now: Optional[Clock] = None) -> bool:
        return self.tp < day_number(now)

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "credential": self.credential.to_bytes().hex(),
            "attrs": [a.to_bytes().hex() for a in self.attrs],
            "values": self.values,
            "tp": self.tp,
            "issuer": self.issuer,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CredentialBundle":
        return cls(
            AttributeSchema.from_dict(data["schema"]),
            Credential.from_bytes(bytes.fromhex(data["credential"])),
            [Scalar.from_bytes(bytes.fromhex(a)) for a in data["attrs"]],
            dict(data.get("values", {})),
            int(data["tp"]),
            data.get("issuer", ""),
        )


def unblind_id(pk: IdpPublicKey, pending: PendingIssuance, secrets: UserSecrets,
               msg: BlindedCredentialMsg, issuer: str = "") -> CredentialBundle:
    schema = pk.schema
    if msg.schema_id != schema.schema_id:
        raise ProtocolError("issued credential is for a different schema")
    gamma = Scalar.from_bytes(open_sealed(pending.reply_key, msg.sealed_gamma, GAMMA_SEAL_INFO))
    attrs: List[Scalar] = [Scalar(0)] * schema.n
    attrs[SECRET_INDEX] = secrets.s
    attrs[GAMMA_INDEX] = gamma
    attrs[EXPIRY_INDEX] = Scalar(msg.tp)
    if schema.two_fa:
        attrs[schema.index_of("s_d")] = secrets.s_d
    for label in schema.info_labels:
        if label not in msg.attributes:
            raise CredentialError(f"IdP response lacks attribute {label}")
        index = schema.index_of(label)
        attrs[index] = schema.encode(index, msg.attributes[label])
    credential = pscred.unblind(pending.d, msg.blinded)
    if not pscred.verify_credential(pk, credential, attrs):
        raise CredentialError("unblinded credential does not verify")
    values = {"tp": msg.tp, **msg.attributes}
    return CredentialBundle(schema, credential, attrs, values, msg.tp, issuer)


# -- sign-on ---------------------------------------------------------------

@dataclass(frozen=True)
class SignOnFlags:
    guest: bool = False
    retrieval: bool = True
    two_fa: bool = False

    def to_byte(self) -> int:
        return int(self.guest) | int(self.retrieval) << 1 | int(self.two_fa) << 2

    @classmethod
    def from_byte(cls, value: int) -> "SignOnFlags":
        if value > 7:
            raise WireError("unknown sign-on flags")
        return cls(bool(value & 1), bool(value & 2), bool(value & 4))


class Predicate:
    """Statement about hidden info attributes; only equality to a public value is supported"""

    def to_dict(self) -> dict:
        raise UnsupportedPredicateError(f"unsupported predicate {type(self).__name__}")


@dataclass(frozen=True)
class HiddenEquality(Predicate):
    label: str
    value: Union[str, int]

    def to_dict(self) -> dict:
        return {"kind": "eq", "label": self.label, "value": self.value}


def predicate_from_dict(data: dict) -> Predicate:
    if data.get("kind") != "eq":
        raise UnsupportedPredicateError(f"unsupported predicate kind {data.get('kind')!r}")
    return HiddenEquality(data["label"], data["value"])


def derive_pseudonym(secret: Scalar, domain: str) -> G1Elem:
    """Per-domain pseudonym H(domain)^secret"""
    return groups.exp(groups.hash_to_g1(domain), secret)


@dataclass(frozen=True)
class SignOnRequest:
    show: ShowProof
    zeta: Optional[G1Elem]
    zeta_d: Optional[G1Elem]
    token: Optional[RetrievalToken]
    disclosed: Dict[str, Union[str, int]] = field(hash=False)
    domain: str = ""
    rp_nonce: str = ""
    flags: SignOnFlags = SignOnFlags()
    issuer: str = ""
    schema_id: str = ""
    predicates: Tuple[Predicate, ...] = ()

    @property
    def tp(self) -> int:
        return int(self.disclosed.get("tp", -1))

    def to_envelope(self) -> Envelope:
        opt = lambda elem: groups.serialize(elem) if elem is not None else b""  # noqa: E731
        predicates = [p.to_dict() for p in self.predicates]
        return Envelope(MessageType.SIGNON_REQUEST, {
            "show": self.show.to_bytes(),
            "zeta": opt(self.zeta),
            "zeta_d": opt(self.zeta_d),
            "token": self.token.to_bytes() if self.token else b"",
            "disclosed": _json_bytes(self.disclosed),
            "domain": self.domain.encode("utf-8"),
            "rp_nonce": self.rp_nonce.encode("ascii"),
            "flags": bytes([self.flags.to_byte()]),
            "issuer": self.issuer.encode("utf-8"),
            "schema_id": self.schema_id.encode("ascii"),
            "predicates": _json_bytes(predicates) if predicates else b"",
        })

    def to_bytes(self) -> bytes:
        return self.to_envelope().to_bytes()

    @classmethod
    def from_envelope(cls, env: Envelope) -> "SignOnRequest":
        _expect(env, MessageType.SIGNON_REQUEST)
        g1 = lambda name: (groups.deserialize(env.get(name), GroupId.G1)  # noqa: E731
                           if env.get(name) else None)
        token = env.get("token")
        predicates = [predicate_from_dict(item) for item in _json_load(env.get("predicates") or b"[]")]
        flags = env.require("flags")
        if len(flags) != 1:
            raise WireError("flags must be one byte")
        return cls(
            show=ShowProof.from_bytes(env.require("show")),
            zeta=g1("zeta"),
            zeta_d=g1("zeta_d"),
            token=RetrievalToken.from_bytes(token) if token else None,
            disclosed=_json_load(env.require("disclosed")),
            domain=env.require("domain").decode("utf-8"),
            rp_nonce=(env.get("rp_nonce") or b"").decode("ascii"),
            flags=SignOnFlags.from_byte(flags[0]),
            issuer=(env.get("issuer") or b"").decode("utf-8"),
            schema_id=env.require("schema_id").decode("ascii"),
            predicates=tuple(predicates),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignOnRequest":
        return cls.from_envelope(Envelope.from_bytes(data, MessageType.SIGNON_REQUEST))


def signon_context(domain: str, rp_nonce: str, flags: SignOnFlags, issuer: str,
                   purpose: bytes = SIGNON_PURPOSE) -> bytes:
    return b"|".join([
        b"privsso/signon/v1", purpose, domain.encode("utf-8"), rp_nonce.encode("ascii"),
        bytes([flags.to_byte()]), issuer.encode("utf-8"),
    ])


def _fragments(params: PublicParams, pk: IdpPublicKey, domain: str, flags: SignOnFlags,
               zeta: Optional[G1Elem], zeta_d: Optional[G1Elem], token: Optional[RetrievalToken],
               authority: Optional[AuthorityPublicInfo],
               predicates: Sequence[Predicate]) -> List[LabeledEquation]:
    schema = pk.schema
    base = groups.hash_to_g1(domain)
    fragment: List[LabeledEquation] = []
    if zeta is not None:
        fragment.append(LabeledEquation(zeta, ((base, attr_label(SECRET_INDEX)),)))
    if zeta_d is not None:
        fragment.append(LabeledEquation(zeta_d, ((base, attr_label(schema.index_of("s_d"))),)))
    if token is not None:
        if authority is None:
            raise ProtocolError("a retrieval token needs the authority key")
        fragment.extend(retrieval.statement_fragment_for_E(params, authority.y, authority.h, token))
    for predicate in predicates:
        if not isinstance(predicate, HiddenEquality):
            raise UnsupportedPredicateError(f"unsupported predicate {type(predicate).__name__}")
        index = schema.index_of(predicate.label)
        if schema.attributes[index].kind != AttributeKind.USER_INFO:
            raise UnsupportedPredicateError("predicates apply to info attributes only")
        fragment.extend(pscred.equality_fragment(pk, index, schema.encode(index, predicate.value)))
    return fragment


def _prove(pk: IdpPublicKey, bundle: CredentialBundle, domain: str, rp_nonce: str,
           disclose: Iterable[str], flags: SignOnFlags, authority: Optional[AuthorityPublicInfo],
           predicates: Sequence[Predicate], rng: Optional[Rng], params: PublicParams,
           purpose: bytes, blind: Optional[Scalar] = None) -> SignOnRequest:
    schema = pk.schema
    if bundle.schema.schema_id != schema.schema_id:
        raise ProtocolError("credential schema does not match the IdP key")
    disclose = list(disclose)
    for label in disclose:
        if label not in schema.labels:
            raise UnknownAttributeError(f"credential has no attribute {label!r}")
        if schema.attributes[schema.index_of(label)].disclosable is False:
            raise ForbiddenDisclosureError(f"attribute {label!r} can never be disclosed")
    predicates = tuple(predicates)
    for predicate in predicates:
        if not isinstance(predicate, HiddenEquality):
            raise UnsupportedPredicateError(f"unsupported predicate {type(predicate).__name__}")
        if predicate.label in disclose:
            raise ProtocolError(f"{predicate.label!r} is disclosed; a predicate on it is pointless")
    if flags.guest and flags.two_fa:
        raise ProtocolError("guest sign-ons carry no device pseudonym")
    if flags.two_fa and not schema.two_fa:
        raise ProtocolError("credential has no device secret; fetch a 2FA-capable credential")
    if flags.retrieval and authority is None:
        raise ProtocolError("retrieval requested but no authority key is known")

    disclose_idx = sorted({schema.index_of(label) for label in disclose} | {EXPIRY_INDEX})
    attrs = bundle.attrs
    zeta = None if flags.guest else derive_pseudonym(attrs[SECRET_INDEX], domain)
    zeta_d = derive_pseudonym(attrs[schema.index_of("s_d")], domain) if flags.two_fa else None
    witnesses: Dict[str, Scalar] = {}
    token = None
    if flags.retrieval:
        eps, token = retrieval.encrypt(params, authority.y, authority.h, bundle.gamma, rng)
        witnesses[retrieval.EPSILON_LABEL] = eps
    fragment = _fragments(params, pk, domain, flags, zeta, zeta_d, token, authority, predicates)
    context = signon_context(domain, rp_nonce, flags, bundle.issuer, purpose)
    show = pscred.prove(pk, bundle.credential, attrs, disclose_idx, fragment, witnesses, context, rng, blind)
    disclosed = {schema.labels[i]: bundle.values[schema.labels[i]] for i in disclose_idx}
    return SignOnRequest(show, zeta, zeta_d, token, disclosed, domain, rp_nonce, flags,
                         bundle.issuer, schema.schema_id, predicates)


def prove_id(pk: IdpPublicKey, bundle: CredentialBundle, domain: str, rp_nonce: str,
             disclose: Iterable[str] = (), flags: SignOnFlags = SignOnFlags(),
             authority: Optional[AuthorityPublicInfo] = None, predicates: Sequence[Predicate] = (),
             now: Optional[Clock] = None, rng: Optional[Rng] = None,
             params: Optional[PublicParams] = None) -> SignOnRequest:
    """Build a sign-on request for `domain`; tp is always disclosed"""
    if bundle.is_expired(now):
        raise ExpiredCredentialError("credential expired; fetch a new one")
    return _prove(pk, bundle, domain, rp_nonce, disclose, flags, authority, predicates, rng,
                  params or groups.setup(), SIGNON_PURPOSE)


class RejectReason(str, Enum):
    BAD_PROOF = "bad-proof"
    EXPIRED = "expired"
    REPLAY = "replay"
    POLICY_UNMET = "policy-unmet"
    UNKNOWN_IDP = "unknown-idp"
    BLOCKLISTED = "blocklisted"
    MALFORMED = "malformed"
    WRONG_DOMAIN = "wrong-domain"
    SECOND_FACTOR_REQUIRED = "second-factor-required"
    UNKNOWN_ACCOUNT = "unknown-account"
    ROTATION_REFUSED = "rotation-refused"


class AccountAction(str, Enum):
    CREATED = "created"
    MATCHED = "matched"
    DEVICE_ENROLLED = "device-enrolled"
    ROTATED = "rotated"
    GUEST = "guest"


@dataclass(frozen=True)
class SignOnResult:
    accepted: bool
    action: Optional[AccountAction] = None
    reason: Optional[RejectReason] = None
    account_id: Optional[str] = None
    detail: str = ""

    @classmethod
    def reject(cls, reason: RejectReason, detail: str = "", account_id: Optional[str] = None) -> "SignOnResult":
        return cls(False, None, reason, account_id, detail)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "action": self.action.value if self.action else None,
            "reason": self.reason.value if self.reason else None,
            "account_id": self.account_id,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SignOnResult":
        return cls(
            bool(data["accepted"]),
            AccountAction(data["action"]) if data.get("action") else None,
            RejectReason(data["reason"]) if data.get("reason") else None,
            data.get("account_id"),
            data.get("detail", ""),
        )

    def to_envelope(self) -> Envelope:
        return Envelope(MessageType.SIGNON_RESULT, {"result": _json_bytes(self.to_dict())})


@dataclass(frozen=True)
class SignOnPolicy:
    require_retrieval: bool = True
    require_2fa: bool = False
    allow_guest: bool = True
    two_fa_window_seconds: int = 300


class NonceCache:
    """Single-use RP nonces; check-and-consume is atomic. At most `max_entries` are outstanding"""

    def __init__(self, ttl_seconds: int = 120, max_entries: int = 100_000):
        if max_entries < 1:
            raise ValueError("max_entries must be positive")
        self.ttl = ttl_seconds
        self.max_entries = max_entries
        self._issued: Dict[str, float] = {}
        self._lock = threading.Lock()

    def issue(self, now: Optional[Clock] = None) -> str:
        nonce = uuid.uuid4().hex
        with self._lock:
            self._prune(_epoch(now))
            while len(self._issued) >= self.max_entries:
                # insertion order is issue order
                del self._issued[next(iter(self._issued))]
            self._issued[nonce] = _epoch(now)
        return nonce

    def consume(self, nonce: str, now: Optional[Clock] = None) -> bool:
        moment = _epoch(now)
        with self._lock:
            issued_at = self._issued.pop(nonce, None)
            self._prune(moment)
        return issued_at is not None and 0 <= moment - issued_at <= self.ttl

    def _prune(self, moment: float) -> None:
        # entries live for twice the TTL
        horizon = moment - 2 * self.ttl
        for nonce in [n for n, t in self._issued.items() if t < horizon]:
            del self._issued[nonce]

    def __len__(self) -> int:
        return len(self._issued)


@dataclass
class AccountRecord:
    account_id: str
    zeta: str
    zeta_d: List[str] = field(default_factory=list)
    token: Optional[str] = None
    disclosed: Dict[str, Union[str, int]] = field(default_factory=dict)
    issuer: str = ""
    created_at: float = 0.0
    last_seen: float = 0.0
    pending_factor: Optional[Tuple[str, float]] = None

    def to_dict(self) -> dict:
        return {
            "account_id": self.account_id, "zeta": self.zeta, "zeta_d": list(self.zeta_d),
            "token": self.token, "disclosed": self.disclosed, "issuer": self.issuer,
            "created_at": self.created_at, "last_seen": self.last_seen,
            "pending_factor": list(self.pending_factor) if self.pending_factor else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AccountRecord":
        pending = data.get("pending_factor")
        return cls(
            data["account_id"], data["zeta"], list(data.get("zeta_d", [])), data.get("token"),
            dict(data.get("disclosed", {})), data.get("issuer", ""), float(data.get("created_at", 0)),
            float(data.get("last_seen", 0)), (pending[0], float(pending[1])) if pending else None,
        )

    @property
    def is_guest(self) -> bool:
        return self.zeta.startswith(GUEST_PREFIX)

    @property
    def retrieval_token(self) -> Optional[RetrievalToken]:
        return RetrievalToken.from_bytes(bytes.fromhex(self.token)) if self.token else None


class AccountStore:
    """RP account records keyed by the hex of zeta; per-key locks serialize read-modify-write"""

    def __init__(self):
        self._records: Dict[str, AccountRecord] = {}
        self._by_id: Dict[str, str] = {}
        self._blocklist: Dict[str, float] = {}
        self._locks: Dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._guard = threading.Lock()

    def lock(self, key: str) -> threading.Lock:
        with self._guard:
            return self._locks[key]

    def get(self, key: str) -> Optional[AccountRecord]:
        return self._records.get(key)

    def by_account_id(self, account_id: str) -> Optional[AccountRecord]:
        key = self._by_id.get(account_id)
        return self._records.get(key) if key is not None else None

    def _index(self, record: AccountRecord) -> None:
        self._records[record.zeta] = record
        self._by_id[record.account_id] = record.zeta

    def put(self, record: AccountRecord) -> None:
        with self._guard:
            self._index(record)
            self._persist()

    def delete(self, key: str) -> None:
        with self._guard:
            record = self._records.pop(key, None)
            # a rotated account is re-put under its new key before the old one goes
            if record is not None and self._by_id.get(record.account_id) == key:
                del self._by_id[record.account_id]
            self._persist()

    def blocklist(self, key: str, now: Optional[Clock] = None) -> None:
        with self._guard:
            self._blocklist[key] = _epoch(now)
            self._persist()

    def is_blocklisted(self, key: str) -> bool:
        return key in self._blocklist

    def __len__(self) -> int:
        return len(self._records)

    def _persist(self) -> None:
        """Hook for durable subclasses; called with the guard held"""


def _key(elem: G1Elem) -> str:
    return groups.serialize(elem).hex()


def check_signon(pk: IdpPublicKey, req: SignOnRequest, domain: str,
                 authority: Optional[AuthorityPublicInfo], now: Optional[Clock],
                 policy: SignOnPolicy, params: Optional[PublicParams] = None,
                 purpose: bytes = SIGNON_PURPOSE, check_expiry: bool = True) -> Optional[SignOnResult]:
    """Stateless checks of VerifyID; returns a reject result or None when everything passes"""
    params = params or groups.setup()
    schema = pk.schema
    if req.domain != domain:
        return SignOnResult.reject(RejectReason.WRONG_DOMAIN, f"request is for {req.domain!r}")
    if req.schema_id != schema.schema_id:
        return SignOnResult.reject(RejectReason.UNKNOWN_IDP, "no key for this credential schema")
    if policy.require_retrieval and req.token is None:
        return SignOnResult.reject(RejectReason.POLICY_UNMET, "identity retrieval token required")
    if req.zeta is None and not (req.flags.guest and policy.allow_guest):
        return SignOnResult.reject(RejectReason.POLICY_UNMET, "guest sign-ons are not allowed")
    if policy.require_2fa and (req.zeta_d is None or req.zeta is None):
        return SignOnResult.reject(RejectReason.POLICY_UNMET, "device pseudonym required")
    if req.flags.guest != (req.zeta is None) or req.flags.two_fa != (req.zeta_d is not None) \
            or req.flags.retrieval != (req.token is not None):
        return SignOnResult.reject(RejectReason.MALFORMED, "flags do not match the request")
    if req.zeta_d is not None and not schema.two_fa:
        return SignOnResult.reject(RejectReason.MALFORMED, "schema has no device secret")

    # disclosed raw values must match the proven scalars, and tp is mandatory
    if set(req.disclosed) != {schema.labels[i] for i in req.show.disclosed if i < schema.n}:
        return SignOnResult.reject(RejectReason.MALFORMED, "disclosed values do not match the proof")
    if EXPIRY_INDEX not in req.show.disclosed:
        return SignOnResult.reject(RejectReason.MALFORMED, "tp must be disclosed")
    try:
        for label, value in req.disclosed.items():
            index = schema.index_of(label)
            if schema.encode(index, value) != req.show.disclosed[index]:
                return SignOnResult.reject(RejectReason.BAD_PROOF, f"disclosed {label} does not match")
        fragment = _fragments(params, pk, domain, req.flags, req.zeta, req.zeta_d, req.token,
                              authority, req.predicates)
    except (PrivSSOError, KeyError, ValueError) as exc:
        return SignOnResult.reject(RejectReason.MALFORMED, str(exc))

    context = signon_context(domain, req.rp_nonce, req.flags, req.issuer, purpose)
    if not pscred.verify(pk, req.show, fragment, context):
        return SignOnResult.reject(RejectReason.BAD_PROOF, "credential proof does not verify")
    if check_expiry and req.tp < day_number(now):
        return SignOnResult.reject(RejectReason.EXPIRED, "credential expired")
    return None


def _admit_guest(req: SignOnRequest, accounts: AccountStore, moment: float) -> SignOnResult:
    """
    Guests get no pseudonym, but a carried retrieval token is still filed under
    a one-off record so the session can be reported like any account.
    """
    if req.token is None:
        return SignOnResult(True, AccountAction.GUEST)
    account_id = uuid.uuid4().hex
    accounts.put(AccountRecord(
        account_id, GUEST_PREFIX + account_id, token=req.token.to_bytes().hex(),
        disclosed=dict(req.disclosed), issuer=req.issuer, created_at=moment, last_seen=moment,
    ))
    logger.info("👤 guest sign-on filed as %s", account_id)
    return SignOnResult(True, AccountAction.GUEST, account_id=account_id)


def verify_id(pk: IdpPublicKey, req: SignOnRequest, domain: str,
              authority: Optional[AuthorityPublicInfo], now: Optional[Clock], nonce_cache: NonceCache,
              policy: SignOnPolicy, accounts: AccountStore,
              params: Optional[PublicParams] = None) -> SignOnResult:
    """Verify a sign-on request and resolve it against the RP's account store"""
    rejected = check_signon(pk, req, domain, authority, now, policy, params)
    if rejected is not None:
        return rejected
    if not nonce_cache.consume(req.rp_nonce, now):
        return SignOnResult.reject(RejectReason.REPLAY, "nonce unknown, expired or already used")

    moment = _epoch(now)
    if req.zeta is None:
        return _admit_guest(req, accounts, moment)

    key = _key(req.zeta)
    if accounts.is_blocklisted(key):
        return SignOnResult.reject(RejectReason.BLOCKLISTED, "this secret was rotated out")
    device = _key(req.zeta_d) if req.zeta_d is not None else None
    with accounts.lock(key):
        record = accounts.get(key)
        if record is None:
            record = AccountRecord(uuid.uuid4().hex, key, created_at=moment, issuer=req.issuer)
            action = AccountAction.CREATED
        elif device is not None and device not in record.zeta_d:
            action = AccountAction.DEVICE_ENROLLED
        else:
            action = AccountAction.MATCHED
        if device is not None and device not in record.zeta_d:
            record.zeta_d.append(device)
        if req.token is not None:
            record.token = req.token.to_bytes().hex()
        record.disclosed = dict(req.disclosed)
        record.last_seen = moment

        if policy.require_2fa:
            pending = record.pending_factor
            fresh = pending is not None and moment - pending[1] <= policy.two_fa_window_seconds
            if fresh and pending[0] != device:
                record.pending_factor = None
                accounts.put(record)
                return SignOnResult(True, action, account_id=record.account_id)
            record.pending_factor = (device, moment)
            accounts.put(record)
            if fresh:
                return SignOnResult(False, action, RejectReason.POLICY_UNMET, record.account_id,
                                    "second factor must come from a different device")
            return SignOnResult(False, action, RejectReason.SECOND_FACTOR_REQUIRED, record.account_id,
                                "sign on again from another enrolled device")
        accounts.put(record)
    logger.info("✅ sign-on accepted for %s (%s)", domain, action.value)
    return SignOnResult(True, action, account_id=record.account_id)


# -- secret rotation ---------------------------------------------------------

ROTATION_BINDING_CONTEXT = b"privsso/rotation-binding/v1"
GAMMA_SHARED = {GAMMA_INDEX: "gamma"}


@dataclass(frozen=True)
class RotationRequest:
    """
    Two sign-on proofs, one per credential, plus a sigma proof that opens both
    theta1 commitments with a single gamma witness. Nothing deterministic in
    gamma is revealed.
    """

    old: SignOnRequest
    new: SignOnRequest
    binding: SigmaProof

    def to_envelope(self) -> Envelope:
        return Envelope(MessageType.ROTATION_REQUEST, {
            "old": self.old.to_bytes(), "new": self.new.to_bytes(), "binding": self.binding.to_bytes(),
        })

    def to_bytes(self) -> bytes:
        return self.to_envelope().to_bytes()

    @classmethod
    def from_envelope(cls, env: Envelope) -> "RotationRequest":
        _expect(env, MessageType.ROTATION_REQUEST)
        return cls(SignOnRequest.from_bytes(env.require("old")), SignOnRequest.from_bytes(env.require("new")),
                   SigmaProof.from_bytes(env.require("binding")))


def _binding_builder(old_pk: IdpPublicKey, old: SignOnRequest, new_pk: IdpPublicKey,
                     new: SignOnRequest) -> StatementBuilder:
    builder = StatementBuilder(ROTATION_BINDING_CONTEXT + old.to_bytes() + new.to_bytes())
    builder.extend(pscred.opening_fragment(old_pk, old.show, "old/", GAMMA_SHARED))
    return builder.extend(pscred.opening_fragment(new_pk, new.show, "new/", GAMMA_SHARED))


def rotate_secret(old_pk: IdpPublicKey, old_bundle: CredentialBundle, new_pk: IdpPublicKey,
                  new_bundle: CredentialBundle, domain: str, rp_nonce: str,
                  authority: Optional[AuthorityPublicInfo] = None, retrieval_on: bool = True,
                  now: Optional[Clock] = None, rng: Optional[Rng] = None,
                  params: Optional[PublicParams] = None) -> RotationRequest:
    """Prove ownership of zeta(s) with the expired credential and of zeta(s') with the new one"""
    params = params or groups.setup()
    if not old_bundle.is_expired(now):
        raise RotationError("the old credential must be expired before rotating")
    if new_bundle.is_expired(now):
        raise ExpiredCredentialError("the new credential is already expired")
    if old_bundle.gamma != new_bundle.gamma:
        raise RotationError("the credentials were issued to different users")
    old_blind, new_blind = Scalar.random_nonzero(rng), Scalar.random_nonzero(rng)
    old = _prove(old_pk, old_bundle, domain, rp_nonce, (), SignOnFlags(retrieval=False), None, (),
                 rng, params, ROTATE_OLD_PURPOSE, old_blind)
    new = _prove(new_pk, new_bundle, domain, rp_nonce, (), SignOnFlags(retrieval=retrieval_on),
                 authority if retrieval_on else None, (), rng, params, ROTATE_NEW_PURPOSE, new_blind)

    builder = _binding_builder(old_pk, old, new_pk, new)
    values = {
        **pscred.opening_witnesses(old_pk.schema, old_bundle.attrs, old.show.disclosed, old_blind, "old/",
                                   GAMMA_SHARED),
        **pscred.opening_witnesses(new_pk.schema, new_bundle.attrs, new.show.disclosed, new_blind, "new/",
                                   GAMMA_SHARED),
    }
    binding = nizk.prove(builder.build(), builder.witnesses(values), rng, params)
    return RotationRequest(old, new, binding)


def rp_apply_rotation(old_pk: IdpPublicKey, new_pk: IdpPublicKey, req: RotationRequest, domain: str,
                      authority: Optional[AuthorityPublicInfo], now: Optional[Clock],
                      nonce_cache: NonceCache, policy: SignOnPolicy, accounts: AccountStore,
                      params: Optional[PublicParams] = None) -> SignOnResult:
    """Move the account from zeta(s) to zeta(s') and stop accepting s"""
    params = params or groups.setup()
    old, new = req.old, req.new
    if old.zeta is None or new.zeta is None:
        return SignOnResult.reject(RejectReason.MALFORMED, "rotation needs both pseudonyms")
    if old.rp_nonce != new.rp_nonce:
        return SignOnResult.reject(RejectReason.MALFORMED, "both halves must answer the same nonce")
    try:
        bound = nizk.verify(_binding_builder(old_pk, old, new_pk, new).build(), req.binding, params)
    except (PrivSSOError, IndexError) as exc:
        return SignOnResult.reject(RejectReason.MALFORMED, str(exc))
    if not bound:
        return SignOnResult.reject(RejectReason.BAD_PROOF, "credentials belong to different users")
    old_policy = replace(policy, require_retrieval=False, require_2fa=False)
    rejected = check_signon(old_pk, old, domain, None, now, old_policy, params, ROTATE_OLD_PURPOSE,
                            check_expiry=False)
    if rejected is not None:
        return rejected
    new_policy = replace(policy, require_2fa=False)
    rejected = check_signon(new_pk, new, domain, authority, now, new_policy, params, ROTATE_NEW_PURPOSE)
    if rejected is not None:
        return rejected
    if old.tp >= day_number(now):
        return SignOnResult.reject(RejectReason.ROTATION_REFUSED, "old credential is still valid")
    if not nonce_cache.consume(old.rp_nonce, now):
        return SignOnResult.reject(RejectReason.REPLAY, "nonce unknown, expired or already used")

    old_key, new_key = _key(old.zeta), _key(new.zeta)
    if accounts.is_blocklisted(old_key):
        return SignOnResult.reject(RejectReason.BLOCKLISTED, "secret already rotated out")
    with accounts.lock(old_key):
        record = accounts.get(old_key)
        if record is None:
            return SignOnResult.reject(RejectReason.UNKNOWN_ACCOUNT, "no account for the old pseudonym")
        if accounts.get(new_key) is not None:
            return SignOnResult.reject(RejectReason.ROTATION_REFUSED, "new pseudonym already has an account")
        moved = replace(record, zeta=new_key, last_seen=_epoch(now), pending_factor=None,
                        token=new.token.to_bytes().hex() if new.token else record.token)
        accounts.put(moved)
        accounts.delete(old_key)
        accounts.blocklist(old_key, now)
    logger.info("🔁 account %s rotated to a new secret", record.account_id)
    return SignOnResult(True, AccountAction.ROTATED, account_id=record.account_id)
