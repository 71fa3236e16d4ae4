#!/usr/bin/env python3
"""
Multi-device enrollment: moving the global secret s to a new device through
an untrusted IdP relay.

The new device publishes a bare ephemeral X25519 key and shows a short code
derived from that key and the user-entered salt. The user types the code on
the old device, which recomputes it from the relayed key and its own copy of
the salt before sealing s with X25519 + HKDF-SHA256 + AES-GCM. Nothing
salt-derived crosses the relay, so the salt cannot be searched offline; a
swapped key or a touched ciphertext aborts the flow.
"""

import hashlib
import hmac
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import EnrollmentError, SaltMismatchError
from .groups import Rng, Scalar
from .wire import Envelope, MessageType

logger = logging.getLogger(__name__)

ENROLL_INFO = b"privsso/enroll/v1"
KEY_BYTES = 32
NONCE_BYTES = 12


def _raw_public(key: X25519PublicKey) -> bytes:
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def _derive_key(shared: bytes, salt: bytes, info: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=salt or None, info=info).derive(shared)


def seal(recipient_public: bytes, plaintext: bytes, info: bytes, salt: bytes = b"") -> bytes:
    """One-shot authenticated encryption to an X25519 public key: epk || nonce || ciphertext"""
    try:
        recipient = X25519PublicKey.from_public_bytes(recipient_public)
    except ValueError as exc:
        raise EnrollmentError(f"invalid recipient key: {exc}") from exc
    ephemeral = X25519PrivateKey.generate()
    key = _derive_key(ephemeral.exchange(recipient), salt, info)
    nonce = os.urandom(NONCE_BYTES)
    epk = _raw_public(ephemeral.public_key())
    return epk + nonce + AESGCM(key).encrypt(nonce, plaintext, epk + recipient_public)


def open_sealed(private_key: X25519PrivateKey, blob: bytes, info: bytes, salt: bytes = b"") -> bytes:
    if len(blob) < KEY_BYTES + NONCE_BYTES + 16:
        raise EnrollmentError("sealed blob too short")
    epk, nonce, ciphertext = blob[:KEY_BYTES], blob[KEY_BYTES:KEY_BYTES + NONCE_BYTES], blob[KEY_BYTES + NONCE_BYTES:]
    try:
        shared = private_key.exchange(X25519PublicKey.from_public_bytes(epk))
        key = _derive_key(shared, salt, info)
        own = _raw_public(private_key.public_key())
        return AESGCM(key).decrypt(nonce, ciphertext, epk + own)
    except (InvalidTag, ValueError) as exc:
        raise EnrollmentError("sealed payload failed authentication") from exc


def fingerprint(public_key: bytes, salt: str) -> str:
    """Short code shown on both devices for the user to compare"""
    digest = hashlib.sha256(public_key + salt.encode("utf-8")).hexdigest()
    return "-".join(digest[i:i + 4] for i in range(0, 16, 4))


@dataclass
class NewDevice:
    """Ephemeral state kept by the device being enrolled"""

    salt: str
    device_label: str = "device"
    private_key: X25519PrivateKey = field(default_factory=X25519PrivateKey.generate, repr=False)

    @property
    def public_key(self) -> bytes:
        return _raw_public(self.private_key.public_key())

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.public_key, self.salt)

    def init_message(self) -> Envelope:
        return Envelope(MessageType.ENROLL_INIT, {
            "public_key": self.public_key,
            "device_label": self.device_label.encode("utf-8"),
        })

    def complete(self, approve: Envelope, rng: Optional[Rng] = None) -> "EnrolledSecrets":
        sealed = approve.require("sealed_secret")
        secret = open_sealed(self.private_key, sealed, ENROLL_INFO, self.salt.encode("utf-8"))
        logger.info("📲 enrollment completed on new device %s", self.device_label)
        return EnrolledSecrets(s=Scalar.from_bytes(secret), s_d=Scalar.random_nonzero(rng))


@dataclass(frozen=True)
class EnrolledSecrets:
    s: Scalar = field(repr=False)
    s_d: Scalar = field(repr=False)


def _normalize(code: str) -> bytes:
    return code.strip().lower().encode("utf-8")


def approve_enrollment(init: Envelope, salt: str, secret: Scalar, confirmed_fingerprint: str,
                       request_id: str = "") -> Envelope:
    """
    Old-device side. `confirmed_fingerprint` is the code the user read off the
    new device; it must match the code recomputed from the relayed key and the
    salt before anything is sealed.
    """
    public_key = init.require("public_key")
    expected = fingerprint(public_key, salt)
    if not hmac.compare_digest(_normalize(confirmed_fingerprint), _normalize(expected)):
        raise SaltMismatchError("fingerprint mismatch: wrong salt or substituted device key")
    sealed = seal(public_key, secret.to_bytes(), ENROLL_INFO, salt.encode("utf-8"))
    return Envelope(MessageType.ENROLL_APPROVE, {
        "request_id": request_id.encode("utf-8"),
        "sealed_secret": sealed,
    })


Relay = Callable[[Envelope], Envelope]


def _passthrough(message: Envelope) -> Envelope:
    return message


def enroll_device(new_device: NewDevice, old_secret: Scalar, old_salt: str,
                  relay: Relay = _passthrough, rng: Optional[Rng] = None) -> EnrolledSecrets:
    """
    Run the whole exchange in-process; `relay` stands for the IdP in both
    directions and the user carries the new device's code across by hand
    """
    init = relay(new_device.init_message())
    approve = relay(approve_enrollment(init, old_salt, old_secret, new_device.fingerprint))
    return new_device.complete(approve, rng)
