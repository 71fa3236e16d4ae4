#!/usr/bin/env python3
"""
Versioned message envelope.

Binary form: 1-byte version, 1-byte message type, then every field of the
message type in catalog order as a 4-byte big-endian length followed by the
field bytes (an empty field means "absent"). The JSON form renders the same
fields as lowercase hex under their names.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Mapping, Optional, Tuple

from .errors import WireError

WIRE_VERSION = 1


class MessageType(IntEnum):
    REQUEST_ID = 1
    BLINDED_CREDENTIAL = 2
    SIGNON_REQUEST = 3
    SIGNON_RESULT = 4
    ENROLL_INIT = 5
    ENROLL_APPROVE = 6
    ENROLL_COMPLETE = 7
    ROTATION_REQUEST = 8
    RETRIEVAL_REPORT = 9
    PARTIAL_DECRYPTION = 10


CATALOG: Dict[MessageType, Tuple[str, ...]] = {
    MessageType.REQUEST_ID: ("schema", "request", "reply_key"),
    MessageType.BLINDED_CREDENTIAL: ("blinded", "sealed_gamma", "tp", "attributes", "schema_id"),
    MessageType.SIGNON_REQUEST: (
        "show", "zeta", "zeta_d", "token", "disclosed", "domain", "rp_nonce", "flags",
        "issuer", "schema_id", "predicates",
    ),
    MessageType.SIGNON_RESULT: ("result",),
    MessageType.ENROLL_INIT: ("public_key", "device_label"),
    MessageType.ENROLL_APPROVE: ("request_id", "sealed_secret"),
    MessageType.ENROLL_COMPLETE: ("device_id",),
    MessageType.ROTATION_REQUEST: ("old", "new", "binding"),
    MessageType.RETRIEVAL_REPORT: ("case_id", "token", "domain"),
    MessageType.PARTIAL_DECRYPTION: ("partial",),
}


@dataclass(frozen=True)
class Envelope:
    type: MessageType
    fields: Mapping[str, bytes] = field(hash=False)
    version: int = WIRE_VERSION

    def __post_init__(self):
        unknown = set(self.fields) - set(CATALOG[self.type])
        if unknown:
            raise WireError(f"unknown fields for {self.type.name}: {', '.join(sorted(unknown))}")

    def get(self, name: str) -> Optional[bytes]:
        value = self.fields.get(name, b"")
        return value or None

    def require(self, name: str) -> bytes:
        value = self.get(name)
        if value is None:
            raise WireError(f"{self.type.name} is missing field {name}")
        return value

    def to_bytes(self) -> bytes:
        out = bytearray([self.version, int(self.type)])
        for name in CATALOG[self.type]:
            value = self.fields.get(name, b"")
            out += len(value).to_bytes(4, "big") + value
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, expected: Optional[MessageType] = None) -> "Envelope":
        if len(data) < 2:
            raise WireError("envelope too short")
        if data[0] != WIRE_VERSION:
            raise WireError(f"unsupported wire version {data[0]}")
        try:
            kind = MessageType(data[1])
        except ValueError:
            raise WireError(f"unknown message type {data[1]}") from None
        if expected is not None and kind != expected:
            raise WireError(f"expected {expected.name}, got {kind.name}")
        pos, fields = 2, {}
        for name in CATALOG[kind]:
            if pos + 4 > len(data):
                raise WireError("truncated envelope")
            size = int.from_bytes(data[pos:pos + 4], "big")
            pos += 4
            if pos + size > len(data):
                raise WireError("truncated envelope field")
            fields[name] = bytes(data[pos:pos + size])
            pos += size
        if pos != len(data):
            raise WireError("trailing bytes after envelope")
        return cls(kind, fields)

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "type": self.type.name,
            "fields": {name: self.fields.get(name, b"").hex() for name in CATALOG[self.type]},
        }

    @classmethod
    def from_json(cls, data: Mapping, expected: Optional[MessageType] = None) -> "Envelope":
        try:
            version = int(data.get("version", WIRE_VERSION))
            kind = MessageType[data["type"]]
            raw = data.get("fields") or {}
            fields = {name: bytes.fromhex(raw.get(name, "")) for name in CATALOG[kind]}
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise WireError(f"invalid JSON envelope: {exc}") from exc
        if version != WIRE_VERSION:
            raise WireError(f"unsupported wire version {version}")
        if expected is not None and kind != expected:
            raise WireError(f"expected {expected.name}, got {kind.name}")
        unknown = set(raw) - set(CATALOG[kind])
        if unknown:
            raise WireError(f"unknown fields for {kind.name}: {', '.join(sorted(unknown))}")
        return cls(kind, fields)
