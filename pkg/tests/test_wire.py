"""
Tests for the message envelope
"""

import pytest

from privsso.core.errors import WireError
from privsso.core.wire import CATALOG, WIRE_VERSION, Envelope, MessageType


def _envelope():
    return Envelope(MessageType.ENROLL_INIT, {"public_key": b"\x01" * 32})


def test_binary_layout():
    data = _envelope().to_bytes()
    assert data[:2] == bytes([WIRE_VERSION, MessageType.ENROLL_INIT])
    assert len(data) == 2 + 2 * 4 + 32
    decoded = Envelope.from_bytes(data, MessageType.ENROLL_INIT)
    assert decoded.require("public_key") == b"\x01" * 32
    assert decoded.get("device_label") is None


def test_json_form_matches_binary():
    env = _envelope()
    as_json = env.to_json()
    assert as_json["type"] == "ENROLL_INIT"
    assert as_json["fields"]["device_label"] == ""
    assert Envelope.from_json(as_json).to_bytes() == env.to_bytes()


def test_unknown_fields_rejected():
    with pytest.raises(WireError):
        Envelope(MessageType.SIGNON_RESULT, {"bogus": b"x"})
    as_json = _envelope().to_json()
    as_json["fields"]["bogus"] = "00"
    with pytest.raises(WireError):
        Envelope.from_json(as_json)


@pytest.mark.parametrize("mutate", [
    lambda d: d[:1],
    lambda d: bytes([WIRE_VERSION + 1]) + d[1:],
    lambda d: d[:1] + bytes([99]) + d[2:],
    lambda d: d[:-1],
    lambda d: d + b"\x00",
])
def test_malformed_binary_rejected(mutate):
    with pytest.raises(WireError):
        Envelope.from_bytes(mutate(_envelope().to_bytes()))


def test_expected_type_enforced():
    data = _envelope().to_bytes()
    with pytest.raises(WireError):
        Envelope.from_bytes(data, MessageType.SIGNON_REQUEST)
    with pytest.raises(WireError):
        Envelope.from_json(_envelope().to_json(), MessageType.SIGNON_REQUEST)


def test_bad_json_rejected():
    with pytest.raises(WireError):
        Envelope.from_json({"type": "NOPE", "fields": {}})
    with pytest.raises(WireError):
        Envelope.from_json({"type": "ENROLL_INIT", "fields": {"public_key": "zz"}})


def test_require_missing_field():
    with pytest.raises(WireError):
        _envelope().require("device_label")


def test_every_message_type_has_fields():
    assert set(CATALOG) == set(MessageType)
    for kind, names in CATALOG.items():
        env = Envelope(kind, {})
        assert Envelope.from_bytes(env.to_bytes(), kind).type == kind
        assert len(env.to_bytes()) == 2 + 4 * len(names)
