"""
End-to-end user flows through the client against in-process services
"""

import json
import logging

import pytest

from conftest import IDP_URL, RP_URL, Deployment
from privsso.client.flows import UserClient, parse_equalities
from privsso.client.keystore import Keystore
from privsso.core.devices import NewDevice
from privsso.core.errors import (
    AccessDeniedError, CredentialError, ExpiredCredentialError, ForbiddenDisclosureError, ProtocolError,
    RevokedDeviceError, RotationError, SaltMismatchError, UnknownAttributeError,
)
from privsso.core.protocol import AccountAction, HiddenEquality, RejectReason
from privsso.utils.config_manager import ConfigManager


def _secrets(client):
    with client.keystore.open(write=False) as data:
        return data.secrets


def _pair(make_client, salt="4711"):
    """Two devices of one user sharing s after enrollment"""
    phone, laptop = make_client("phone"), make_client("laptop")
    started = laptop.add_device(IDP_URL, salt, "laptop")
    assert started["status"] == "pending"
    assert laptop.resume_device(IDP_URL)["status"] == "pending"
    approved = phone.approve_device(IDP_URL, salt, started["fingerprint"])
    assert approved["fingerprint"] == started["fingerprint"]
    done = laptop.resume_device(IDP_URL)
    assert done["status"] == "enrolled"
    return phone, laptop


def test_setup_and_signon(make_client):
    client = make_client()
    bundle = client.fetch_credential(IDP_URL)
    assert bundle.issuer == "idp.local" and bundle.values == {"tp": bundle.tp}
    created = client.signon(RP_URL)
    assert created.accepted and created.action == AccountAction.CREATED
    matched = client.signon(RP_URL)
    assert matched.action == AccountAction.MATCHED and matched.account_id == created.account_id

    status = client.status()
    entry = status["origins"][IDP_URL]
    assert entry["login_id"] == "alice" and entry["credentials"][0]["expired"] is False
    assert status["signons"][RP_URL]["account_id"] == created.account_id
    assert status["has_secret"] and status["has_device_secret"]


def test_disclosure_and_predicates(deployment, make_client):
    client = make_client()
    with pytest.raises(CredentialError):
        client.signon(RP_URL)
    client.fetch_credential(IDP_URL)
    client.fetch_credential(IDP_URL, ["name", "age"])

    result = client.signon(RP_URL, disclose=["name"])
    record = deployment.rp.accounts.by_account_id(result.account_id)
    assert record.disclosed["name"] == "Alice" and "age" not in record.disclosed

    proven = client.signon(RP_URL, predicates=parse_equalities(["age=30"]))
    assert proven.accepted and proven.account_id == result.account_id
    with pytest.raises(UnknownAttributeError):
        client.signon(RP_URL, disclose=["email"])
    with pytest.raises(ForbiddenDisclosureError):
        client.signon(RP_URL, disclose=["gamma"])
    with pytest.raises(ProtocolError):
        parse_equalities(["age"])


def test_smallest_fitting_credential_is_used(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL, ["name", "email", "age", "country"])
    client.fetch_credential(IDP_URL, ["name"])
    result = client.signon(RP_URL, disclose=["name"])
    assert set(deployment.rp.accounts.by_account_id(result.account_id).disclosed) == {"tp", "name"}
    assert deployment.rp.pk_cache.fetches == 1


def test_guest_signon_can_be_reported(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    result = client.signon(RP_URL, guest=True)
    assert result.accepted and result.action == AccountAction.GUEST
    assert len(deployment.rp.accounts) == 1
    assert RP_URL not in client.status()["signons"]
    report = deployment.rp.report(result.account_id)
    assert report["login_id"] == "alice"


def test_expired_credential(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    deployment.clock.advance(days=8)
    with pytest.raises(ExpiredCredentialError):
        client.signon(RP_URL)
    client.fetch_credential(IDP_URL)
    assert client.signon(RP_URL).accepted


def test_device_enrollment_shares_pseudonym(make_client):
    phone, laptop = _pair(make_client)
    assert _secrets(phone).s == _secrets(laptop).s
    assert _secrets(phone).s_d != _secrets(laptop).s_d
    phone.fetch_credential(IDP_URL)
    laptop.fetch_credential(IDP_URL)
    first = phone.signon(RP_URL)
    second = laptop.signon(RP_URL)
    assert first.action == AccountAction.CREATED
    assert second.action == AccountAction.MATCHED and second.account_id == first.account_id


def test_enrollment_with_wrong_salt(make_client):
    phone, laptop = make_client("phone"), make_client("laptop")
    started = laptop.add_device(IDP_URL, "1111")
    with pytest.raises(SaltMismatchError):
        phone.approve_device(IDP_URL, "2222", started["fingerprint"])
    with pytest.raises(ProtocolError):
        laptop.add_device(IDP_URL, "1111")
    assert laptop.resume_device(IDP_URL)["status"] == "pending"


def test_relay_cannot_substitute_enrollment_key(deployment, make_client):
    phone, laptop = make_client("phone"), make_client("laptop")
    started = laptop.add_device(IDP_URL, "4711")
    attacker = NewDevice("4711", "laptop")
    deployment.idp._pending[started["request_id"]].init = attacker.init_message()
    with pytest.raises(SaltMismatchError):
        phone.approve_device(IDP_URL, "4711", started["fingerprint"])
    assert deployment.idp._pending[started["request_id"]].approve is None
    assert laptop.resume_device(IDP_URL)["status"] == "pending"


def test_stolen_device(deployment, make_client):
    phone, laptop = _pair(make_client)
    laptop_id = laptop.status()["origins"][IDP_URL]["device_id"]
    revoked = phone.report_stolen(IDP_URL, laptop_id)
    assert revoked["revoked"] is True
    with pytest.raises(AccessDeniedError):
        laptop.fetch_credential(IDP_URL)
    with pytest.raises(RevokedDeviceError):
        laptop.login(IDP_URL, "alice", "correct horse")
    assert phone.fetch_credential(IDP_URL)


def test_two_factor_signon(config, params, rng, clock, keyset, settings, tmp_path):
    strict = ConfigManager(None)
    strict.config = json.loads(json.dumps(config.config))
    strict.set("rp_settings.require_2fa", True, persist=False)
    deployment = Deployment(config, params, rng, clock, keyset, settings, rp_config=strict)

    def make(name):
        keystore = Keystore(str(tmp_path / f"{name}.keystore"), "pw", scrypt_n=2 ** 10)
        client = UserClient(keystore, config, deployment.net, rng, params, clock)
        client.init()
        client.login(IDP_URL, "alice", "correct horse", name)
        return client

    phone, laptop = _pair(make)
    phone.fetch_credential(IDP_URL, two_fa=True)
    laptop.fetch_credential(IDP_URL, two_fa=True)
    first = phone.signon(RP_URL)
    assert not first.accepted and first.reason == RejectReason.SECOND_FACTOR_REQUIRED
    clock.advance(seconds=20)
    second = laptop.signon(RP_URL)
    assert second.accepted and second.action == AccountAction.DEVICE_ENROLLED
    assert second.account_id == first.account_id

    with pytest.raises(CredentialError):
        phone.signon(RP_URL, idp_url="http://elsewhere")


def test_secret_rotation(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    created = client.signon(RP_URL)
    with pytest.raises(RotationError):
        client.rotate(IDP_URL, RP_URL)

    assert client.new_secret() == {"retired_credentials": 1}
    with pytest.raises(RotationError):
        client.rotate(IDP_URL, RP_URL)
    deployment.clock.advance(days=9)
    client.fetch_credential(IDP_URL)
    rotated = client.rotate(IDP_URL, RP_URL)
    assert rotated.accepted and rotated.action == AccountAction.ROTATED
    assert rotated.account_id == created.account_id
    again = client.signon(RP_URL)
    assert again.action == AccountAction.MATCHED and again.account_id == created.account_id


def test_rotated_secret_is_blocklisted(deployment, make_client, tmp_path):
    client = make_client()
    client.fetch_credential(IDP_URL)
    client.signon(RP_URL)
    # the thief's copy of the keystore keeps the old secret
    thief = UserClient(Keystore(str(tmp_path / "thief.keystore"), "passphrase", 2 ** 10), deployment.config,
                       deployment.net, None, client.params, deployment.clock)
    thief.keystore.path.write_bytes(client.keystore.path.read_bytes())

    client.new_secret()
    deployment.clock.advance(days=9)
    client.fetch_credential(IDP_URL)
    assert client.rotate(IDP_URL, RP_URL).accepted

    thief.fetch_credential(IDP_URL)
    stolen = thief.signon(RP_URL)
    assert not stolen.accepted and stolen.reason == RejectReason.BLOCKLISTED


def test_no_secret_reaches_logs(deployment, make_client, caplog):
    caplog.set_level(logging.DEBUG)
    client = make_client()
    bundle = client.fetch_credential(IDP_URL, ["name"])
    client.signon(RP_URL, disclose=["name"])
    client.signon(RP_URL, predicates=[HiddenEquality("name", "Alice")])
    secrets = _secrets(client)
    needles = [secrets.s.to_bytes().hex(), secrets.s_d.to_bytes().hex(), bundle.gamma.to_bytes().hex()]
    audit = json.dumps(deployment.idp.audit.events + deployment.rp.audit.events)
    status = json.dumps(client.status())
    for needle in needles:
        assert needle not in caplog.text
        assert needle not in audit
        assert needle not in status
