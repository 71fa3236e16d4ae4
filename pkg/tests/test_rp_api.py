"""
Tests for the Relying Party HTTP surface and the identity-retrieval pipeline
"""

import dataclasses

import pytest

from app.services.authority_service import AuthorityService
from conftest import ADMIN_TOKEN, AUTHORITY_URLS, IDP_URL, RP_URL, bearer
from privsso.core.protocol import AccountAction, RejectReason, SignOnFlags, prove_id
from privsso.core.pscred import IdpPublicKey
from privsso.core.retrieval import AuthorityPublicInfo, PartialDecryption

API = "/api/v1/rp"
OCTETS = {"Content-Type": "application/octet-stream", "Accept": "application/octet-stream"}


class ForgingAuthority(AuthorityService):
    """Answers with a wrong share but the honest proof"""

    def partial_decrypt(self, report):
        honest = super().partial_decrypt(report)
        return PartialDecryption(honest.index, honest.share * self.params.g, honest.proof)


def _request(deployment, client, params, rng, flags=SignOnFlags()):
    bundle = client.fetch_credential(IDP_URL)
    pk = IdpPublicKey.from_bytes(deployment.idp_client.get(f"/api/v1/idp/pk/{bundle.schema.schema_id}").content)
    meta = deployment.rp_client.get(f"{API}/signon-meta").json()
    authority = AuthorityPublicInfo.from_dict(meta["authorities"])
    return prove_id(pk, bundle, meta["domain"], meta["rp_nonce"], (), flags, authority, (), deployment.clock(),
                    rng, params)


def test_health(deployment):
    body = deployment.rp_client.get("/health").json()
    assert body["service"] == "rp"
    assert body["details"] == {"domain": "rp.local", "accounts": 0, "pending_nonces": 0}


def test_openapi_documents_results(deployment):
    schemas = deployment.rp_client.get("/openapi.json").json()["components"]["schemas"]
    assert {"SignOnResultModel", "ErrorResponse", "SignOnMetaResponse"} <= set(schemas)


def test_signon_meta(deployment):
    first = deployment.rp_client.get(f"{API}/signon-meta").json()
    second = deployment.rp_client.get(f"{API}/signon-meta").json()
    assert first["rp_nonce"] != second["rp_nonce"]
    assert first["domain"] == "rp.local"
    assert first["nonce_ttl_seconds"] == 120
    assert deployment.rp.nonces.max_entries == 100_000
    assert first["policy"] == {"require_retrieval": True, "require_2fa": False, "allow_guest": True}
    assert first["accepted_idps"] == ["idp.local"]
    assert AuthorityPublicInfo.from_dict(first["authorities"]).y == deployment.keyset.y


def test_signon_binary_then_replay(deployment, make_client, params, rng):
    req = _request(deployment, make_client(), params, rng)
    first = deployment.rp_client.post(f"{API}/signon", content=req.to_bytes(), headers=OCTETS)
    assert first.headers["content-type"] == "application/octet-stream"
    replay = deployment.rp_client.post(f"{API}/signon", content=req.to_bytes())
    assert replay.json()["reason"] == RejectReason.REPLAY.value
    assert len(deployment.rp.accounts) == 1


def test_signon_json_form(deployment, make_client, params, rng):
    req = _request(deployment, make_client(), params, rng)
    response = deployment.rp_client.post(f"{API}/signon", json=req.to_envelope().to_json())
    assert response.status_code == 200
    body = response.json()
    assert body["accepted"] is True and body["action"] == AccountAction.CREATED.value
    audit = deployment.rp.audit.events[-1]
    assert audit["event"] == "signon" and audit["outcome"] == "success"


def test_malformed_requests(deployment):
    garbage = deployment.rp_client.post(f"{API}/signon", content=b"\x01\x03garbage")
    assert garbage.status_code == 200
    assert garbage.json() == {"accepted": False, "action": None, "reason": "malformed",
                              "account_id": None, "detail": "cannot decode request"}
    rotate = deployment.rp_client.post(f"{API}/rotate", json={"type": "ROTATION_REQUEST", "fields": {"old": "zz"}})
    assert rotate.json()["reason"] == "malformed"


def test_untrusted_issuer(deployment, make_client, params, rng):
    req = _request(deployment, make_client(), params, rng)
    forged = dataclasses.replace(req, issuer="evil.example")
    body = deployment.rp_client.post(f"{API}/signon", content=forged.to_bytes()).json()
    assert body["reason"] == RejectReason.UNKNOWN_IDP.value
    assert not deployment.net.calls_to("http://evil.example")


def test_key_cache_survives_idp_outage(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    assert client.signon(RP_URL).action == AccountAction.CREATED
    fetches = deployment.rp.pk_cache.fetches
    deployment.net.offline.add(IDP_URL)
    assert client.signon(RP_URL).action == AccountAction.MATCHED
    assert deployment.rp.pk_cache.fetches == fetches


def test_cold_key_cache_with_idp_down(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    deployment.net.offline.add(IDP_URL)
    result = client.signon(RP_URL)
    assert not result.accepted and result.reason == RejectReason.UNKNOWN_IDP


def _account(deployment, make_client):
    client = make_client()
    client.fetch_credential(IDP_URL)
    result = client.signon(RP_URL)
    assert result.accepted
    return result.account_id


def _report(deployment, account_id, token=ADMIN_TOKEN):
    return deployment.rp_client.post(f"{API}/report", json={"account_id": account_id}, headers=bearer(token))


def test_report_recovers_login(deployment, make_client):
    account_id = _account(deployment, make_client)
    response = _report(deployment, account_id)
    assert response.status_code == 200
    body = response.json()
    assert body["login_id"] == "alice" and body["issuer"] == "idp.local"
    assert body["authorities"] == [1, 2] and body["forged"] == [] and body["offline"] == []
    assert len(deployment.net.calls_to(AUTHORITY_URLS[3])) == 0
    cases = [e for e in deployment.authorities[1].audit.events if e["event"] == "partial_decrypt"]
    assert cases[0]["case_id"] == body["case_id"] and cases[0]["domain"] == "rp.local"


def test_report_tolerates_offline_authority(deployment, make_client):
    account_id = _account(deployment, make_client)
    deployment.net.offline.add(AUTHORITY_URLS[1])
    body = _report(deployment, account_id).json()
    assert body["login_id"] == "alice"
    assert body["authorities"] == [2, 3] and body["offline"] == [1]


def test_report_identifies_forged_partial(deployment, make_client, params, rng):
    account_id = _account(deployment, make_client)
    keyset = deployment.keyset
    deployment.authority_clients[2].app.state.authority = ForgingAuthority(
        keyset.share(2), keyset.public, params=params, rng=rng)
    body = _report(deployment, account_id).json()
    assert body["login_id"] == "alice"
    assert body["forged"] == [2] and body["authorities"] == [1, 3]


def test_report_below_threshold(deployment, make_client):
    account_id = _account(deployment, make_client)
    deployment.net.offline.update({AUTHORITY_URLS[1], AUTHORITY_URLS[2]})
    response = _report(deployment, account_id)
    assert response.status_code == 503
    failures = [e for e in deployment.rp.audit.events if e["event"] == "report"]
    assert failures[-1]["outcome"] == "fail" and failures[-1]["offline"] == [1, 2]


@pytest.mark.parametrize("token,account,status", [
    ("wrong", None, 401),
    (ADMIN_TOKEN, "no-such-account", 404),
])
def test_report_errors(deployment, make_client, token, account, status):
    account_id = account or _account(deployment, make_client)
    assert _report(deployment, account_id, token).status_code == status
