"""
Tests for the decryption authority service and its key files
"""

import json
import os
import stat

import pytest

from app.services.authority_service import AuthorityService, load_public, load_share, write_keyset
from conftest import REPORT_TOKEN, bearer
from privsso.core import groups, retrieval
from privsso.core.errors import ConfigError
from privsso.core.groups import Scalar
from privsso.core.retrieval import AuthorityShare, PartialDecryption
from privsso.core.wire import Envelope, MessageType

API = "/api/v1/authority"
OCTETS = {"Content-Type": "application/octet-stream", "Accept": "application/octet-stream"}


def _report(keyset, params, rng):
    _, token = retrieval.encrypt(params, keyset.y, keyset.h, Scalar.random_nonzero(rng), rng)
    envelope = Envelope(MessageType.RETRIEVAL_REPORT, {
        "case_id": b"case-1", "token": token.to_bytes(), "domain": b"rp.local",
    })
    return token, envelope


def test_share_info(deployment):
    client = deployment.authority_clients[2]
    body = client.get(f"{API}/share").json()
    assert body["index"] == 2 and body["threshold"] == 2 and body["n_auth"] == 3
    assert body["commitment"] == groups.serialize(deployment.keyset.commitments[2]).hex()
    assert client.get("/health").json()["details"]["index"] == 2


def test_partial_decrypt(deployment, params, rng):
    token, envelope = _report(deployment.keyset, params, rng)
    client = deployment.authority_clients[1]
    response = client.post(f"{API}/partial-decrypt", content=envelope.to_bytes(),
                           headers={**OCTETS, **bearer(REPORT_TOKEN)})
    assert response.status_code == 200
    reply = Envelope.from_bytes(response.content, MessageType.PARTIAL_DECRYPTION)
    partial = PartialDecryption.from_bytes(reply.require("partial"))
    assert partial.index == 1
    assert retrieval.verify_partial(params, deployment.keyset.public, token, partial)
    event = deployment.authorities[1].audit.events[-1]
    assert event["case_id"] == "case-1" and event["domain"] == "rp.local"


def test_partial_decrypt_requires_report_token(deployment, params, rng):
    _, envelope = _report(deployment.keyset, params, rng)
    client = deployment.authority_clients[1]
    assert client.post(f"{API}/partial-decrypt", content=envelope.to_bytes()).status_code == 401
    assert client.post(f"{API}/partial-decrypt", content=envelope.to_bytes(),
                       headers=bearer("admin-token")).status_code == 401
    assert deployment.authorities[1].audit.events == []


def test_partial_decrypt_rejects_bad_bodies(deployment):
    client = deployment.authority_clients[1]
    garbage = client.post(f"{API}/partial-decrypt", content=b"\x00", headers={**OCTETS, **bearer(REPORT_TOKEN)})
    assert garbage.status_code == 400
    short_token = Envelope(MessageType.RETRIEVAL_REPORT, {"token": b"\x01" * 10})
    response = client.post(f"{API}/partial-decrypt", content=short_token.to_bytes(),
                           headers={**OCTETS, **bearer(REPORT_TOKEN)})
    assert response.status_code == 400


def test_share_must_match_commitment(keyset, params):
    wrong = AuthorityShare(1, keyset.share(2).secret)
    with pytest.raises(ConfigError):
        AuthorityService(wrong, keyset.public, params=params)
    with pytest.raises(ConfigError):
        AuthorityService(AuthorityShare(7, keyset.share(1).secret), keyset.public, params=params)


def test_keyset_files(keyset, tmp_path):
    paths = write_keyset(keyset, str(tmp_path))
    assert sorted(paths) == [1, 2, 3]
    assert stat.S_IMODE(os.stat(paths[2]).st_mode) == 0o600
    public = load_public(str(tmp_path))
    assert public.y == keyset.y and public.threshold == 2
    assert load_share(str(tmp_path), 3).secret == keyset.share(3).secret
    with open(tmp_path / "authority_public.json", encoding="utf-8") as f:
        assert "secret" not in json.load(f)
    assert load_public(str(tmp_path / "missing")) is None
    with pytest.raises(ConfigError):
        load_share(str(tmp_path), 9)
