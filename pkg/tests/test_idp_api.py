"""
Tests for the Identity Provider HTTP surface
"""

from conftest import ADMIN_TOKEN, ALICE, RECOVERY_TOKEN, bearer
from privsso.core import groups
from privsso.core.devices import NewDevice, approve_enrollment
from privsso.core.protocol import BlindedCredentialMsg, UserSecrets, request_id, unblind_id
from privsso.core.pscred import AttributeSchema, IdpPublicKey
from privsso.core.wire import Envelope, MessageType

API = "/api/v1/idp"
OCTETS = {"Content-Type": "application/octet-stream", "Accept": "application/octet-stream"}


def test_health(deployment):
    response = deployment.idp_client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["service"] == "idp" and body["status"] == "healthy"
    assert body["details"]["users"] == 1


def test_public_key_is_cacheable(deployment):
    response = deployment.idp_client.get(f"{API}/pk")
    assert response.status_code == 200
    assert response.headers["content-type"] == "application/octet-stream"
    assert "immutable" in response.headers["cache-control"]
    assert response.headers["etag"]
    pk = IdpPublicKey.from_bytes(response.content)
    assert pk.is_consistent() and pk.schema.two_fa

    as_json = deployment.idp_client.get(f"{API}/pk", headers={"Accept": "application/json"})
    assert bytes.fromhex(as_json.json()["pk"]) == response.content
    assert deployment.idp_client.get(f"{API}/pk/unknown").status_code == 404


def test_schemas(deployment):
    body = deployment.idp_client.get(f"{API}/schemas").json()
    assert body["issuer"] == "idp.local"
    assert body["catalog"]["age"] == "int"
    assert body["default_schema_id"] in body["schemas"]
    assert body["validity_days"] == 7


def test_certify_schema(deployment):
    schema = AttributeSchema.signon([("name", "string"), ("age", "int")])
    assert deployment.idp_client.post(f"{API}/keys", json={"schema": schema.to_dict()}).status_code == 401

    session = deployment.login()
    response = deployment.idp_client.post(f"{API}/keys", json={"schema": schema.to_dict()},
                                          headers=bearer(session["token"]))
    assert response.status_code == 200
    assert response.json()["schema_id"] == schema.schema_id
    again = deployment.idp_client.post(f"{API}/keys", json={"schema": schema.to_dict()},
                                       headers=bearer(session["token"]))
    assert again.json()["pk"] == response.json()["pk"]
    served = deployment.idp_client.get(f"{API}/pk/{schema.schema_id}")
    assert served.content.hex() == response.json()["pk"]


def test_certify_refuses_off_catalog_schemas(deployment):
    token = deployment.login()["token"]
    wrong_encoding = AttributeSchema.signon([("age", "string")])
    response = deployment.idp_client.post(f"{API}/keys", json={"schema": wrong_encoding.to_dict()},
                                          headers=bearer(token))
    assert response.status_code == 422
    unknown = AttributeSchema.signon([("ssn", "string")])
    response = deployment.idp_client.post(f"{API}/keys", json={"schema": unknown.to_dict()},
                                          headers=bearer(token))
    assert response.status_code == 422


def test_login(deployment):
    first = deployment.login()
    assert first["login_id"] == "alice" and first["device_id"]
    again = deployment.login(device_id=first["device_id"])
    assert again["device_id"] == first["device_id"] and again["token"] != first["token"]

    wrong = deployment.idp_client.post(f"{API}/login", json={"login_id": "alice", "password": "nope"})
    assert wrong.status_code == 401
    unknown_device = deployment.idp_client.post(f"{API}/login", json={
        "login_id": "alice", "password": ALICE["password"], "device_id": "missing"})
    assert unknown_device.status_code == 404


def test_admin_user_provisioning(deployment):
    body = {"login_id": "bob", "password": "pw", "info": {"name": "Bob", "age": 41}}
    assert deployment.idp_client.post(f"{API}/admin/users", json=body).status_code == 401
    assert deployment.idp_client.post(f"{API}/admin/users", json=body,
                                      headers=bearer("guess")).status_code == 401

    created = deployment.idp_client.post(f"{API}/admin/users", json=body, headers=bearer(ADMIN_TOKEN))
    assert created.status_code == 200
    assert created.json() == {"login_id": "bob", "attributes": ["age", "name"], "devices": []}
    duplicate = deployment.idp_client.post(f"{API}/admin/users", json=body, headers=bearer(ADMIN_TOKEN))
    assert duplicate.status_code == 409

    bad_label = {"login_id": "carol", "password": "pw", "info": {"ssn": "123"}}
    assert deployment.idp_client.post(f"{API}/admin/users", json=bad_label,
                                      headers=bearer(ADMIN_TOKEN)).status_code == 422
    bad_type = {"login_id": "carol", "password": "pw", "info": {"age": "old"}}
    assert deployment.idp_client.post(f"{API}/admin/users", json=bad_type,
                                      headers=bearer(ADMIN_TOKEN)).status_code == 422


def test_current_user_hides_secrets(deployment):
    token = deployment.login()["token"]
    body = deployment.idp_client.get(f"{API}/users/me", headers=bearer(token)).json()
    assert body["attributes"] == ["age", "country", "email", "name"]
    assert len(body["devices"]) == 1
    assert "gamma" not in body and "password_hash" not in body
    assert deployment.idp_client.get(f"{API}/users/me").status_code == 401


def _issue_over_http(deployment, token, secrets, rng, json_form=False):
    pk = IdpPublicKey.from_bytes(deployment.idp_client.get(f"{API}/pk").content)
    pending, msg = request_id(pk, secrets, rng)
    if json_form:
        response = deployment.idp_client.post(f"{API}/request-id", json=msg.to_envelope().to_json(),
                                              headers=bearer(token))
        reply = Envelope.from_json(response.json(), MessageType.BLINDED_CREDENTIAL) \
            if response.status_code == 200 else None
    else:
        response = deployment.idp_client.post(f"{API}/request-id", content=msg.to_envelope().to_bytes(),
                                              headers={**OCTETS, **bearer(token)})
        reply = Envelope.from_bytes(response.content, MessageType.BLINDED_CREDENTIAL) \
            if response.status_code == 200 else None
    if reply is None:
        return response, None
    return response, unblind_id(pk, pending, secrets, BlindedCredentialMsg.from_envelope(reply), "idp.local")


def test_issuance_binary_and_json(deployment, rng):
    token = deployment.login()["token"]
    secrets = UserSecrets.generate(rng)
    response, bundle = _issue_over_http(deployment, token, secrets, rng)
    assert response.status_code == 200
    assert bundle.tp == 19783 + 7
    _, from_json = _issue_over_http(deployment, token, secrets, rng, json_form=True)
    assert from_json.gamma == bundle.gamma
    assert deployment.idp.audit.events[-1]["event"] == "issue"


def test_issuance_needs_session_and_valid_body(deployment, rng):
    response, _ = _issue_over_http(deployment, "not-a-session", UserSecrets.generate(rng), rng)
    assert response.status_code == 401
    token = deployment.login()["token"]
    garbage = deployment.idp_client.post(f"{API}/request-id", content=b"\x01\x02",
                                         headers={**OCTETS, **bearer(token)})
    assert garbage.status_code == 400


def test_revoked_device_gets_nothing(deployment, rng):
    phone = deployment.login()
    laptop = deployment.login()
    revoked = deployment.idp_client.post(f"{API}/devices/revoke", json={"device_id": phone["device_id"]},
                                         headers=bearer(laptop["token"]))
    assert revoked.status_code == 200 and revoked.json()["revoked"] is True
    again = deployment.idp_client.post(f"{API}/devices/revoke", json={"device_id": phone["device_id"]},
                                       headers=bearer(laptop["token"]))
    assert again.status_code == 409

    response, _ = _issue_over_http(deployment, phone["token"], UserSecrets.generate(rng), rng)
    assert response.status_code == 401
    relogin = deployment.idp_client.post(f"{API}/login", json={
        "login_id": "alice", "password": ALICE["password"], "device_id": phone["device_id"]})
    assert relogin.status_code == 403
    response, bundle = _issue_over_http(deployment, laptop["token"], UserSecrets.generate(rng), rng)
    assert response.status_code == 200 and bundle is not None
    events = [e for e in deployment.idp.audit.events if e["event"] == "device_revoked"]
    assert events[0]["device_id"] == phone["device_id"]


def test_lookup(deployment, params):
    h_gamma = groups.serialize(deployment.idp.user("alice").h_gamma).hex()
    assert deployment.idp_client.post(f"{API}/lookup", json={"h_gamma": h_gamma}).status_code == 401
    found = deployment.idp_client.post(f"{API}/lookup", json={"h_gamma": h_gamma},
                                       headers=bearer(RECOVERY_TOKEN))
    assert found.status_code == 200 and found.json() == {"login_id": "alice"}

    stranger = groups.serialize(params.g).hex()
    missing = deployment.idp_client.post(f"{API}/lookup", json={"h_gamma": stranger},
                                         headers=bearer(RECOVERY_TOKEN))
    assert missing.status_code == 404
    not_hex = deployment.idp_client.post(f"{API}/lookup", json={"h_gamma": "zz"},
                                         headers=bearer(RECOVERY_TOKEN))
    assert not_hex.status_code == 400
    lookups = [e for e in deployment.idp.audit.events if e["event"] == "lookup"]
    assert [e["outcome"] for e in lookups] == ["success", "miss"]


def test_enrollment_relay(deployment, rng):
    old = deployment.login()
    new = deployment.login()
    device = NewDevice("8080", "tablet")
    init = deployment.idp_client.post(f"{API}/devices/enroll-init", content=device.init_message().to_bytes(),
                                      headers={**OCTETS, **bearer(new["token"])})
    assert init.status_code == 200
    request = init.json()["request_id"]

    waiting = deployment.idp_client.get(f"{API}/devices/enroll-result/{request}",
                                        headers={**OCTETS, **bearer(new["token"])})
    assert waiting.status_code == 204

    pending = deployment.idp_client.get(f"{API}/devices/enroll-pending", headers=bearer(old["token"])).json()
    assert [p["request_id"] for p in pending["pending"]] == [request]
    init_env = Envelope.from_json(pending["pending"][0]["init"], MessageType.ENROLL_INIT)
    approve = approve_enrollment(init_env, "8080", UserSecrets.generate(rng).s, device.fingerprint, request)

    own = deployment.idp_client.post(f"{API}/devices/enroll-approve", content=approve.to_bytes(),
                                     headers={**OCTETS, **bearer(new["token"])})
    assert own.status_code == 401
    ok = deployment.idp_client.post(f"{API}/devices/enroll-approve", content=approve.to_bytes(),
                                    headers={**OCTETS, **bearer(old["token"])})
    assert ok.status_code == 200
    twice = deployment.idp_client.post(f"{API}/devices/enroll-approve", content=approve.to_bytes(),
                                       headers={**OCTETS, **bearer(old["token"])})
    assert twice.status_code == 409

    result = deployment.idp_client.get(f"{API}/devices/enroll-result/{request}",
                                       headers={**OCTETS, **bearer(new["token"])})
    assert result.status_code == 200
    assert Envelope.from_bytes(result.content, MessageType.ENROLL_APPROVE).to_bytes() == approve.to_bytes()
    foreign = deployment.idp_client.get(f"{API}/devices/enroll-result/{request}",
                                        headers={**OCTETS, **bearer(old["token"])})
    assert foreign.status_code == 401

    done = deployment.idp_client.post(
        f"{API}/devices/enroll-complete",
        content=Envelope(MessageType.ENROLL_COMPLETE, {"device_id": new["device_id"].encode()}).to_bytes(),
        headers={**OCTETS, **bearer(new["token"])})
    assert done.status_code == 204
    assert deployment.idp.status()["pending_enrollments"] == 0
