"""
Tests for the command-line client
"""

import json
import time

import pytest

from conftest import IDP_URL, RP_URL, Deployment, FakeClock
from privsso.client import cli
from privsso.core.errors import (
    AccessDeniedError, EnrollmentError, ExpiredCredentialError, KeystoreError, ProtocolError, UpstreamError,
)


@pytest.fixture
def live(config, params, rng, keyset, settings):
    # the CLI runs on wall-clock time
    return Deployment(config, params, rng, FakeClock(time.time()), keyset, settings)


@pytest.fixture
def run(live, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PRIVSSO_PASSPHRASE", "cli passphrase")
    monkeypatch.setenv("PRIVSSO_PASSWORD", "correct horse")
    config = tmp_path / "cli.json"
    config.write_text(json.dumps({
        "request_settings": {"retry_attempts": 0, "delay_between_requests": 0},
        "client_settings": {"scrypt_n": 1024},
    }), encoding="utf-8")

    def invoke(*argv, keystore="main.keystore"):
        capsys.readouterr()
        code = cli.main(["--config", str(config), "--keystore", str(tmp_path / keystore), *argv],
                        session=live.net)
        return code, capsys.readouterr()

    return invoke


def _json(captured):
    return json.loads(captured.out)


def test_full_session(run, live):
    assert run("init")[0] == cli.EXIT_OK
    code, out = run("--json", "login", "--idp", IDP_URL, "--login-id", "alice", "--label", "laptop")
    assert code == cli.EXIT_OK and _json(out)["login_id"] == "alice"
    code, out = run("--json", "fetch-credential", "--idp", IDP_URL, "--info", "name,age")
    assert code == cli.EXIT_OK and _json(out)["attributes"] == ["name", "age"]

    code, out = run("signon", "--rp", RP_URL, "--disclose", "name")
    assert code == cli.EXIT_OK and "✅ Sign-on accepted (created)" in out.out
    code, out = run("--json", "signon", "--rp", RP_URL, "--prove-equal", "age=30")
    assert code == cli.EXIT_OK and _json(out)["action"] == "matched"

    code, out = run("--json", "status")
    status = _json(out)
    assert status["origins"][IDP_URL]["login_id"] == "alice"
    assert RP_URL in status["signons"]
    assert len(live.rp.accounts) == 1


def test_rejected_signon_exit_code(run):
    run("init")
    run("login", "--idp", IDP_URL, "--login-id", "alice")
    run("fetch-credential", "--idp", IDP_URL)
    code, out = run("signon", "--rp", RP_URL, "--no-retrieval")
    assert code == cli.EXIT_REJECTED
    assert "policy-unmet" in out.out


def test_missing_keystore(run):
    code, out = run("status", keystore="nowhere.keystore")
    assert code == cli.EXIT_KEYSTORE
    assert "run `init` first" in out.err


def test_wrong_passphrase(run, monkeypatch):
    run("init")
    monkeypatch.setenv("OTHER_PASSPHRASE", "not it")
    code, out = run("--passphrase-env", "OTHER_PASSPHRASE", "status")
    assert code == cli.EXIT_KEYSTORE


def test_network_failure(run, live):
    run("init")
    run("login", "--idp", IDP_URL, "--login-id", "alice")
    run("fetch-credential", "--idp", IDP_URL)
    live.net.offline.add(RP_URL)
    code, out = run("signon", "--rp", RP_URL)
    assert code == cli.EXIT_NETWORK
    assert "💡" in out.err


def test_usage_errors(run):
    run("init")
    assert run("rotate")[0] == cli.EXIT_USAGE
    assert run("add-device", "--idp", IDP_URL)[0] == cli.EXIT_USAGE
    with pytest.raises(SystemExit):
        cli.main(["signon"])


def test_unreadable_config(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{", encoding="utf-8")
    assert cli.main(["--config", str(broken), "status"]) == cli.EXIT_ERROR


@pytest.mark.parametrize("error,code", [
    (KeystoreError("x"), cli.EXIT_KEYSTORE),
    (UpstreamError("x"), cli.EXIT_NETWORK),
    (ExpiredCredentialError("x"), cli.EXIT_EXPIRED),
    (EnrollmentError("x"), cli.EXIT_ENROLLMENT),
    (AccessDeniedError("x"), cli.EXIT_ERROR),
    (ProtocolError("x"), cli.EXIT_VALIDATION),
])
def test_exit_code_mapping(error, code):
    assert cli.exit_code(error) == code


def test_bench_payloads_without_keystore(run):
    code, out = run("--json", "bench", "payloads", "--attrs", "3", keystore="unused.keystore")
    assert code == cli.EXIT_OK
    payloads = _json(out)["payloads"]
    assert payloads["signon_request"] <= 1024
    assert payloads["signon_request_guest"] < payloads["signon_request"]


def test_bench_phases_writes_report(run, tmp_path):
    out_file = tmp_path / "phases.json"
    code, _ = run("bench", "phases", "--iterations", "2", "--warmup", "0", "--out", str(out_file))
    assert code == cli.EXIT_OK
    report = json.loads(out_file.read_text(encoding="utf-8"))
    assert set(report["phases"]) == {"request_id", "provide_id", "unblind_id", "prove_id", "verify_id"}
    assert report["phases"]["verify_id"]["n"] == 2
