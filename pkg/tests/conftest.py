"""
Shared fixtures: seeded RNGs, a controllable clock, and a full in-process
deployment (IdP, RP, three authorities) wired through FastAPI TestClients.
"""

import random
import sys
from pathlib import Path
from typing import Dict, Optional, Set

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT))

import pytest
import requests
from fastapi.testclient import TestClient

from app.core.config import Settings
from app.main import create_authority_app, create_idp_app, create_rp_app
from app.services.authority_service import AuthorityService
from app.services.idp_service import IdpService
from app.services.rp_service import RpService
from app.services.store import JsonStore
from privsso.client.flows import UserClient
from privsso.client.keystore import Keystore
from privsso.core import groups
from privsso.core.protocol import DAY_SECONDS, AccountStore
from privsso.core.retrieval import authority_keygen
from privsso.utils.config_manager import ConfigManager
from privsso.utils.log import AuditLog

IDP_URL = "http://idp.test"
RP_URL = "http://rp.test"
AUTHORITY_URLS = {1: "http://authority1.test", 2: "http://authority2.test", 3: "http://authority3.test"}

ADMIN_TOKEN = "admin-token"
RECOVERY_TOKEN = "recovery-token"
REPORT_TOKEN = "report-token"

ALICE = {"login_id": "alice", "password": "correct horse",
         "info": {"name": "Alice", "email": "alice@example.org", "age": 30, "country": "CH"}}

# 2024-03-01 12:00 UTC, away from day boundaries
START = 1709294400.0


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running randomized or acceptance suites")


class FakeClock:
    """Callable clock shared by every party of a test deployment"""

    def __init__(self, now: float = START):
        self.now = now

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float = 0.0, days: float = 0.0) -> float:
        self.now += seconds + days * DAY_SECONDS
        return self.now


class RoutingSession:
    """requests-style session dispatching by base URL to in-process TestClients"""

    def __init__(self):
        self.routes: Dict[str, TestClient] = {}
        self.offline: Set[str] = set()
        self.calls = []

    def mount_app(self, base_url: str, app) -> TestClient:
        client = TestClient(app)
        self.routes[base_url] = client
        return client

    def request(self, method: str, url: str, timeout=None, data=None, **kwargs):
        for base, client in self.routes.items():
            if url.startswith(base):
                self.calls.append((method, url))
                if base in self.offline:
                    raise requests.ConnectionError(f"{base} is down")
                if data is not None:
                    kwargs["content"] = data
                return client.request(method, url[len(base):], **kwargs)
        raise requests.ConnectionError(f"no route to {url}")

    def calls_to(self, base_url: str):
        return [call for call in self.calls if call[1].startswith(base_url)]


@pytest.fixture
def params():
    return groups.setup()


@pytest.fixture
def rng():
    return random.Random(20240301)


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def config():
    config = ConfigManager(None)
    config.set("rp_settings.trusted_idps", {"idp.local": IDP_URL}, persist=False)
    config.set("authority_settings.endpoints", {str(i): url for i, url in AUTHORITY_URLS.items()}, persist=False)
    config.set("request_settings.retry_attempts", 0, persist=False)
    config.set("request_settings.delay_between_requests", 0.0, persist=False)
    config.set("client_settings.scrypt_n", 2 ** 10, persist=False)
    return config


@pytest.fixture
def keyset(params, rng):
    return authority_keygen(params, 3, 2, rng)


@pytest.fixture
def settings(tmp_path):
    return Settings(admin_token=ADMIN_TOKEN, recovery_token=RECOVERY_TOKEN, report_token=REPORT_TOKEN,
                    in_memory=True, data_dir=str(tmp_path))


class Deployment:
    def __init__(self, config, params, rng, clock, keyset, settings, rp_config=None):
        self.config = config
        self.clock = clock
        self.keyset = keyset
        self.net = RoutingSession()
        self.idp = IdpService(config, JsonStore(None), AuditLog(service="idp"), params, rng, clock)
        self.idp.create_user(ALICE["login_id"], ALICE["password"], ALICE["info"])
        self.rp = RpService(rp_config or config, AccountStore(), AuditLog(service="rp"), keyset.public,
                            self.net, params, clock, RECOVERY_TOKEN, REPORT_TOKEN)
        self.authorities = {
            i: AuthorityService(keyset.share(i), keyset.public, AuditLog(service=f"authority-{i}"), params, rng)
            for i in AUTHORITY_URLS
        }
        self.idp_client = self.net.mount_app(IDP_URL, create_idp_app(self.idp, settings))
        self.rp_client = self.net.mount_app(RP_URL, create_rp_app(self.rp, settings))
        self.authority_clients = {
            i: self.net.mount_app(url, create_authority_app(self.authorities[i], settings))
            for i, url in AUTHORITY_URLS.items()
        }

    def login(self, login_id: str = ALICE["login_id"], password: str = ALICE["password"],
              device_id: Optional[str] = None) -> dict:
        response = self.idp_client.post("/api/v1/idp/login", json={
            "login_id": login_id, "password": password, "device_id": device_id,
        })
        assert response.status_code == 200, response.text
        return response.json()


@pytest.fixture
def deployment(config, params, rng, clock, keyset, settings):
    return Deployment(config, params, rng, clock, keyset, settings)


def bearer(token: str) -> dict:
    return {"Authorization": f"Bearer {token}"}


@pytest.fixture
def make_client(deployment, config, params, rng, tmp_path):
    """UserClient factory: fresh keystore, optionally logged in at the IdP"""

    def make(name: str = "alice", login: bool = True, login_id: str = ALICE["login_id"],
             password: str = ALICE["password"]) -> UserClient:
        keystore = Keystore(str(tmp_path / f"{name}.keystore"), "passphrase", scrypt_n=2 ** 10)
        client = UserClient(keystore, config, deployment.net, rng, params, deployment.clock)
        client.init()
        if login:
            client.login(IDP_URL, login_id, password, name)
        return client

    return make
