#!/usr/bin/env python3
"""
Closed-loop throughput of the IdP setup phase (ProvideID) and the RP sign-on
phase (VerifyID), with k independent workers.

In-process mode runs each worker in its own process over a fixture built
from the seed. HTTP mode drives running services with pre-built requests,
one thread per worker; requests are prepared before the clock starts.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

from ..client.http import ServiceClient, create_session
from ..core.errors import ProtocolError
from ..core.protocol import (
    BlindedCredentialMsg, SignOnFlags, SignOnResult, UserSecrets, build_signon_schema, prove_id, request_id,
    unblind_id,
)
from ..core.pscred import IdpPublicKey
from ..core.retrieval import AuthorityPublicInfo
from ..core.wire import Envelope, MessageType
from ..utils.config_manager import ConfigManager
from .phases import ProtocolFixture
from .report import Stats

logger = logging.getLogger(__name__)

TARGETS = ("idp", "rp")


@dataclass
class WorkerResult:
    latencies_ms: List[float]
    started: float
    finished: float


@dataclass
class ThroughputResult:
    target: str
    mode: str
    concurrency: int
    ops: int
    seconds: float
    ops_per_s: float
    latency: Stats

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _aggregate(target: str, mode: str, concurrency: int, results: Sequence[WorkerResult],
               rtt_ms: float = 0.0) -> ThroughputResult:
    latencies = [value + rtt_ms for r in results for value in r.latencies_ms]
    if not latencies:
        return ThroughputResult(target, mode, concurrency, 0, 0.0, 0.0, Stats())
    seconds = max(r.finished for r in results) - min(r.started for r in results)
    ops = len(latencies)
    return ThroughputResult(target, mode, concurrency, ops, seconds, ops / seconds if seconds > 0 else 0.0,
                            Stats.from_samples(latencies))


def _local_worker(target: str, n_attrs: int, seed: int, ops: int) -> WorkerResult:
    fixture = ProtocolFixture(n_attrs, seed)
    if target == "idp":
        _, msg = fixture.request()
        work = [lambda: fixture.provide(msg)] * ops
    else:
        prepared = [fixture.prove() for _ in range(ops)]
        work = [lambda req=req: fixture.verify(req) for req in prepared]
    latencies = []
    started = time.time()
    for op in work:
        t0 = time.perf_counter()
        op()
        latencies.append((time.perf_counter() - t0) * 1000.0)
    return WorkerResult(latencies, started, time.time())


def local_throughput(target: str, concurrency: int, ops_per_worker: int, n_attrs: int = 3, seed: int = 1,
                     rtt_ms: float = 0.0) -> ThroughputResult:
    if target not in TARGETS:
        raise ProtocolError(f"unknown target {target!r}")
    if ops_per_worker <= 0:
        return ThroughputResult(target, "local", concurrency, 0, 0.0, 0.0, Stats())
    with ProcessPoolExecutor(max_workers=concurrency) as pool:
        futures = [pool.submit(_local_worker, target, n_attrs, seed + i, ops_per_worker)
                   for i in range(concurrency)]
        results = [f.result() for f in futures]
    result = _aggregate(target, "local", concurrency, results, rtt_ms)
    logger.info("⚡ %s k=%d: %.1f ops/s", target, concurrency, result.ops_per_s)
    return result


class HttpLoad:
    """Prepares requests against live services and replays them from k threads"""

    def __init__(self, idp_url: str, login_id: str, password: str, rp_url: Optional[str] = None,
                 config: Optional[ConfigManager] = None, session=None):
        self.config = config or ConfigManager(None)
        self.session = session
        self.idp_url = idp_url.rstrip("/")
        self.rp_url = rp_url.rstrip("/") if rp_url else None
        answer = self._client(self.idp_url).post_json("/idp/login", {"login_id": login_id, "password": password})
        self.token = answer["token"]
        self.secrets = UserSecrets.generate()
        schemas = self._client(self.idp_url, self.token).get_json("/idp/schemas")
        self.issuer = schemas["issuer"]
        schema = build_signon_schema(schemas["catalog"], (), two_fa=False)
        key = self._client(self.idp_url, self.token).post_json("/idp/keys", {"schema": schema.to_dict()})
        self.pk = IdpPublicKey.from_bytes(bytes.fromhex(key["pk"]))

    def _client(self, url: str, token: Optional[str] = None) -> ServiceClient:
        session = self.session if self.session is not None else create_session(self.config)
        return ServiceClient(url, session, self.config, token)

    def _issue_request(self) -> Envelope:
        _, msg = request_id(self.pk, self.secrets)
        return msg.to_envelope()

    def _signon_requests(self, count: int) -> List[Envelope]:
        if self.rp_url is None:
            raise ProtocolError("rp throughput needs --rp")
        idp = self._client(self.idp_url, self.token)
        pending, msg = request_id(self.pk, self.secrets)
        reply = idp.post_envelope("/idp/request-id", msg.to_envelope(), MessageType.BLINDED_CREDENTIAL)
        bundle = unblind_id(self.pk, pending, self.secrets, BlindedCredentialMsg.from_envelope(reply), self.issuer)
        rp = self._client(self.rp_url)
        envelopes = []
        for _ in range(count):
            meta = rp.get_json("/rp/signon-meta")
            authority = AuthorityPublicInfo.from_dict(meta["authorities"]) if "authorities" in meta else None
            req = prove_id(self.pk, bundle, meta["domain"], meta["rp_nonce"], (),
                           SignOnFlags(retrieval=authority is not None), authority)
            envelopes.append(req.to_envelope())
        return envelopes

    def _run(self, url: str, path: str, token: Optional[str], envelopes: List[Envelope],
             check_signon: bool) -> WorkerResult:
        client = self._client(url, token)
        latencies = []
        started = time.time()
        for envelope in envelopes:
            t0 = time.perf_counter()
            response = client.post_envelope_raw(path, envelope, retries=0)
            latencies.append((time.perf_counter() - t0) * 1000.0)
            if check_signon:
                result = Envelope.from_bytes(response.content, MessageType.SIGNON_RESULT)
                if not SignOnResult.from_dict(json.loads(result.require("result"))).accepted:
                    raise ProtocolError("sign-on rejected during the load run")
        return WorkerResult(latencies, started, time.time())

    def throughput(self, target: str, concurrency: int, ops_per_worker: int) -> ThroughputResult:
        if target == "idp":
            batches = [[self._issue_request()] * ops_per_worker for _ in range(concurrency)]
            url, path, token = self.idp_url, "/idp/request-id", self.token
        elif target == "rp":
            batches = [self._signon_requests(ops_per_worker) for _ in range(concurrency)]
            url, path, token = self.rp_url, "/rp/signon", None
        else:
            raise ProtocolError(f"unknown target {target!r}")
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            futures = [pool.submit(self._run, url, path, token, batch, target == "rp") for batch in batches]
            results = [f.result() for f in futures]
        result = _aggregate(target, "http", concurrency, results)
        logger.info("⚡ %s over HTTP k=%d: %.1f ops/s", target, concurrency, result.ops_per_s)
        return result
