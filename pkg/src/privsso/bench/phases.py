#!/usr/bin/env python3
"""
In-process timing of the protocol phases, attribute-count sweeps and wire
payload sizes. CPU time is per process (time.process_time); warmup
iterations are discarded.
"""

import logging
import random
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..core import groups
from ..core.devices import NewDevice, approve_enrollment
from ..core.errors import ProtocolError
from ..core.protocol import (
    AccountStore, BlindedCredentialMsg, CredentialBundle, IssuancePolicy, NonceCache, PendingIssuance,
    RequestIDMsg, SignOnFlags, SignOnPolicy, SignOnRequest, SignOnResult, UserRecord, UserSecrets,
    provide_id, prove_id, request_id, unblind_id, verify_id,
)
from ..core.pscred import AttributeSchema, IdpKeyPair, keygen
from ..core.retrieval import AuthorityKeySet, authority_keygen, partial_decrypt
from .report import BenchReport, Stats, linear_fit

logger = logging.getLogger(__name__)

PHASES = ("request_id", "provide_id", "unblind_id", "prove_id", "verify_id")
DOMAIN = "bench.rp.local"


class ProtocolFixture:
    """Keys, user and credential for one attribute count, built from a seed"""

    def __init__(self, n_attrs: int, seed: int = 1, two_fa: bool = False, retrieval: bool = True):
        base = 4 if two_fa else 3
        if n_attrs < base:
            raise ProtocolError(f"a sign-on credential has at least {base} attributes")
        self.rng = random.Random(seed)
        self.params = groups.setup()
        self.labels = [f"attr{i}" for i in range(n_attrs - base)]
        self.schema = AttributeSchema.signon(self.labels, two_fa=two_fa)
        self.kp: IdpKeyPair = keygen(self.params, self.schema, self.rng)
        self.user = UserRecord.create("bench-user", {label: f"value-{i}" for i, label in enumerate(self.labels)},
                                      self.rng)
        self.secrets = UserSecrets.generate(self.rng, two_fa=two_fa)
        self.authorities: AuthorityKeySet = authority_keygen(self.params, 3, 2, self.rng)
        self.flags = SignOnFlags(retrieval=retrieval, two_fa=two_fa)
        self.policy = SignOnPolicy(require_retrieval=retrieval)
        self.issuance = IssuancePolicy()
        self.nonces = NonceCache()
        self.accounts = AccountStore()
        self.bundle = self.issue()

    @property
    def pk(self):
        return self.kp.pk

    def request(self) -> Tuple[PendingIssuance, RequestIDMsg]:
        return request_id(self.pk, self.secrets, self.rng)

    def provide(self, msg: RequestIDMsg) -> BlindedCredentialMsg:
        return provide_id(self.kp, self.user, msg, None, None, self.issuance, self.rng)

    def unblind(self, pending: PendingIssuance, reply: BlindedCredentialMsg) -> CredentialBundle:
        return unblind_id(self.pk, pending, self.secrets, reply, "bench-idp")

    def issue(self) -> CredentialBundle:
        pending, msg = self.request()
        return self.unblind(pending, self.provide(msg))

    def prove(self, disclose: Sequence[str] = (), bundle: Optional[CredentialBundle] = None) -> SignOnRequest:
        authority = self.authorities.public if self.flags.retrieval else None
        return prove_id(self.pk, bundle or self.bundle, DOMAIN, self.nonces.issue(), disclose, self.flags,
                        authority, (), None, self.rng, self.params)

    def verify(self, req: SignOnRequest) -> SignOnResult:
        authority = self.authorities.public if self.flags.retrieval else None
        return verify_id(self.pk, req, DOMAIN, authority, None, self.nonces, self.policy, self.accounts,
                         self.params)


def _cpu_ms(fn: Callable, *args):
    start = time.process_time()
    result = fn(*args)
    return result, (time.process_time() - start) * 1000.0


def time_phases(fixture: ProtocolFixture, iterations: int, warmup: int = 0,
                disclose: Sequence[str] = ()) -> Dict[str, Stats]:
    """CPU time of each phase over `iterations` full setup + sign-on runs"""
    samples: Dict[str, List[float]] = {phase: [] for phase in PHASES}
    for i in range(warmup + iterations):
        start = time.process_time()
        pending, msg = fixture.request()
        t_request = (time.process_time() - start) * 1000.0
        reply, t_provide = _cpu_ms(fixture.provide, msg)
        bundle, t_unblind = _cpu_ms(fixture.unblind, pending, reply)
        req, t_prove = _cpu_ms(fixture.prove, disclose, bundle)
        result, t_verify = _cpu_ms(fixture.verify, req)
        if not result.accepted:
            raise ProtocolError(f"bench sign-on rejected: {result.reason}")
        if i < warmup:
            continue
        for phase, value in zip(PHASES, (t_request, t_provide, t_unblind, t_prove, t_verify)):
            samples[phase].append(value)
    return {phase: Stats.from_samples(values) for phase, values in samples.items()}


def _time_signon(fixture: ProtocolFixture, iterations: int, warmup: int,
                 disclose: Sequence[str]) -> Tuple[Stats, Stats]:
    prove, verify = [], []
    for i in range(warmup + iterations):
        req, t_prove = _cpu_ms(fixture.prove, disclose)
        result, t_verify = _cpu_ms(fixture.verify, req)
        if not result.accepted:
            raise ProtocolError(f"bench sign-on rejected: {result.reason}")
        if i >= warmup:
            prove.append(t_prove)
            verify.append(t_verify)
    return Stats.from_samples(prove), Stats.from_samples(verify)


def attribute_sweep(counts: Sequence[int], iterations: int, warmup: int = 1,
                    seed: int = 1) -> List[Dict[str, float]]:
    """Sign-on CPU time against the total attribute count, nothing disclosed beyond tp"""
    rows = []
    for n in counts:
        fixture = ProtocolFixture(n, seed)
        prove, verify = _time_signon(fixture, iterations, warmup, ())
        rows.append({"n": n, "prove_ms": prove.mean, "verify_ms": verify.mean,
                     "total_ms": prove.mean + verify.mean, "iterations": prove.n})
        logger.info("📈 n=%d prove %.1f ms verify %.1f ms", n, prove.mean, verify.mean)
    return rows


def hidden_sweep(n_attrs: int, iterations: int, warmup: int = 1, seed: int = 1) -> List[Dict[str, float]]:
    """Sign-on CPU time against the number of hidden attributes at a fixed attribute count"""
    fixture = ProtocolFixture(n_attrs, seed)
    rows = []
    # s and gamma are always hidden, tp always disclosed
    for disclosed_info in range(len(fixture.labels), -1, -1):
        disclose = fixture.labels[:disclosed_info]
        hidden = n_attrs - 1 - disclosed_info
        prove, verify = _time_signon(fixture, iterations, warmup, disclose)
        rows.append({"hidden": hidden, "prove_ms": prove.mean, "verify_ms": verify.mean,
                     "total_ms": prove.mean + verify.mean, "iterations": prove.n})
    return rows


def payload_sizes(n_attrs: int = 3, seed: int = 1) -> Dict[str, int]:
    """Serialized sizes of every wire message for one attribute count"""
    fixture = ProtocolFixture(n_attrs, seed)
    pending, msg = fixture.request()
    reply = fixture.provide(msg)
    bundle = fixture.unblind(pending, reply)
    req = fixture.prove((), bundle)
    result = fixture.verify(req)
    plain = prove_id(fixture.pk, bundle, DOMAIN, fixture.nonces.issue(), (), SignOnFlags(retrieval=False),
                     None, (), None, fixture.rng, fixture.params)
    guest = prove_id(fixture.pk, bundle, DOMAIN, fixture.nonces.issue(), (),
                     SignOnFlags(guest=True, retrieval=False), None, (), None, fixture.rng, fixture.params)
    partial = partial_decrypt(fixture.params, fixture.authorities.share(1), req.token, fixture.rng)
    device = NewDevice("bench-salt")
    init = device.init_message()
    return {
        "idp_public_key": len(fixture.pk.to_bytes()),
        "credential": len(bundle.credential.to_bytes()),
        "request_id": len(msg.to_envelope().to_bytes()),
        "blinded_credential": len(reply.to_envelope().to_bytes()),
        "signon_request": len(req.to_bytes()),
        "signon_request_no_retrieval": len(plain.to_bytes()),
        "signon_request_guest": len(guest.to_bytes()),
        "signon_result": len(result.to_envelope().to_bytes()),
        "retrieval_token": len(req.token.to_bytes()),
        "partial_decryption": len(partial.to_bytes()),
        "enroll_init": len(init.to_bytes()),
        "enroll_approve": len(
            approve_enrollment(init, "bench-salt", fixture.secrets.s, device.fingerprint).to_bytes()),
    }


def phases_report(n_attrs: int = 3, iterations: int = 20, warmup: int = 3, seed: int = 1,
                  rtt_ms: float = 0.0) -> BenchReport:
    report = BenchReport(seed=seed, config={"n_attrs": n_attrs, "iterations": iterations, "warmup": warmup,
                                            "rtt_ms": rtt_ms})
    if iterations <= 0:
        return report
    fixture = ProtocolFixture(n_attrs, seed)
    report.phases = time_phases(fixture, iterations, warmup)
    mean = {phase: stats.mean for phase, stats in report.phases.items()}
    report.latency_ms = {
        "setup": mean["request_id"] + mean["provide_id"] + mean["unblind_id"] + rtt_ms,
        "signon": mean["prove_id"] + mean["verify_id"] + rtt_ms,
    }
    report.payloads = payload_sizes(n_attrs, seed)
    return report


def sweep_report(counts: Sequence[int], iterations: int = 10, warmup: int = 1, seed: int = 1,
                 hidden_at: Optional[int] = None) -> BenchReport:
    report = BenchReport(seed=seed, config={"attribute_counts": list(counts), "iterations": iterations,
                                            "warmup": warmup, "hidden_at": hidden_at})
    if iterations <= 0:
        return report
    report.sweep = attribute_sweep(counts, iterations, warmup, seed)
    xs = [row["n"] for row in report.sweep]
    report.sweep_fit = {
        column: linear_fit(xs, [row[column] for row in report.sweep])
        for column in ("prove_ms", "verify_ms", "total_ms")
    }
    if hidden_at:
        report.hidden_sweep = hidden_sweep(hidden_at, iterations, warmup, seed)
    return report
