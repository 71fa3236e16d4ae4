#!/usr/bin/env python3
"""
Service layer for the Relying Party: nonces, sign-on verification against the
account store, secret rotation and identity-retrieval reports
"""

import logging
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from privsso.client.http import ServiceClient
from privsso.core import groups, retrieval
from privsso.core.errors import (
    ConfigError, DeserializationError, InvalidPartialError, NotFoundError, PrivSSOError,
    ProtocolError, ServiceError, ThresholdError,
)
from privsso.core.groups import PublicParams
from privsso.core.protocol import (
    AccountStore, NonceCache, RejectReason, RotationRequest, SignOnPolicy, SignOnRequest, SignOnResult,
    rp_apply_rotation, verify_id,
)
from privsso.core.pscred import IdpPublicKey
from privsso.core.retrieval import AuthorityPublicInfo, PartialDecryption
from privsso.core.wire import Envelope, MessageType
from privsso.utils.config_manager import ConfigManager
from privsso.utils.log import AuditLog

logger = logging.getLogger(__name__)

PkFetcher = Callable[[str, str], bytes]


@dataclass
class _CachedKey:
    pk: IdpPublicKey
    fetched_at: float


class PkCache:
    """IdP public keys by (issuer, schema id); only trusted issuers are ever fetched"""

    def __init__(self, trusted: Dict[str, str], fetch: PkFetcher, ttl_seconds: float,
                 clock: Callable[[], float] = time.time):
        self.trusted = dict(trusted)
        self.fetch = fetch
        self.ttl = ttl_seconds
        self.clock = clock
        self._entries: Dict[Tuple[str, str], _CachedKey] = {}
        self._lock = threading.Lock()
        self.fetches = 0

    def cached(self, issuer: str, schema_id: str) -> Optional[IdpPublicKey]:
        with self._lock:
            entry = self._entries.get((issuer, schema_id))
        if entry is None or self.clock() - entry.fetched_at > self.ttl:
            return None
        return entry.pk

    def fetch_and_cache(self, issuer: str, schema_id: str) -> Optional[IdpPublicKey]:
        """Fetch from the issuer's own URL; inconsistent or mismatching keys are never cached"""
        url = self.trusted.get(issuer)
        if url is None:
            return None
        self.fetches += 1
        try:
            pk = IdpPublicKey.from_bytes(self.fetch(url, schema_id))
        except (ServiceError, DeserializationError) as e:
            logger.warning("⚠️  cannot fetch key %s from %s: %s", schema_id, issuer, e)
            return None
        if pk.schema.schema_id != schema_id or not pk.is_consistent():
            logger.warning("⚠️  key %s from %s failed consistency checks", schema_id, issuer)
            return None
        with self._lock:
            self._entries[(issuer, schema_id)] = _CachedKey(pk, self.clock())
        logger.info("🔑 cached key %s from %s", schema_id, issuer)
        return pk

    def get(self, issuer: str, schema_id: str) -> Optional[IdpPublicKey]:
        if issuer not in self.trusted:
            return None
        return self.cached(issuer, schema_id) or self.fetch_and_cache(issuer, schema_id)


class RpService:
    """Relying Party state: policy, nonce cache, account store and trusted-IdP key cache"""

    def __init__(self, config: ConfigManager, accounts: AccountStore, audit: Optional[AuditLog] = None,
                 authority: Optional[AuthorityPublicInfo] = None, session=None,
                 params: Optional[PublicParams] = None, clock: Callable[[], float] = time.time,
                 recovery_token: Optional[str] = None, report_token: Optional[str] = None):
        self.config = config
        self.accounts = accounts
        self.audit = audit or AuditLog(service="rp")
        self.params = params or groups.setup(int(config.get("curve_settings.security_level", 128)))
        self.clock = clock
        self.session = session
        self.domain = config.get("rp_settings.domain", "rp.local")
        self.policy = SignOnPolicy(
            require_retrieval=bool(config.get("rp_settings.require_retrieval", True)),
            require_2fa=bool(config.get("rp_settings.require_2fa", False)),
            allow_guest=bool(config.get("rp_settings.allow_guest", True)),
            two_fa_window_seconds=int(config.get("rp_settings.two_fa_window_seconds", 300)),
        )
        if self.policy.require_retrieval and authority is None:
            raise ConfigError("require_retrieval needs the authority set descriptor")
        self.authority = authority
        self.authority_endpoints = config.authority_endpoints()
        self.recovery_token = recovery_token
        self.report_token = report_token
        self.nonces = NonceCache(int(config.get("rp_settings.nonce_ttl_seconds", 120)),
                                 int(config.get("rp_settings.nonce_cache_max", 100_000)))
        self.pk_cache = PkCache(
            config.trusted_idps(), self._fetch_pk,
            float(config.get("rp_settings.pk_cache_ttl_seconds", 3600)), clock,
        )

    def _client(self, base_url: str, token: Optional[str] = None) -> ServiceClient:
        return ServiceClient(base_url, self.session, self.config, token)

    def _fetch_pk(self, url: str, schema_id: str) -> bytes:
        return self._client(url).get_bytes(f"/idp/pk/{schema_id}", retries=0)

    # -- sign-on ---------------------------------------------------------------

    def signon_meta(self) -> Dict[str, Any]:
        meta = {
            "rp_nonce": self.nonces.issue(self.clock()),
            "domain": self.domain,
            "nonce_ttl_seconds": self.nonces.ttl,
            "policy": {
                "require_retrieval": self.policy.require_retrieval,
                "require_2fa": self.policy.require_2fa,
                "allow_guest": self.policy.allow_guest,
            },
            "accepted_idps": sorted(self.pk_cache.trusted),
        }
        if self.policy.require_retrieval:
            meta["authorities"] = self.authority.to_dict()
        return meta

    def signon(self, req: SignOnRequest) -> SignOnResult:
        pk = self.pk_cache.get(req.issuer, req.schema_id)
        if pk is None:
            result = SignOnResult.reject(RejectReason.UNKNOWN_IDP, f"no trusted key for {req.issuer!r}")
        else:
            result = verify_id(pk, req, self.domain, self.authority, self.clock(), self.nonces,
                               self.policy, self.accounts, self.params)
        self.audit.record("signon", "success" if result.accepted else "reject", issuer=req.issuer,
                          action=result.action.value if result.action else None,
                          reason=result.reason.value if result.reason else None,
                          account_id=result.account_id)
        return result

    def rotate(self, req: RotationRequest) -> SignOnResult:
        old_pk = self.pk_cache.get(req.old.issuer, req.old.schema_id)
        new_pk = self.pk_cache.get(req.new.issuer, req.new.schema_id)
        if old_pk is None or new_pk is None:
            result = SignOnResult.reject(RejectReason.UNKNOWN_IDP, "rotation references an untrusted key")
        else:
            result = rp_apply_rotation(old_pk, new_pk, req, self.domain, self.authority, self.clock(),
                                       self.nonces, self.policy, self.accounts, self.params)
        self.audit.record("rotate", "success" if result.accepted else "reject",
                          reason=result.reason.value if result.reason else None, account_id=result.account_id)
        return result

    # -- identity retrieval ----------------------------------------------------------

    def _partial_from(self, index: int, url: str, report: Envelope) -> PartialDecryption:
        reply = self._client(url, self.report_token).post_envelope(
            "/authority/partial-decrypt", report, MessageType.PARTIAL_DECRYPTION, retries=0,
        )
        partial = PartialDecryption.from_bytes(reply.require("partial"))
        if partial.index != index:
            raise InvalidPartialError(index, f"authority {index} answered with index {partial.index}")
        return partial

    def report(self, account_id: str) -> Dict[str, Any]:
        """Disclose an account's stored token to the authorities and resolve it at the issuing IdP"""
        record = self.accounts.by_account_id(account_id)
        if record is None:
            raise NotFoundError(f"unknown account {account_id}")
        token = record.retrieval_token
        if token is None:
            raise ProtocolError("account has no stored retrieval token")
        if self.authority is None:
            raise ConfigError("no authority set configured")
        case_id = uuid.uuid4().hex[:16]
        report = Envelope(MessageType.RETRIEVAL_REPORT, {
            "case_id": case_id.encode(), "token": token.to_bytes(), "domain": self.domain.encode("utf-8"),
        })

        valid: List[PartialDecryption] = []
        forged: List[int] = []
        offline: List[int] = []
        for index, url in sorted(self.authority_endpoints.items()):
            if len(valid) >= self.authority.threshold:
                break
            try:
                partial = self._partial_from(index, url, report)
            except ServiceError as e:
                logger.warning("⚠️  authority %d unavailable: %s", index, e)
                offline.append(index)
                continue
            except PrivSSOError as e:
                logger.warning("⚠️  authority %d returned an unusable partial: %s", index, e)
                forged.append(index)
                continue
            if retrieval.verify_partial(self.params, self.authority, token, partial):
                valid.append(partial)
            else:
                forged.append(index)
        try:
            h_gamma = retrieval.combine(self.params, valid, token, self.authority)
        except ThresholdError as e:
            self.audit.record("report", "fail", case_id=case_id, account_id=account_id,
                              forged=forged, offline=offline, reason=str(e))
            raise

        issuer_url = self.pk_cache.trusted.get(record.issuer)
        if issuer_url is None:
            raise NotFoundError(f"issuer {record.issuer!r} is not trusted")
        answer = self._client(issuer_url, self.recovery_token).post_json(
            "/idp/lookup", {"h_gamma": groups.serialize(h_gamma).hex()}
        )
        self.audit.record("report", case_id=case_id, account_id=account_id,
                          authorities=[p.index for p in valid], forged=forged, offline=offline)
        logger.warning("🧾 case %s resolved account %s at %s", case_id, account_id, record.issuer)
        return {
            "case_id": case_id,
            "account_id": account_id,
            "issuer": record.issuer,
            "login_id": answer["login_id"],
            "authorities": [p.index for p in valid],
            "forged": forged,
            "offline": offline,
        }

    def status(self) -> Dict[str, Any]:
        return {"domain": self.domain, "accounts": len(self.accounts), "pending_nonces": len(self.nonces)}
