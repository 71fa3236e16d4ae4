#!/usr/bin/env python3
"""
Service layer for one decryption authority
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from privsso.core import groups, retrieval
from privsso.core.errors import ConfigError, ProtocolError
from privsso.core.groups import PublicParams, Rng, Scalar
from privsso.core.retrieval import AuthorityKeySet, AuthorityPublicInfo, AuthorityShare, PartialDecryption, RetrievalToken
from privsso.core.wire import Envelope, MessageType
from privsso.utils.log import AuditLog

logger = logging.getLogger(__name__)

PUBLIC_FILE = "authority_public.json"


def share_file(index: int) -> str:
    return f"authority_{index}.json"


def write_keyset(keyset: AuthorityKeySet, directory: str) -> Dict[int, str]:
    """Trusted-dealer output: one share file per authority plus the public descriptor"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / PUBLIC_FILE, "w", encoding="utf-8") as f:
        json.dump(keyset.public.to_dict(), f, indent=2)
    paths = {}
    for share in keyset.shares:
        path = out / share_file(share.index)
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"index": share.index, "secret": share.secret.to_bytes().hex()}, f)
        path.chmod(0o600)
        paths[share.index] = str(path)
    logger.info("🔑 wrote %d authority shares to %s", len(paths), out)
    return paths


def load_public(directory: str) -> Optional[AuthorityPublicInfo]:
    path = Path(directory) / PUBLIC_FILE
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return AuthorityPublicInfo.from_dict(json.load(f))


def load_share(directory: str, index: int) -> AuthorityShare:
    path = Path(directory) / share_file(index)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read authority share {path}: {e}") from e
    return AuthorityShare(int(data["index"]), Scalar.from_bytes(bytes.fromhex(data["secret"])))


class AuthorityService:
    """Answers retrieval reports with a proven partial decryption"""

    def __init__(self, share: AuthorityShare, public: AuthorityPublicInfo, audit: Optional[AuditLog] = None,
                 params: Optional[PublicParams] = None, rng: Optional[Rng] = None):
        self.params = params or groups.setup()
        expected = public.commitments.get(share.index)
        if expected is None or groups.exp(self.params.g, share.secret) != expected:
            raise ConfigError(f"share {share.index} does not match the published commitment")
        self.share = share
        self.public = public
        self.audit = audit or AuditLog(service=f"authority-{share.index}")
        self.rng = rng

    @property
    def index(self) -> int:
        return self.share.index

    def partial_decrypt(self, report: Envelope) -> PartialDecryption:
        if report.type != MessageType.RETRIEVAL_REPORT:
            raise ProtocolError("expected RETRIEVAL_REPORT")
        token = RetrievalToken.from_bytes(report.require("token"))
        case_id = (report.get("case_id") or b"").decode("utf-8", "replace")
        domain = (report.get("domain") or b"").decode("utf-8", "replace")
        partial = retrieval.partial_decrypt(self.params, self.share, token, self.rng)
        self.audit.record("partial_decrypt", case_id=case_id, domain=domain, authority=self.index)
        logger.info("🔓 authority %d answered case %s from %s", self.index, case_id, domain)
        return partial

    def share_info(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "commitment": groups.serialize(self.public.commitments[self.index]).hex(),
            "threshold": self.public.threshold,
            "n_auth": self.public.n_auth,
        }
