#!/usr/bin/env python3
"""
Service layer for the Identity Provider: keys, users, issuance, device registry
and the h^gamma reverse lookup
"""

import logging
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from privsso.core import groups
from privsso.core.errors import (
    AccessDeniedError, ConflictError, NotFoundError, ProtocolError, RevokedDeviceError,
    SchemaError, UnknownAttributeError,
)
from privsso.core.groups import PublicParams, Rng
from privsso.core.protocol import (
    BlindedCredentialMsg, DeviceRecord, IssuancePolicy, RequestIDMsg, UserRecord, provide_id,
)
from privsso.core.pscred import AttributeSchema, IdpKeyPair, keygen
from privsso.core.wire import Envelope, MessageType
from privsso.utils.config_manager import ConfigManager
from privsso.utils.log import AuditLog

from ..core.security import Session, SessionRegistry, hash_password, verify_password
from .store import JsonStore

logger = logging.getLogger(__name__)

KEYS = "keys"
USERS = "users"
LOOKUP = "lookup"


@dataclass
class PendingEnrollment:
    request_id: str
    login_id: str
    new_device_id: str
    init: Envelope
    approve: Optional[Envelope] = None
    created_at: float = 0.0


class IdpService:
    """Identity Provider state: one signing key per attribute schema, user table and reverse index"""

    def __init__(self, config: ConfigManager, store: JsonStore, audit: Optional[AuditLog] = None,
                 params: Optional[PublicParams] = None, rng: Optional[Rng] = None,
                 clock: Callable[[], float] = time.time):
        self.config = config
        self.store = store
        self.audit = audit or AuditLog(service="idp")
        self.params = params or groups.setup(int(config.get("curve_settings.security_level", 128)))
        self.rng = rng
        self.clock = clock
        self.name = config.get("idp_settings.name", "idp.local")
        self.catalog = config.attribute_catalog()
        self.max_info = int(config.get("idp_settings.max_info_attributes", 16))
        self.policy = IssuancePolicy(
            validity_days=int(config.get("idp_settings.validity_days", 7)),
            granularity_days=int(config.get("idp_settings.granularity_days", 1)),
        )
        self.sessions = SessionRegistry()
        self._pending: Dict[str, PendingEnrollment] = {}
        self._pending_lock = threading.Lock()
        self._key_lock = threading.Lock()
        self._keys: Dict[str, IdpKeyPair] = {
            schema_id: IdpKeyPair.from_bytes(bytes.fromhex(blob)) for schema_id, blob in store.items(KEYS)
        }
        # 2FA-capable minimal schema so every device can be revoked individually
        self.default_schema = AttributeSchema.signon((), two_fa=True)
        self.key_for(self.default_schema)
        for seed in config.seed_users():
            if self.store.get(USERS, seed["login_id"]) is None:
                self.create_user(seed["login_id"], seed.get("password", ""), seed.get("info", {}))

    # -- keys ----------------------------------------------------------------

    def check_schema(self, schema: AttributeSchema) -> None:
        if schema.layout != "signon":
            raise SchemaError("the IdP only certifies sign-on schemas")
        if len(schema.info_labels) > self.max_info:
            raise SchemaError(f"at most {self.max_info} info attributes per credential")
        expected = AttributeSchema.signon(
            [(label, self.catalog[label]) for label in schema.info_labels if label in self.catalog],
            two_fa=schema.two_fa,
        )
        unknown = [label for label in schema.info_labels if label not in self.catalog]
        if unknown:
            raise UnknownAttributeError(f"IdP does not certify: {', '.join(unknown)}")
        if expected != schema:
            raise SchemaError("schema does not match the IdP attribute catalog")

    def key_for(self, schema: AttributeSchema) -> IdpKeyPair:
        """Signing key for `schema`, generated on first use"""
        self.check_schema(schema)
        with self._key_lock:
            kp = self._keys.get(schema.schema_id)
            if kp is None:
                kp = keygen(self.params, schema, self.rng)
                self._keys[schema.schema_id] = kp
                self.store.put(KEYS, schema.schema_id, kp.to_bytes().hex())
                self.audit.record("keygen", schema_id=schema.schema_id, n=schema.n)
            return kp

    def public_key_bytes(self, schema_id: Optional[str] = None) -> bytes:
        schema_id = schema_id or self.default_schema.schema_id
        kp = self._keys.get(schema_id)
        if kp is None:
            raise NotFoundError(f"no key for schema {schema_id}")
        return kp.pk.to_bytes()

    def certify(self, schema: AttributeSchema) -> bytes:
        """Public key for a catalog-conforming schema the client asks for"""
        return self.key_for(schema).pk.to_bytes()

    def schemas(self) -> Dict[str, Any]:
        return {
            "issuer": self.name,
            "catalog": dict(self.catalog),
            "default_schema_id": self.default_schema.schema_id,
            "schemas": {sid: kp.pk.schema.to_dict() for sid, kp in sorted(self._keys.items())},
            "validity_days": self.policy.validity_days,
            "granularity_days": self.policy.granularity_days,
        }

    # -- users and sessions ------------------------------------------------------

    def user(self, login_id: str) -> UserRecord:
        data = self.store.get(USERS, login_id)
        if data is None:
            raise NotFoundError(f"unknown user {login_id}")
        return UserRecord.from_dict(data)

    def _save(self, user: UserRecord) -> None:
        self.store.put(USERS, user.login_id, user.to_dict())

    def create_user(self, login_id: str, password: str, info: Optional[Dict[str, Any]] = None) -> UserRecord:
        info = dict(info or {})
        unknown = [label for label in info if label not in self.catalog]
        if unknown:
            raise UnknownAttributeError(f"IdP does not certify: {', '.join(unknown)}")
        for label, value in info.items():
            if self.catalog[label] == "int" and not isinstance(value, int):
                raise SchemaError(f"attribute {label} must be an integer")
        with self.store.lock(USERS, login_id):
            if self.store.get(USERS, login_id) is not None:
                raise ConflictError(f"user {login_id} already exists")
            user = UserRecord.create(login_id, info, self.rng, hash_password(password))
            self._save(user)
            self.store.put(LOOKUP, groups.serialize(user.h_gamma).hex(), login_id)
        self.audit.record("user_created", login_id=login_id, attributes=sorted(info))
        logger.info("👤 created user %s", login_id)
        return user

    def login(self, login_id: str, password: str, device_id: Optional[str] = None,
              device_label: str = "device") -> Session:
        data = self.store.get(USERS, login_id)
        if data is None or not verify_password(password, data.get("password_hash", "")):
            self.audit.record("login", "fail", login_id=login_id)
            raise AccessDeniedError("invalid login or password")
        with self.store.lock(USERS, login_id):
            user = self.user(login_id)
            if device_id is None:
                device = user.add_device(device_label, self.clock())
                self._save(user)
                self.audit.record("device_registered", login_id=login_id, device_id=device.device_id)
            else:
                device = user.devices.get(device_id)
                if device is None:
                    raise NotFoundError(f"unknown device {device_id}")
                if device.revoked:
                    self.audit.record("login", "blocked", login_id=login_id, device_id=device_id)
                    raise RevokedDeviceError(f"device {device_id} is revoked")
        self.audit.record("login", login_id=login_id, device_id=device.device_id)
        return self.sessions.open(login_id, device.device_id)

    def user_view(self, login_id: str) -> Dict[str, Any]:
        user = self.user(login_id)
        return {
            "login_id": user.login_id,
            "attributes": sorted(user.info),
            "devices": [d.to_dict() for d in user.devices.values()],
        }

    # -- issuance --------------------------------------------------------------

    def issue(self, session: Session, msg: RequestIDMsg) -> BlindedCredentialMsg:
        kp = self.key_for(msg.schema)
        user = self.user(session.login_id)
        try:
            reply = provide_id(kp, user, msg, self.clock(), session.device_id, self.policy, self.rng)
        except RevokedDeviceError:
            self.audit.record("issue", "refused", login_id=user.login_id, device_id=session.device_id,
                              reason="revoked-device")
            raise
        except ProtocolError as e:
            self.audit.record("issue", "refused", login_id=user.login_id, reason=str(e))
            raise
        self.audit.record("issue", login_id=user.login_id, device_id=session.device_id,
                          schema_id=msg.schema.schema_id, tp=reply.tp)
        return reply

    def lookup(self, h_gamma: bytes) -> str:
        """Exact-match reverse lookup of a recovered h^gamma"""
        groups.deserialize(h_gamma, groups.GroupId.G1)
        login_id = self.store.get(LOOKUP, h_gamma.hex())
        self.audit.record("lookup", "success" if login_id else "miss", login_id=login_id)
        if login_id is None:
            raise NotFoundError("no user for this identity value")
        return login_id

    # -- devices ---------------------------------------------------------------

    def revoke(self, session: Session, device_id: str) -> DeviceRecord:
        with self.store.lock(USERS, session.login_id):
            user = self.user(session.login_id)
            device = user.devices.get(device_id)
            if device is None:
                raise NotFoundError(f"unknown device {device_id}")
            if device.revoked:
                raise ConflictError(f"device {device_id} already revoked")
            device.revoked = True
            self._save(user)
        self.sessions.close_device(session.login_id, device_id)
        self.audit.record("device_revoked", login_id=session.login_id, device_id=device_id,
                          by_device=session.device_id)
        logger.warning("🚫 device %s of %s revoked", device_id, session.login_id)
        return device

    def enroll_init(self, session: Session, init: Envelope) -> str:
        if init.type != MessageType.ENROLL_INIT:
            raise ProtocolError("expected ENROLL_INIT")
        init.require("public_key")
        pending = PendingEnrollment(uuid.uuid4().hex[:16], session.login_id, session.device_id, init,
                                    created_at=self.clock())
        with self._pending_lock:
            self._pending[pending.request_id] = pending
        self.audit.record("enroll_init", login_id=session.login_id, device_id=session.device_id,
                          request_id=pending.request_id)
        return pending.request_id

    def _pending_for(self, session: Session, request_id: str) -> PendingEnrollment:
        with self._pending_lock:
            pending = self._pending.get(request_id)
        if pending is None:
            raise NotFoundError(f"no pending enrollment {request_id}")
        if pending.login_id != session.login_id:
            raise AccessDeniedError("enrollment belongs to another account")
        return pending

    def pending_enrollments(self, session: Session) -> List[Dict[str, Any]]:
        with self._pending_lock:
            mine = [p for p in self._pending.values() if p.login_id == session.login_id and p.approve is None]
        return [
            {"request_id": p.request_id, "device_id": p.new_device_id, "init": p.init.to_json()}
            for p in mine
        ]

    def enroll_approve(self, session: Session, approve: Envelope) -> str:
        if approve.type != MessageType.ENROLL_APPROVE:
            raise ProtocolError("expected ENROLL_APPROVE")
        request_id = approve.require("request_id").decode("utf-8")
        pending = self._pending_for(session, request_id)
        if session.device_id == pending.new_device_id:
            raise AccessDeniedError("a device cannot approve its own enrollment")
        with self._pending_lock:
            if pending.approve is not None:
                raise ConflictError(f"enrollment {request_id} already approved")
            pending.approve = approve
        self.audit.record("enroll_approve", login_id=session.login_id, device_id=session.device_id,
                          request_id=request_id)
        return request_id

    def enroll_result(self, session: Session, request_id: str) -> Optional[Envelope]:
        pending = self._pending_for(session, request_id)
        if session.device_id != pending.new_device_id:
            raise AccessDeniedError("only the enrolling device may fetch the result")
        return pending.approve

    def enroll_complete(self, session: Session, complete: Envelope) -> None:
        if complete.type != MessageType.ENROLL_COMPLETE:
            raise ProtocolError("expected ENROLL_COMPLETE")
        with self._pending_lock:
            doomed = [rid for rid, p in self._pending.items()
                      if p.login_id == session.login_id and p.new_device_id == session.device_id]
            for rid in doomed:
                del self._pending[rid]
        self.audit.record("enroll_complete", login_id=session.login_id, device_id=session.device_id)

    def status(self) -> Dict[str, Any]:
        return {
            "issuer": self.name,
            "users": self.store.count(USERS),
            "schemas": len(self._keys),
            "pending_enrollments": len(self._pending),
        }
