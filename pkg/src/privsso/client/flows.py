#!/usr/bin/env python3
"""
User-side protocol flows against live IdP and RP services.

Each method drives exactly one flow and keeps its state in the keystore:
login, setup phase (fetch_credential), sign-on, device enrollment on both
devices, device revocation and secret rotation.
"""

import json
import logging
import time
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from ..core import groups
from ..core.devices import NewDevice, approve_enrollment, fingerprint
from ..core.errors import (
    CredentialError, ExpiredCredentialError, ForbiddenDisclosureError, ProtocolError, RotationError,
    UnknownAttributeError,
)
from ..core.groups import PublicParams, Rng
from ..core.protocol import (
    DAY_SECONDS, AccountAction, BlindedCredentialMsg, CredentialBundle, HiddenEquality, SignOnFlags,
    SignOnResult, UserSecrets, build_signon_schema, day_number, prove_id, request_id, rotate_secret,
    unblind_id,
)
from ..core.pscred import IdpPublicKey
from ..core.retrieval import AuthorityPublicInfo
from ..core.wire import Envelope, MessageType
from ..utils.config_manager import ConfigManager
from .http import ServiceClient
from .keystore import Keystore, KeystoreData

logger = logging.getLogger(__name__)

HIDDEN_LABELS = ("s", "gamma", "s_d")


def origin_of(url: str) -> str:
    return url.rstrip("/")


def expiry_date(tp: int) -> str:
    return datetime.fromtimestamp(tp * DAY_SECONDS, tz=timezone.utc).date().isoformat()


def parse_equalities(items: Sequence[str]) -> List[HiddenEquality]:
    """`label=value` pairs from the command line"""
    predicates = []
    for item in items:
        label, sep, value = item.partition("=")
        if not sep or not label:
            raise ProtocolError(f"expected label=value, got {item!r}")
        predicates.append(HiddenEquality(label, value))
    return predicates


class UserClient:
    """One user's device: a keystore plus HTTP access to IdPs and RPs"""

    def __init__(self, keystore: Keystore, config: Optional[ConfigManager] = None, session=None,
                 rng: Optional[Rng] = None, params: Optional[PublicParams] = None,
                 clock: Callable[[], float] = time.time):
        self.keystore = keystore
        self.config = config or ConfigManager(None)
        self.session = session
        self.rng = rng
        self.params = params or groups.setup(int(self.config.get("curve_settings.security_level", 128)))
        self.clock = clock

    def _client(self, url: str, token: Optional[str] = None) -> ServiceClient:
        return ServiceClient(url, self.session, self.config, token)

    def _idp(self, data: KeystoreData, origin: str) -> ServiceClient:
        session = data.session(origin)
        if session is None:
            raise ProtocolError(f"not logged in at {origin}; run `login` first")
        return self._client(origin, session["token"])

    # -- keystore ----------------------------------------------------------------

    def init(self, overwrite: bool = False) -> Dict[str, Any]:
        self.keystore.create(UserSecrets.generate(self.rng, two_fa=True), overwrite)
        return {"keystore": str(self.keystore.path)}

    def login(self, idp_url: str, login_id: str, password: str, device_label: str = "device") -> Dict[str, Any]:
        """Open an IdP session; the first login from this keystore registers the device"""
        origin = origin_of(idp_url)
        with self.keystore.open() as data:
            previous = data.session(origin)
            device_id = previous["device_id"] if previous and previous["login_id"] == login_id else None
            answer = self._client(origin).post_json("/idp/login", {
                "login_id": login_id, "password": password, "device_id": device_id,
                "device_label": device_label,
            })
            data.set_session(origin, answer["token"], answer["login_id"], answer["device_id"])
        logger.info("🔑 logged in at %s as device %s", origin, answer["device_id"])
        return {"idp": origin, "login_id": answer["login_id"], "device_id": answer["device_id"]}

    # -- setup phase -------------------------------------------------------------

    def fetch_credential(self, idp_url: str, info: Sequence[str] = (), two_fa: bool = False) -> CredentialBundle:
        origin = origin_of(idp_url)
        with self.keystore.open() as data:
            secrets = data.secrets
            if two_fa and secrets.s_d is None:
                raise ProtocolError("keystore has no device secret for a 2FA credential")
            idp = self._idp(data, origin)
            meta = idp.get_json("/idp/schemas")
            schema = build_signon_schema(meta["catalog"], info, two_fa)
            answer = idp.post_json("/idp/keys", {"schema": schema.to_dict()})
            pk_bytes = bytes.fromhex(answer["pk"])
            pk = IdpPublicKey.from_bytes(pk_bytes)
            if pk.schema != schema or not pk.is_consistent():
                raise CredentialError("IdP answered with a key for another schema")

            pending, msg = request_id(pk, secrets, self.rng)
            reply = idp.post_envelope("/idp/request-id", msg.to_envelope(), MessageType.BLINDED_CREDENTIAL)
            bundle = unblind_id(pk, pending, secrets, BlindedCredentialMsg.from_envelope(reply), meta["issuer"])
            data.add_credential(origin, bundle, pk_bytes)
        logger.info("🎫 credential from %s valid until %s", origin, expiry_date(bundle.tp))
        return bundle

    # -- sign-on phase -----------------------------------------------------------

    def _candidates(self, data: KeystoreData, idp_url: Optional[str], labels: Sequence[str],
                    two_fa: bool) -> List[Tuple[str, CredentialBundle]]:
        """Credentials able to answer the request, smallest schema first"""
        hidden = [label for label in labels if label in HIDDEN_LABELS]
        if hidden:
            raise ForbiddenDisclosureError(f"never disclosed: {', '.join(hidden)}")
        labels = [label for label in labels if label != "tp"]
        origins = [origin_of(idp_url)] if idp_url else data.origins()
        found = [(o, b) for o in origins for b in data.credentials(o)]
        if not found:
            raise CredentialError("no credential in the keystore; run `fetch-credential` first")
        fitting = [(o, b) for o, b in found
                   if all(label in b.schema.info_labels for label in labels) and (b.schema.two_fa or not two_fa)]
        if not fitting:
            missing = sorted({label for label in labels
                              if not any(label in b.schema.info_labels for _, b in found)})
            if missing:
                raise UnknownAttributeError(f"no credential certifies: {', '.join(missing)}")
            if two_fa:
                raise CredentialError("no 2FA-capable credential with these attributes; run `fetch-credential --2fa`")
            raise CredentialError("no single credential certifies all requested attributes")
        return sorted(fitting, key=lambda item: (item[1].schema.n, -item[1].tp))

    def signon(self, rp_url: str, disclose: Sequence[str] = (), guest: bool = False, two_fa: bool = False,
               retrieval: bool = True, predicates: Sequence[HiddenEquality] = (),
               idp_url: Optional[str] = None) -> SignOnResult:
        rp_url = origin_of(rp_url)
        with self.keystore.open() as data:
            labels = list(disclose) + [p.label for p in predicates]
            candidates = self._candidates(data, idp_url, labels, two_fa)
            now = self.clock()
            fresh = [(o, b) for o, b in candidates if not b.is_expired(now)]
            if not fresh:
                raise ExpiredCredentialError("every matching credential expired; run `fetch-credential`")

            rp = self._client(rp_url)
            meta = rp.get_json("/rp/signon-meta")
            two_fa = two_fa or (meta["policy"]["require_2fa"] and not guest)
            usable = [(o, b) for o, b in fresh
                      if b.issuer in meta["accepted_idps"] and (b.schema.two_fa or not two_fa)]
            if not usable:
                raise CredentialError(f"{meta['domain']} accepts none of the keystore's credentials")
            origin, bundle = usable[0]
            pk = IdpPublicKey.from_bytes(data.pk_bytes(origin, bundle.schema.schema_id))

            authority = AuthorityPublicInfo.from_dict(meta["authorities"]) if "authorities" in meta else None
            flags = SignOnFlags(guest=guest, retrieval=retrieval and authority is not None, two_fa=two_fa)
            req = prove_id(pk, bundle, meta["domain"], meta["rp_nonce"], disclose, flags, authority,
                           predicates, now, self.rng, self.params)
            reply = rp.post_envelope("/rp/signon", req.to_envelope(), MessageType.SIGNON_RESULT)
            result = SignOnResult.from_dict(json.loads(reply.require("result")))
            if result.account_id and result.action != AccountAction.GUEST:
                data.remember_signon(rp_url, meta["domain"], origin, result.account_id)
        logger.info("🌐 sign-on at %s: %s", meta["domain"],
                    result.action.value if result.accepted else result.reason.value)
        return result

    # -- devices -----------------------------------------------------------------

    def add_device(self, idp_url: str, salt: str, label: str = "device") -> Dict[str, Any]:
        """New-device side, step one: publish an ephemeral key through the IdP"""
        origin = origin_of(idp_url)
        device = NewDevice(salt, label)
        with self.keystore.open() as data:
            if data.pending_enrollment(origin):
                raise ProtocolError("an enrollment is already pending; use --resume")
            answer = self._idp(data, origin).post_envelope_raw(
                "/idp/devices/enroll-init", device.init_message()).json()
            private = device.private_key.private_bytes(
                serialization.Encoding.Raw, serialization.PrivateFormat.Raw, serialization.NoEncryption())
            data.set_pending_enrollment(origin, {
                "request_id": answer["request_id"], "private_key": private.hex(), "salt": salt, "label": label,
            })
        return {"request_id": answer["request_id"], "fingerprint": device.fingerprint, "status": "pending"}

    def resume_device(self, idp_url: str) -> Dict[str, Any]:
        """New-device side, step two: collect the sealed secret once the old device approved"""
        origin = origin_of(idp_url)
        with self.keystore.open() as data:
            pending = data.pending_enrollment(origin)
            if pending is None:
                raise ProtocolError("no enrollment pending on this device")
            idp = self._idp(data, origin)
            approve = idp.get_envelope(f"/idp/devices/enroll-result/{pending['request_id']}",
                                       MessageType.ENROLL_APPROVE)
            if approve is None:
                return {"request_id": pending["request_id"], "status": "pending"}
            device = NewDevice(pending["salt"], pending["label"],
                               X25519PrivateKey.from_private_bytes(bytes.fromhex(pending["private_key"])))
            enrolled = device.complete(approve, self.rng)
            data.set_secrets(UserSecrets(enrolled.s, enrolled.s_d))
            for name in data.origins():
                data.origin(name)["credentials"] = []
            data.set_pending_enrollment(origin, None)
            device_id = data.session(origin)["device_id"]
            idp.post_envelope_raw("/idp/devices/enroll-complete",
                                  Envelope(MessageType.ENROLL_COMPLETE, {"device_id": device_id.encode()}))
        logger.info("📲 device %s now shares the account secret", device_id)
        return {"request_id": pending["request_id"], "status": "enrolled", "device_id": device_id}

    def wait_device(self, idp_url: str, timeout: float = 300.0, interval: float = 2.0) -> Dict[str, Any]:
        deadline = time.monotonic() + timeout
        while True:
            state = self.resume_device(idp_url)
            if state["status"] != "pending" or time.monotonic() >= deadline:
                return state
            time.sleep(interval)

    def approve_device(self, idp_url: str, salt: str, confirmed_fingerprint: str,
                       request_id: Optional[str] = None) -> Dict[str, Any]:
        """Old-device side: match the code read off the new device, then seal s to it"""
        origin = origin_of(idp_url)
        with self.keystore.open(write=False) as data:
            idp = self._idp(data, origin)
            pending = idp.get_json("/idp/devices/enroll-pending")["pending"]
            if request_id is not None:
                pending = [p for p in pending if p["request_id"] == request_id]
            if not pending:
                raise ProtocolError("no enrollment request waiting for approval")
            if len(pending) > 1:
                ids = ", ".join(p["request_id"] for p in pending)
                raise ProtocolError(f"several enrollments pending ({ids}); pass --request-id")
            item = pending[0]
            init = Envelope.from_json(item["init"], MessageType.ENROLL_INIT)
            approve = approve_enrollment(init, salt, data.secrets.s, confirmed_fingerprint, item["request_id"])
            idp.post_envelope_raw("/idp/devices/enroll-approve", approve)
        return {
            "request_id": item["request_id"],
            "device_id": item["device_id"],
            "fingerprint": fingerprint(init.require("public_key"), salt),
        }

    def report_stolen(self, idp_url: str, device_id: str) -> Dict[str, Any]:
        origin = origin_of(idp_url)
        with self.keystore.open(write=False) as data:
            device = self._idp(data, origin).post_json("/idp/devices/revoke", {"device_id": device_id})
        logger.warning("🚫 device %s reported stolen at %s", device_id, origin)
        return device

    # -- secret rotation ---------------------------------------------------------

    def new_secret(self) -> Dict[str, Any]:
        """Replace s after a theft; old credentials stay until each RP has rotated"""
        with self.keystore.open() as data:
            data.retire_secret(UserSecrets.generate(self.rng, two_fa=True))
            retired = sum(len(data.retired_credentials(o)) for o in data.origins())
        return {"retired_credentials": retired}

    def rotate(self, idp_url: str, rp_url: str) -> SignOnResult:
        """Move the RP account from the old secret to the current one"""
        origin, rp_url = origin_of(idp_url), origin_of(rp_url)
        with self.keystore.open() as data:
            now = self.clock()
            today = day_number(now)
            retired = sorted(data.retired_credentials(origin), key=lambda b: -b.tp)
            if not retired:
                raise RotationError("no retired credential for this IdP; run `rotate --new-secret` first")
            expired = [b for b in retired if b.is_expired(now)]
            if not expired:
                raise RotationError(f"old credential still valid until {expiry_date(retired[0].tp)}; "
                                    f"retry after that day")
            current = [b for b in data.credentials(origin) if not b.is_expired(now)]
            if not current:
                raise ExpiredCredentialError("no valid credential on the new secret; run `fetch-credential`")
            old_bundle, new_bundle = expired[0], min(current, key=lambda b: b.schema.n)
            old_pk = IdpPublicKey.from_bytes(data.pk_bytes(origin, old_bundle.schema.schema_id))
            new_pk = IdpPublicKey.from_bytes(data.pk_bytes(origin, new_bundle.schema.schema_id))

            rp = self._client(rp_url)
            meta = rp.get_json("/rp/signon-meta")
            authority = AuthorityPublicInfo.from_dict(meta["authorities"]) if "authorities" in meta else None
            req = rotate_secret(old_pk, old_bundle, new_pk, new_bundle, meta["domain"], meta["rp_nonce"],
                                authority, authority is not None, now, self.rng, self.params)
            reply = rp.post_envelope("/rp/rotate", req.to_envelope(), MessageType.SIGNON_RESULT)
            result = SignOnResult.from_dict(json.loads(reply.require("result")))
            if result.accepted:
                data.remember_signon(rp_url, meta["domain"], origin, result.account_id)
        logger.info("🔁 rotation at %s on day %d: %s", rp_url, today,
                    "accepted" if result.accepted else result.reason.value)
        return result

    # -- status ------------------------------------------------------------------

    def status(self) -> Dict[str, Any]:
        """Keystore summary; never includes secret values"""
        with self.keystore.open(write=False) as data:
            now = self.clock()
            origins = {}
            for origin in data.origins():
                session = data.session(origin) or {}
                origins[origin] = {
                    "login_id": session.get("login_id"),
                    "device_id": session.get("device_id"),
                    "credentials": [
                        {
                            "issuer": b.issuer,
                            "schema_id": b.schema.schema_id,
                            "attributes": b.schema.info_labels,
                            "two_fa": b.schema.two_fa,
                            "tp": b.tp,
                            "expires": expiry_date(b.tp),
                            "expired": b.is_expired(now),
                        }
                        for b in data.credentials(origin)
                    ],
                    "retired_credentials": len(data.retired_credentials(origin)),
                    "pending_enrollment": (data.pending_enrollment(origin) or {}).get("request_id"),
                }
            secrets = data.secrets
            return {
                "keystore": str(self.keystore.path),
                "has_secret": secrets is not None,
                "has_device_secret": secrets is not None and secrets.s_d is not None,
                "origins": origins,
                "signons": data.signons(),
            }

