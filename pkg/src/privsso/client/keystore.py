#!/usr/bin/env python3
"""
Passphrase-encrypted file keystore for the client.

File format (version 1): JSON with the scrypt parameters, a random salt and
nonce, and the AES-GCM ciphertext of the JSON payload. Entries are isolated
per IdP origin; the user secrets are shared by all origins.
"""

import contextlib
import fcntl
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.scrypt import Scrypt

from ..core.errors import KeystoreError
from ..core.groups import Scalar
from ..core.protocol import CredentialBundle, UserSecrets

logger = logging.getLogger(__name__)

KEYSTORE_VERSION = 1
AAD = b"privsso/keystore/v1"


def _scalar_hex(value: Optional[Scalar]) -> Optional[str]:
    return value.to_bytes().hex() if value is not None else None


def _scalar(value: Optional[str]) -> Optional[Scalar]:
    return Scalar.from_bytes(bytes.fromhex(value)) if value else None


class KeystoreData:
    """Decrypted keystore payload"""

    def __init__(self, payload: Optional[Dict[str, Any]] = None):
        self.payload = payload or {"secrets": None, "retired": [], "origins": {}}

    # secrets

    @property
    def secrets(self) -> Optional[UserSecrets]:
        raw = self.payload.get("secrets")
        if not raw:
            return None
        return UserSecrets(_scalar(raw["s"]), _scalar(raw.get("s_d")))

    def set_secrets(self, secrets: UserSecrets) -> None:
        self.payload["secrets"] = {"s": _scalar_hex(secrets.s), "s_d": _scalar_hex(secrets.s_d)}

    def retire_secret(self, new: UserSecrets) -> None:
        """Replace s; credentials certified on the old secret are kept for rotation at each RP"""
        self.payload.setdefault("retired", []).append(self.payload["secrets"])
        for entry in self.payload["origins"].values():
            entry["retired"] = entry.get("retired", []) + entry.get("credentials", [])
            entry["credentials"] = []
        self.set_secrets(new)

    def retired_credentials(self, origin: str) -> List[CredentialBundle]:
        return [CredentialBundle.from_dict(c) for c in self.origin(origin).get("retired", [])]

    # sign-on history

    def remember_signon(self, rp_url: str, domain: str, origin: str, account_id: Optional[str]) -> None:
        self.payload.setdefault("signons", {})[rp_url] = {
            "domain": domain, "origin": origin, "account_id": account_id,
        }

    def signons(self) -> Dict[str, Dict[str, Any]]:
        return dict(self.payload.get("signons", {}))

    # per-origin entries

    def origin(self, origin: str) -> Dict[str, Any]:
        return self.payload["origins"].setdefault(origin, {"credentials": [], "pks": {}, "session": None})

    def origins(self) -> List[str]:
        return sorted(self.payload["origins"])

    def session(self, origin: str) -> Optional[Dict[str, str]]:
        return self.origin(origin).get("session")

    def set_session(self, origin: str, token: str, login_id: str, device_id: str) -> None:
        self.origin(origin)["session"] = {"token": token, "login_id": login_id, "device_id": device_id}

    def credentials(self, origin: str) -> List[CredentialBundle]:
        return [CredentialBundle.from_dict(c) for c in self.origin(origin).get("credentials", [])]

    def add_credential(self, origin: str, bundle: CredentialBundle, pk_bytes: bytes) -> None:
        entry = self.origin(origin)
        # one current credential per schema
        entry["credentials"] = [
            c for c in entry.get("credentials", []) if c["schema"] != bundle.schema.to_dict()
        ] + [bundle.to_dict()]
        entry["pks"][bundle.schema.schema_id] = pk_bytes.hex()

    def pk_bytes(self, origin: str, schema_id: str) -> Optional[bytes]:
        # keys outlive retired credentials
        blob = self.origin(origin)["pks"].get(schema_id)
        return bytes.fromhex(blob) if blob else None

    def pending_enrollment(self, origin: str) -> Optional[Dict[str, str]]:
        return self.origin(origin).get("pending_enrollment")

    def set_pending_enrollment(self, origin: str, value: Optional[Dict[str, str]]) -> None:
        self.origin(origin)["pending_enrollment"] = value


class Keystore:
    """Encrypted at rest; one command at a time per file (advisory lock)"""

    def __init__(self, path: str, passphrase: str, scrypt_n: int = 2 ** 14):
        self.path = Path(os.path.expanduser(path))
        self.passphrase = passphrase
        self.scrypt_n = scrypt_n

    def exists(self) -> bool:
        return self.path.exists()

    def _key(self, salt: bytes, n: int) -> bytes:
        return Scrypt(salt=salt, length=32, n=n, r=8, p=1).derive(self.passphrase.encode("utf-8"))

    def _read(self) -> KeystoreData:
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                blob = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise KeystoreError(f"cannot read keystore {self.path}: {e}") from e
        if blob.get("version") != KEYSTORE_VERSION:
            raise KeystoreError(f"unsupported keystore version {blob.get('version')}")
        try:
            kdf = blob["kdf"]
            key = self._key(bytes.fromhex(kdf["salt"]), int(kdf["n"]))
            plaintext = AESGCM(key).decrypt(bytes.fromhex(blob["nonce"]), bytes.fromhex(blob["ciphertext"]), AAD)
        except InvalidTag:
            raise KeystoreError("keystore locked: wrong passphrase or corrupted file") from None
        except (KeyError, ValueError) as e:
            raise KeystoreError(f"malformed keystore: {e}") from e
        return KeystoreData(json.loads(plaintext.decode("utf-8")))

    def _write(self, data: KeystoreData) -> None:
        salt, nonce = os.urandom(16), os.urandom(12)
        ciphertext = AESGCM(self._key(salt, self.scrypt_n)).encrypt(
            nonce, json.dumps(data.payload, sort_keys=True).encode("utf-8"), AAD
        )
        blob = {
            "version": KEYSTORE_VERSION,
            "kdf": {"name": "scrypt", "salt": salt.hex(), "n": self.scrypt_n, "r": 8, "p": 1},
            "nonce": nonce.hex(),
            "ciphertext": ciphertext.hex(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(blob, f)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, self.path)

    @contextlib.contextmanager
    def _locked(self) -> Iterator[None]:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lock_path = self.path.with_suffix(self.path.suffix + ".lock")
        with open(lock_path, "a") as handle:
            try:
                fcntl.flock(handle.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
            except BlockingIOError:
                raise KeystoreError(f"keystore {self.path} is in use by another command") from None
            try:
                yield
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)

    def create(self, secrets: UserSecrets, overwrite: bool = False) -> KeystoreData:
        with self._locked():
            if self.exists() and not overwrite:
                raise KeystoreError(f"keystore {self.path} already exists")
            data = KeystoreData()
            data.set_secrets(secrets)
            self._write(data)
        logger.info("🔐 created keystore %s", self.path)
        return data

    @contextlib.contextmanager
    def open(self, write: bool = True) -> Iterator[KeystoreData]:
        """Decrypt, yield, and re-encrypt on clean exit when `write`"""
        with self._locked():
            if not self.exists():
                raise KeystoreError(f"no keystore at {self.path}; run `init` first")
            data = self._read()
            yield data
            if write:
                self._write(data)
