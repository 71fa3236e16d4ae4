#!/usr/bin/env python3
"""
Security utilities: password hashing, IdP sessions and bearer-token checks
"""

import hashlib
import hmac
import os
import secrets
import threading
from dataclasses import dataclass
from typing import Dict, Optional

from fastapi import HTTPException, status

SCRYPT_N = 2 ** 14
SCRYPT_R = 8
SCRYPT_P = 1


def hash_password(password: str, salt: Optional[bytes] = None) -> str:
    """scrypt$<salt hex>$<digest hex>"""
    salt = salt or os.urandom(16)
    digest = hashlib.scrypt(password.encode("utf-8"), salt=salt, n=SCRYPT_N, r=SCRYPT_R, p=SCRYPT_P, dklen=32)
    return f"scrypt${salt.hex()}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    try:
        scheme, salt_hex, digest_hex = stored.split("$")
    except ValueError:
        return False
    if scheme != "scrypt":
        return False
    expected = hash_password(password, bytes.fromhex(salt_hex)).split("$")[2]
    return hmac.compare_digest(expected, digest_hex)


def unauthorized(detail: str = "Invalid or missing bearer token") -> HTTPException:
    return HTTPException(
        status_code=status.HTTP_401_UNAUTHORIZED,
        detail=detail,
        headers={"WWW-Authenticate": "Bearer"},
    )


def check_token(presented: Optional[str], expected: Optional[str]) -> None:
    """Constant-time comparison; an unset expected token locks the endpoint"""
    if not expected or not presented or not hmac.compare_digest(presented, expected):
        raise unauthorized()


@dataclass(frozen=True)
class Session:
    token: str
    login_id: str
    device_id: str


class SessionRegistry:
    """Opaque IdP bearer tokens bound to (login id, device id)"""

    def __init__(self):
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def open(self, login_id: str, device_id: str) -> Session:
        session = Session(secrets.token_urlsafe(32), login_id, device_id)
        with self._lock:
            self._sessions[session.token] = session
        return session

    def resolve(self, token: Optional[str]) -> Session:
        with self._lock:
            session = self._sessions.get(token or "")
        if session is None:
            raise unauthorized("Unknown or expired session")
        return session

    def close_device(self, login_id: str, device_id: str) -> int:
        with self._lock:
            doomed = [t for t, s in self._sessions.items() if s.login_id == login_id and s.device_id == device_id]
            for token in doomed:
                del self._sessions[token]
        return len(doomed)
