#!/usr/bin/env python3
"""
Outbound HTTP to the privsso services with retry and back-off
"""

import logging
import time
from typing import Any, Dict, Optional

import requests

from ..core.errors import (
    AccessDeniedError, ConflictError, NotFoundError, RevokedDeviceError, ServiceError, UpstreamError,
)
from ..core.wire import Envelope, MessageType
from ..utils.config_manager import ConfigManager

logger = logging.getLogger(__name__)

API_PREFIX = "/api/v1"
ENVELOPE_MEDIA = "application/octet-stream"

_STATUS_ERRORS = {
    401: AccessDeniedError,
    403: RevokedDeviceError,
    404: NotFoundError,
    409: ConflictError,
}


def create_session(config: Optional[ConfigManager] = None) -> requests.Session:
    session = requests.Session()
    user_agent = config.get("request_settings.user_agent", "privsso-client/1.0") if config else "privsso-client/1.0"
    session.headers.update({"User-Agent": user_agent})
    return session


def _detail(response) -> str:
    try:
        body = response.json()
        if isinstance(body, dict) and "detail" in body:
            return str(body["detail"])
    except ValueError:
        pass
    return response.text[:200] if getattr(response, "text", None) else f"HTTP {response.status_code}"


class ServiceClient:
    """One remote service; `session` is any object with a requests-style `request` method"""

    def __init__(self, base_url: str, session=None, config: Optional[ConfigManager] = None,
                 token: Optional[str] = None):
        self.base_url = base_url.rstrip("/")
        self.config = config or ConfigManager(None)
        self.session = session if session is not None else create_session(self.config)
        self.token = token

    def url(self, path: str) -> str:
        return f"{self.base_url}{API_PREFIX}{path}"

    def _headers(self, extra: Optional[Dict[str, str]] = None) -> Dict[str, str]:
        headers = dict(extra or {})
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _request(self, method: str, path: str, retries: Optional[int] = None, **kwargs):
        """Make HTTP request with retry logic; 5xx answers and connection failures are retried"""
        if retries is None:
            retries = int(self.config.get("request_settings.retry_attempts", 2))
        timeout = self.config.get("request_settings.timeout", 10)
        delay = float(self.config.get("request_settings.delay_between_requests", 0.5))
        url = self.url(path)

        for attempt in range(retries + 1):
            try:
                response = self.session.request(method, url, timeout=timeout, **kwargs)
            except requests.exceptions.RequestException as e:
                if attempt < retries:
                    logger.warning("⚠️  Request failed (attempt %d/%d): %s", attempt + 1, retries + 1, e)
                    time.sleep(delay * (attempt + 1))
                    continue
                logger.error("❌ Request failed after %d attempts: %s", retries + 1, e)
                raise UpstreamError(f"{self.base_url} unreachable: {e}") from e
            if response.status_code >= 500 and attempt < retries:
                logger.warning("⚠️  %s answered %d (attempt %d/%d)", url, response.status_code, attempt + 1, retries + 1)
                time.sleep(delay * (attempt + 1))
                continue
            return self._check(response)
        raise UpstreamError(f"{self.base_url} unreachable")

    @staticmethod
    def _check(response):
        if response.status_code < 400:
            return response
        error_cls = _STATUS_ERRORS.get(response.status_code)
        detail = _detail(response)
        if error_cls is not None:
            raise error_cls(detail)
        error = UpstreamError(detail) if response.status_code >= 500 else ServiceError(detail)
        error.status_code = response.status_code
        raise error

    def get_json(self, path: str, **kwargs) -> Any:
        return self._request("GET", path, headers=self._headers(), **kwargs).json()

    def post_json(self, path: str, body: Any, **kwargs) -> Any:
        return self._request("POST", path, json=body, headers=self._headers(), **kwargs).json()

    def get_bytes(self, path: str, **kwargs) -> bytes:
        return self._request("GET", path, headers=self._headers({"Accept": ENVELOPE_MEDIA}), **kwargs).content

    def post_envelope_raw(self, path: str, envelope: Envelope, **kwargs):
        """POST an envelope; the caller decodes whatever comes back"""
        headers = self._headers({"Content-Type": ENVELOPE_MEDIA, "Accept": ENVELOPE_MEDIA})
        return self._request("POST", path, data=envelope.to_bytes(), headers=headers, **kwargs)

    def post_envelope(self, path: str, envelope: Envelope, expected: Optional[MessageType] = None,
                      **kwargs) -> Envelope:
        return Envelope.from_bytes(self.post_envelope_raw(path, envelope, **kwargs).content, expected)

    def get_envelope(self, path: str, expected: Optional[MessageType] = None, **kwargs) -> Optional[Envelope]:
        response = self._request("GET", path, headers=self._headers({"Accept": ENVELOPE_MEDIA}), **kwargs)
        if response.status_code == 204 or not response.content:
            return None
        return Envelope.from_bytes(response.content, expected)
