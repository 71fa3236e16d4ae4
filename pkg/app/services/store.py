#!/usr/bin/env python3
"""
Embedded key-value store backed by one JSON file per service
"""

import json
import logging
import os
import tempfile
import threading
from collections import defaultdict
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

from privsso.core.errors import ConfigError
from privsso.core.protocol import AccountRecord, AccountStore

logger = logging.getLogger(__name__)


class JsonStore:
    """Namespaced key-value store; every write lands via temp file + fsync + os.replace"""

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path else None
        self._data: Dict[str, Dict[str, Any]] = {}
        self._guard = threading.RLock()
        self._locks: Dict[Tuple[str, str], threading.Lock] = defaultdict(threading.Lock)
        self._load()

    def _load(self) -> None:
        if self.path is None or not self.path.exists():
            return
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                self._data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load store {self.path}: {e}") from e
        logger.info("📂 loaded store %s (%d namespaces)", self.path, len(self._data))

    def _flush(self) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=self.path.name, dir=str(self.path.parent))
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(self._data, f, ensure_ascii=False, sort_keys=True)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, self.path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def lock(self, namespace: str, key: str) -> threading.Lock:
        """Per-key lock for read-modify-write sequences"""
        with self._guard:
            return self._locks[(namespace, key)]

    def get(self, namespace: str, key: str, default: Any = None) -> Any:
        with self._guard:
            return self._data.get(namespace, {}).get(key, default)

    def put(self, namespace: str, key: str, value: Any) -> None:
        with self._guard:
            self._data.setdefault(namespace, {})[key] = value
            self._flush()

    def delete(self, namespace: str, key: str) -> bool:
        with self._guard:
            removed = self._data.get(namespace, {}).pop(key, None) is not None
            if removed:
                self._flush()
            return removed

    def items(self, namespace: str) -> Iterator[Tuple[str, Any]]:
        with self._guard:
            return iter(list(self._data.get(namespace, {}).items()))

    def count(self, namespace: str) -> int:
        with self._guard:
            return len(self._data.get(namespace, {}))


class StoredAccountStore(AccountStore):
    """RP account store persisted in a JsonStore"""

    ACCOUNTS = "accounts"
    BLOCKLIST = "blocklist"

    def __init__(self, store: JsonStore):
        super().__init__()
        self.store = store
        for _, value in store.items(self.ACCOUNTS):
            self._index(AccountRecord.from_dict(value))
        for key, value in store.items(self.BLOCKLIST):
            self._blocklist[key] = float(value)

    def _persist(self) -> None:
        current = set(self._records)
        for key, _ in self.store.items(self.ACCOUNTS):
            if key not in current:
                self.store.delete(self.ACCOUNTS, key)
        for key, record in self._records.items():
            if self.store.get(self.ACCOUNTS, key) != record.to_dict():
                self.store.put(self.ACCOUNTS, key, record.to_dict())
        for key, since in self._blocklist.items():
            if self.store.get(self.BLOCKLIST, key) is None:
                self.store.put(self.BLOCKLIST, key, since)
