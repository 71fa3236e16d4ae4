#!/usr/bin/env python3
"""
Logging setup and the append-only JSON-lines audit log
"""

import json
import logging
import os
import threading
import time
from typing import Any, Dict, List, Optional

_CONFIGURED = False
# fields that must never reach the audit log
FORBIDDEN_FIELDS = frozenset({"s", "s_d", "gamma", "d", "sk", "secret", "password", "passphrase"})


def configure_logging(level: str = "INFO", force: bool = False) -> None:
    global _CONFIGURED
    if _CONFIGURED and not force:
        return
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        force=force,
    )
    _CONFIGURED = True


class AuditLog:
    """One JSON object per line; `path=None` keeps events in memory only"""

    def __init__(self, path: Optional[str] = None, service: str = ""):
        self.path = path
        self.service = service
        self._lock = threading.Lock()
        self._memory: List[Dict[str, Any]] = []
        if path:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)

    def record(self, event: str, outcome: str = "success", **extra: Any) -> Dict[str, Any]:
        leaked = FORBIDDEN_FIELDS & set(extra)
        if leaked:
            raise ValueError(f"refusing to audit secret fields: {', '.join(sorted(leaked))}")
        entry = {"ts": round(time.time(), 3), "service": self.service, "event": event, "outcome": outcome, **extra}
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._lock:
            self._memory.append(entry)
            if self.path:
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line + "\n")
        return entry

    @property
    def events(self) -> List[Dict[str, Any]]:
        return list(self._memory)
