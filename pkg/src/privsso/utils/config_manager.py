#!/usr/bin/env python3
"""
Configuration Manager for the privsso services, client and bench
"""

import copy
import json
import logging
import os
from typing import Any, Dict, List, Optional

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG: Dict[str, Any] = {
    "curve_settings": {
        "security_level": 128,
    },
    "idp_settings": {
        "name": "idp.local",
        "base_url": "http://127.0.0.1:8001",
        "attribute_catalog": {"name": "string", "email": "string", "age": "int", "country": "string"},
        "validity_days": 7,
        "granularity_days": 1,
        "max_info_attributes": 16,
        "seed_users": [],
    },
    "rp_settings": {
        "domain": "rp.local",
        "require_retrieval": True,
        "require_2fa": False,
        "allow_guest": True,
        "two_fa_window_seconds": 300,
        "nonce_ttl_seconds": 120,
        "nonce_cache_max": 100000,
        "pk_cache_ttl_seconds": 3600,
        "trusted_idps": {"idp.local": "http://127.0.0.1:8001"},
    },
    "authority_settings": {
        "n_auth": 3,
        "threshold": 2,
        "endpoints": {
            "1": "http://127.0.0.1:8101",
            "2": "http://127.0.0.1:8102",
            "3": "http://127.0.0.1:8103",
        },
    },
    "client_settings": {
        "keystore_path": "~/.privsso/keystore.json",
        "scrypt_n": 16384,
    },
    "request_settings": {
        "timeout": 10,
        "retry_attempts": 2,
        "delay_between_requests": 0.5,
        "user_agent": "privsso-client/1.0",
    },
    "logging_settings": {
        "log_level": "INFO",
        "audit_log_path": "data/audit.jsonl",
        "show_progress": True,
        "show_protocol_details": False,
    },
    "bench_settings": {
        "iterations": 20,
        "warmup": 3,
        "seed": 1,
        "rtt_ms": 0.0,
        "attribute_counts": [3, 5, 8, 13],
    },
}


class ConfigManager:
    """Manages configuration settings for the services, client and bench"""

    def __init__(self, config_file: Optional[str] = "config/privsso_config.json", create: bool = False):
        self.config_file = config_file
        self.create = create
        self.config = self.load_config()

    def load_config(self) -> Dict[str, Any]:
        """Load configuration from JSON file, merged over the defaults"""
        default_config = copy.deepcopy(DEFAULT_CONFIG)
        if not self.config_file:
            return default_config
        if not os.path.exists(self.config_file):
            if self.create:
                self.save_config(default_config)
            return default_config
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {self.config_file}: {e}") from e
        if not isinstance(config, dict):
            raise ConfigError(f"config {self.config_file} must hold a JSON object")
        merged = self.merge_configs(default_config, config)
        self.validate(merged)
        return merged

    def merge_configs(self, default: Dict, user: Dict) -> Dict:
        """Merge user config with default config"""
        result = default.copy()
        for key, value in user.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self.merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    @staticmethod
    def validate(config: Dict[str, Any]) -> None:
        auth = config["authority_settings"]
        if not 1 <= int(auth["threshold"]) <= int(auth["n_auth"]):
            raise ConfigError(f"authority threshold {auth['threshold']} invalid for {auth['n_auth']} authorities")
        if int(config["idp_settings"]["validity_days"]) < 0:
            raise ConfigError("validity_days must be non-negative")
        if int(config["rp_settings"]["nonce_ttl_seconds"]) <= 0:
            raise ConfigError("nonce_ttl_seconds must be positive")
        if int(config["rp_settings"]["nonce_cache_max"]) <= 0:
            raise ConfigError("nonce_cache_max must be positive")
        for label, encoding in config["idp_settings"]["attribute_catalog"].items():
            if encoding not in ("int", "string"):
                raise ConfigError(f"attribute {label}: unknown encoding {encoding!r}")
            if label in ("s", "gamma", "tp", "s_d"):
                raise ConfigError(f"attribute label {label!r} is reserved")

    def save_config(self, config: Dict[str, Any]) -> bool:
        """Save configuration to JSON file"""
        try:
            directory = os.path.dirname(self.config_file)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(self.config_file, "w", encoding="utf-8") as f:
                json.dump(config, f, indent=2, ensure_ascii=False)
            return True
        except OSError as e:
            logger.error("❌ Error saving config: %s", e)
            return False

    def get(self, key_path: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation (e.g., 'rp_settings.require_2fa')"""
        value = self.config
        try:
            for key in key_path.split("."):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def set(self, key_path: str, value: Any, persist: bool = True) -> bool:
        """Set a configuration value using dot notation"""
        keys = key_path.split(".")
        config = self.config
        for key in keys[:-1]:
            config = config.setdefault(key, {})
        config[keys[-1]] = value
        if persist and self.config_file:
            return self.save_config(self.config)
        return True

    def authority_endpoints(self) -> Dict[int, str]:
        return {int(i): url for i, url in self.get("authority_settings.endpoints", {}).items()}

    def trusted_idps(self) -> Dict[str, str]:
        return dict(self.get("rp_settings.trusted_idps", {}))

    def attribute_catalog(self) -> Dict[str, str]:
        return dict(self.get("idp_settings.attribute_catalog", {}))

    def seed_users(self) -> List[Dict[str, Any]]:
        return list(self.get("idp_settings.seed_users", []))

    def should_show_log(self, log_type: str) -> bool:
        """Check if a specific log type should be shown based on log level and settings"""
        levels = {"DEBUG": 0, "INFO": 1, "WARNING": 2, "ERROR": 3, "CRITICAL": 4}
        current = levels.get(str(self.get("logging_settings.log_level", "INFO")).upper(), 1)
        type_levels = {"progress": 1, "protocol_details": 0, "error": 3, "warning": 2, "debug": 0}
        if type_levels.get(log_type, 1) < current:
            return False
        return bool(self.get(f"logging_settings.show_{log_type}", True))

    def summary(self) -> Dict[str, Any]:
        """Non-secret configuration overview for `status` and service startup logs"""
        return {
            "security_level": self.get("curve_settings.security_level"),
            "idp": self.get("idp_settings.name"),
            "validity_days": self.get("idp_settings.validity_days"),
            "rp_domain": self.get("rp_settings.domain"),
            "require_retrieval": self.get("rp_settings.require_retrieval"),
            "require_2fa": self.get("rp_settings.require_2fa"),
            "authorities": f"{self.get('authority_settings.threshold')}-of-{self.get('authority_settings.n_auth')}",
            "log_level": self.get("logging_settings.log_level"),
        }

    def print_config_summary(self):
        """Print a summary of current configuration"""
        print("\n" + "=" * 50)
        print("⚙️  CONFIGURATION SUMMARY")
        print("=" * 50)
        for key, value in self.summary().items():
            print(f"   {key.replace('_', ' ').title()}: {value}")
        print("=" * 50)
