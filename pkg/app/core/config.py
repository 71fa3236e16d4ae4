#!/usr/bin/env python3
"""
Configuration settings for the FastAPI services
"""

from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).parent.parent.parent


class Settings(BaseSettings):
    """Process-level settings; protocol policy lives in the JSON config file"""

    model_config = SettingsConfigDict(env_prefix="PRIVSSO_", env_file=".env", case_sensitive=False, extra="ignore")

    # API Configuration
    api_version: str = "1.0.0"

    # Service role: idp | rp | authority
    role: str = "idp"
    host: str = "127.0.0.1"
    port: int = 8001

    # Files
    config_file: str = str(PROJECT_ROOT / "config" / "privsso_config.json")
    data_dir: str = str(PROJECT_ROOT / "data")
    in_memory: bool = False

    # Authority role
    authority_index: int = 1

    # Bearer tokens (never logged)
    admin_token: Optional[str] = None
    recovery_token: Optional[str] = None
    report_token: Optional[str] = None

    # CORS
    cors_origins: list = ["*"]

    def data_path(self, name: str) -> Optional[str]:
        if self.in_memory:
            return None
        return str(Path(self.data_dir) / name)


# Create settings instance
settings = Settings()
