#!/usr/bin/env python3
"""
FastAPI application factories for the IdP, RP and authority services
"""

import logging
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

# Add the src directory to the Python path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from privsso.core.errors import ConfigError
from privsso.utils.config_manager import ConfigManager
from privsso.utils.log import AuditLog, configure_logging

from .api.v1.api import API_PREFIX, api_router
from .core.config import Settings, settings as default_settings
from .models.responses import HealthResponse
from .services.authority_service import AuthorityService, load_public, load_share
from .services.idp_service import IdpService
from .services.rp_service import RpService
from .services.store import JsonStore, StoredAccountStore

logger = logging.getLogger(__name__)

TITLES = {
    "idp": "privsso Identity Provider",
    "rp": "privsso Relying Party",
    "authority": "privsso Decryption Authority",
}


def _base_app(role: str, settings: Settings) -> FastAPI:
    app = FastAPI(
        title=TITLES[role],
        description="Privacy-preserving single sign-on",
        version=settings.api_version,
        docs_url="/docs/",
        redoc_url="/api/redoc",
    )
    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.cors_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.include_router(api_router(role), prefix=API_PREFIX)
    app.state.settings = settings
    app.state.role = role

    @app.get("/health", response_model=HealthResponse)
    async def health_check():
        """Health check endpoint"""
        service = getattr(app.state, role)
        details = service.status() if hasattr(service, "status") else service.share_info()
        return HealthResponse(
            status="healthy",
            service=role,
            version=settings.api_version,
            timestamp=datetime.now(timezone.utc).isoformat(),
            details=details,
        )

    return app


def _config(settings: Settings) -> ConfigManager:
    config = ConfigManager(settings.config_file)
    configure_logging(config.get("logging_settings.log_level", "INFO"))
    return config


def _audit(settings: Settings, name: str) -> AuditLog:
    return AuditLog(settings.data_path(f"{name}_audit.jsonl"), service=name)


def create_idp_app(service: Optional[IdpService] = None, settings: Optional[Settings] = None) -> FastAPI:
    settings = settings or default_settings
    if service is None:
        config = _config(settings)
        service = IdpService(config, JsonStore(settings.data_path("idp_store.json")), _audit(settings, "idp"))
    app = _base_app("idp", settings)
    app.state.idp = service
    logger.info("🚀 IdP %s ready", service.name)
    return app


def create_rp_app(service: Optional[RpService] = None, settings: Optional[Settings] = None,
                  session=None) -> FastAPI:
    settings = settings or default_settings
    if service is None:
        config = _config(settings)
        service = RpService(
            config,
            StoredAccountStore(JsonStore(settings.data_path("rp_store.json"))),
            _audit(settings, "rp"),
            authority=load_public(settings.data_dir),
            session=session,
            recovery_token=settings.recovery_token,
            report_token=settings.report_token,
        )
    app = _base_app("rp", settings)
    app.state.rp = service
    logger.info("🚀 RP %s ready", service.domain)
    return app


def create_authority_app(service: Optional[AuthorityService] = None,
                         settings: Optional[Settings] = None) -> FastAPI:
    settings = settings or default_settings
    if service is None:
        _config(settings)
        public = load_public(settings.data_dir)
        if public is None:
            raise ConfigError(f"no authority descriptor in {settings.data_dir}; run `python run_service.py deal` first")
        share = load_share(settings.data_dir, settings.authority_index)
        service = AuthorityService(share, public, _audit(settings, f"authority_{share.index}"))
    app = _base_app("authority", settings)
    app.state.authority = service
    logger.info("🚀 authority %d ready", service.index)
    return app


FACTORIES = {"idp": create_idp_app, "rp": create_rp_app, "authority": create_authority_app}


def create_app(role: Optional[str] = None) -> FastAPI:
    """uvicorn --factory entry point; the role comes from PRIVSSO_ROLE"""
    role = role or default_settings.role
    if role not in FACTORIES:
        raise ConfigError(f"unknown role {role!r}")
    return FACTORIES[role]()


# For local development
if __name__ == "__main__":
    import uvicorn
    uvicorn.run(create_app(), host=default_settings.host, port=default_settings.port)
