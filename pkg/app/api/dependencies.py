#!/usr/bin/env python3
"""
Shared API dependencies
"""

from typing import Optional

from fastapi import Depends, HTTPException, Request, status
from fastapi.security import HTTPAuthorizationCredentials, HTTPBearer

from privsso.core.errors import (
    ConfigError, PrivSSOError, ProofError, RevokedDeviceError, SchemaError, ServiceError,
    ThresholdError, UnknownAttributeError,
)

from ..core.security import Session, check_token

# HTTP Bearer scheme
security = HTTPBearer(auto_error=False)


def _token(credentials: Optional[HTTPAuthorizationCredentials]) -> Optional[str]:
    return credentials.credentials if credentials else None


def get_idp(request: Request):
    return request.app.state.idp


def get_rp(request: Request):
    return request.app.state.rp


def get_authority(request: Request):
    return request.app.state.authority


async def get_session(request: Request,
                      credentials: Optional[HTTPAuthorizationCredentials] = Depends(security)) -> Session:
    """Resolve the IdP session bound to the bearer token"""
    return get_idp(request).sessions.resolve(_token(credentials))


async def require_admin(request: Request,
                        credentials: Optional[HTTPAuthorizationCredentials] = Depends(security)) -> None:
    check_token(_token(credentials), request.app.state.settings.admin_token)


async def require_recovery(request: Request,
                           credentials: Optional[HTTPAuthorizationCredentials] = Depends(security)) -> None:
    check_token(_token(credentials), request.app.state.settings.recovery_token)


async def require_report(request: Request,
                         credentials: Optional[HTTPAuthorizationCredentials] = Depends(security)) -> None:
    check_token(_token(credentials), request.app.state.settings.report_token)


def http_error(error: PrivSSOError) -> HTTPException:
    """Map a domain error onto an HTTP status"""
    if isinstance(error, ServiceError):
        code = error.status_code
    elif isinstance(error, RevokedDeviceError):
        code = status.HTTP_403_FORBIDDEN
    elif isinstance(error, (ProofError, SchemaError, UnknownAttributeError)):
        code = status.HTTP_422_UNPROCESSABLE_ENTITY
    elif isinstance(error, ThresholdError):
        code = status.HTTP_503_SERVICE_UNAVAILABLE
    elif isinstance(error, ConfigError):
        code = status.HTTP_500_INTERNAL_SERVER_ERROR
    else:
        code = status.HTTP_400_BAD_REQUEST
    return HTTPException(status_code=code, detail=str(error))
