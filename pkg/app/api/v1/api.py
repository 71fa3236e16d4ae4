#!/usr/bin/env python3
"""
Main API routers for v1 endpoints, one per service role
"""

from fastapi import APIRouter

from app.models.responses import ErrorResponse

from .endpoints import authority, idp, rp

API_PREFIX = "/api/v1"

ERROR_RESPONSES = {
    400: {"model": ErrorResponse, "description": "Malformed request"},
    401: {"model": ErrorResponse, "description": "Missing or invalid bearer token"},
}

ROLE_ROUTERS = {
    "idp": (idp.router, "/idp", "Identity Provider"),
    "rp": (rp.router, "/rp", "Relying Party"),
    "authority": (authority.router, "/authority", "Decryption Authority"),
}


def api_router(*roles: str) -> APIRouter:
    """Router exposing the endpoints of the given roles"""
    router = APIRouter()
    for role in roles:
        endpoint_router, prefix, tag = ROLE_ROUTERS[role]
        router.include_router(endpoint_router, prefix=prefix, tags=[tag], responses=ERROR_RESPONSES)
    return router
