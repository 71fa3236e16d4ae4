#!/usr/bin/env python3
"""
Pydantic models for the Identity Provider endpoints
"""

from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field


class LoginRequest(BaseModel):
    """Password login; omitting device_id registers a new device"""
    login_id: str = Field(..., min_length=1, description="Login identity")
    password: str = Field(..., description="Account password")
    device_id: Optional[str] = Field(None, description="Previously registered device")
    device_label: str = Field("device", description="Label for a newly registered device")


class LoginResponse(BaseModel):
    token: str = Field(..., description="Opaque bearer token bound to (login id, device id)")
    login_id: str = Field(..., description="Login identity")
    device_id: str = Field(..., description="Device the session is bound to")


class CreateUserRequest(BaseModel):
    login_id: str = Field(..., min_length=1, description="Login identity")
    password: str = Field(..., min_length=1, description="Initial password")
    info: Dict[str, Union[int, str]] = Field(default_factory=dict, description="Verified info attributes")


class DeviceModel(BaseModel):
    device_id: str = Field(..., description="Device identifier")
    label: str = Field(..., description="Device label")
    revoked: bool = Field(..., description="Whether the device was declared lost or stolen")
    created_at: float = Field(..., description="Registration time (epoch seconds)")


class UserResponse(BaseModel):
    """User view without gamma or secrets"""
    login_id: str = Field(..., description="Login identity")
    attributes: List[str] = Field(..., description="Labels of verified info attributes")
    devices: List[DeviceModel] = Field(..., description="Device registry")


class LookupRequest(BaseModel):
    h_gamma: str = Field(..., description="Recovered h^gamma, serialized G1 element in hex")


class LookupResponse(BaseModel):
    login_id: str = Field(..., description="Login identity owning the recovered value")


class RevokeRequest(BaseModel):
    device_id: str = Field(..., description="Device to declare lost or stolen")


class EnrollInitResponse(BaseModel):
    request_id: str = Field(..., description="Relay handle shared by both devices")


class PendingEnrollment(BaseModel):
    request_id: str = Field(..., description="Relay handle")
    device_id: str = Field(..., description="Device asking to be enrolled")
    init: Dict[str, Any] = Field(..., description="ENROLL_INIT envelope in hex-JSON form")


class PendingEnrollmentsResponse(BaseModel):
    pending: List[PendingEnrollment] = Field(..., description="Enrollment requests awaiting approval")


class SchemasResponse(BaseModel):
    issuer: str = Field(..., description="IdP name used in sign-on requests")
    catalog: Dict[str, str] = Field(..., description="Certifiable info labels and their encodings")
    default_schema_id: str = Field(..., description="Schema served at /pk")
    schemas: Dict[str, Dict[str, Any]] = Field(..., description="Schemas with a signing key")
    validity_days: int = Field(..., description="Credential validity")
    granularity_days: int = Field(..., description="Expiry rounding denomination")


class KeyRequest(BaseModel):
    """Attribute schema the client wants certified"""
    schema_: Dict[str, Any] = Field(..., alias="schema", description="AttributeSchema in dict form")


class KeyResponse(BaseModel):
    schema_id: str = Field(..., description="Identifier of the certified schema")
    pk: str = Field(..., description="Serialized public key in hex")
