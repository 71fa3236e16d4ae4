#!/usr/bin/env python3
"""
Pydantic models for the Relying Party endpoints
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class PolicySummary(BaseModel):
    require_retrieval: bool = Field(..., description="Sign-ons must carry a retrieval token")
    require_2fa: bool = Field(..., description="Sign-ons must come from two enrolled devices")
    allow_guest: bool = Field(..., description="Guest sign-ons are accepted")


class SignOnMetaResponse(BaseModel):
    rp_nonce: str = Field(..., description="Fresh single-use nonce")
    domain: str = Field(..., description="Domain the pseudonym is derived from")
    nonce_ttl_seconds: int = Field(..., description="Nonce lifetime")
    policy: PolicySummary
    accepted_idps: List[str] = Field(..., description="Trusted issuers")
    authorities: Optional[Dict[str, Any]] = Field(None, description="Authority set descriptor, present iff retrieval is required")


class SignOnResultModel(BaseModel):
    accepted: bool = Field(..., description="Whether the sign-on was accepted")
    action: Optional[str] = Field(None, description="created | matched | device-enrolled | rotated | guest")
    reason: Optional[str] = Field(None, description="Reject reason code")
    account_id: Optional[str] = Field(None, description="RP account identifier")
    detail: str = Field("", description="Human-readable explanation")


class ReportRequest(BaseModel):
    account_id: str = Field(..., description="Account to disclose to the authorities")


class ReportResponse(BaseModel):
    case_id: str = Field(..., description="Retrieval case identifier")
    account_id: str = Field(..., description="Reported account")
    issuer: str = Field(..., description="IdP that resolved the identity")
    login_id: str = Field(..., description="Recovered login identity")
    authorities: List[int] = Field(..., description="Authorities whose partials were combined")
    forged: List[int] = Field(..., description="Authorities that returned invalid partials")
    offline: List[int] = Field(..., description="Authorities that did not answer")
