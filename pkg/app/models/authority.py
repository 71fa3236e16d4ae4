#!/usr/bin/env python3
"""
Pydantic models for the authority endpoints
"""

from pydantic import BaseModel, Field


class ShareResponse(BaseModel):
    index: int = Field(..., description="Authority index")
    commitment: str = Field(..., description="g^share, serialized G1 element in hex")
    threshold: int = Field(..., description="Partials needed to decrypt")
    n_auth: int = Field(..., description="Number of authorities")
