#!/usr/bin/env python3
"""
Decryption authority API endpoints
"""

from fastapi import APIRouter, Depends, Request
from starlette.concurrency import run_in_threadpool

from privsso.core.errors import PrivSSOError
from privsso.core.wire import Envelope, MessageType

from app.api.dependencies import get_authority, http_error, require_report
from app.api.negotiation import envelope_response, read_envelope
from app.models.authority import ShareResponse

router = APIRouter()


@router.post("/partial-decrypt", dependencies=[Depends(require_report)])
async def partial_decrypt(request: Request, authority=Depends(get_authority)):
    """Partial decryption of a reported retrieval token, with its correctness proof"""
    report = await read_envelope(request, MessageType.RETRIEVAL_REPORT)
    try:
        partial = await run_in_threadpool(authority.partial_decrypt, report)
    except PrivSSOError as e:
        raise http_error(e)
    return envelope_response(request, Envelope(MessageType.PARTIAL_DECRYPTION, {"partial": partial.to_bytes()}))


@router.get("/share", response_model=ShareResponse)
async def share(authority=Depends(get_authority)):
    """Public commitment to this authority's key share"""
    return authority.share_info()
