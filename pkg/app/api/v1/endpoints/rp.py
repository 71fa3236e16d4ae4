#!/usr/bin/env python3
"""
Relying Party API endpoints
"""

import json

from fastapi import APIRouter, Depends, Request
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from privsso.core.errors import PrivSSOError
from privsso.core.protocol import RejectReason, RotationRequest, SignOnRequest, SignOnResult
from privsso.core.wire import Envelope, MessageType

from app.api.dependencies import get_rp, http_error, require_admin
from app.api.negotiation import envelope_response, wants_binary
from app.models.rp import ReportRequest, ReportResponse, SignOnMetaResponse, SignOnResultModel

router = APIRouter()

RESULT_RESPONSES = {
    200: {"model": SignOnResultModel, "description": "Sign-on result, or an envelope when binary is accepted"},
}


async def _parse(request: Request, expected: MessageType, parser):
    """Decode a posted envelope; None when it is malformed"""
    body = await request.body()
    try:
        if request.headers.get("content-type", "").startswith("application/json"):
            envelope = Envelope.from_json(json.loads(body), expected)
        else:
            envelope = Envelope.from_bytes(body, expected)
        return parser(envelope)
    except (PrivSSOError, ValueError, KeyError, IndexError):
        return None


def _result_response(request: Request, result: SignOnResult):
    if wants_binary(request):
        return envelope_response(request, result.to_envelope())
    return JSONResponse(result.to_dict())


@router.get("/signon-meta", response_model=SignOnMetaResponse)
async def signon_meta(rp=Depends(get_rp)):
    """Fresh nonce, domain and policy summary for the login page"""
    return rp.signon_meta()


@router.post("/signon", responses=RESULT_RESPONSES)
async def signon(request: Request, rp=Depends(get_rp)):
    """Verify a sign-on request; rejects are 200 responses with a reason code"""
    req = await _parse(request, MessageType.SIGNON_REQUEST, SignOnRequest.from_envelope)
    if req is None:
        return _result_response(request, SignOnResult.reject(RejectReason.MALFORMED, "cannot decode request"))
    result = await run_in_threadpool(rp.signon, req)
    return _result_response(request, result)


@router.post("/rotate", responses=RESULT_RESPONSES)
async def rotate(request: Request, rp=Depends(get_rp)):
    """Move an account from an old secret to a new one"""
    req = await _parse(request, MessageType.ROTATION_REQUEST, RotationRequest.from_envelope)
    if req is None:
        return _result_response(request, SignOnResult.reject(RejectReason.MALFORMED, "cannot decode request"))
    result = await run_in_threadpool(rp.rotate, req)
    return _result_response(request, result)


@router.post("/report", response_model=ReportResponse, dependencies=[Depends(require_admin)])
async def report(body: ReportRequest, rp=Depends(get_rp)):
    """Hand an account's retrieval token to the authorities and resolve the identity"""
    try:
        return await run_in_threadpool(rp.report, body.account_id)
    except PrivSSOError as e:
        raise http_error(e)
