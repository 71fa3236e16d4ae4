#!/usr/bin/env python3
"""
Content negotiation for protocol envelopes: binary by default, hex-in-JSON
when the client sends or asks for application/json
"""

import json

from fastapi import HTTPException, Request, Response, status
from fastapi.responses import JSONResponse

from privsso.core.errors import WireError
from privsso.core.wire import Envelope, MessageType

ENVELOPE_MEDIA = "application/octet-stream"


def wants_binary(request: Request) -> bool:
    return ENVELOPE_MEDIA in request.headers.get("accept", "")


async def read_envelope(request: Request, expected: MessageType) -> Envelope:
    body = await request.body()
    content_type = request.headers.get("content-type", "")
    try:
        if content_type.startswith("application/json"):
            return Envelope.from_json(json.loads(body), expected)
        return Envelope.from_bytes(body, expected)
    except (WireError, ValueError) as e:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=f"Malformed envelope: {e}")


def envelope_response(request: Request, envelope: Envelope, headers: dict = None) -> Response:
    if wants_binary(request):
        return Response(envelope.to_bytes(), media_type=ENVELOPE_MEDIA, headers=headers)
    return JSONResponse(envelope.to_json(), headers=headers)
