#!/usr/bin/env python3
"""
Identity Provider API endpoints
"""

import hashlib

from fastapi import APIRouter, Depends, HTTPException, Request, Response
from starlette.concurrency import run_in_threadpool

from privsso.core.errors import DeserializationError, PrivSSOError
from privsso.core.protocol import RequestIDMsg
from privsso.core.pscred import AttributeSchema
from privsso.core.wire import MessageType

from app.api.dependencies import get_idp, get_session, http_error, require_admin, require_recovery
from app.api.negotiation import ENVELOPE_MEDIA, envelope_response, read_envelope
from app.core.security import Session
from app.models.idp import (
    CreateUserRequest, DeviceModel, EnrollInitResponse, KeyRequest, KeyResponse, LoginRequest, LoginResponse,
    LookupRequest, LookupResponse, PendingEnrollmentsResponse, RevokeRequest, SchemasResponse, UserResponse,
)

router = APIRouter()


def _pk_response(request: Request, blob: bytes) -> Response:
    etag = hashlib.sha256(blob).hexdigest()[:32]
    headers = {"Cache-Control": "public, max-age=3600, immutable", "ETag": f'"{etag}"'}
    if "application/json" in request.headers.get("accept", ""):
        return Response(f'{{"pk":"{blob.hex()}"}}', media_type="application/json", headers=headers)
    return Response(blob, media_type=ENVELOPE_MEDIA, headers=headers)


@router.get("/pk")
async def get_public_key(request: Request, idp=Depends(get_idp)):
    """Serialized public key of the default schema"""
    return _pk_response(request, idp.public_key_bytes())


@router.get("/pk/{schema_id}")
async def get_public_key_for_schema(schema_id: str, request: Request, idp=Depends(get_idp)):
    """Serialized public key for one attribute schema"""
    try:
        return _pk_response(request, idp.public_key_bytes(schema_id))
    except PrivSSOError as e:
        raise http_error(e)


@router.get("/schemas", response_model=SchemasResponse)
async def get_schemas(idp=Depends(get_idp)):
    """Attribute catalog and schemas with a signing key"""
    return idp.schemas()


@router.post("/keys", response_model=KeyResponse)
async def certify_schema(body: KeyRequest, session: Session = Depends(get_session), idp=Depends(get_idp)):
    """Signing key for the requested attribute selection, created on first use"""
    try:
        schema = AttributeSchema.from_dict(body.schema_)
        blob = await run_in_threadpool(idp.certify, schema)
    except PrivSSOError as e:
        raise http_error(e)
    return KeyResponse(schema_id=schema.schema_id, pk=blob.hex())


@router.post("/login", response_model=LoginResponse)
async def login(body: LoginRequest, idp=Depends(get_idp)):
    try:
        session = await run_in_threadpool(idp.login, body.login_id, body.password, body.device_id, body.device_label)
    except PrivSSOError as e:
        raise http_error(e)
    return LoginResponse(token=session.token, login_id=session.login_id, device_id=session.device_id)


@router.post("/admin/users", response_model=UserResponse, dependencies=[Depends(require_admin)])
async def create_user(body: CreateUserRequest, idp=Depends(get_idp)):
    """Provision a user with verified info attributes"""
    try:
        await run_in_threadpool(idp.create_user, body.login_id, body.password, body.info)
        return idp.user_view(body.login_id)
    except PrivSSOError as e:
        raise http_error(e)


@router.get("/users/me", response_model=UserResponse)
async def current_user(session: Session = Depends(get_session), idp=Depends(get_idp)):
    return idp.user_view(session.login_id)


@router.post("/request-id")
async def request_id(request: Request, session: Session = Depends(get_session), idp=Depends(get_idp)):
    """Blind issuance: RequestIDMsg in, BlindedCredentialMsg out"""
    envelope = await read_envelope(request, MessageType.REQUEST_ID)
    try:
        msg = RequestIDMsg.from_envelope(envelope)
        reply = await run_in_threadpool(idp.issue, session, msg)
    except PrivSSOError as e:
        raise http_error(e)
    return envelope_response(request, reply.to_envelope())


@router.post("/lookup", response_model=LookupResponse, dependencies=[Depends(require_recovery)])
async def lookup(body: LookupRequest, idp=Depends(get_idp)):
    """Reverse lookup of a recovered h^gamma"""
    try:
        return LookupResponse(login_id=idp.lookup(bytes.fromhex(body.h_gamma)))
    except ValueError:
        raise HTTPException(status_code=400, detail="h_gamma must be hex")
    except DeserializationError:
        raise HTTPException(status_code=404, detail="no user for this identity value")
    except PrivSSOError as e:
        raise http_error(e)


@router.post("/devices/enroll-init", response_model=EnrollInitResponse)
async def enroll_init(request: Request, session: Session = Depends(get_session), idp=Depends(get_idp)):
    envelope = await read_envelope(request, MessageType.ENROLL_INIT)
    try:
        return EnrollInitResponse(request_id=idp.enroll_init(session, envelope))
    except PrivSSOError as e:
        raise http_error(e)


@router.get("/devices/enroll-pending", response_model=PendingEnrollmentsResponse)
async def enroll_pending(session: Session = Depends(get_session), idp=Depends(get_idp)):
    return PendingEnrollmentsResponse(pending=idp.pending_enrollments(session))


@router.post("/devices/enroll-approve", response_model=EnrollInitResponse)
async def enroll_approve(request: Request, session: Session = Depends(get_session), idp=Depends(get_idp)):
    """Relay the old device's sealed secret; bytes are stored untouched"""
    envelope = await read_envelope(request, MessageType.ENROLL_APPROVE)
    try:
        return EnrollInitResponse(request_id=idp.enroll_approve(session, envelope))
    except PrivSSOError as e:
        raise http_error(e)


@router.get("/devices/enroll-result/{request_id}")
async def enroll_result(request_id: str, request: Request, session: Session = Depends(get_session),
                        idp=Depends(get_idp)):
    try:
        approve = idp.enroll_result(session, request_id)
    except PrivSSOError as e:
        raise http_error(e)
    if approve is None:
        return Response(status_code=204)
    return envelope_response(request, approve)


@router.post("/devices/enroll-complete", status_code=204)
async def enroll_complete(request: Request, session: Session = Depends(get_session), idp=Depends(get_idp)):
    envelope = await read_envelope(request, MessageType.ENROLL_COMPLETE)
    try:
        idp.enroll_complete(session, envelope)
    except PrivSSOError as e:
        raise http_error(e)
    return Response(status_code=204)


@router.post("/devices/revoke", response_model=DeviceModel)
async def revoke_device(body: RevokeRequest, session: Session = Depends(get_session), idp=Depends(get_idp)):
    """Declare a device lost or stolen; issuance to it stops"""
    try:
        return idp.revoke(session, body.device_id).to_dict()
    except PrivSSOError as e:
        raise http_error(e)
