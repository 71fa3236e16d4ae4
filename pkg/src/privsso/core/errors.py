#!/usr/bin/env python3
"""
Exception hierarchy shared by the privsso library, services and client
"""


class PrivSSOError(Exception):
    """Base class for every error raised by privsso"""


class ConfigError(PrivSSOError):
    pass


class GroupError(PrivSSOError):
    pass


class DeserializationError(GroupError):
    """Raised when bytes do not decode to a valid, canonical value"""


class ProofError(PrivSSOError):
    """Raised when a proof cannot be built (unsatisfied statement, bad witness map)"""


class CredentialError(PrivSSOError):
    pass


class SchemaError(CredentialError):
    pass


class RetrievalError(PrivSSOError):
    pass


class ThresholdError(RetrievalError):
    pass


class InvalidPartialError(RetrievalError):
    """A partial decryption failed its correctness proof"""

    def __init__(self, authority_index: int, message: str = ""):
        self.authority_index = authority_index
        super().__init__(message or f"invalid partial decryption from authority {authority_index}")


class ProtocolError(PrivSSOError):
    pass


class ExpiredCredentialError(ProtocolError):
    pass


class ForbiddenDisclosureError(ProtocolError):
    pass


class UnknownAttributeError(ProtocolError):
    pass


class UnsupportedPredicateError(ProtocolError):
    pass


class RevokedDeviceError(ProtocolError):
    pass


class RotationError(ProtocolError):
    pass


class WireError(ProtocolError):
    """Malformed envelope, unknown message type or version"""


class EnrollmentError(PrivSSOError):
    pass


class SaltMismatchError(EnrollmentError):
    pass


class KeystoreError(PrivSSOError):
    pass


class ServiceError(PrivSSOError):
    """Raised by the IdP, RP and authority services; mapped onto HTTP status codes"""

    status_code = 400


class NotFoundError(ServiceError):
    status_code = 404


class ConflictError(ServiceError):
    status_code = 409


class AccessDeniedError(ServiceError):
    status_code = 401


class UpstreamError(ServiceError):
    """A remote service was unreachable or answered with an error"""

    status_code = 502
