#!/usr/bin/env python3
"""
privsso: privacy-preserving asynchronous single sign-on

Anonymous-credential core (blind issuance, unlinkable selective-disclosure
showing), threshold identity-retrieval tokens, the sign-on protocol, a user
client and a benchmark harness.
"""

__version__ = "1.0.0"
__author__ = "privsso team"
__description__ = "Privacy-preserving single sign-on with pseudonymous accounts and accountable identity retrieval"

from .core.errors import PrivSSOError
from .core.groups import PublicParams, Scalar, setup
from .core.protocol import SignOnFlags, SignOnRequest, SignOnResult, prove_id, verify_id
from .utils.config_manager import ConfigManager

__all__ = [
    'PrivSSOError',
    'PublicParams',
    'Scalar',
    'setup',
    'SignOnFlags',
    'SignOnRequest',
    'SignOnResult',
    'prove_id',
    'verify_id',
    'ConfigManager',
]

__package_info__ = {
    'name': 'privsso',
    'version': __version__,
    'description': __description__,
    'author': __author__,
    'config_class': 'ConfigManager',
}
