#!/usr/bin/env python3
"""
Cryptographic core and message-level protocol
"""

from .groups import PublicParams, Scalar, setup
from .pscred import AttributeSchema, IdpKeyPair, IdpPublicKey

__all__ = ['PublicParams', 'Scalar', 'setup', 'AttributeSchema', 'IdpKeyPair', 'IdpPublicKey']
