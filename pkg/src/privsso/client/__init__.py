"""
User-side client: encrypted keystore, HTTP transport and the protocol flows
"""

from .flows import UserClient
from .http import ServiceClient, create_session
from .keystore import Keystore, KeystoreData

__all__ = [
    'UserClient',
    'ServiceClient',
    'create_session',
    'Keystore',
    'KeystoreData',
]
