#!/usr/bin/env python3
"""
Utility functions and classes
"""

from .config_manager import ConfigManager
from .log import AuditLog, configure_logging

__all__ = ['ConfigManager', 'AuditLog', 'configure_logging']
