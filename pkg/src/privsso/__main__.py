#!/usr/bin/env python3
"""
Entry point for `python -m privsso`
"""

import sys

from .client.cli import main

if __name__ == "__main__":
    sys.exit(main())
