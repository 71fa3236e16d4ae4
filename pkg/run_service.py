#!/usr/bin/env python3
"""
Main entry point for the privsso services (IdP, RP, decryption authority)
and the trusted dealer that creates the authority key shares
"""

import argparse
import os
import sys

# Add the src directory to the Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

import uvicorn

from app.core.config import Settings
from app.main import FACTORIES
from privsso.utils.config_manager import ConfigManager


def deal(settings: Settings, n_auth: int, threshold: int, out: str) -> int:
    """Create n authority shares with a t-of-n threshold"""
    from app.services.authority_service import write_keyset
    from privsso.core import groups
    from privsso.core.errors import PrivSSOError
    from privsso.core.retrieval import authority_keygen

    config = ConfigManager(settings.config_file)
    n_auth = n_auth or int(config.get("authority_settings.n_auth"))
    threshold = threshold or int(config.get("authority_settings.threshold"))
    try:
        keyset = authority_keygen(groups.setup(), n_auth, threshold)
    except PrivSSOError as e:
        print(f"❌ {e}")
        return 1
    paths = write_keyset(keyset, out)
    print(f"🔑 {threshold}-of-{n_auth} authority keys written to {out}")
    for index, path in sorted(paths.items()):
        print(f"   authority {index}: {path}")
    print("💡 Give each authority only its own share file; RPs need authority_public.json")
    return 0


def main():
    """Start one service role under uvicorn, or deal authority keys"""
    parser = argparse.ArgumentParser(description="Run a privsso service")
    parser.add_argument("role", choices=sorted(FACTORIES) + ["deal"], help="service role, or deal")
    parser.add_argument("--host", default=None, help="listen address")
    parser.add_argument("--port", type=int, default=None, help="listen port")
    parser.add_argument("--index", type=int, default=None, help="authority index (authority role)")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--data-dir", default=None, help="directory for stores, keys and audit logs")
    parser.add_argument("--n", type=int, default=0, help="number of authorities (deal)")
    parser.add_argument("--t", type=int, default=0, help="decryption threshold (deal)")
    parser.add_argument("--out", default=None, help="output directory for the shares (deal)")
    args = parser.parse_args()

    overrides = {"role": args.role}
    for key, value in (("host", args.host), ("port", args.port), ("authority_index", args.index),
                       ("config_file", args.config), ("data_dir", args.data_dir)):
        if value is not None:
            overrides[key] = value
    if args.role == "deal":
        overrides["role"] = "authority"
        settings = Settings(**overrides)
        sys.exit(deal(settings, args.n, args.t, args.out or settings.data_dir))
    settings = Settings(**overrides)

    print(f"🔐 privsso {args.role} service")
    ConfigManager(settings.config_file).print_config_summary()
    app = FACTORIES[args.role](settings=settings)
    uvicorn.run(app, host=settings.host, port=settings.port)


if __name__ == "__main__":
    main()
