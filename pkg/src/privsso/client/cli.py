#!/usr/bin/env python3
"""
Command-line client: keystore, setup and sign-on phases, device management,
secret rotation and the benchmark harness.

Exit codes: 0 success, 1 other error, 2 usage, 3 keystore, 4 network,
5 expired credential, 6 validation, 7 sign-on rejected, 8 enrollment.
"""

import argparse
import getpass
import json
import logging
import os
import sys
from typing import Any, List, Optional, Sequence

from ..core.errors import (
    EnrollmentError, ExpiredCredentialError, KeystoreError, PrivSSOError, ServiceError, UpstreamError,
)
from ..core.protocol import RejectReason, SignOnResult
from ..utils.config_manager import ConfigManager
from ..utils.log import configure_logging
from .flows import UserClient, expiry_date, parse_equalities
from .keystore import Keystore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_KEYSTORE = 3
EXIT_NETWORK = 4
EXIT_EXPIRED = 5
EXIT_VALIDATION = 6
EXIT_REJECTED = 7
EXIT_ENROLLMENT = 8

DEFAULT_PASSPHRASE_ENV = "PRIVSSO_PASSPHRASE"
DEFAULT_PASSWORD_ENV = "PRIVSSO_PASSWORD"


def _labels(value: Optional[str]) -> List[str]:
    return [label.strip() for label in (value or "").split(",") if label.strip()]


def _secret(env_name: str, prompt: str) -> str:
    value = os.environ.get(env_name)
    if value is None:
        value = getpass.getpass(prompt)
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="privsso", description="Privacy-preserving single sign-on client")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--keystore", default=None, help="keystore path (default from config)")
    parser.add_argument("--passphrase-env", default=DEFAULT_PASSPHRASE_ENV,
                        help="environment variable holding the keystore passphrase")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--log-level", default=None, help="override logging_settings.log_level")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("init", help="create an encrypted keystore with fresh secrets")
    p.add_argument("--force", action="store_true", help="overwrite an existing keystore")

    p = commands.add_parser("login", help="open a session at an IdP")
    p.add_argument("--idp", required=True, help="IdP base URL")
    p.add_argument("--login-id", required=True)
    p.add_argument("--password-env", default=DEFAULT_PASSWORD_ENV)
    p.add_argument("--label", default="device", help="label for this device")

    p = commands.add_parser("fetch-credential", help="setup phase: obtain a credential")
    p.add_argument("--idp", required=True, help="IdP base URL")
    p.add_argument("--info", default="", help="comma-separated info attributes to certify")
    p.add_argument("--2fa", dest="two_fa", action="store_true", help="include the device secret")

    p = commands.add_parser("signon", help="sign-on phase at a relying party")
    p.add_argument("--rp", required=True, help="RP base URL")
    p.add_argument("--idp", default=None, help="only use credentials from this IdP")
    p.add_argument("--disclose", default="", help="comma-separated attributes to reveal")
    p.add_argument("--guest", action="store_true", help="no pseudonym, no account")
    p.add_argument("--2fa", dest="two_fa", action="store_true", help="prove the device pseudonym")
    p.add_argument("--no-retrieval", action="store_true", help="omit the identity-retrieval token")
    p.add_argument("--prove-equal", action="append", default=[], metavar="LABEL=VALUE",
                   help="prove a hidden attribute equals a public value")

    p = commands.add_parser("add-device", help="enroll this keystore as a new device")
    p.add_argument("--idp", required=True, help="IdP base URL")
    p.add_argument("--salt", default=None, help="one-time code also typed on the old device")
    p.add_argument("--label", default="device")
    p.add_argument("--wait", action="store_true", help="poll until the old device approves")
    p.add_argument("--resume", action="store_true", help="check a pending enrollment")
    p.add_argument("--timeout", type=float, default=300.0)

    p = commands.add_parser("approve-device", help="share the account secret with a new device")
    p.add_argument("--idp", required=True, help="IdP base URL")
    p.add_argument("--salt", required=True, help="one-time code shown to the user")
    p.add_argument("--fingerprint", required=True, help="code displayed by the new device")
    p.add_argument("--request-id", default=None)

    p = commands.add_parser("report-stolen", help="revoke a lost or stolen device at the IdP")
    p.add_argument("--idp", required=True, help="IdP base URL")
    p.add_argument("--device-id", required=True)

    p = commands.add_parser("rotate", help="replace the account secret")
    p.add_argument("--new-secret", action="store_true", help="retire the current secret")
    p.add_argument("--idp", default=None, help="IdP base URL")
    p.add_argument("--rp", default=None, help="RP base URL to move the account at")

    commands.add_parser("status", help="show credentials and devices (never secrets)")

    p = commands.add_parser("bench", help="benchmark harness")
    bench = p.add_subparsers(dest="bench_command", required=True)
    for name in ("phases", "sweep", "payloads", "throughput"):
        b = bench.add_parser(name)
        b.add_argument("--iterations", type=int, default=None)
        b.add_argument("--warmup", type=int, default=None)
        b.add_argument("--seed", type=int, default=None)
        b.add_argument("--out", default=None, help="write the JSON report here")
        if name in ("phases", "payloads", "throughput"):
            b.add_argument("--attrs", type=int, default=3, help="total attribute count")
        if name == "sweep":
            b.add_argument("--attrs", default=None, help="comma-separated attribute counts")
            b.add_argument("--hidden-at", type=int, default=None, help="also sweep hidden counts at this n")
            b.add_argument("--csv", default=None, help="write the sweep table as CSV")
        if name == "throughput":
            b.add_argument("--target", choices=("idp", "rp"), required=True)
            b.add_argument("--concurrency", type=int, default=1)
            b.add_argument("--ops", type=int, default=50, help="operations per worker")
            b.add_argument("--http", action="store_true", help="drive running services")
            b.add_argument("--idp", default=None)
            b.add_argument("--rp", default=None)
            b.add_argument("--login-id", default=None)
            b.add_argument("--password-env", default=DEFAULT_PASSWORD_ENV)
    return parser


def _emit(args, payload: Any, lines: Sequence[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        for line in lines:
            print(line)


def _signon_lines(result: SignOnResult) -> List[str]:
    if result.accepted:
        return [f"✅ Sign-on accepted ({result.action.value})", f"   Account: {result.account_id or 'guest'}"]
    lines = [f"❌ Sign-on rejected: {result.reason.value}"]
    if result.detail:
        lines.append(f"   {result.detail}")
    if result.reason is RejectReason.SECOND_FACTOR_REQUIRED:
        lines.append("💡 Sign on again from another enrolled device")
    return lines


def _run_bench(args, config: ConfigManager) -> int:
    from ..bench import HttpLoad, local_throughput, payload_sizes, phases_report, sweep_report, write_csv
    from ..bench.report import BenchReport

    iterations = args.iterations if args.iterations is not None else int(config.get("bench_settings.iterations", 20))
    warmup = args.warmup if args.warmup is not None else int(config.get("bench_settings.warmup", 3))
    seed = args.seed if args.seed is not None else int(config.get("bench_settings.seed", 1))
    rtt_ms = float(config.get("bench_settings.rtt_ms", 0.0))

    if args.bench_command == "phases":
        report = phases_report(args.attrs, iterations, warmup, seed, rtt_ms)
        lines = [f"⏱️  Phase CPU time, n={args.attrs} ({iterations} iterations)"]
        lines += [f"   {name:<11} {stats.mean:8.2f} ms ± {stats.stdev:.2f}" for name, stats in report.phases.items()]
    elif args.bench_command == "sweep":
        counts = [int(c) for c in _labels(args.attrs)] or list(config.get("bench_settings.attribute_counts"))
        report = sweep_report(counts, iterations, warmup, seed, args.hidden_at)
        lines = ["📈 Sign-on CPU time by attribute count"]
        lines += [f"   n={row['n']:<3} prove {row['prove_ms']:8.2f} ms  verify {row['verify_ms']:8.2f} ms"
                  for row in report.sweep]
        fit = report.sweep_fit.get("total_ms")
        if fit is not None:
            lines.append(f"   linear fit R² = {fit.r2:.3f}")
        if args.csv:
            write_csv(report.sweep + report.hidden_sweep, args.csv)
    elif args.bench_command == "payloads":
        report = BenchReport(seed=seed, config={"n_attrs": args.attrs})
        report.payloads = payload_sizes(args.attrs, seed)
        lines = [f"📦 Payload sizes, n={args.attrs}"]
        lines += [f"   {name:<28} {size:6d} bytes" for name, size in report.payloads.items()]
    else:
        report = BenchReport(seed=seed, config={"target": args.target, "concurrency": args.concurrency,
                                                "ops": args.ops, "http": args.http, "rtt_ms": rtt_ms})
        if args.http:
            if not (args.idp and args.login_id):
                print("❌ --http needs --idp and --login-id", file=sys.stderr)
                return EXIT_USAGE
            load = HttpLoad(args.idp, args.login_id, _secret(args.password_env, "IdP password: "), args.rp, config)
            result = load.throughput(args.target, args.concurrency, args.ops)
        else:
            result = local_throughput(args.target, args.concurrency, args.ops, args.attrs, seed, rtt_ms)
        report.throughput = [result.to_dict()]
        lines = [f"⚡ {result.target} k={result.concurrency}: {result.ops_per_s:.1f} ops/s "
                 f"(p50 {result.latency.p50:.1f} ms, p95 {result.latency.p95:.1f} ms)"]
    if args.out:
        report.save_json(args.out)
    _emit(args, report.to_dict(), lines)
    return EXIT_OK


def _dispatch(args, client: UserClient) -> int:
    command = args.command
    if command == "init":
        payload = client.init(overwrite=args.force)
        _emit(args, payload, [f"🔐 Keystore created at {payload['keystore']}"])
    elif command == "login":
        payload = client.login(args.idp, args.login_id, _secret(args.password_env, "IdP password: "), args.label)
        _emit(args, payload, [f"🔑 Logged in at {payload['idp']} as {payload['login_id']}",
                              f"   Device: {payload['device_id']}"])
    elif command == "fetch-credential":
        bundle = client.fetch_credential(args.idp, _labels(args.info), args.two_fa)
        payload = {"issuer": bundle.issuer, "schema_id": bundle.schema.schema_id,
                   "attributes": bundle.schema.info_labels, "two_fa": bundle.schema.two_fa,
                   "tp": bundle.tp, "expires": expiry_date(bundle.tp)}
        _emit(args, payload, [f"🎫 Credential from {bundle.issuer} valid until {payload['expires']}",
                              f"   Attributes: {', '.join(payload['attributes']) or '(none)'}"])
    elif command == "signon":
        result = client.signon(args.rp, _labels(args.disclose), args.guest, args.two_fa, not args.no_retrieval,
                               parse_equalities(args.prove_equal), args.idp)
        _emit(args, result.to_dict(), _signon_lines(result))
        return EXIT_OK if result.accepted else EXIT_REJECTED
    elif command == "add-device":
        if args.resume:
            payload = client.wait_device(args.idp, args.timeout) if args.wait else client.resume_device(args.idp)
        else:
            if not args.salt:
                print("❌ --salt is required to start an enrollment", file=sys.stderr)
                return EXIT_USAGE
            payload = client.add_device(args.idp, args.salt, args.label)
            if args.wait:
                payload = {**payload, **client.wait_device(args.idp, args.timeout)}
        lines = [f"📲 Enrollment {payload['request_id']}: {payload['status']}"]
        if "fingerprint" in payload:
            lines.append(f"   Enter this code on the old device: {payload['fingerprint']}")
        _emit(args, payload, lines)
        if payload["status"] == "pending" and args.wait:
            return EXIT_ENROLLMENT
    elif command == "approve-device":
        payload = client.approve_device(args.idp, args.salt, args.fingerprint, args.request_id)
        _emit(args, payload, [f"✅ Approved device {payload['device_id']}",
                              f"   Fingerprint: {payload['fingerprint']}"])
    elif command == "report-stolen":
        payload = client.report_stolen(args.idp, args.device_id)
        _emit(args, payload, [f"🚫 Device {payload['device_id']} revoked"])
    elif command == "rotate":
        if args.new_secret:
            payload = client.new_secret()
            _emit(args, payload, ["🔁 New secret generated",
                                  "💡 Run fetch-credential, then rotate --idp --rp at each RP once the old "
                                  "credential expired"])
        elif args.idp and args.rp:
            result = client.rotate(args.idp, args.rp)
            _emit(args, result.to_dict(), _signon_lines(result))
            return EXIT_OK if result.accepted else EXIT_REJECTED
        else:
            print("❌ rotate needs --new-secret or both --idp and --rp", file=sys.stderr)
            return EXIT_USAGE
    elif command == "status":
        payload = client.status()
        lines = [f"🔐 Keystore: {payload['keystore']}"]
        for origin, entry in payload["origins"].items():
            lines.append(f"🏛️  {origin}  login={entry['login_id']}  device={entry['device_id']}")
            for cred in entry["credentials"]:
                state = "expired" if cred["expired"] else "valid"
                lines.append(f"   🎫 {cred['schema_id']} [{', '.join(cred['attributes']) or '-'}] "
                             f"until {cred['expires']} ({state})")
        for rp_url, signon in payload["signons"].items():
            lines.append(f"🌐 {signon['domain']} ({rp_url}) account {signon['account_id']}")
        _emit(args, payload, lines)
    return EXIT_OK


def exit_code(error: PrivSSOError) -> int:
    if isinstance(error, KeystoreError):
        return EXIT_KEYSTORE
    if isinstance(error, UpstreamError):
        return EXIT_NETWORK
    if isinstance(error, ExpiredCredentialError):
        return EXIT_EXPIRED
    if isinstance(error, EnrollmentError):
        return EXIT_ENROLLMENT
    if isinstance(error, ServiceError):
        return EXIT_ERROR
    return EXIT_VALIDATION


def main(argv: Optional[Sequence[str]] = None, session=None) -> int:
    """CLI entry point; `session` replaces the outbound requests session"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = ConfigManager(args.config)
    except PrivSSOError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_ERROR
    configure_logging(args.log_level or config.get("logging_settings.log_level", "WARNING"))

    try:
        if args.command == "bench":
            return _run_bench(args, config)
        path = args.keystore or config.get("client_settings.keystore_path", "~/.privsso/keystore.json")
        keystore = Keystore(path, _secret(args.passphrase_env, "Keystore passphrase: "),
                            int(config.get("client_settings.scrypt_n", 2 ** 14)))
        return _dispatch(args, UserClient(keystore, config, session))
    except PrivSSOError as e:
        code = exit_code(e)
        print(f"❌ {e}", file=sys.stderr)
        if code == EXIT_NETWORK:
            print("💡 Check that the service is running and retry", file=sys.stderr)
        elif code == EXIT_EXPIRED:
            print("💡 Run fetch-credential to renew the credential", file=sys.stderr)
        return code
