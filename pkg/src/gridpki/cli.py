"""Command-line front door: CA operations, servers, checks, experiments.

Exit codes: 0 success, 1 operational failure, 2 usage error.  `check`
additionally distinguishes Revoked (1), AllPathsFailed (3), and Unknown
(4) so scripts can branch on a certificate's fate.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from . import ca as camod
from . import keys, sim, wire
from .client import (
    AllPathsFailed,
    ClientPolicy,
    CrlFormat,
    Endpoints,
    HybridClient,
    PolicyMode,
)
from .crl import (
    CrlReason,
    DistinguishedName,
    MalformedCrl,
    SignatureInvalid,
    crl_to_pem,
    encode_crl_der,
    render_crl_text,
)
from .der import Asn1Time, DerError, MalformedTime
from .ocsp import OcspResponder
from .responder import OcspHttpServer
from .store import CertStatus, RevocationStore, http_fetcher

_OPERATIONAL_ERRORS = (
    camod.PersistenceFailure,
    camod.AlreadyRevoked,
    keys.SigningFailure,
    MalformedCrl,
    SignatureInvalid,
    DerError,
    sim.EndpointUnavailable,
    sim.TargetDown,
    wire.TransportError,
    OSError,
    ValueError,
)


def parse_serial(text: str) -> int:
    """Serial syntax: hex by default, decimal with a 0d prefix."""
    text = text.strip().lower()
    try:
        if text.startswith("0d"):
            return int(text[2:], 10)
        if text.startswith("0x"):
            return int(text[2:], 16)
        return int(text, 16)
    except ValueError:
        raise ValueError(f"not a serial number: {text!r}") from None


def parse_counts(text: str) -> list[int]:
    """Counts syntax: comma-separated integers and A..B inclusive ranges."""
    counts: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo_text, _, hi_text = part.partition("..")
            lo, hi = int(lo_text), int(hi_text)
            if hi < lo:
                raise ValueError(f"empty range {part!r}")
            counts.extend(range(lo, hi + 1))
        else:
            counts.append(int(part))
    if not counts:
        raise ValueError("no record counts given")
    return counts


def parse_window(text: str) -> tuple[float, float]:
    start_text, sep, end_text = text.partition(":")
    if not sep:
        raise ValueError(f"outage window must be start:end, got {text!r}")
    return float(start_text), float(end_text)


def _parse_time(text: str) -> Asn1Time:
    try:
        return Asn1Time.parse(text)
    except MalformedTime as exc:
        raise ValueError(str(exc)) from None


def _add_policy_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=[m.value for m in PolicyMode],
        default=None,
        help="protocol selection mode (default auto)",
    )
    parser.add_argument(
        "--crl-format",
        choices=[f.value for f in CrlFormat],
        default=None,
        help="preferred CRL download encoding (default der)",
    )
    parser.add_argument("--der-threshold", type=int, default=None,
                        help="record count above which OCSP beats a DER CRL")
    parser.add_argument("--pem-threshold", type=int, default=None,
                        help="record count above which OCSP beats a PEM CRL")
    parser.add_argument("--timeout-ms", type=int, default=None,
                        help="per-exchange timeout in milliseconds")
    parser.add_argument("--batch-min", type=int, default=None,
                        help="batch size at which a CRL download is always preferred")


def _policy_from_args(args: argparse.Namespace) -> ClientPolicy:
    policy = ClientPolicy()
    if args.mode is not None:
        policy.mode = PolicyMode(args.mode)
    if args.crl_format is not None:
        policy.preferred_crl_format = CrlFormat(args.crl_format)
    if args.der_threshold is not None:
        policy.der_record_threshold = args.der_threshold
    if args.pem_threshold is not None:
        policy.pem_record_threshold = args.pem_threshold
    if args.timeout_ms is not None:
        policy.ocsp_timeout_ms = args.timeout_ms
    if args.batch_min is not None:
        policy.batch_min = args.batch_min
    policy.__post_init__()
    return policy


def _load_verify_material(args) -> tuple[DistinguishedName, object]:
    """Issuer name and CA public key, from --dir or --issuer/--ca-pub."""
    if args.dir:
        directory = Path(args.dir)
        issuer = DistinguishedName.parse(
            (directory / camod.ISSUER_FILE).read_text()
        )
        public_key = keys.load_public_key(directory / camod.PUB_FILE)
        return issuer, public_key
    if not (args.issuer and args.ca_pub):
        raise ValueError("need either --dir or both --issuer and --ca-pub")
    return DistinguishedName.parse(args.issuer), keys.load_public_key(args.ca_pub)


# --- subcommand handlers ----------------------------------------------------


def _cmd_ca_init(args) -> int:
    ctx = camod.init_ca_dir(args.dir, args.issuer, args.key_bits)
    print(f"initialized CA in {ctx.directory}")
    print(f"issuer: {ctx.issuer.render()}")
    return 0


def _cmd_revoke(args) -> int:
    ctx = camod.load_ca_dir(args.dir)
    serial = parse_serial(args.serial)
    reason = CrlReason.from_flag(args.reason)
    at = _parse_time(args.at) if args.at else None
    record = ctx.ledger.revoke(serial, reason, at=at)
    print(
        f"revoked {serial:X} reason {reason.flag}"
        f" at {record.to_entry().revocation_date}"
    )
    return 0


def _cmd_gen_crl(args) -> int:
    ctx = camod.load_ca_dir(args.dir)
    crl = camod.issue_crl(
        ctx.ledger,
        ctx.signer,
        include_next_update=not args.omit_next_update,
        refresh_interval_s=args.refresh_interval,
    )
    if args.text:
        payload = render_crl_text(crl).encode()
    elif args.pem:
        payload = crl_to_pem(crl).encode("ascii")
    else:
        payload = encode_crl_der(crl)
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"wrote {len(payload)} bytes to {args.out}", file=sys.stderr)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    return 0


def _cmd_serve(args) -> int:
    ctx = camod.load_ca_dir(args.dir)
    bind = args.bind
    crl_server = camod.CrlHttpServer(
        ctx.ledger,
        ctx.signer,
        host=bind,
        port=args.crl_port,
        refresh_interval_s=args.refresh_interval,
    )
    crl_server.start()
    store = RevocationStore(
        http_fetcher(crl_server.url("/crl.der")),
        ctx.signer.public_key,
        refresh_interval_s=args.refresh_interval,
    )
    store.start(initial_refresh=True)
    responder = OcspResponder(
        ctx.issuer, ctx.signer.public_key, ctx.signer, store
    )
    ocsp_server = OcspHttpServer(responder, host=bind, port=args.ocsp_port)
    ocsp_server.start()
    print(f"ocsp: {ocsp_server.url()}")
    print(f"crl-der: {crl_server.url('/crl.der')}")
    print(f"crl-pem: {crl_server.url('/crl.pem')}")
    sys.stdout.flush()
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    finally:
        store.stop()
        ocsp_server.stop()
        crl_server.stop()
    print("stopped", file=sys.stderr)
    return 0


_CHECK_EXIT = {
    CertStatus.GOOD: 0,
    CertStatus.REVOKED: 1,
    CertStatus.UNKNOWN: 4,
}


def _cmd_check(args) -> int:
    issuer, public_key = _load_verify_material(args)
    crl_der_url = args.crl_url
    crl_pem_url = args.crl_pem_url or (
        crl_der_url.replace("crl.der", "crl.pem") if crl_der_url else None
    )
    if not (args.ocsp_url and crl_der_url and crl_pem_url):
        raise ValueError("need --ocsp-url and --crl-url")
    endpoints = Endpoints(args.ocsp_url, crl_der_url, crl_pem_url)
    client = HybridClient(
        endpoints, issuer, public_key, _policy_from_args(args),
        crl_ttl_s=args.crl_ttl,
    )
    serials = [parse_serial(s) for s in args.serial]
    exit_code = 0
    try:
        results = (
            client.check_many(serials) if len(serials) > 1
            else [client.check(serials[0])]
        )
    except AllPathsFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for serial, result in zip(serials, results):
        line = {"serial": f"{serial:X}", **result.to_dict()}
        print(json.dumps(line))
        exit_code = max(exit_code, _CHECK_EXIT[result.status.status])
    return exit_code


def _load_sim_config(args) -> sim.SimConfig:
    """Build a SimConfig from defaults, then --config file, then flags."""
    values: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as handle:
            loaded = json.load(handle)
        if not isinstance(loaded, dict):
            raise ValueError("--config must hold a JSON object")
        values.update(loaded)
        if "outage_windows" in values:
            values["outage_windows"] = tuple(
                tuple(w) for w in values["outage_windows"]
            )
    flag_map = {
        "n_meters": args.meters,
        "request_rate_per_meter_hz": args.rate,
        "duration_s": args.duration,
        "revoked_fraction": args.revoked_fraction,
        "rng_seed": args.seed,
        "n_serials": args.serials,
        "crl_ttl_s": args.crl_ttl,
    }
    for key, value in flag_map.items():
        if value is not None:
            values[key] = value
    if args.outage:
        values["outage_windows"] = tuple(parse_window(w) for w in args.outage)
    values["policy"] = _policy_from_args(args)
    return sim.SimConfig(**values)


def _cmd_simulate(args) -> int:
    config = _load_sim_config(args)
    report = sim.run_simulation(config)
    print(sim.render_sim_report(report))
    if args.json_out:
        sim.write_json_report(
            args.json_out, report.to_dict(include_records=args.records)
        )
        print(f"wrote {args.json_out}", file=sys.stderr)
    return 0 if report.all_correct else 1


def _cmd_bench(args) -> int:
    if args.url:
        issuer, public_key = _load_verify_material(args)
        rng_pool = [s for s in range(sim.POOL_RANGE[0], sim.POOL_RANGE[0] + 1000)]
        report = sim.run_bench(
            args.requests, args.concurrency, args.url,
            issuer=issuer, ca_public_key=public_key, serial_pool=rng_pool,
            keepalive=not args.no_keepalive, rng_seed=args.seed,
        )
    else:
        with sim.LiveHarness(
            n_serials=args.store_size,
            revoked_fraction=args.revoked_fraction,
            rng_seed=args.seed,
        ) as harness:
            report = sim.run_bench(
                args.requests, args.concurrency, harness.endpoints.ocsp_url,
                issuer=harness.ctx.issuer,
                ca_public_key=harness.ctx.signer.public_key,
                serial_pool=harness.pool,
                keepalive=not args.no_keepalive, rng_seed=args.seed,
            )
    print(sim.render_bench_report(report))
    if args.json_out:
        sim.write_json_report(args.json_out, report.to_dict())
        print(f"wrote {args.json_out}", file=sys.stderr)
    return 0


def _cmd_measure(args) -> int:
    counts = parse_counts(args.counts)
    params = sim.MeasureParams(
        issuer_text=args.issuer, key_bits=args.key_bits, rng_seed=args.seed
    )
    report = sim.measure_bytes(counts, params)
    print(sim.render_measure_report(report))
    if args.json_out:
        sim.write_json_report(args.json_out, report.to_dict())
        print(f"wrote {args.json_out}", file=sys.stderr)
    return 0


# --- parser wiring ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridpki",
        description="CRL-backed OCSP stack for meter fleets: CA tooling, "
        "servers, hybrid client, and experiment drivers.",
    )
    parser.add_argument("--version", action="version", version=f"gridpki {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging to stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ca-init", help="create a CA directory (key pair + ledger)")
    p.add_argument("--dir", required=True, help="directory to create state in")
    p.add_argument("--issuer", default=camod.DEFAULT_ISSUER,
                   help="issuer distinguished name")
    p.add_argument("--key-bits", type=int, default=keys.DEFAULT_KEY_BITS)
    p.set_defaults(handler=_cmd_ca_init)

    p = sub.add_parser("revoke", help="append one serial to the revocation ledger")
    p.add_argument("--dir", required=True)
    p.add_argument("--serial", required=True,
                   help="hex serial; decimal with 0d prefix")
    p.add_argument("--reason", default="unspecified",
                   help="kebab-case reason, e.g. key-compromise")
    p.add_argument("--at", default=None,
                   help="revocation time (epoch seconds or ISO-8601)")
    p.set_defaults(handler=_cmd_revoke)

    p = sub.add_parser("gen-crl", help="issue and sign a CRL from the ledger")
    p.add_argument("--dir", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--pem", action="store_true", help="armor the output")
    group.add_argument("--text", action="store_true",
                       help="human-readable dump instead of an encoded list")
    p.add_argument("--omit-next-update", action="store_true",
                   help="issue without a freshness promise")
    p.add_argument("--refresh-interval", type=float,
                   default=camod.DEFAULT_REFRESH_INTERVAL_S,
                   help="seconds until the promised next update")
    p.add_argument("--out", default=None, help="write to a file instead of stdout")
    p.set_defaults(handler=_cmd_gen_crl)

    p = sub.add_parser("serve", help="run the CRL and OCSP endpoints")
    p.add_argument("--dir", required=True)
    p.add_argument("--bind", default=os.environ.get("GRIDPKI_BIND", "127.0.0.1"),
                   help="bind address (env GRIDPKI_BIND overrides the default)")
    p.add_argument("--ocsp-port", type=int, default=0,
                   help="0 picks an ephemeral port")
    p.add_argument("--crl-port", type=int, default=0)
    p.add_argument("--refresh-interval", type=float, default=3600.0,
                   help="CRL re-issue and store refresh cadence, seconds")
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("check", help="resolve revocation status for serials")
    p.add_argument("--serial", action="append", required=True,
                   help="repeatable; hex, or decimal with 0d prefix")
    p.add_argument("--ocsp-url", default=None)
    p.add_argument("--crl-url", default=None, help="URL of the DER CRL")
    p.add_argument("--crl-pem-url", default=None,
                   help="defaults to --crl-url with crl.pem substituted")
    p.add_argument("--dir", default=None,
                   help="CA directory supplying issuer name and public key")
    p.add_argument("--issuer", default=None)
    p.add_argument("--ca-pub", default=None, help="path to the CA public key PEM")
    p.add_argument("--crl-ttl", type=float, default=3600.0,
                   help="seconds a downloaded CRL stays fresh client-side")
    _add_policy_flags(p)
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("simulate", help="run the meter-fleet simulation")
    p.add_argument("--config", default=None, help="JSON config file; flags win")
    p.add_argument("--meters", type=int, default=None)
    p.add_argument("--rate", type=float, default=None,
                   help="checks per meter per second")
    p.add_argument("--duration", type=float, default=None, help="seconds")
    p.add_argument("--outage", action="append", default=None,
                   metavar="START:END", help="repeatable OCSP outage window")
    p.add_argument("--revoked-fraction", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--serials", type=int, default=None,
                   help="size of the issued-serial pool")
    p.add_argument("--crl-ttl", type=float, default=None)
    p.add_argument("--json-out", default=None)
    p.add_argument("--records", action="store_true",
                   help="include per-check records in the JSON report")
    _add_policy_flags(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("bench", help="drive the OCSP endpoint at full speed")
    p.add_argument("--requests", type=int, default=1000)
    p.add_argument("--concurrency", type=int, default=2)
    p.add_argument("--url", default=None,
                   help="external OCSP endpoint; omitted runs one in-process")
    p.add_argument("--dir", default=None,
                   help="CA directory for --url mode verification material")
    p.add_argument("--issuer", default=None)
    p.add_argument("--ca-pub", default=None)
    p.add_argument("--store-size", type=int, default=20000,
                   help="issued-serial pool for the in-process store")
    p.add_argument("--revoked-fraction", type=float, default=0.5)
    p.add_argument("--no-keepalive", action="store_true",
                   help="open a fresh connection per request")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--json-out", default=None)
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("measure", help="compare CRL sizes against one OCSP exchange")
    p.add_argument("--counts", default="0..40",
                   help="record counts: comma list and A..B ranges")
    p.add_argument("--issuer", default=camod.DEFAULT_ISSUER)
    p.add_argument("--key-bits", type=int, default=2048)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--json-out", default=None)
    p.set_defaults(handler=_cmd_measure)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except _OPERATIONAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
