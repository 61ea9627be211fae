"""Certificate-authority side: revocation ledger, CRL issuance, distribution.

The ledger is a plain append-only text file, one record per line:

    <serial-hex> <reason-code> <revoked-at-epoch>

CRLs derived from it are served over HTTP as both DER (/crl.der) and PEM
(/crl.pem).  The served body is regenerated lazily whenever the ledger has
changed or the cached copy is older than the refresh interval, so a revoke
becomes visible on the endpoint within one interval at the latest.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional, Union

from . import keys
from .crl import (
    CertificateRevocationList,
    CrlReason,
    DistinguishedName,
    RevokedEntry,
    build_crl,
    crl_to_pem,
    encode_crl_der,
    serial_hex,
    validate_serial,
)
from .der import Asn1Time

log = logging.getLogger("gridpki.ca")

DEFAULT_REFRESH_INTERVAL_S = 3600.0
DEFAULT_ISSUER = "C=aa, ST=aa, L=aa, O=aa, OU=aa, CN=rootca"

KEY_FILE = "ca_key.pem"
PUB_FILE = "ca_pub.pem"
ISSUER_FILE = "issuer.txt"
LEDGER_FILE = "ledger.txt"


class AlreadyRevoked(Exception):
    """The serial is already present in the ledger."""


class PersistenceFailure(Exception):
    """The ledger file could not be read or written."""


class BindFailure(Exception):
    """An HTTP endpoint could not bind its address."""


@dataclass(frozen=True)
class LedgerRecord:
    serial: int
    reason_code: int
    revoked_at: Asn1Time

    def line(self) -> str:
        return f"{serial_hex(self.serial)} {self.reason_code} {self.revoked_at.epoch_seconds}\n"

    def to_entry(self) -> RevokedEntry:
        # Reason code 0 (unspecified) is recorded in the ledger but encoded
        # as "no reason extension", which is the recommended wire form.
        reason = CrlReason(self.reason_code) if self.reason_code != 0 else None
        return RevokedEntry(self.serial, self.revoked_at, reason)


class RevocationLedger:
    """Append-only, file-backed record of revoked serials."""

    def __init__(self, path: Union[str, Path], issuer: DistinguishedName):
        self.path = Path(path)
        self.issuer = issuer
        self._records: list[LedgerRecord] = []
        self._index: set[int] = set()
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: Union[str, Path], issuer: DistinguishedName) -> "RevocationLedger":
        ledger = cls(path, issuer)
        try:
            text = ledger.path.read_text()
        except FileNotFoundError:
            ledger.path.write_text("")
            return ledger
        except OSError as exc:
            raise PersistenceFailure(f"cannot read ledger: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                serial_text, reason_text, at_text = line.split()
                record = LedgerRecord(
                    validate_serial(int(serial_text, 16)),
                    int(CrlReason(int(reason_text))),
                    Asn1Time(int(at_text)),
                )
            except ValueError as exc:
                raise PersistenceFailure(
                    f"corrupt ledger line {lineno}: {line!r} ({exc})"
                ) from exc
            if record.serial in ledger._index:
                raise PersistenceFailure(
                    f"ledger line {lineno} repeats serial {serial_text}"
                )
            ledger._records.append(record)
            ledger._index.add(record.serial)
        return ledger

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[LedgerRecord, ...]:
        with self._lock:
            return tuple(self._records)

    @property
    def revoked_serials(self) -> frozenset[int]:
        with self._lock:
            return frozenset(self._index)

    def is_revoked(self, serial: int) -> bool:
        with self._lock:
            return serial in self._index

    def revoke(
        self,
        serial: int,
        reason: CrlReason = CrlReason.UNSPECIFIED,
        at: Optional[Asn1Time] = None,
    ) -> LedgerRecord:
        """Append one record; the line is flushed to disk before returning."""
        validate_serial(serial)
        record = LedgerRecord(serial, int(reason), at or Asn1Time.now())
        with self._lock:
            if serial in self._index:
                raise AlreadyRevoked(f"serial {serial_hex(serial)} already revoked")
            try:
                with open(self.path, "a", encoding="ascii") as handle:
                    handle.write(record.line())
                    handle.flush()
            except OSError as exc:
                raise PersistenceFailure(f"cannot append to ledger: {exc}") from exc
            self._records.append(record)
            self._index.add(serial)
        return record

    def entries(self) -> list[RevokedEntry]:
        return [record.to_entry() for record in self.records]

    def dump_text(self) -> str:
        """Canonical text form; identical to the on-disk file."""
        return "".join(record.line() for record in self.records)


def issue_crl(
    ledger: RevocationLedger,
    signer,
    now: Optional[Asn1Time] = None,
    *,
    include_next_update: bool = True,
    refresh_interval_s: float = DEFAULT_REFRESH_INTERVAL_S,
) -> CertificateRevocationList:
    """Build and sign a CRL covering every ledger record."""
    now = now or Asn1Time.now()
    next_update = now.plus(refresh_interval_s) if include_next_update else None
    return build_crl(ledger.issuer, ledger.entries(), now, next_update, signer)


# --- CA state directory -----------------------------------------------------


@dataclass
class CaContext:
    directory: Path
    issuer: DistinguishedName
    ledger: RevocationLedger
    signer: keys.RsaSha256Signer
    public_key: keys.PublicKey


def init_ca_dir(
    directory: Union[str, Path],
    issuer_text: str = DEFAULT_ISSUER,
    key_bits: int = keys.DEFAULT_KEY_BITS,
) -> CaContext:
    """Create a CA state directory: key pair, issuer name, empty ledger."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if (directory / LEDGER_FILE).exists() or (directory / KEY_FILE).exists():
        raise PersistenceFailure(f"{directory} already holds CA state")
    issuer = DistinguishedName.parse(issuer_text)
    private_key = keys.generate_private_key(key_bits)
    (directory / KEY_FILE).write_bytes(keys.private_key_to_pem(private_key))
    (directory / PUB_FILE).write_bytes(keys.public_key_to_pem(private_key.public_key()))
    (directory / ISSUER_FILE).write_text(issuer.render() + "\n")
    (directory / LEDGER_FILE).write_text("")
    ledger = RevocationLedger(directory / LEDGER_FILE, issuer)
    signer = keys.RsaSha256Signer(private_key)
    return CaContext(directory, issuer, ledger, signer, private_key.public_key())


def load_ca_dir(directory: Union[str, Path]) -> CaContext:
    """Open an existing CA state directory."""
    directory = Path(directory)
    try:
        issuer = DistinguishedName.parse((directory / ISSUER_FILE).read_text())
        private_key = keys.load_private_key(directory / KEY_FILE)
    except OSError as exc:
        raise PersistenceFailure(f"not a CA directory: {exc}") from exc
    ledger = RevocationLedger.load(directory / LEDGER_FILE, issuer)
    signer = keys.RsaSha256Signer(private_key)
    return CaContext(directory, issuer, ledger, signer, private_key.public_key())


# --- HTTP distribution ------------------------------------------------------


class CrlHttpServer:
    """Serves the current CRL as /crl.der and /crl.pem over HTTP."""

    def __init__(
        self,
        ledger: RevocationLedger,
        signer,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        refresh_interval_s: float = DEFAULT_REFRESH_INTERVAL_S,
        include_next_update: bool = True,
    ):
        self.ledger = ledger
        self.signer = signer
        self.host = host
        self.port = port
        self.refresh_interval_s = refresh_interval_s
        self.include_next_update = include_next_update
        self._cache: Optional[tuple[bytes, bytes, float, int]] = None
        self._lock = threading.Lock()
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    def current_bodies(self) -> tuple[bytes, bytes]:
        """(der, pem) bodies, re-issuing if the cache is stale."""
        with self._lock:
            ledger_len = len(self.ledger)
            now = time.monotonic()
            if self._cache is not None:
                der_body, pem_body, issued_at, issued_len = self._cache
                fresh = (
                    issued_len == ledger_len
                    and now - issued_at < self.refresh_interval_s
                )
                if fresh:
                    return der_body, pem_body
            crl = issue_crl(
                self.ledger,
                self.signer,
                include_next_update=self.include_next_update,
                refresh_interval_s=self.refresh_interval_s,
            )
            der_body = encode_crl_der(crl)
            pem_body = crl_to_pem(crl).encode("ascii")
            self._cache = (der_body, pem_body, now, ledger_len)
            return der_body, pem_body

    def start(self) -> None:
        server = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"
            disable_nagle_algorithm = True

            def do_GET(self):
                try:
                    der_body, pem_body = server.current_bodies()
                except Exception:
                    log.exception("CRL issuance failed")
                    self.send_error(500)
                    return
                if self.path == "/crl.der":
                    body, ctype = der_body, "application/pkix-crl"
                elif self.path == "/crl.pem":
                    body, ctype = pem_body, "application/x-pem-file"
                else:
                    self.send_error(404)
                    return
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, fmt, *args):
                log.debug("crl-http %s", fmt % args)

        try:
            self._httpd = ThreadingHTTPServer((self.host, self.port), Handler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {self.host}:{self.port}: {exc}") from exc
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, kwargs={"poll_interval": 0.05},
            name="crl-http", daemon=True,
        )
        self._thread.start()
        log.info("CRL endpoint on http://%s:%d/crl.der", self.host, self.port)

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def url(self, path: str = "/crl.der") -> str:
        return f"http://{self.host}:{self.port}{path}"
