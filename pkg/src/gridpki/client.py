"""Meter-side revocation client: protocol choice, fallback, caching.

The client prefers per-certificate OCSP queries while the CRL is large and
switches to downloading (and caching) the full CRL when it is small or when
many statuses are needed at once.  If the chosen path is unreachable it
falls back -- OCSP to CRL fetch and vice versa, then to an expired cached
CRL -- before giving up.  No status is ever returned from an artifact whose
signature failed verification.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import ocsp, wire
from .crl import (
    CertificateRevocationList,
    DistinguishedName,
    MalformedCrl,
    SignatureInvalid,
    crl_from_pem,
    decode_crl_der,
    verify_crl,
)
from .der import Asn1Time, BadArmor, DerError
from .responder import REQUEST_CONTENT_TYPE, RESPONSE_CONTENT_TYPE
from .store import CertStatus, RevocationStatus

log = logging.getLogger("gridpki.client")


class CrlFormat(str, Enum):
    DER = "der"
    PEM = "pem"


class PolicyMode(str, Enum):
    AUTO = "auto"
    FORCE_OCSP = "force_ocsp"
    FORCE_CRL = "force_crl"


class Decision(Enum):
    USE_CACHE = "UseCache"
    USE_OCSP = "UseOcsp"
    USE_CRL_FETCH = "UseCrlFetch"


class Source(str, Enum):
    OCSP = "Ocsp"
    CRL_FETCH = "CrlFetch"
    CRL_CACHE = "CrlCache"


@dataclass
class ClientPolicy:
    """Tunable knobs for protocol selection.

    The record thresholds mark where a full CRL download stops being
    cheaper than an OCSP exchange for a single status; they differ per
    encoding because PEM armor inflates the list.
    """

    pem_record_threshold: int = 14
    der_record_threshold: int = 24
    ocsp_timeout_ms: int = 2000
    preferred_crl_format: CrlFormat = CrlFormat.DER
    batch_min: int = 2
    mode: PolicyMode = PolicyMode.AUTO

    def __post_init__(self):
        if self.pem_record_threshold < 0 or self.der_record_threshold < 0:
            raise ValueError("thresholds must be non-negative")
        if self.ocsp_timeout_ms <= 0:
            raise ValueError("timeout must be positive")
        if self.batch_min < 1:
            raise ValueError("batch_min must be at least 1")

    @property
    def record_threshold(self) -> int:
        if self.preferred_crl_format is CrlFormat.PEM:
            return self.pem_record_threshold
        return self.der_record_threshold


def choose_protocol(
    policy: ClientPolicy,
    n_checks: int,
    crl_record_count: Optional[int] = None,
    cache_valid: bool = False,
) -> Decision:
    """Pick the cheapest safe path for `n_checks` status lookups.

    A valid cache is always free.  Otherwise forced modes win; in auto
    mode a batch of checks (or a CRL known to be small) favors a CRL
    download, while a single check against a large or unknown-size CRL
    favors OCSP.
    """
    if n_checks < 1:
        raise ValueError("n_checks must be at least 1")
    if cache_valid:
        return Decision.USE_CACHE
    if policy.mode is PolicyMode.FORCE_OCSP:
        return Decision.USE_OCSP
    if policy.mode is PolicyMode.FORCE_CRL:
        return Decision.USE_CRL_FETCH
    if n_checks >= policy.batch_min:
        return Decision.USE_CRL_FETCH
    if crl_record_count is None:
        return Decision.USE_OCSP
    if crl_record_count > policy.record_threshold:
        return Decision.USE_OCSP
    return Decision.USE_CRL_FETCH


@dataclass(frozen=True)
class Endpoints:
    ocsp_url: str
    crl_der_url: str
    crl_pem_url: str

    def crl_url(self, fmt: CrlFormat) -> str:
        return self.crl_der_url if fmt is CrlFormat.DER else self.crl_pem_url


@dataclass(frozen=True)
class StatusResult:
    """One answered status check with its cost accounting."""

    status: RevocationStatus
    source: Source
    bytes_used: int
    latency_ms: float
    stale: bool = False

    def to_dict(self) -> dict:
        return {
            "status": self.status.status.value,
            "revoked_at": (
                str(self.status.revoked_at) if self.status.revoked_at else None
            ),
            "reason": self.status.reason.flag if self.status.reason else None,
            "source": self.source.value,
            "bytes_used": self.bytes_used,
            "latency_ms": round(self.latency_ms, 3),
            "stale": self.stale,
        }


class AllPathsFailed(Exception):
    """OCSP and CRL were both unreachable and no cached CRL exists."""


class _PathFailure(Exception):
    """Internal: one network path failed; try the next one."""


@dataclass
class CrlCache:
    crl: CertificateRevocationList
    fetched_at_monotonic: float
    ttl_s: float
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {e.serial: e for e in self.crl.entries}

    def is_valid(self, now_monotonic: Optional[float] = None) -> bool:
        now_monotonic = time.monotonic() if now_monotonic is None else now_monotonic
        if now_monotonic >= self.fetched_at_monotonic + self.ttl_s:
            return False
        if self.crl.next_update is not None:
            if Asn1Time.now() >= self.crl.next_update:
                return False
        return True

    def lookup(self, serial: int) -> RevocationStatus:
        entry = self.index.get(serial)
        if entry is None:
            return RevocationStatus.good()
        return RevocationStatus.revoked(entry.revocation_date, entry.reason)


class HybridClient:
    """Revocation checker that mixes OCSP, CRL downloads and a CRL cache."""

    def __init__(
        self,
        endpoints: Endpoints,
        issuer: DistinguishedName,
        ca_public_key,
        policy: Optional[ClientPolicy] = None,
        *,
        crl_ttl_s: float = 3600.0,
        nonce_octets: int = ocsp.DEFAULT_NONCE_OCTETS,
    ):
        self.endpoints = endpoints
        self.issuer = issuer
        self.ca_public_key = ca_public_key
        self.policy = policy or ClientPolicy()
        self.crl_ttl_s = crl_ttl_s
        self.nonce_octets = nonce_octets
        self.hashes = ocsp.IssuerHashes(issuer, ca_public_key)
        self.cache: Optional[CrlCache] = None

    # -- decision inputs

    def _cache_state(self) -> tuple[Optional[int], bool]:
        if self.cache is None:
            return None, False
        return self.cache.crl.record_count, self.cache.is_valid()

    # -- network paths; each returns (status, bytes) or raises _PathFailure

    def _timeout_s(self) -> float:
        return self.policy.ocsp_timeout_ms / 1000.0

    def _ocsp_once(self, serial: int) -> tuple[RevocationStatus, int]:
        cert_id = self.hashes.cert_id(serial)
        nonce = os.urandom(self.nonce_octets)
        request = ocsp.OcspRequest((cert_id,), nonce)
        body = ocsp.encode_ocsp_request(request)
        try:
            reply = wire.exchange(
                self.endpoints.ocsp_url,
                method="POST",
                headers=[
                    ("Content-Type", REQUEST_CONTENT_TYPE),
                    ("Accept", RESPONSE_CONTENT_TYPE),
                ],
                body=body,
                timeout_s=self._timeout_s(),
            )
        except wire.TransportError as exc:
            raise _PathFailure(f"ocsp transport: {exc}") from exc
        if reply.status != 200:
            raise _PathFailure(f"ocsp status {reply.status}")
        try:
            response = ocsp.decode_ocsp_response(reply.body)
        except ocsp.MalformedOcsp as exc:
            raise _PathFailure(f"ocsp undecodable: {exc}") from exc
        if response.response_status is not ocsp.ResponseStatus.SUCCESSFUL:
            raise _PathFailure(f"ocsp said {response.response_status.name}")
        if not ocsp.verify_ocsp_response(response, self.ca_public_key):
            raise SignatureInvalid("OCSP response signature does not verify")
        if response.nonce != nonce:
            raise SignatureInvalid("OCSP response nonce does not match the request")
        single = response.result_for(serial)
        if single is None:
            raise _PathFailure("ocsp response does not answer the requested serial")
        return single.status, reply.total_bytes

    def _crl_fetch_once(self) -> tuple[CrlCache, int]:
        fmt = self.policy.preferred_crl_format
        url = self.endpoints.crl_url(fmt)
        try:
            reply = wire.exchange(url, timeout_s=self._timeout_s())
        except wire.TransportError as exc:
            raise _PathFailure(f"crl transport: {exc}") from exc
        if reply.status != 200:
            raise _PathFailure(f"crl status {reply.status}")
        try:
            if fmt is CrlFormat.PEM:
                crl = crl_from_pem(reply.body.decode("ascii", errors="replace"))
            else:
                crl = decode_crl_der(reply.body)
        except (MalformedCrl, BadArmor, DerError) as exc:
            raise _PathFailure(f"crl undecodable: {exc}") from exc
        if not verify_crl(crl, self.ca_public_key):
            raise SignatureInvalid("CRL signature does not verify")
        cache = CrlCache(crl, time.monotonic(), self.crl_ttl_s)
        self.cache = cache
        return cache, reply.total_bytes

    # -- public checks

    def check(self, serial: int) -> StatusResult:
        """Resolve one serial, falling back across paths as needed."""
        started = time.perf_counter()
        count, valid = self._cache_state()
        decision = choose_protocol(self.policy, 1, count, valid)
        if decision is Decision.USE_CACHE:
            status = self.cache.lookup(serial)
            return self._finish(status, Source.CRL_CACHE, 0, started)
        ocsp_first = decision is Decision.USE_OCSP
        return self._network_check(serial, started, ocsp_first=ocsp_first)

    def _network_check(
        self, serial: int, started: float, *, ocsp_first: bool
    ) -> StatusResult:
        paths = ("ocsp", "crl") if ocsp_first else ("crl", "ocsp")
        for path in paths:
            try:
                if path == "ocsp":
                    status, nbytes = self._ocsp_once(serial)
                    return self._finish(status, Source.OCSP, nbytes, started)
                cache, nbytes = self._crl_fetch_once()
                return self._finish(cache.lookup(serial), Source.CRL_FETCH, nbytes, started)
            except _PathFailure as exc:
                log.debug("path %s failed: %s", path, exc)
        if self.cache is not None:
            status = self.cache.lookup(serial)
            return self._finish(status, Source.CRL_CACHE, 0, started, stale=True)
        raise AllPathsFailed(f"no path could answer serial {serial:X}")

    def check_many(self, serials: Sequence[int]) -> list[StatusResult]:
        """Resolve a batch; a CRL decision costs one download for the lot."""
        if not serials:
            raise ValueError("empty batch")
        count, valid = self._cache_state()
        decision = choose_protocol(self.policy, len(serials), count, valid)
        if decision is Decision.USE_CACHE:
            results = []
            for serial in serials:
                started = time.perf_counter()
                results.append(
                    self._finish(self.cache.lookup(serial), Source.CRL_CACHE, 0, started)
                )
            return results
        if decision is Decision.USE_OCSP:
            return [self.check(serial) for serial in serials]
        started = time.perf_counter()
        try:
            cache, nbytes = self._crl_fetch_once()
        except _PathFailure:
            # CRL endpoint down: resolve each serial individually so the
            # usual per-check fallback (OCSP, then stale cache) applies.
            return [self.check(serial) for serial in serials]
        results = [
            self._finish(cache.lookup(serials[0]), Source.CRL_FETCH, nbytes, started)
        ]
        for serial in serials[1:]:
            one_start = time.perf_counter()
            results.append(
                self._finish(cache.lookup(serial), Source.CRL_CACHE, 0, one_start)
            )
        return results

    def _finish(
        self,
        status: RevocationStatus,
        source: Source,
        nbytes: int,
        started: float,
        stale: bool = False,
    ) -> StatusResult:
        latency_ms = (time.perf_counter() - started) * 1000.0
        return StatusResult(status, source, nbytes, latency_ms, stale)
