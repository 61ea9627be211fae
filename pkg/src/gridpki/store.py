"""CRL-derived revocation blacklist with scheduled, fault-tolerant refresh.

A store holds an immutable snapshot built from a signature-verified CRL.
Refreshing swaps the snapshot atomically; when a refresh fails the previous
snapshot keeps serving and a staleness metric grows until a fetch succeeds
again.
"""

from __future__ import annotations

import logging
import random
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Callable, Mapping, Optional

from .crl import (
    CertificateRevocationList,
    CrlReason,
    DistinguishedName,
    MalformedCrl,
    SignatureInvalid,
    UnsupportedAlgorithm,
    decode_crl_der,
    verify_crl,
)
from .der import Asn1Time, DerError

log = logging.getLogger("gridpki.store")

DEFAULT_REFRESH_INTERVAL_S = 3600.0
DEFAULT_JITTER_FRACTION = 0.1


class CertStatus(str, Enum):
    GOOD = "good"
    REVOKED = "revoked"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class RevocationStatus:
    """Outcome of a revocation check for one serial."""

    status: CertStatus
    revoked_at: Optional[Asn1Time] = None
    reason: Optional[CrlReason] = None

    @classmethod
    def good(cls) -> "RevocationStatus":
        return cls(CertStatus.GOOD)

    @classmethod
    def unknown(cls) -> "RevocationStatus":
        return cls(CertStatus.UNKNOWN)

    @classmethod
    def revoked(cls, at: Asn1Time, reason: Optional[CrlReason]) -> "RevocationStatus":
        return cls(CertStatus.REVOKED, at, reason)

    @property
    def is_revoked(self) -> bool:
        return self.status is CertStatus.REVOKED


class NoSnapshotYet(Exception):
    """Lookup attempted before the first successful CRL load."""


class FetchFailure(Exception):
    """The CRL could not be fetched from its distribution point."""


@dataclass(frozen=True)
class StoreSnapshot:
    """Immutable lookup table derived from one verified CRL."""

    issuer: DistinguishedName
    revoked: Mapping[int, tuple[Asn1Time, Optional[CrlReason]]]
    source_this_update: Asn1Time
    loaded_at: float  # monotonic seconds
    record_count: int = field(default=0)

    def lookup(self, serial: int) -> RevocationStatus:
        hit = self.revoked.get(serial)
        if hit is None:
            return RevocationStatus.good()
        return RevocationStatus.revoked(hit[0], hit[1])


def snapshot_from_crl(
    crl: CertificateRevocationList,
    ca_public_key,
    loaded_at: Optional[float] = None,
) -> StoreSnapshot:
    """Verify the CRL signature and flatten it into a snapshot.

    Raises SignatureInvalid rather than ever building a snapshot from an
    unverified list.
    """
    if not verify_crl(crl, ca_public_key):
        raise SignatureInvalid("CRL signature does not verify against the CA key")
    table = {e.serial: (e.revocation_date, e.reason) for e in crl.entries}
    return StoreSnapshot(
        issuer=crl.issuer,
        revoked=MappingProxyType(table),
        source_this_update=crl.this_update,
        loaded_at=time.monotonic() if loaded_at is None else loaded_at,
        record_count=len(table),
    )


def http_fetcher(url: str, timeout_s: float = 10.0) -> Callable[[], bytes]:
    """Fetcher that GETs a DER CRL from `url`."""

    def fetch() -> bytes:
        try:
            with urllib.request.urlopen(url, timeout=timeout_s) as response:
                if response.status != 200:
                    raise FetchFailure(f"GET {url} -> {response.status}")
                return response.read()
        except FetchFailure:
            raise
        except Exception as exc:
            raise FetchFailure(f"GET {url} failed: {exc}") from exc

    return fetch


class RevocationStore:
    """Blacklist with O(1) lookups and background refresh.

    Readers never block on refresh: the current snapshot reference is
    replaced in a single assignment, so any in-flight lookup sees either
    the old or the new table, never a mixture.
    """

    def __init__(
        self,
        fetcher: Optional[Callable[[], bytes]],
        ca_public_key,
        *,
        refresh_interval_s: float = DEFAULT_REFRESH_INTERVAL_S,
        jitter_fraction: float = DEFAULT_JITTER_FRACTION,
        max_staleness_s: Optional[float] = None,
        known_serials: Optional[frozenset] = None,
        rng: Optional[random.Random] = None,
    ):
        if refresh_interval_s <= 0:
            raise ValueError("refresh interval must be positive")
        if not 0 <= jitter_fraction < 1:
            raise ValueError("jitter fraction must be in [0, 1)")
        self.fetcher = fetcher
        self.ca_public_key = ca_public_key
        self.refresh_interval_s = refresh_interval_s
        self.jitter_fraction = jitter_fraction
        self.max_staleness_s = max_staleness_s
        # Optional strict mode: serials outside this issued set answer
        # Unknown instead of Good.  Off (None) by default: the blacklist
        # alone decides, and anything not on it is Good.
        self.known_serials = (
            None if known_serials is None else frozenset(known_serials)
        )
        self._rng = rng or random.Random()
        self._snapshot: Optional[StoreSnapshot] = None
        self._refresh_lock = threading.Lock()
        self._stop: Optional[threading.Event] = None
        self._thread: Optional[threading.Thread] = None
        self.refresh_successes = 0
        self.refresh_failures = 0
        self.last_error: Optional[str] = None

    @property
    def snapshot(self) -> Optional[StoreSnapshot]:
        return self._snapshot

    def install_crl(self, crl: CertificateRevocationList) -> StoreSnapshot:
        """Verify and install an in-process CRL (no fetch involved)."""
        snapshot = snapshot_from_crl(crl, self.ca_public_key)
        self._snapshot = snapshot
        return snapshot

    def refresh(self) -> bool:
        """Fetch, verify and swap in a new snapshot; False on failure.

        A failed refresh leaves the previous snapshot serving.
        """
        with self._refresh_lock:
            try:
                if self.fetcher is None:
                    raise FetchFailure("no fetcher configured")
                data = self.fetcher()
                crl = decode_crl_der(data)
                snapshot = snapshot_from_crl(crl, self.ca_public_key)
            except (FetchFailure, MalformedCrl, DerError,
                    SignatureInvalid, UnsupportedAlgorithm) as exc:
                self.refresh_failures += 1
                self.last_error = f"{type(exc).__name__}: {exc}"
                log.warning("refresh failed, serving stale snapshot: %s", exc)
                return False
            self._snapshot = snapshot
            self.refresh_successes += 1
            self.last_error = None
            log.debug("refreshed snapshot: %d records", snapshot.record_count)
            return True

    def lookup(self, serial: int) -> RevocationStatus:
        snapshot = self._snapshot
        if snapshot is None:
            raise NoSnapshotYet("no CRL has been loaded yet")
        if (
            self.max_staleness_s is not None
            and time.monotonic() - snapshot.loaded_at > self.max_staleness_s
        ):
            return RevocationStatus.unknown()
        status = snapshot.lookup(serial)
        if (
            self.known_serials is not None
            and not status.is_revoked
            and serial not in self.known_serials
        ):
            return RevocationStatus.unknown()
        return status

    def staleness(self, now: Optional[float] = None) -> float:
        """Seconds since the current snapshot was loaded."""
        snapshot = self._snapshot
        if snapshot is None:
            raise NoSnapshotYet("no CRL has been loaded yet")
        return (time.monotonic() if now is None else now) - snapshot.loaded_at

    def metrics(self) -> dict:
        snapshot = self._snapshot
        return {
            "records": snapshot.record_count if snapshot else None,
            "staleness_s": None if snapshot is None else round(self.staleness(), 3),
            "refresh_successes": self.refresh_successes,
            "refresh_failures": self.refresh_failures,
            "last_error": self.last_error,
        }

    def _next_delay(self) -> float:
        jitter = self.jitter_fraction
        return self.refresh_interval_s * (1 + self._rng.uniform(-jitter, jitter))

    def start(self, *, initial_refresh: bool = True) -> None:
        """Begin refreshing on a jittered schedule in a daemon thread."""
        if self._thread is not None:
            raise RuntimeError("refresh thread already running")
        if initial_refresh:
            self.refresh()
        self._stop = threading.Event()

        def loop():
            while not self._stop.wait(self._next_delay()):
                self.refresh()

        self._thread = threading.Thread(target=loop, name="store-refresh", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        if self._stop is not None:
            self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
            self._stop = None
