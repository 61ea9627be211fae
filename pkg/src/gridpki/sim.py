"""Fleet simulation, responder benchmark, and byte-cost measurement.

Three experiment drivers share one in-process harness (CA directory, CRL
server, revocation store, OCSP responder):

* `run_simulation` -- a fleet of meter threads checks random serials on a
  seeded open-loop schedule while outage windows make the OCSP endpoint
  refuse connections; every answer is validated against the ledger.
* `run_bench` -- concurrent workers drive the OCSP endpoint with valid
  requests and report wall-clock averages.
* `measure_bytes` -- builds CRLs of growing record counts and compares
  their DER/PEM sizes against one OCSP HTTP exchange, locating the record
  count where each CRL format becomes more expensive than OCSP.
"""

from __future__ import annotations

import json
import math
import os
import random
import shutil
import statistics
import tempfile
import threading
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from . import ca as camod
from . import ocsp, wire
from .client import (
    AllPathsFailed,
    ClientPolicy,
    Endpoints,
    HybridClient,
    Source,
)
from .crl import CrlReason, SignatureInvalid, crl_to_pem, encode_crl_der
from .der import Asn1Time
from .responder import REQUEST_CONTENT_TYPE, OcspHttpServer
from .store import RevocationStore, http_fetcher

# Serial pools: fleet serials are 8-octet values; the byte-measurement
# probe lives in a disjoint 7-octet range so it can never be revoked.
POOL_RANGE = (1 << 56, 1 << 64)
PROBE_RANGE = (1 << 48, 1 << 56)
PROBE_SERIAL = 0x5A5A5A5A5A5A5A

DEFAULT_OUTAGE_LEAD_S = 1.0


class EndpointUnavailable(Exception):
    """A required endpoint did not answer at startup."""


class TargetDown(Exception):
    """The benchmark target stopped answering."""


# --- shared in-process harness ----------------------------------------------


class LiveHarness:
    """Ephemeral CA + CRL server + store + OCSP server on loopback ports."""

    def __init__(
        self,
        *,
        n_serials: int = 1000,
        revoked_fraction: float = 0.1,
        rng_seed: int = 7,
        refresh_interval_s: float = camod.DEFAULT_REFRESH_INTERVAL_S,
        include_next_update: bool = True,
        issuer_text: str = camod.DEFAULT_ISSUER,
        key_bits: int = 2048,
        reason: CrlReason = CrlReason.KEY_COMPROMISE,
        start_refresh: bool = False,
    ):
        if not 0.0 <= revoked_fraction <= 1.0:
            raise ValueError("revoked_fraction must be within [0, 1]")
        self._tmpdir = tempfile.mkdtemp(prefix="gridpki-sim-")
        self.ctx = camod.init_ca_dir(self._tmpdir, issuer_text, key_bits)
        rng = random.Random(rng_seed)
        drawn: set[int] = set()
        while len(drawn) < n_serials:
            drawn.add(rng.randrange(*POOL_RANGE))
        self.pool: list[int] = sorted(drawn)
        rng.shuffle(self.pool)
        n_revoked = round(revoked_fraction * n_serials)
        self.revoked_serials = frozenset(self.pool[:n_revoked])
        now = Asn1Time.now()
        for serial in self.pool[:n_revoked]:
            self.ctx.ledger.revoke(serial, reason, at=now)

        self.crl_server = camod.CrlHttpServer(
            self.ctx.ledger,
            self.ctx.signer,
            refresh_interval_s=refresh_interval_s,
            include_next_update=include_next_update,
        )
        self.crl_server.start()
        self.store = RevocationStore(
            http_fetcher(self.crl_server.url("/crl.der")),
            self.ctx.signer.public_key,
            refresh_interval_s=refresh_interval_s,
        )
        self.store.refresh()
        self.responder = ocsp.OcspResponder(
            self.ctx.issuer, self.ctx.signer.public_key, self.ctx.signer, self.store
        )
        self.ocsp_server = OcspHttpServer(self.responder)
        self.ocsp_server.start()
        if start_refresh:
            self.store.start(initial_refresh=False)

    @property
    def endpoints(self) -> Endpoints:
        return Endpoints(
            self.ocsp_server.url(),
            self.crl_server.url("/crl.der"),
            self.crl_server.url("/crl.pem"),
        )

    def probe(self) -> None:
        """Raise EndpointUnavailable unless both endpoints answer."""
        try:
            crl_reply = wire.exchange(self.endpoints.crl_der_url, timeout_s=5)
        except wire.TransportError as exc:
            raise EndpointUnavailable(f"CRL endpoint: {exc}") from exc
        if crl_reply.status != 200:
            raise EndpointUnavailable(f"CRL endpoint returned {crl_reply.status}")
        hashes = ocsp.IssuerHashes(self.ctx.issuer, self.ctx.signer.public_key)
        body = ocsp.encode_ocsp_request(
            ocsp.OcspRequest((hashes.cert_id(PROBE_SERIAL),), os.urandom(16))
        )
        try:
            ocsp_reply = wire.exchange(
                self.endpoints.ocsp_url,
                method="POST",
                headers=[("Content-Type", REQUEST_CONTENT_TYPE)],
                body=body,
                timeout_s=5,
            )
        except wire.TransportError as exc:
            raise EndpointUnavailable(f"OCSP endpoint: {exc}") from exc
        if ocsp_reply.status != 200:
            raise EndpointUnavailable(f"OCSP endpoint returned {ocsp_reply.status}")

    def close(self) -> None:
        self.store.stop()
        self.ocsp_server.stop()
        self.crl_server.stop()
        shutil.rmtree(self._tmpdir, ignore_errors=True)

    def __enter__(self) -> "LiveHarness":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class OutageController:
    """Closes and reopens the OCSP listener around scheduled windows.

    The listener is closed `lead_s` before each nominal window start so
    that no in-flight exchange begun just before the window can straggle
    to completion inside it; it reopens exactly at the nominal end.
    """

    def __init__(
        self,
        server: OcspHttpServer,
        windows: Sequence[tuple[float, float]],
        t0_monotonic: float,
        lead_s: float = DEFAULT_OUTAGE_LEAD_S,
    ):
        self.server = server
        self.windows = sorted(windows)
        self.t0 = t0_monotonic
        self.lead_s = lead_s
        self.spans: list[tuple[float, float]] = []
        self._thread: Optional[threading.Thread] = None

    def _elapsed(self) -> float:
        return time.monotonic() - self.t0

    def _sleep_until(self, when: float) -> None:
        delay = when - self._elapsed()
        if delay > 0:
            time.sleep(delay)

    def _run(self) -> None:
        for start, end in self.windows:
            self._sleep_until(max(0.0, start - self.lead_s))
            closed_at = self._elapsed()
            self.server.pause()
            self._sleep_until(end)
            self.server.resume()
            self.spans.append((closed_at, self._elapsed()))

    def start(self) -> None:
        if not self.windows:
            return
        self._thread = threading.Thread(
            target=self._run, name="outage-controller", daemon=True
        )
        self._thread.start()

    def join(self) -> None:
        if self._thread is not None:
            self._thread.join()


# --- fleet simulation -------------------------------------------------------


@dataclass
class SimConfig:
    n_meters: int = 100
    request_rate_per_meter_hz: float = 0.5
    duration_s: float = 60.0
    outage_windows: tuple[tuple[float, float], ...] = ()
    revoked_fraction: float = 0.1
    rng_seed: int = 7
    policy: ClientPolicy = field(default_factory=ClientPolicy)
    n_serials: int = 1000
    crl_ttl_s: float = 30.0

    def __post_init__(self):
        if self.n_meters < 1:
            raise ValueError("need at least one meter")
        if self.request_rate_per_meter_hz <= 0:
            raise ValueError("rate must be positive")
        if not 0.0 <= self.revoked_fraction <= 1.0:
            raise ValueError("revoked_fraction must be within [0, 1]")
        windows = tuple(sorted(tuple(w) for w in self.outage_windows))
        last_end = 0.0
        for start, end in windows:
            if not 0.0 <= start < end <= self.duration_s:
                raise ValueError(f"window {start, end} outside [0, {self.duration_s}]")
            if start < last_end:
                raise ValueError("outage windows overlap")
            last_end = end
        self.outage_windows = windows


@dataclass(frozen=True)
class CheckRecord:
    meter_id: int
    serial: int
    t_start: float
    t_end: float
    status: Optional[str]
    source: Optional[str]
    bytes_used: int
    stale: bool
    correct: bool
    error: Optional[str] = None

    @property
    def answered(self) -> bool:
        return self.error is None

    @property
    def latency_ms(self) -> float:
        return (self.t_end - self.t_start) * 1000.0

    def to_dict(self) -> dict:
        return {
            "meter_id": self.meter_id,
            "serial": f"{self.serial:X}",
            "t_start": round(self.t_start, 6),
            "t_end": round(self.t_end, 6),
            "status": self.status,
            "source": self.source,
            "bytes_used": self.bytes_used,
            "stale": self.stale,
            "correct": self.correct,
            "error": self.error,
        }


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    p50: float
    p99: float

    @classmethod
    def of(cls, values_ms: Sequence[float]) -> "LatencyStats":
        if not values_ms:
            return cls(0.0, 0.0, 0.0)
        ordered = sorted(values_ms)

        def rank(q: float) -> float:
            return ordered[min(len(ordered) - 1, math.ceil(q * len(ordered)) - 1)]

        return cls(statistics.fmean(ordered), rank(0.50), rank(0.99))

    def to_dict(self) -> dict:
        return {
            "mean": round(self.mean, 3),
            "p50": round(self.p50, 3),
            "p99": round(self.p99, 3),
        }


@dataclass
class SimReport:
    config: SimConfig
    total_checks: int
    correct_checks: int
    failures: int
    latency_ms: LatencyStats
    bytes_by_source: dict[str, int]
    source_counts: dict[str, int]
    outage_spans: tuple[tuple[float, float], ...]
    records: list[CheckRecord]

    @property
    def all_correct(self) -> bool:
        return self.failures == 0 and self.correct_checks == self.total_checks

    def to_dict(self, include_records: bool = False) -> dict:
        payload = {
            "n_meters": self.config.n_meters,
            "duration_s": self.config.duration_s,
            "rng_seed": self.config.rng_seed,
            "total_checks": self.total_checks,
            "correct_checks": self.correct_checks,
            "failures": self.failures,
            "latency_ms": self.latency_ms.to_dict(),
            "bytes_by_source": dict(self.bytes_by_source),
            "source_counts": dict(self.source_counts),
            "outage_spans": [list(s) for s in self.outage_spans],
        }
        if include_records:
            payload["records"] = [r.to_dict() for r in self.records]
        return payload


def _meter_schedule(
    rng: random.Random, rate_hz: float, duration_s: float
) -> list[float]:
    """Open-loop fire times: fixed cadence with a seeded phase and jitter."""
    period = 1.0 / rate_hz
    phase = rng.uniform(0.0, period)
    times = []
    k = 0
    while True:
        t = phase + k * period + rng.uniform(-0.05, 0.05) * period
        if t >= duration_s:
            break
        times.append(max(0.0, t))
        k += 1
    return times


def _meter_worker(
    meter_id: int,
    schedule: Sequence[float],
    serials: Sequence[int],
    client: HybridClient,
    t0: float,
    revoked: frozenset[int],
    out: list[CheckRecord],
) -> None:
    for fire_at, serial in zip(schedule, serials):
        delay = t0 + fire_at - time.monotonic()
        if delay > 0:
            time.sleep(delay)
        t_start = time.monotonic() - t0
        try:
            result = client.check(serial)
        except (AllPathsFailed, SignatureInvalid) as exc:
            out.append(
                CheckRecord(
                    meter_id, serial, t_start, time.monotonic() - t0,
                    None, None, 0, False, False, type(exc).__name__,
                )
            )
            continue
        t_end = time.monotonic() - t0
        correct = result.status.is_revoked == (serial in revoked)
        out.append(
            CheckRecord(
                meter_id, serial, t_start, t_end,
                result.status.status.value, result.source.value,
                result.bytes_used, result.stale, correct,
            )
        )


def run_simulation(
    config: SimConfig, harness: Optional[LiveHarness] = None
) -> SimReport:
    """Drive a meter fleet against live endpoints and score every answer."""
    own_harness = harness is None
    if own_harness:
        harness = LiveHarness(
            n_serials=config.n_serials,
            revoked_fraction=config.revoked_fraction,
            rng_seed=config.rng_seed,
        )
    try:
        harness.probe()
        eps = harness.endpoints
        master = random.Random(config.rng_seed)
        meter_seeds = [master.randrange(1 << 62) for _ in range(config.n_meters)]
        plans = []
        for meter_id, seed in enumerate(meter_seeds):
            rng = random.Random(seed)
            schedule = _meter_schedule(
                rng, config.request_rate_per_meter_hz, config.duration_s
            )
            serials = [rng.choice(harness.pool) for _ in schedule]
            plans.append((meter_id, schedule, serials))

        per_meter_records: list[list[CheckRecord]] = [[] for _ in plans]
        t0 = time.monotonic()
        controller = OutageController(harness.ocsp_server, config.outage_windows, t0)
        controller.start()
        threads = []
        for meter_id, schedule, serials in plans:
            client = HybridClient(
                eps,
                harness.ctx.issuer,
                harness.ctx.signer.public_key,
                replace(config.policy),
                crl_ttl_s=config.crl_ttl_s,
            )
            thread = threading.Thread(
                target=_meter_worker,
                args=(
                    meter_id, schedule, serials, client, t0,
                    harness.revoked_serials, per_meter_records[meter_id],
                ),
                name=f"meter-{meter_id}",
                daemon=True,
            )
            threads.append(thread)
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        controller.join()

        records = sorted(
            (r for bucket in per_meter_records for r in bucket),
            key=lambda r: (r.t_start, r.meter_id),
        )
        answered = [r for r in records if r.answered]
        bytes_by_source = {Source.OCSP.value: 0, Source.CRL_FETCH.value: 0}
        source_counts = {s.value: 0 for s in Source}
        for r in answered:
            source_counts[r.source] += 1
            if r.source in bytes_by_source:
                bytes_by_source[r.source] += r.bytes_used
        return SimReport(
            config=config,
            total_checks=len(records),
            correct_checks=sum(1 for r in answered if r.correct),
            failures=len(records) - len(answered),
            latency_ms=LatencyStats.of([r.latency_ms for r in answered]),
            bytes_by_source=bytes_by_source,
            source_counts=source_counts,
            outage_spans=tuple(controller.spans),
            records=records,
        )
    finally:
        if own_harness:
            harness.close()


def render_sim_report(report: SimReport) -> str:
    lines = [
        f"meters {report.config.n_meters}  duration {report.config.duration_s:g}s"
        f"  seed {report.config.rng_seed}",
        f"checks: total {report.total_checks}  correct {report.correct_checks}"
        f"  failures {report.failures}",
        (
            f"latency ms: mean {report.latency_ms.mean:.2f}"
            f"  p50 {report.latency_ms.p50:.2f}  p99 {report.latency_ms.p99:.2f}"
        ),
        "source counts: "
        + "  ".join(f"{k} {v}" for k, v in sorted(report.source_counts.items())),
        "bytes by source: "
        + "  ".join(f"{k} {v}" for k, v in sorted(report.bytes_by_source.items())),
    ]
    if report.outage_spans:
        spans = "  ".join(f"[{a:.2f}, {b:.2f}]" for a, b in report.outage_spans)
        lines.append(f"ocsp listener closed during: {spans}")
    lines.append("result: " + ("all correct" if report.all_correct else "MISMATCHES"))
    return "\n".join(lines)


# --- responder benchmark ----------------------------------------------------


@dataclass(frozen=True)
class BenchReport:
    n_requests: int
    concurrency: int
    total_time_s: float
    avg_request_s: float
    throughput_rps: float
    keepalive: bool

    def to_dict(self) -> dict:
        return {
            "n_requests": self.n_requests,
            "concurrency": self.concurrency,
            "total_time_s": round(self.total_time_s, 4),
            "avg_request_s": round(self.avg_request_s, 6),
            "throughput_rps": round(self.throughput_rps, 2),
            "keepalive": self.keepalive,
        }


def _bench_worker(
    url: str,
    bodies: Sequence[bytes],
    keepalive: bool,
    verify_every: int,
    failures: list[str],
) -> None:
    headers = [("Content-Type", REQUEST_CONTENT_TYPE)]
    try:
        if keepalive:
            host, port, path = wire.split_url(url)
            with wire.HttpConnection(host, port, timeout_s=30) as conn:
                for i, body in enumerate(bodies):
                    reply = conn.request("POST", path, headers=headers, body=body)
                    _bench_check(reply, i, verify_every, failures)
        else:
            for i, body in enumerate(bodies):
                reply = wire.exchange(
                    url, method="POST", headers=headers, body=body, timeout_s=30
                )
                _bench_check(reply, i, verify_every, failures)
    except wire.TransportError as exc:
        failures.append(f"transport: {exc}")


def _bench_check(
    reply: wire.HttpReply, index: int, verify_every: int, failures: list[str]
) -> None:
    if reply.status != 200:
        failures.append(f"http {reply.status}")
        return
    if verify_every and index % verify_every == 0:
        decoded = ocsp.decode_ocsp_response(reply.body)
        if decoded.response_status is not ocsp.ResponseStatus.SUCCESSFUL:
            failures.append(f"ocsp {decoded.response_status.name}")


def run_bench(
    n_requests: int,
    concurrency: int,
    target_url: str,
    *,
    issuer,
    ca_public_key,
    serial_pool: Sequence[int],
    keepalive: bool = True,
    rng_seed: int = 7,
    verify_every: int = 100,
) -> BenchReport:
    """Send exactly `n_requests` OCSP requests, split across workers."""
    if n_requests < 1 or concurrency < 1:
        raise ValueError("n_requests and concurrency must be positive")
    hashes = ocsp.IssuerHashes(issuer, ca_public_key)
    rng = random.Random(rng_seed)
    bodies = [
        ocsp.encode_ocsp_request(
            ocsp.OcspRequest(
                (hashes.cert_id(rng.choice(serial_pool)),),
                rng.randbytes(ocsp.DEFAULT_NONCE_OCTETS),
            )
        )
        for _ in range(n_requests)
    ]
    try:
        probe = wire.exchange(
            target_url,
            method="POST",
            headers=[("Content-Type", REQUEST_CONTENT_TYPE)],
            body=bodies[0],
            timeout_s=10,
        )
    except wire.TransportError as exc:
        raise TargetDown(f"benchmark target unreachable: {exc}") from exc
    if probe.status != 200:
        raise TargetDown(f"benchmark target returned {probe.status}")

    base, extra = divmod(n_requests, concurrency)
    shares = []
    cursor = 0
    for w in range(concurrency):
        take = base + (1 if w < extra else 0)
        shares.append(bodies[cursor : cursor + take])
        cursor += take
    failures: list[str] = []
    threads = [
        threading.Thread(
            target=_bench_worker,
            args=(target_url, share, keepalive, verify_every, failures),
            name=f"bench-{w}",
            daemon=True,
        )
        for w, share in enumerate(shares)
        if share
    ]
    started = time.perf_counter()
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    total_time_s = time.perf_counter() - started
    if failures:
        raise TargetDown(f"{len(failures)} benchmark requests failed: {failures[0]}")
    return BenchReport(
        n_requests=n_requests,
        concurrency=concurrency,
        total_time_s=total_time_s,
        avg_request_s=total_time_s / n_requests,
        throughput_rps=n_requests / total_time_s,
        keepalive=keepalive,
    )


def render_bench_report(report: BenchReport) -> str:
    mode = "keep-alive" if report.keepalive else "one connection per request"
    return "\n".join(
        [
            f"requests {report.n_requests}  concurrency {report.concurrency}  ({mode})",
            f"total time      {report.total_time_s:.3f} s",
            f"avg per request {report.avg_request_s:.6f} s",
            f"throughput      {report.throughput_rps:.1f} req/s",
        ]
    )


# --- byte-cost measurement --------------------------------------------------


@dataclass(frozen=True)
class MeasureRow:
    record_count: int
    der_bytes: int
    pem_bytes: int
    ocsp_aggregate_bytes: int

    def to_dict(self) -> dict:
        return {
            "record_count": self.record_count,
            "der_bytes": self.der_bytes,
            "pem_bytes": self.pem_bytes,
            "ocsp_aggregate_bytes": self.ocsp_aggregate_bytes,
        }


@dataclass(frozen=True)
class MeasureReport:
    rows: tuple[MeasureRow, ...]
    crossover_der: Optional[int]
    crossover_pem: Optional[int]

    def to_dict(self) -> dict:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "crossover_der": self.crossover_der,
            "crossover_pem": self.crossover_pem,
        }


@dataclass(frozen=True)
class MeasureParams:
    issuer_text: str = camod.DEFAULT_ISSUER
    key_bits: int = 2048
    reason: CrlReason = CrlReason.KEY_COMPROMISE
    rng_seed: int = 7
    probe_serial: int = PROBE_SERIAL


def measure_bytes(
    record_counts: Sequence[int], ca_params: Optional[MeasureParams] = None
) -> MeasureReport:
    """Size CRLs at each record count against one OCSP exchange.

    Rows are produced in ascending record-count order from one growing
    entry list, so each CRL strictly contains the previous one.  The OCSP
    exchange always queries the same never-revoked probe serial against a
    single reused responder, keeping its cost independent of CRL size.
    The reported crossovers are the smallest *sampled* counts whose CRL
    exceeds the OCSP aggregate; a unit-stride range makes them exact.
    """
    params = ca_params or MeasureParams()
    counts = sorted(set(int(c) for c in record_counts))
    if not counts or counts[0] < 0:
        raise ValueError("record_counts must be non-negative and non-empty")
    with LiveHarness(
        n_serials=max(counts) or 1,
        revoked_fraction=0.0,
        rng_seed=params.rng_seed,
        issuer_text=params.issuer_text,
        key_bits=params.key_bits,
    ) as harness:
        harness.probe()
        hashes = ocsp.IssuerHashes(harness.ctx.issuer, harness.ctx.signer.public_key)
        rng = random.Random(params.rng_seed)
        issued_at = Asn1Time.now()
        entry_serials = list(harness.pool)
        rows = []
        for n in counts:
            while len(harness.ctx.ledger) < n:
                harness.ctx.ledger.revoke(
                    entry_serials[len(harness.ctx.ledger)], params.reason, at=issued_at
                )
            crl = camod.issue_crl(harness.ctx.ledger, harness.ctx.signer, now=issued_at)
            der = encode_crl_der(crl)
            pem = crl_to_pem(crl).encode("ascii")
            harness.store.install_crl(crl)
            request = ocsp.encode_ocsp_request(
                ocsp.OcspRequest(
                    (hashes.cert_id(params.probe_serial),),
                    rng.randbytes(ocsp.DEFAULT_NONCE_OCTETS),
                )
            )
            reply = wire.exchange(
                harness.endpoints.ocsp_url,
                method="POST",
                headers=[("Content-Type", REQUEST_CONTENT_TYPE)],
                body=request,
                timeout_s=10,
            )
            if reply.status != 200:
                raise EndpointUnavailable(f"OCSP endpoint returned {reply.status}")
            response = ocsp.decode_ocsp_response(reply.body)
            if response.response_status is not ocsp.ResponseStatus.SUCCESSFUL:
                raise EndpointUnavailable(
                    f"OCSP endpoint said {response.response_status.name}"
                )
            rows.append(MeasureRow(n, len(der), len(pem), reply.total_bytes))

    def crossover(size_of) -> Optional[int]:
        for row in rows:
            if size_of(row) > row.ocsp_aggregate_bytes:
                return row.record_count
        return None

    return MeasureReport(
        rows=tuple(rows),
        crossover_der=crossover(lambda r: r.der_bytes),
        crossover_pem=crossover(lambda r: r.pem_bytes),
    )


def render_measure_report(report: MeasureReport) -> str:
    header = f"{'records':>8}  {'der_bytes':>10}  {'pem_bytes':>10}  {'ocsp_bytes':>10}"
    lines = [header, "-" * len(header)]
    for row in report.rows:
        lines.append(
            f"{row.record_count:>8}  {row.der_bytes:>10}  {row.pem_bytes:>10}"
            f"  {row.ocsp_aggregate_bytes:>10}"
        )

    def fmt(value: Optional[int]) -> str:
        return str(value) if value is not None else "beyond sampled range"

    lines.append(f"crossover (DER CRL > OCSP): {fmt(report.crossover_der)} records")
    lines.append(f"crossover (PEM CRL > OCSP): {fmt(report.crossover_pem)} records")
    return "\n".join(lines)


def write_json_report(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
