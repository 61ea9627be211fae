"""Verified snapshot store: refresh, stale-serve, staleness, concurrency."""

import random
import threading
import time

import pytest

from gridpki import ca as camod
from gridpki.crl import (
    CrlReason,
    RevokedEntry,
    SignatureInvalid,
    build_crl,
    encode_crl_der,
)
from gridpki.der import Asn1Time
from gridpki.store import (
    CertStatus,
    FetchFailure,
    NoSnapshotYet,
    RevocationStore,
    http_fetcher,
    snapshot_from_crl,
)

T0 = Asn1Time(1683230247)


def crl_bytes(signer, issuer, serials, when=T0):
    entries = [RevokedEntry(s, when, CrlReason.KEY_COMPROMISE) for s in serials]
    return encode_crl_der(build_crl(issuer, entries, when, when.plus(3600), signer))


class TestSnapshot:
    def test_built_only_from_verified_bytes(self, signer, other_signer, issuer):
        blob = crl_bytes(signer, issuer, [5, 6])
        from gridpki.crl import decode_crl_der

        crl = decode_crl_der(blob)
        snapshot = snapshot_from_crl(crl, signer.public_key)
        assert snapshot.record_count == 2
        with pytest.raises(SignatureInvalid):
            snapshot_from_crl(crl, other_signer.public_key)

    def test_lookup_semantics(self, signer, issuer):
        from gridpki.crl import decode_crl_der

        crl = decode_crl_der(crl_bytes(signer, issuer, [5]))
        snapshot = snapshot_from_crl(crl, signer.public_key)
        revoked = snapshot.lookup(5)
        assert revoked.status is CertStatus.REVOKED
        assert revoked.revoked_at == T0
        assert revoked.reason is CrlReason.KEY_COMPROMISE
        assert snapshot.lookup(6).status is CertStatus.GOOD

    def test_mapping_is_immutable(self, signer, issuer):
        from gridpki.crl import decode_crl_der

        crl = decode_crl_der(crl_bytes(signer, issuer, [5]))
        snapshot = snapshot_from_crl(crl, signer.public_key)
        with pytest.raises(TypeError):
            snapshot.revoked[6] = None  # type: ignore[index]

    def test_strict_issued_set_mode(self, signer, issuer):
        from gridpki.crl import decode_crl_der

        crl = decode_crl_der(crl_bytes(signer, issuer, [5]))
        strict = RevocationStore(
            None, signer.public_key, known_serials={5, 6}
        )
        strict.install_crl(crl)
        assert strict.lookup(5).status is CertStatus.REVOKED
        assert strict.lookup(6).status is CertStatus.GOOD
        assert strict.lookup(7).status is CertStatus.UNKNOWN

        default = RevocationStore(None, signer.public_key)
        default.install_crl(crl)
        assert default.lookup(7).status is CertStatus.GOOD


class _ScriptedFetcher:
    """Returns queued bodies; raises when a queued item is an exception."""

    def __init__(self, *items):
        self.items = list(items)
        self.calls = 0

    def __call__(self):
        self.calls += 1
        if not self.items:
            raise FetchFailure("queue exhausted")
        item = self.items.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class TestRefresh:
    def test_no_snapshot_yet(self, signer):
        store = RevocationStore(_ScriptedFetcher(), signer.public_key)
        with pytest.raises(NoSnapshotYet):
            store.lookup(5)

    def test_refresh_installs_verified_snapshot(self, signer, issuer):
        fetcher = _ScriptedFetcher(crl_bytes(signer, issuer, [5]))
        store = RevocationStore(fetcher, signer.public_key)
        assert store.refresh() is True
        assert store.lookup(5).status is CertStatus.REVOKED
        assert store.lookup(6).status is CertStatus.GOOD
        assert store.refresh_successes == 1

    def test_bad_signature_keeps_old_snapshot(self, signer, other_signer, issuer):
        good = crl_bytes(signer, issuer, [5])
        forged = crl_bytes(other_signer, issuer, [5, 6])
        store = RevocationStore(_ScriptedFetcher(good, forged), signer.public_key)
        assert store.refresh() is True
        assert store.refresh() is False
        assert store.lookup(6).status is CertStatus.GOOD  # still the old view
        assert store.refresh_failures == 1
        assert "SignatureInvalid" in store.last_error

    def test_malformed_body_keeps_old_snapshot(self, signer, issuer):
        good = crl_bytes(signer, issuer, [5])
        store = RevocationStore(
            _ScriptedFetcher(good, b"junk", FetchFailure("down")),
            signer.public_key,
        )
        assert store.refresh() is True
        assert store.refresh() is False
        assert store.refresh() is False
        assert store.lookup(5).status is CertStatus.REVOKED
        assert store.refresh_failures == 2

    def test_fetch_failure_with_no_snapshot_stays_empty(self, signer):
        store = RevocationStore(
            _ScriptedFetcher(FetchFailure("down")), signer.public_key
        )
        assert store.refresh() is False
        with pytest.raises(NoSnapshotYet):
            store.lookup(5)

    def test_staleness_grows_until_next_success(self, signer, issuer):
        good = crl_bytes(signer, issuer, [5])
        store = RevocationStore(
            _ScriptedFetcher(good, FetchFailure("down"), good), signer.public_key
        )
        store.refresh()
        first = store.staleness()
        time.sleep(0.05)
        store.refresh()  # fails; snapshot unchanged
        assert store.staleness() >= first + 0.05
        store.refresh()  # succeeds; clock resets
        assert store.staleness() < 0.05

    def test_max_staleness_degrades_to_unknown(self, signer, issuer):
        store = RevocationStore(
            _ScriptedFetcher(crl_bytes(signer, issuer, [5])),
            signer.public_key,
            max_staleness_s=0.02,
        )
        store.refresh()
        assert store.lookup(5).status is CertStatus.REVOKED
        time.sleep(0.05)
        assert store.lookup(5).status is CertStatus.UNKNOWN

    def test_metrics_shape(self, signer, issuer):
        store = RevocationStore(
            _ScriptedFetcher(crl_bytes(signer, issuer, [5])), signer.public_key
        )
        store.refresh()
        metrics = store.metrics()
        assert metrics["records"] == 1
        assert metrics["refresh_successes"] == 1
        assert metrics["refresh_failures"] == 0
        assert metrics["last_error"] is None
        assert metrics["staleness_s"] >= 0


class TestOracleEquivalence:
    def test_randomized_bulk_membership(self, signer, issuer):
        rng = random.Random(17)
        universe = rng.sample(range(1, 1 << 48), 4000)
        revoked = set(universe[:1500])
        store = RevocationStore(
            _ScriptedFetcher(crl_bytes(signer, issuer, sorted(revoked))),
            signer.public_key,
        )
        store.refresh()
        mismatches = [
            s
            for s in universe
            if (store.lookup(s).status is CertStatus.REVOKED) != (s in revoked)
        ]
        assert mismatches == []


class TestConcurrency:
    def test_readers_never_see_mixed_state(self, signer, issuer):
        # Alternate between two disjoint blacklists; any single snapshot a
        # reader grabs must be entirely one or entirely the other.
        a = crl_bytes(signer, issuer, [1, 2])
        b = crl_bytes(signer, issuer, [3, 4])
        bodies = [a, b] * 50
        store = RevocationStore(_ScriptedFetcher(*bodies), signer.public_key)
        store.refresh()
        stop = threading.Event()
        violations = []

        def reader():
            while not stop.is_set():
                snap = store.snapshot
                seen = tuple(snap.lookup(s).is_revoked for s in (1, 2, 3, 4))
                if seen not in ((True, True, False, False),
                                (False, False, True, True)):
                    violations.append(seen)

        threads = [threading.Thread(target=reader) for _ in range(4)]
        for t in threads:
            t.start()
        for _ in range(99):
            store.refresh()
        stop.set()
        for t in threads:
            t.join()
        assert not violations

    def test_background_refresh_loop(self, signer, issuer):
        bodies = [crl_bytes(signer, issuer, [5])] * 200
        store = RevocationStore(
            _ScriptedFetcher(*bodies),
            signer.public_key,
            refresh_interval_s=0.02,
            rng=random.Random(3),
        )
        store.start()
        try:
            deadline = time.monotonic() + 3.0
            while store.refresh_successes < 3 and time.monotonic() < deadline:
                time.sleep(0.01)
        finally:
            store.stop()
        assert store.refresh_successes >= 3
        assert store.lookup(5).status is CertStatus.REVOKED


class TestHttpFetcher:
    def test_fetches_from_live_server(self, tmp_path):
        ctx = camod.init_ca_dir(tmp_path / "ca")
        ctx.ledger.revoke(77, CrlReason.KEY_COMPROMISE, at=T0)
        server = camod.CrlHttpServer(ctx.ledger, ctx.signer)
        server.start()
        try:
            store = RevocationStore(
                http_fetcher(server.url("/crl.der")), ctx.signer.public_key
            )
            assert store.refresh() is True
            assert store.lookup(77).status is CertStatus.REVOKED
        finally:
            server.stop()

    def test_dead_port_raises_fetch_failure(self):
        fetch = http_fetcher("http://127.0.0.1:9/crl.der", timeout_s=0.3)
        with pytest.raises(FetchFailure):
            fetch()
