"""Protocol selection, fallback chains, caching, and verification hard-stops."""

import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridpki import ocsp
from gridpki.client import (
    AllPathsFailed,
    ClientPolicy,
    CrlCache,
    CrlFormat,
    Decision,
    Endpoints,
    HybridClient,
    PolicyMode,
    Source,
    choose_protocol,
)
from gridpki.crl import CrlReason, RevokedEntry, SignatureInvalid, build_crl
from gridpki.der import Asn1Time
from gridpki.responder import OcspHttpServer
from gridpki.sim import LiveHarness
from gridpki.store import snapshot_from_crl

T0 = Asn1Time(1683230247)


class TestPolicyValidation:
    def test_defaults(self):
        policy = ClientPolicy()
        assert policy.pem_record_threshold == 14
        assert policy.der_record_threshold == 24
        assert policy.ocsp_timeout_ms == 2000
        assert policy.preferred_crl_format is CrlFormat.DER
        assert policy.batch_min == 2
        assert policy.mode is PolicyMode.AUTO

    def test_rejects_nonsense(self):
        with pytest.raises(ValueError):
            ClientPolicy(pem_record_threshold=-1)
        with pytest.raises(ValueError):
            ClientPolicy(ocsp_timeout_ms=0)
        with pytest.raises(ValueError):
            ClientPolicy(batch_min=0)


class TestChooseProtocol:
    def test_valid_cache_always_wins(self):
        policy = ClientPolicy(mode=PolicyMode.FORCE_OCSP)
        assert choose_protocol(policy, 1, 1000, True) is Decision.USE_CACHE
        assert choose_protocol(ClientPolicy(), 5, None, True) is Decision.USE_CACHE

    def test_forced_modes(self):
        assert (
            choose_protocol(ClientPolicy(mode=PolicyMode.FORCE_OCSP), 1, 0, False)
            is Decision.USE_OCSP
        )
        assert (
            choose_protocol(ClientPolicy(mode=PolicyMode.FORCE_CRL), 1, 10**6, False)
            is Decision.USE_CRL_FETCH
        )

    def test_batches_prefer_crl(self):
        assert choose_protocol(ClientPolicy(), 2, 10**6, False) is Decision.USE_CRL_FETCH
        assert choose_protocol(ClientPolicy(), 1, 10**6, False) is Decision.USE_OCSP

    def test_unknown_crl_size_prefers_ocsp(self):
        assert choose_protocol(ClientPolicy(), 1, None, False) is Decision.USE_OCSP

    def test_der_threshold_boundary(self):
        policy = ClientPolicy()
        assert choose_protocol(policy, 1, 24, False) is Decision.USE_CRL_FETCH
        assert choose_protocol(policy, 1, 25, False) is Decision.USE_OCSP

    def test_pem_threshold_boundary(self):
        policy = ClientPolicy(preferred_crl_format=CrlFormat.PEM)
        assert choose_protocol(policy, 1, 14, False) is Decision.USE_CRL_FETCH
        assert choose_protocol(policy, 1, 15, False) is Decision.USE_OCSP

    def test_zero_checks_rejected(self):
        with pytest.raises(ValueError):
            choose_protocol(ClientPolicy(), 0, 0, False)

    @settings(max_examples=200, deadline=None)
    @given(
        smaller=st.integers(min_value=0, max_value=10**6),
        larger=st.integers(min_value=0, max_value=10**6),
        n_checks=st.integers(min_value=1, max_value=10),
        fmt=st.sampled_from(list(CrlFormat)),
    )
    def test_growth_only_flips_toward_ocsp(self, smaller, larger, n_checks, fmt):
        if smaller > larger:
            smaller, larger = larger, smaller
        policy = ClientPolicy(preferred_crl_format=fmt)
        small_pick = choose_protocol(policy, n_checks, smaller, False)
        large_pick = choose_protocol(policy, n_checks, larger, False)
        if small_pick is Decision.USE_OCSP:
            assert large_pick is Decision.USE_OCSP


class TestCrlCache:
    def _crl(self, signer, issuer, next_update):
        return build_crl(
            issuer, [RevokedEntry(5, T0, CrlReason.KEY_COMPROMISE)],
            T0, next_update, signer,
        )

    def test_ttl_expiry(self, signer, issuer):
        crl = self._crl(signer, issuer, None)
        cache = CrlCache(crl, time.monotonic(), ttl_s=10.0)
        assert cache.is_valid()
        assert not cache.is_valid(time.monotonic() + 11.0)

    def test_passed_next_update_invalidates(self, signer, issuer):
        stale = self._crl(signer, issuer, T0.plus(60))  # long past by now
        cache = CrlCache(stale, time.monotonic(), ttl_s=10**9)
        assert not cache.is_valid()

    def test_lookup(self, signer, issuer):
        cache = CrlCache(self._crl(signer, issuer, None), time.monotonic(), 10.0)
        assert cache.lookup(5).is_revoked
        assert cache.lookup(5).reason is CrlReason.KEY_COMPROMISE
        assert not cache.lookup(6).is_revoked


@pytest.fixture(scope="module")
def harness():
    with LiveHarness(n_serials=60, revoked_fraction=0.25, rng_seed=5) as h:
        yield h


def make_client(harness, policy=None, **kwargs):
    return HybridClient(
        harness.endpoints,
        harness.ctx.issuer,
        harness.ctx.signer.public_key,
        policy,
        **kwargs,
    )


def pick(harness, revoked, count=1):
    pool = [
        s for s in harness.pool
        if (s in harness.revoked_serials) == revoked
    ]
    return pool[:count] if count > 1 else pool[0]


class TestLiveChecks:
    def test_ocsp_path(self, harness):
        client = make_client(harness)
        revoked = client.check(pick(harness, True))
        good = client.check(pick(harness, False))
        assert revoked.status.is_revoked and revoked.source is Source.OCSP
        assert not good.status.is_revoked and good.source is Source.OCSP
        assert revoked.bytes_used > 900
        assert revoked.latency_ms > 0

    def test_crl_path_then_cache(self, harness):
        client = make_client(harness, ClientPolicy(mode=PolicyMode.FORCE_CRL))
        first = client.check(pick(harness, True))
        second = client.check(pick(harness, False))
        assert first.source is Source.CRL_FETCH and first.bytes_used > 0
        assert second.source is Source.CRL_CACHE and second.bytes_used == 0
        assert first.status.is_revoked and not second.status.is_revoked

    def test_pem_format_costs_more(self, harness):
        der_client = make_client(harness, ClientPolicy(mode=PolicyMode.FORCE_CRL))
        pem_client = make_client(
            harness,
            ClientPolicy(mode=PolicyMode.FORCE_CRL, preferred_crl_format=CrlFormat.PEM),
        )
        target = pick(harness, True)
        der_cost = der_client.check(target).bytes_used
        pem_cost = pem_client.check(target).bytes_used
        assert pem_cost > der_cost

    def test_check_many_amortizes_one_download(self, harness):
        client = make_client(harness)
        serials = [*pick(harness, True, 3), *pick(harness, False, 3)]
        results = client.check_many(serials)
        assert [r.source for r in results] == [Source.CRL_FETCH] + [
            Source.CRL_CACHE
        ] * 5
        assert results[0].bytes_used > 0
        assert all(r.bytes_used == 0 for r in results[1:])
        expected = [s in harness.revoked_serials for s in serials]
        assert [r.status.is_revoked for r in results] == expected

    def test_batch_agrees_with_ocsp_answers(self, harness):
        serials = [*pick(harness, True, 2), *pick(harness, False, 2)]
        batch = make_client(harness).check_many(serials)
        single = make_client(harness, ClientPolicy(mode=PolicyMode.FORCE_OCSP))
        for serial, batched in zip(serials, batch):
            alone = single.check(serial)
            assert alone.status.status == batched.status.status


class TestFallback:
    def test_ocsp_outage_falls_back_to_crl(self, harness):
        client = make_client(harness, ClientPolicy(ocsp_timeout_ms=500))
        harness.ocsp_server.pause()
        try:
            result = client.check(pick(harness, True))
        finally:
            harness.ocsp_server.resume()
        assert result.source is Source.CRL_FETCH
        assert result.status.is_revoked
        assert not result.stale

    def test_both_down_serves_stale_cache(self, harness):
        client = make_client(harness, ClientPolicy(ocsp_timeout_ms=300))
        warm = client.check_many([pick(harness, True), pick(harness, False)])
        assert warm[0].source is Source.CRL_FETCH
        client.cache.ttl_s = 0.0  # force the cached copy out of validity
        harness.ocsp_server.pause()
        harness.crl_server.stop()
        try:
            result = client.check(pick(harness, True))
        finally:
            harness.ocsp_server.resume()
            harness.crl_server.start()
        assert result.source is Source.CRL_CACHE
        assert result.stale
        assert result.status.is_revoked

    def test_both_down_cold_client_gives_up(self, harness):
        client = make_client(harness, ClientPolicy(ocsp_timeout_ms=300))
        harness.ocsp_server.pause()
        harness.crl_server.stop()
        try:
            with pytest.raises(AllPathsFailed):
                client.check(pick(harness, False))
        finally:
            harness.ocsp_server.resume()
            harness.crl_server.start()

    def test_crl_down_batch_falls_back_to_ocsp(self, harness):
        client = make_client(harness)
        serials = [pick(harness, True), pick(harness, False)]
        harness.crl_server.stop()
        try:
            results = client.check_many(serials)
        finally:
            harness.crl_server.start()
        assert [r.source for r in results] == [Source.OCSP, Source.OCSP]
        assert [r.status.is_revoked for r in results] == [True, False]


class TestVerificationHardStops:
    def test_forged_responder_signature_raises(self, harness):
        from gridpki import keys

        rogue_signer = keys.RsaSha256Signer(keys.generate_private_key())
        rogue = ocsp.OcspResponder(
            harness.ctx.issuer,
            harness.ctx.signer.public_key,  # hashes match what clients send
            rogue_signer,  # ...but the signature comes from the wrong key
            harness.store,
        )
        rogue_server = OcspHttpServer(rogue)
        rogue_server.start()
        try:
            endpoints = Endpoints(
                rogue_server.url(),
                harness.endpoints.crl_der_url,
                harness.endpoints.crl_pem_url,
            )
            client = HybridClient(
                endpoints, harness.ctx.issuer, harness.ctx.signer.public_key
            )
            with pytest.raises(SignatureInvalid):
                client.check(pick(harness, False))
        finally:
            rogue_server.stop()

    def test_replayed_response_raises_on_nonce(self, harness):
        hashes = ocsp.IssuerHashes(
            harness.ctx.issuer, harness.ctx.signer.public_key
        )
        serial = pick(harness, False)
        old_request = ocsp.OcspRequest((hashes.cert_id(serial),), b"\x0c" * 32)
        canned = ocsp.build_response(
            old_request,
            harness.store.snapshot,
            harness.ctx.signer,
            hashes,
            harness.ctx.issuer,
        )
        canned_body = ocsp.encode_ocsp_response(canned)

        class _Replayer:
            def handle(self, body, now=None):
                return canned_body

        replay_server = OcspHttpServer(_Replayer())
        replay_server.start()
        try:
            endpoints = Endpoints(
                replay_server.url(),
                harness.endpoints.crl_der_url,
                harness.endpoints.crl_pem_url,
            )
            client = HybridClient(
                endpoints, harness.ctx.issuer, harness.ctx.signer.public_key
            )
            with pytest.raises(SignatureInvalid):
                client.check(serial)
        finally:
            replay_server.stop()

    def test_forged_crl_raises(self, harness, other_signer):
        # Serve a CRL signed by the wrong key; the client must refuse it
        # rather than fall through to any answer.
        from gridpki.crl import encode_crl_der

        forged = build_crl(
            harness.ctx.issuer, [], Asn1Time.now(), Asn1Time.now().plus(60),
            other_signer,
        )
        forged_der = encode_crl_der(forged)

        import http.server
        import threading

        class Handler(http.server.BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def do_GET(self):
                self.send_response(200)
                self.send_header("Content-Type", "application/pkix-crl")
                self.send_header("Content-Length", str(len(forged_der)))
                self.end_headers()
                self.wfile.write(forged_der)

            def log_message(self, *args):
                pass

        httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{httpd.server_address[1]}/crl.der"
            endpoints = Endpoints(harness.endpoints.ocsp_url, url, url)
            client = HybridClient(
                endpoints,
                harness.ctx.issuer,
                harness.ctx.signer.public_key,
                ClientPolicy(mode=PolicyMode.FORCE_CRL),
            )
            with pytest.raises(SignatureInvalid):
                client.check(pick(harness, False))
        finally:
            httpd.shutdown()
            httpd.server_close()
