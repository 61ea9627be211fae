#!/usr/bin/env python3
"""OCSP responder throughput: timed request floods against one store.

Starts an in-process responder backed by a blacklist of
store-size x revoked-fraction revoked serials, then runs each
requests:concurrency pair against it and prints per-run reports.
The default pair list covers a small warm-up run and a sustained
100k-request run.
"""

import argparse
import sys

from gridpki import sim


def parse_runs(text):
    runs = []
    for part in text.split(","):
        n_text, _, c_text = part.strip().partition(":")
        runs.append((int(n_text), int(c_text or "1")))
    return runs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--store-size", type=int, default=20_000,
                        help="issued serials in the pool (default 20000)")
    parser.add_argument("--revoked-fraction", type=float, default=0.5,
                        help="fraction of the pool on the blacklist")
    parser.add_argument("--runs", default="1000:2,100000:4",
                        metavar="N:C[,N:C...]",
                        help="requests:concurrency pairs (default 1000:2,100000:4)")
    parser.add_argument("--no-keepalive", action="store_true",
                        help="open a fresh connection per request")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    with sim.LiveHarness(
        n_serials=args.store_size,
        revoked_fraction=args.revoked_fraction,
        rng_seed=args.seed,
    ) as harness:
        print(f"store: {len(harness.revoked_serials)} revoked"
              f" of {args.store_size} issued\n")
        for n_requests, concurrency in parse_runs(args.runs):
            report = sim.run_bench(
                n_requests, concurrency, harness.endpoints.ocsp_url,
                issuer=harness.ctx.issuer,
                ca_public_key=harness.ctx.signer.public_key,
                serial_pool=harness.pool,
                keepalive=not args.no_keepalive,
                rng_seed=args.seed,
            )
            print(sim.render_bench_report(report))
            print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
