#!/usr/bin/env python3
"""Fleet simulation with an OCSP outage: fallback behavior under load.

Runs the meter fleet against live endpoints while the OCSP listener is
closed for the outage window, then reports sources, bytes, latency
percentiles, and correctness against the CA ledger.  Defaults: 100
meters at 0.5 checks/s for 60 s with OCSP refused during [20 s, 40 s).
"""

import argparse
import sys

from gridpki.cli import main as cli_main


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--meters", type=int, default=100)
    parser.add_argument("--rate", type=float, default=0.5,
                        help="checks per meter per second")
    parser.add_argument("--duration", type=float, default=60.0)
    parser.add_argument("--outage", action="append", metavar="START:END",
                        help="repeatable outage window (default 20:40)")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--json-out", default=None)
    parser.add_argument("--records", action="store_true",
                        help="include per-check records in the JSON report")
    args = parser.parse_args()

    argv = [
        "simulate",
        "--meters", str(args.meters),
        "--rate", str(args.rate),
        "--duration", str(args.duration),
        "--seed", str(args.seed),
    ]
    for window in args.outage or ["20:40"]:
        argv += ["--outage", window]
    if args.json_out:
        argv += ["--json-out", args.json_out]
    if args.records:
        argv.append("--records")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
