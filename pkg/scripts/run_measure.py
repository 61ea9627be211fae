#!/usr/bin/env python3
"""Byte-cost comparison: CRL download size vs one OCSP exchange.

Issues CRLs at every record count in the range, downloads each over HTTP
in DER and PEM, performs one OCSP request/response against the same CA,
and prints a table plus the crossover counts where each CRL encoding
starts to cost more than the constant-size OCSP exchange.

Defaults reproduce the 0..40-record sweep; all `gridpki measure` flags
are accepted (e.g. --counts 0..100 --json-out sizes.json).
"""

import sys

from gridpki.cli import main

if __name__ == "__main__":
    sys.exit(main(["measure", *sys.argv[1:]]))
