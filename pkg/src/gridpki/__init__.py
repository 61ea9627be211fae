"""CRL-backed OCSP revocation stack for smart-meter fleets.

Layers, bottom up: strict DER/PEM codecs (`der`), RSA signing (`keys`),
CRL model and codec (`crl`), CA ledger and distribution (`ca`), verified
in-memory blacklist (`store`), OCSP codec and responder (`ocsp`), HTTP
endpoints (`responder`, `wire`), byte-aware hybrid client (`client`),
and experiment drivers (`sim`) behind one CLI (`cli`).
"""

__version__ = "0.1.0"
