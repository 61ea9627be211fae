"""Shared fixtures: RSA keys are expensive, so generate them once."""

import pytest

from gridpki import keys
from gridpki.crl import DistinguishedName

DEFAULT_ISSUER_TEXT = "C=aa, ST=aa, L=aa, O=aa, OU=aa, CN=rootca"


@pytest.fixture(scope="session")
def signer_key():
    return keys.generate_private_key()


@pytest.fixture(scope="session")
def signer(signer_key):
    return keys.RsaSha256Signer(signer_key)


@pytest.fixture(scope="session")
def other_signer():
    return keys.RsaSha256Signer(keys.generate_private_key())


@pytest.fixture(scope="session")
def issuer():
    return DistinguishedName.parse(DEFAULT_ISSUER_TEXT)
