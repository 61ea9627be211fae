"""RSA key management and the pluggable signature provider.

Signing is delegated to the platform `cryptography` library (PKCS#1 v1.5
with SHA-256 over RSA-2048 by default); everything above this module only
sees opaque sign/verify operations keyed by an algorithm OID.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

# sha256WithRSAEncryption
SHA256_WITH_RSA_OID = (1, 2, 840, 113549, 1, 1, 11)

DEFAULT_KEY_BITS = 2048

PublicKey = rsa.RSAPublicKey
PrivateKey = rsa.RSAPrivateKey


class SigningFailure(Exception):
    """The signature provider failed to produce a signature."""


class RsaSha256Signer:
    """SignatureProvider for sha256WithRSAEncryption (PKCS#1 v1.5)."""

    algorithm = SHA256_WITH_RSA_OID

    def __init__(self, private_key: PrivateKey):
        self._key = private_key

    def sign(self, tbs: bytes) -> bytes:
        try:
            return self._key.sign(tbs, padding.PKCS1v15(), hashes.SHA256())
        except Exception as exc:  # surfaces backend failures uniformly
            raise SigningFailure(str(exc)) from exc

    @property
    def public_key(self) -> PublicKey:
        return self._key.public_key()


def verify_rsa_sha256(tbs: bytes, signature: bytes, public_key: PublicKey) -> bool:
    """True iff `signature` is a valid PKCS#1 v1.5 SHA-256 signature."""
    try:
        public_key.verify(signature, tbs, padding.PKCS1v15(), hashes.SHA256())
        return True
    except InvalidSignature:
        return False
    except Exception:
        return False


def generate_private_key(bits: int = DEFAULT_KEY_BITS) -> PrivateKey:
    return rsa.generate_private_key(public_exponent=65537, key_size=bits)


def private_key_to_pem(key: PrivateKey) -> bytes:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    )


def private_key_from_pem(data: Union[bytes, str]) -> PrivateKey:
    if isinstance(data, str):
        data = data.encode()
    key = serialization.load_pem_private_key(data, password=None)
    if not isinstance(key, rsa.RSAPrivateKey):
        raise ValueError("expected an RSA private key")
    return key


def public_key_to_pem(key: PublicKey) -> bytes:
    return key.public_bytes(
        serialization.Encoding.PEM,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )


def public_key_from_pem(data: Union[bytes, str]) -> PublicKey:
    if isinstance(data, str):
        data = data.encode()
    key = serialization.load_pem_public_key(data)
    if not isinstance(key, rsa.RSAPublicKey):
        raise ValueError("expected an RSA public key")
    return key


def load_private_key(path: Union[str, Path]) -> PrivateKey:
    return private_key_from_pem(Path(path).read_bytes())


def load_public_key(path: Union[str, Path]) -> PublicKey:
    return public_key_from_pem(Path(path).read_bytes())


def public_key_spki_der(key: PublicKey) -> bytes:
    """DER SubjectPublicKeyInfo for the key (used for key hashing)."""
    return key.public_bytes(
        serialization.Encoding.DER,
        serialization.PublicFormat.SubjectPublicKeyInfo,
    )
