"""OCSP request/response wire codec and responder logic.

The responder answers from a CRL-derived snapshot and signs with the CA key
directly (no delegated responder certificate, so responses carry no cert
chain).  CertIDs hashed with SHA-1 or SHA-256 are recognized; anything else
yields an Unknown status for that single request rather than an error.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

from . import der, keys
from .crl import CrlReason, DistinguishedName, UnsupportedAlgorithm, decode_name, encode_name
from .der import Asn1Time
from .store import CertStatus, RevocationStatus, StoreSnapshot

OCSP_BASIC_OID = (1, 3, 6, 1, 5, 5, 7, 48, 1, 1)
OCSP_NONCE_OID = (1, 3, 6, 1, 5, 5, 7, 48, 1, 2)
SHA1_OID = (1, 3, 14, 3, 2, 26)
SHA256_OID = (2, 16, 840, 1, 101, 3, 4, 2, 1)

_HASHES = {SHA1_OID: hashlib.sha1, SHA256_OID: hashlib.sha256}
_HASH_LENGTHS = {SHA1_OID: 20, SHA256_OID: 32}

MAX_NONCE_OCTETS = 32
DEFAULT_NONCE_OCTETS = 32


class MalformedOcsp(ValueError):
    """Bytes that do not parse as the supported OCSP message profile."""


class ResponseStatus(IntEnum):
    SUCCESSFUL = 0
    MALFORMED_REQUEST = 1
    INTERNAL_ERROR = 2
    TRY_LATER = 3
    SIG_REQUIRED = 5
    UNAUTHORIZED = 6


@dataclass(frozen=True)
class CertId:
    """Identifies one certificate by issuer hashes plus serial."""

    hash_algorithm: tuple[int, ...]
    issuer_name_hash: bytes
    issuer_key_hash: bytes
    serial: int

    def __post_init__(self):
        if self.serial < 0:
            raise ValueError("serial numbers are unsigned")
        expected = _HASH_LENGTHS.get(self.hash_algorithm)
        if expected is not None:
            if len(self.issuer_name_hash) != expected or len(self.issuer_key_hash) != expected:
                raise ValueError(
                    f"hash length does not match algorithm (want {expected} octets)"
                )


@dataclass(frozen=True)
class OcspRequest:
    cert_ids: tuple[CertId, ...]
    nonce: Optional[bytes] = None

    def __post_init__(self):
        if len(self.cert_ids) < 1:
            raise ValueError("a request must carry at least one CertID")
        if self.nonce is not None and not 1 <= len(self.nonce) <= MAX_NONCE_OCTETS:
            raise ValueError(f"nonce must be 1..{MAX_NONCE_OCTETS} octets")


@dataclass(frozen=True)
class SingleResponse:
    cert_id: CertId
    status: RevocationStatus
    this_update: Asn1Time


@dataclass(frozen=True)
class OcspResponse:
    """Decoded OCSPResponse; error statuses carry no signed body."""

    response_status: ResponseStatus
    responder_name: Optional[DistinguishedName] = None
    produced_at: Optional[Asn1Time] = None
    results: tuple[SingleResponse, ...] = ()
    nonce: Optional[bytes] = None
    signature_algorithm: Optional[tuple[int, ...]] = None
    signature: Optional[bytes] = None
    raw_response_data: Optional[bytes] = field(default=None, compare=False, repr=False)

    def result_for(self, serial: int) -> Optional[SingleResponse]:
        for single in self.results:
            if single.cert_id.serial == serial:
                return single
        return None


class IssuerHashes:
    """Precomputed issuer name/key hashes for CertID building and matching."""

    def __init__(self, issuer: DistinguishedName, ca_public_key):
        name_der = encode_name(issuer)
        spki = keys.public_key_spki_der(ca_public_key)
        spki_payload = der.decode_exact(spki, der.SEQUENCE, "SubjectPublicKeyInfo")
        _, rest = der.expect_tlv(spki_payload, der.SEQUENCE, "spki algorithm")
        bits = der.decode_exact(rest, der.BIT_STRING, "subjectPublicKey")
        key_octets = bits[1:]  # strip the unused-bits count
        self.issuer = issuer
        self._pairs = {
            alg: (make(name_der).digest(), make(key_octets).digest())
            for alg, make in _HASHES.items()
        }

    def cert_id(self, serial: int, hash_algorithm: tuple[int, ...] = SHA256_OID) -> CertId:
        name_hash, key_hash = self._pairs[hash_algorithm]
        return CertId(hash_algorithm, name_hash, key_hash, serial)

    def matches(self, cert_id: CertId) -> bool:
        pair = self._pairs.get(cert_id.hash_algorithm)
        return pair is not None and pair == (
            cert_id.issuer_name_hash,
            cert_id.issuer_key_hash,
        )


# --- shared encoding helpers ------------------------------------------------


def _algorithm_identifier(arcs: tuple[int, ...]) -> bytes:
    return der.encode_tlv(
        der.SEQUENCE,
        der.encode_tlv(der.OBJECT_IDENTIFIER, der.encode_oid(arcs))
        + der.encode_tlv(der.NULL, b""),
    )


def _decode_algorithm(data: bytes, what: str) -> tuple[tuple[int, ...], bytes]:
    payload, rest = der.expect_tlv(data, der.SEQUENCE, what)
    oid_content, params = der.expect_tlv(payload, der.OBJECT_IDENTIFIER, what)
    if params and params != der.encode_tlv(der.NULL, b""):
        raise MalformedOcsp(f"unexpected parameters for {what}")
    return der.decode_oid(oid_content), rest


def _encode_cert_id(cid: CertId) -> bytes:
    return der.encode_tlv(
        der.SEQUENCE,
        _algorithm_identifier(cid.hash_algorithm)
        + der.encode_tlv(der.OCTET_STRING, cid.issuer_name_hash)
        + der.encode_tlv(der.OCTET_STRING, cid.issuer_key_hash)
        + der.encode_tlv(der.INTEGER, der.encode_integer(cid.serial)),
    )


def _decode_cert_id(data: bytes) -> CertId:
    algorithm, rest = _decode_algorithm(data, "CertID hash algorithm")
    name_hash, rest = der.expect_tlv(rest, der.OCTET_STRING, "issuerNameHash")
    key_hash, rest = der.expect_tlv(rest, der.OCTET_STRING, "issuerKeyHash")
    serial_content = der.decode_exact(rest, der.INTEGER, "serialNumber")
    serial = der.decode_integer(serial_content)
    try:
        return CertId(algorithm, name_hash, key_hash, serial)
    except ValueError as exc:
        raise MalformedOcsp(str(exc)) from exc


def _encode_nonce_extensions(nonce: bytes) -> bytes:
    extension = der.encode_tlv(
        der.SEQUENCE,
        der.encode_tlv(der.OBJECT_IDENTIFIER, der.encode_oid(OCSP_NONCE_OID))
        + der.encode_tlv(der.OCTET_STRING, der.encode_tlv(der.OCTET_STRING, nonce)),
    )
    return der.encode_tlv(der.SEQUENCE, extension)


def _decode_extensions(data: bytes) -> Optional[bytes]:
    """Extract the nonce from an Extensions SEQUENCE, if present."""
    nonce = None
    for tag, ext in der.iter_tlvs(data):
        if tag != der.SEQUENCE:
            raise MalformedOcsp("extension must be a SEQUENCE")
        oid_content, remainder = der.expect_tlv(ext, der.OBJECT_IDENTIFIER, "extension id")
        oid = der.decode_oid(oid_content)
        critical = False
        if remainder[:1] == b"\x01":
            flag, remainder = der.expect_tlv(remainder, 0x01, "critical flag")
            critical = flag == b"\xff"
        value, tail = der.expect_tlv(remainder, der.OCTET_STRING, "extension value")
        if tail:
            raise MalformedOcsp("trailing bytes in extension")
        if oid == OCSP_NONCE_OID:
            nonce = der.decode_exact(value, der.OCTET_STRING, "nonce")
            if not 1 <= len(nonce) <= MAX_NONCE_OCTETS:
                raise MalformedOcsp(f"nonce must be 1..{MAX_NONCE_OCTETS} octets")
        elif critical:
            raise MalformedOcsp(f"unknown critical extension {oid}")
    return nonce


# --- requests ---------------------------------------------------------------


def encode_ocsp_request(request: OcspRequest) -> bytes:
    request_list = der.encode_tlv(
        der.SEQUENCE,
        b"".join(
            der.encode_tlv(der.SEQUENCE, _encode_cert_id(cid))
            for cid in request.cert_ids
        ),
    )
    tbs = request_list
    if request.nonce is not None:
        tbs += der.encode_tlv(der.context(2), _encode_nonce_extensions(request.nonce))
    return der.encode_tlv(der.SEQUENCE, der.encode_tlv(der.SEQUENCE, tbs))


def decode_ocsp_request(data: bytes) -> OcspRequest:
    """Strictly decode an OCSPRequest; raises MalformedOcsp on any garbage."""
    try:
        outer = der.decode_exact(data, der.SEQUENCE, "OCSPRequest")
        tbs, rest = der.expect_tlv(outer, der.SEQUENCE, "tbsRequest")
        if rest:
            raise MalformedOcsp("signed requests are not supported")
        list_payload, rest = der.expect_tlv(tbs, der.SEQUENCE, "requestList")
        cert_ids = []
        for tag, payload in der.iter_tlvs(list_payload):
            if tag != der.SEQUENCE:
                raise MalformedOcsp("Request must be a SEQUENCE")
            cid_payload, tail = der.expect_tlv(payload, der.SEQUENCE, "reqCert")
            if tail:
                raise MalformedOcsp("single-request extensions are not supported")
            cert_ids.append(_decode_cert_id(cid_payload))
        nonce = None
        if rest:
            ext_block, rest = der.expect_tlv(rest, der.context(2), "requestExtensions")
            if rest:
                raise MalformedOcsp("trailing bytes in tbsRequest")
            nonce = _decode_extensions(
                der.decode_exact(ext_block, der.SEQUENCE, "Extensions")
            )
        if not cert_ids:
            raise MalformedOcsp("request carries no CertIDs")
        return OcspRequest(tuple(cert_ids), nonce)
    except der.DerError as exc:
        raise MalformedOcsp(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, MalformedOcsp):
            raise
        raise MalformedOcsp(str(exc)) from exc


# --- responses --------------------------------------------------------------


def _encode_cert_status(status: RevocationStatus) -> bytes:
    if status.status is CertStatus.GOOD:
        return der.encode_tlv(der.context(0, constructed=False), b"")
    if status.status is CertStatus.UNKNOWN:
        return der.encode_tlv(der.context(2, constructed=False), b"")
    if status.revoked_at is None:
        raise ValueError("revoked status needs a revocation time")
    body = der.encode_generalized_time(status.revoked_at)
    if status.reason is not None:
        body += der.encode_tlv(
            der.context(0),
            der.encode_tlv(der.ENUMERATED, der.encode_integer(int(status.reason))),
        )
    return der.encode_tlv(der.context(1), body)


def _decode_cert_status(tag: int, payload: bytes) -> RevocationStatus:
    if tag == der.context(0, constructed=False):
        if payload:
            raise MalformedOcsp("good status must be empty")
        return RevocationStatus.good()
    if tag == der.context(2, constructed=False):
        if payload:
            raise MalformedOcsp("unknown status must be empty")
        return RevocationStatus.unknown()
    if tag == der.context(1):
        ttag, tpayload, rest = der.decode_tlv(payload)
        if ttag != der.GENERALIZED_TIME:
            raise MalformedOcsp("revocationTime must be GeneralizedTime")
        revoked_at = der.time_from_tlv(ttag, tpayload, choice=False)
        reason = None
        if rest:
            reason_block = der.decode_exact(rest, der.context(0), "revocationReason")
            code = der.decode_integer(
                der.decode_exact(reason_block, der.ENUMERATED, "reason")
            )
            try:
                reason = CrlReason(code)
            except ValueError:
                raise MalformedOcsp(f"invalid reason code {code}")
        return RevocationStatus.revoked(revoked_at, reason)
    raise MalformedOcsp(f"unrecognized certStatus tag 0x{tag:02X}")


def _encode_single(single: SingleResponse) -> bytes:
    return der.encode_tlv(
        der.SEQUENCE,
        _encode_cert_id(single.cert_id)
        + _encode_cert_status(single.status)
        + der.encode_generalized_time(single.this_update),
    )


def _decode_single(data: bytes) -> SingleResponse:
    cid_payload, rest = der.expect_tlv(data, der.SEQUENCE, "certID")
    cert_id = _decode_cert_id(cid_payload)
    tag, payload, rest = der.decode_tlv(rest)
    status = _decode_cert_status(tag, payload)
    this_update = der.decode_generalized_time(rest)
    return SingleResponse(cert_id, status, this_update)


def response_data_bytes(response: OcspResponse) -> bytes:
    """Canonical DER tbsResponseData (the signed portion)."""
    if response.responder_name is None or response.produced_at is None:
        raise ValueError("successful responses need a responder name and producedAt")
    body = der.encode_tlv(der.context(1), encode_name(response.responder_name))
    body += der.encode_generalized_time(response.produced_at)
    body += der.encode_tlv(
        der.SEQUENCE, b"".join(_encode_single(s) for s in response.results)
    )
    if response.nonce is not None:
        body += der.encode_tlv(der.context(1), _encode_nonce_extensions(response.nonce))
    return der.encode_tlv(der.SEQUENCE, body)


def encode_ocsp_response(response: OcspResponse) -> bytes:
    status_tlv = der.encode_tlv(
        der.ENUMERATED, der.encode_integer(int(response.response_status))
    )
    if response.response_status is not ResponseStatus.SUCCESSFUL:
        return der.encode_tlv(der.SEQUENCE, status_tlv)
    if response.signature is None or response.signature_algorithm is None:
        raise ValueError("successful responses must be signed")
    response_data = (
        response.raw_response_data
        if response.raw_response_data is not None
        else response_data_bytes(response)
    )
    basic = der.encode_tlv(
        der.SEQUENCE,
        response_data
        + _algorithm_identifier(response.signature_algorithm)
        + der.encode_tlv(der.BIT_STRING, b"\x00" + response.signature),
    )
    response_bytes = der.encode_tlv(
        der.SEQUENCE,
        der.encode_tlv(der.OBJECT_IDENTIFIER, der.encode_oid(OCSP_BASIC_OID))
        + der.encode_tlv(der.OCTET_STRING, basic),
    )
    return der.encode_tlv(
        der.SEQUENCE, status_tlv + der.encode_tlv(der.context(0), response_bytes)
    )


def decode_ocsp_response(data: bytes) -> OcspResponse:
    try:
        outer = der.decode_exact(data, der.SEQUENCE, "OCSPResponse")
        status_content, rest = der.expect_tlv(outer, der.ENUMERATED, "responseStatus")
        try:
            status = ResponseStatus(der.decode_integer(status_content))
        except ValueError:
            raise MalformedOcsp("unrecognized response status")
        if status is not ResponseStatus.SUCCESSFUL:
            if rest:
                raise MalformedOcsp("error responses must not carry a body")
            return OcspResponse(status)
        wrapper = der.decode_exact(rest, der.context(0), "responseBytes")
        rb_payload = der.decode_exact(wrapper, der.SEQUENCE, "ResponseBytes")
        oid_content, rest = der.expect_tlv(rb_payload, der.OBJECT_IDENTIFIER, "responseType")
        if der.decode_oid(oid_content) != OCSP_BASIC_OID:
            raise MalformedOcsp("unsupported response type")
        basic = der.decode_exact(rest, der.OCTET_STRING, "response")
        basic_payload = der.decode_exact(basic, der.SEQUENCE, "BasicOCSPResponse")
        data_payload, rest = der.expect_tlv(basic_payload, der.SEQUENCE, "tbsResponseData")
        raw_response_data = basic_payload[: len(basic_payload) - len(rest)]
        algorithm, rest = _decode_algorithm(rest, "signatureAlgorithm")
        sig_content = der.decode_exact(rest, der.BIT_STRING, "signature")
        if len(sig_content) < 1 or sig_content[0] != 0:
            raise MalformedOcsp("signature BIT STRING must have no unused bits")
        signature = sig_content[1:]

        name_block, cursor = der.expect_tlv(data_payload, der.context(1), "responderID")
        responder_name, tail = _decode_responder_name(name_block)
        if tail:
            raise MalformedOcsp("trailing bytes in responderID")
        tag, payload, cursor = der.decode_tlv(cursor)
        if tag != der.GENERALIZED_TIME:
            raise MalformedOcsp("producedAt must be GeneralizedTime")
        produced_at = der.time_from_tlv(tag, payload, choice=False)
        singles_payload, cursor = der.expect_tlv(cursor, der.SEQUENCE, "responses")
        results = []
        for tag, payload in der.iter_tlvs(singles_payload):
            if tag != der.SEQUENCE:
                raise MalformedOcsp("SingleResponse must be a SEQUENCE")
            results.append(_decode_single(payload))
        nonce = None
        if cursor:
            ext_block, cursor = der.expect_tlv(cursor, der.context(1), "responseExtensions")
            if cursor:
                raise MalformedOcsp("trailing bytes in tbsResponseData")
            nonce = _decode_extensions(
                der.decode_exact(ext_block, der.SEQUENCE, "Extensions")
            )
        return OcspResponse(
            response_status=status,
            responder_name=responder_name,
            produced_at=produced_at,
            results=tuple(results),
            nonce=nonce,
            signature_algorithm=algorithm,
            signature=signature,
            raw_response_data=raw_response_data,
        )
    except der.DerError as exc:
        raise MalformedOcsp(str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, MalformedOcsp):
            raise
        raise MalformedOcsp(str(exc)) from exc


def _decode_responder_name(data: bytes):
    try:
        return decode_name(data)
    except ValueError as exc:
        raise MalformedOcsp(f"bad responder name: {exc}") from exc


def verify_ocsp_response(response: OcspResponse, ca_public_key) -> bool:
    """True iff a successful response's signature verifies with the CA key."""
    if response.response_status is not ResponseStatus.SUCCESSFUL:
        return False
    if response.signature is None or response.signature_algorithm is None:
        return False
    if response.signature_algorithm != keys.SHA256_WITH_RSA_OID:
        raise UnsupportedAlgorithm(
            ".".join(str(a) for a in response.signature_algorithm)
        )
    tbs = (
        response.raw_response_data
        if response.raw_response_data is not None
        else response_data_bytes(response)
    )
    return keys.verify_rsa_sha256(tbs, response.signature, ca_public_key)


# --- responder --------------------------------------------------------------


def build_response(
    request: OcspRequest,
    snapshot: Optional[StoreSnapshot],
    signer,
    issuer_hashes: IssuerHashes,
    responder_name: DistinguishedName,
    now: Optional[Asn1Time] = None,
) -> OcspResponse:
    """Answer every CertID in the request from the snapshot.

    CertIDs whose issuer hashes or hash algorithm do not match the
    configured CA come back Unknown.  With no snapshot loaded yet the
    whole response is tryLater; a signing failure maps to internalError.
    """
    if snapshot is None:
        return OcspResponse(ResponseStatus.TRY_LATER)
    now = now or Asn1Time.now()
    results = []
    for cid in request.cert_ids:
        if issuer_hashes.matches(cid):
            status = snapshot.lookup(cid.serial)
        else:
            status = RevocationStatus.unknown()
        results.append(SingleResponse(cid, status, snapshot.source_this_update))
    unsigned = OcspResponse(
        response_status=ResponseStatus.SUCCESSFUL,
        responder_name=responder_name,
        produced_at=now,
        results=tuple(results),
        nonce=request.nonce,
    )
    tbs = response_data_bytes(unsigned)
    try:
        signature = signer.sign(tbs)
    except keys.SigningFailure:
        return OcspResponse(ResponseStatus.INTERNAL_ERROR)
    return OcspResponse(
        response_status=ResponseStatus.SUCCESSFUL,
        responder_name=responder_name,
        produced_at=now,
        results=tuple(results),
        nonce=request.nonce,
        signature_algorithm=signer.algorithm,
        signature=signature,
        raw_response_data=tbs,
    )


class OcspResponder:
    """Stateless request handler bound to one CA identity and store."""

    def __init__(self, issuer: DistinguishedName, ca_public_key, signer, store):
        self.issuer = issuer
        self.signer = signer
        self.store = store
        self.hashes = IssuerHashes(issuer, ca_public_key)

    def handle(self, body: bytes, now: Optional[Asn1Time] = None) -> bytes:
        try:
            request = decode_ocsp_request(body)
        except MalformedOcsp:
            return encode_ocsp_response(OcspResponse(ResponseStatus.MALFORMED_REQUEST))
        response = build_response(
            request, self.store.snapshot, self.signer, self.hashes, self.issuer, now
        )
        return encode_ocsp_response(response)
