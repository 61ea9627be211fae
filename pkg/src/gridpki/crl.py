"""X.509 certificate revocation lists: build, sign, encode, decode, verify.

Encoding is canonical: entries are emitted in ascending serial order, the
version field appears only for v2, and re-encoding a decoded list yields
byte-identical DER.  Decoding is strict but tolerates unsorted entries from
other producers (re-encoding sorts them).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Optional, Sequence

from . import der, keys
from .der import Asn1Time

# Extension and attribute OIDs used by this profile.
CRL_REASON_OID = (2, 5, 29, 21)

_DN_ABBREVIATIONS = {
    (2, 5, 4, 6): "C",
    (2, 5, 4, 8): "ST",
    (2, 5, 4, 7): "L",
    (2, 5, 4, 10): "O",
    (2, 5, 4, 11): "OU",
    (2, 5, 4, 3): "CN",
}
_DN_BY_NAME = {name: arcs for arcs, name in _DN_ABBREVIATIONS.items()}

_ALGORITHM_NAMES = {
    keys.SHA256_WITH_RSA_OID: "sha256WithRSAEncryption",
}

_PRINTABLE = set(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 '()+,-./:=?"
)

MAX_SERIAL_OCTETS = 20


class MalformedCrl(ValueError):
    """CRL bytes that do not match the strict profile."""


class DuplicateSerial(ValueError):
    """Two revocation entries share a serial number."""


class SignatureInvalid(Exception):
    """A signature failed verification and the artifact must not be trusted."""


class UnsupportedAlgorithm(Exception):
    """Signature algorithm OID outside the supported set."""


SigningFailure = keys.SigningFailure


class CrlReason(IntEnum):
    """RFC 5280 CRL reason codes (7 is unassigned and therefore invalid)."""

    UNSPECIFIED = 0
    KEY_COMPROMISE = 1
    CA_COMPROMISE = 2
    AFFILIATION_CHANGED = 3
    SUPERSEDED = 4
    CESSATION_OF_OPERATION = 5
    CERTIFICATE_HOLD = 6
    REMOVE_FROM_CRL = 8
    PRIVILEGE_WITHDRAWN = 9
    AA_COMPROMISE = 10

    @property
    def label(self) -> str:
        return _REASON_LABELS[self]

    @property
    def flag(self) -> str:
        """Kebab-case name used on the command line."""
        return self.name.lower().replace("_", "-")

    @classmethod
    def from_flag(cls, text: str) -> "CrlReason":
        try:
            return cls[text.strip().replace("-", "_").upper()]
        except KeyError:
            options = ", ".join(r.flag for r in cls)
            raise ValueError(f"unknown reason {text!r}; expected one of: {options}")


_REASON_LABELS = {
    CrlReason.UNSPECIFIED: "Unspecified",
    CrlReason.KEY_COMPROMISE: "Key Compromise",
    CrlReason.CA_COMPROMISE: "CA Compromise",
    CrlReason.AFFILIATION_CHANGED: "Affiliation Changed",
    CrlReason.SUPERSEDED: "Superseded",
    CrlReason.CESSATION_OF_OPERATION: "Cessation Of Operation",
    CrlReason.CERTIFICATE_HOLD: "Certificate Hold",
    CrlReason.REMOVE_FROM_CRL: "Remove From CRL",
    CrlReason.PRIVILEGE_WITHDRAWN: "Privilege Withdrawn",
    CrlReason.AA_COMPROMISE: "AA Compromise",
}


def validate_serial(serial: int) -> int:
    if serial < 1:
        raise ValueError("serial numbers must be positive")
    if (serial.bit_length() + 7) // 8 > MAX_SERIAL_OCTETS:
        raise ValueError(f"serial exceeds {MAX_SERIAL_OCTETS} octets")
    return serial


def serial_hex(serial: int) -> str:
    """Uppercase hex with an even digit count, e.g. 0ABC -> '0ABC'."""
    text = f"{serial:X}"
    return "0" + text if len(text) % 2 else text


@dataclass(frozen=True)
class DistinguishedName:
    """An ordered list of (attribute OID, value) pairs."""

    attributes: tuple[tuple[tuple[int, ...], str], ...]

    @classmethod
    def parse(cls, text: str) -> "DistinguishedName":
        """Parse 'C=aa, ST=aa, CN=rootca' style text."""
        attrs = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            name, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"expected name=value, got {part!r}")
            name = name.strip()
            if name in _DN_BY_NAME:
                arcs = _DN_BY_NAME[name]
            elif all(p.isdigit() for p in name.split(".")) and "." in name:
                arcs = tuple(int(p) for p in name.split("."))
            else:
                raise ValueError(f"unknown attribute {name!r}")
            attrs.append((arcs, value.strip()))
        if not attrs:
            raise ValueError("empty distinguished name")
        return cls(tuple(attrs))

    def render(self) -> str:
        parts = []
        for arcs, value in self.attributes:
            name = _DN_ABBREVIATIONS.get(arcs, ".".join(str(a) for a in arcs))
            parts.append(f"{name}={value}")
        return ", ".join(parts)

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class RevokedEntry:
    """One revoked certificate: serial, revocation time, optional reason."""

    serial: int
    revocation_date: Asn1Time
    reason: Optional[CrlReason] = None

    def __post_init__(self):
        validate_serial(self.serial)


@dataclass(frozen=True)
class CertificateRevocationList:
    """Decoded form of a CRL; `raw_tbs` preserves the signed bytes."""

    version: int
    signature_algorithm: tuple[int, ...]
    issuer: DistinguishedName
    this_update: Asn1Time
    next_update: Optional[Asn1Time]
    entries: tuple[RevokedEntry, ...]
    signature: bytes
    raw_tbs: Optional[bytes] = field(default=None, compare=False, repr=False)

    @property
    def record_count(self) -> int:
        return len(self.entries)

    def entry_for(self, serial: int) -> Optional[RevokedEntry]:
        return {e.serial: e for e in self.entries}.get(serial)


# --- encoding ---------------------------------------------------------------


def _string_tlv(value: str) -> bytes:
    if all(ch in _PRINTABLE for ch in value):
        return der.encode_tlv(der.PRINTABLE_STRING, value.encode("ascii"))
    return der.encode_tlv(der.UTF8_STRING, value.encode("utf-8"))


def encode_name(dn: DistinguishedName) -> bytes:
    """DER Name (RDNSequence with single-valued RDNs)."""
    rdns = []
    for arcs, value in dn.attributes:
        atv = der.encode_tlv(
            der.SEQUENCE,
            der.encode_tlv(der.OBJECT_IDENTIFIER, der.encode_oid(arcs)) + _string_tlv(value),
        )
        rdns.append(der.encode_tlv(der.SET, atv))
    return der.encode_tlv(der.SEQUENCE, b"".join(rdns))


def decode_name(data: bytes) -> tuple[DistinguishedName, bytes]:
    """Decode a DER Name; returns (name, remaining bytes)."""
    payload, rest = der.expect_tlv(data, der.SEQUENCE, "issuer name")
    attrs = []
    for tag, rdn in der.iter_tlvs(payload):
        if tag != der.SET:
            raise MalformedCrl("RDN must be a SET")
        atv = der.decode_exact(rdn, der.SEQUENCE, "attribute")
        oid_content, value_tlv = der.expect_tlv(atv, der.OBJECT_IDENTIFIER, "attribute type")
        vtag, vpayload, tail = der.decode_tlv(value_tlv)
        if tail:
            raise MalformedCrl("multi-valued RDNs are not supported")
        if vtag in (der.PRINTABLE_STRING, der.IA5_STRING):
            value = vpayload.decode("ascii")
        elif vtag == der.UTF8_STRING:
            value = vpayload.decode("utf-8")
        else:
            raise MalformedCrl(f"unsupported attribute value tag 0x{vtag:02X}")
        attrs.append((der.decode_oid(oid_content), value))
    if not attrs:
        raise MalformedCrl("empty issuer name")
    return DistinguishedName(tuple(attrs)), rest


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
        raise MalformedCrl(f"unexpected parameters for {what}")
    return der.decode_oid(oid_content), rest


def _encode_entry(entry: RevokedEntry) -> bytes:
    body = der.encode_tlv(der.INTEGER, der.encode_integer(entry.serial))
    body += der.encode_time(entry.revocation_date)
    if entry.reason is not None:
        reason_value = der.encode_tlv(der.ENUMERATED, der.encode_integer(int(entry.reason)))
        extension = der.encode_tlv(
            der.SEQUENCE,
            der.encode_tlv(der.OBJECT_IDENTIFIER, der.encode_oid(CRL_REASON_OID))
            + der.encode_tlv(der.OCTET_STRING, reason_value),
        )
        body += der.encode_tlv(der.SEQUENCE, extension)
    return der.encode_tlv(der.SEQUENCE, body)


def _decode_extensions(data: bytes, what: str) -> Optional[CrlReason]:
    """Parse an Extensions SEQUENCE; returns the reason code if present."""
    reason = None
    for tag, ext in der.iter_tlvs(data):
        if tag != der.SEQUENCE:
            raise MalformedCrl(f"{what}: extension must be a SEQUENCE")
        oid_content, remainder = der.expect_tlv(ext, der.OBJECT_IDENTIFIER, what)
        oid = der.decode_oid(oid_content)
        critical = False
        if remainder[:1] == b"\x01":  # BOOLEAN
            flag, remainder = der.expect_tlv(remainder, 0x01, "critical flag")
            critical = flag == b"\xff"
        value, tail = der.expect_tlv(remainder, der.OCTET_STRING, what)
        if tail:
            raise MalformedCrl(f"{what}: trailing bytes in extension")
        if oid == CRL_REASON_OID:
            code = der.decode_integer(der.decode_exact(value, der.ENUMERATED, "reason code"))
            try:
                reason = CrlReason(code)
            except ValueError:
                raise MalformedCrl(f"invalid reason code {code}")
        elif critical:
            raise MalformedCrl(f"{what}: unknown critical extension {oid}")
        # unknown non-critical extensions are ignored
    return reason


def _decode_entry(data: bytes) -> RevokedEntry:
    serial_content, rest = der.expect_tlv(data, der.INTEGER, "entry serial")
    serial = der.decode_integer(serial_content)
    if serial < 0:
        raise MalformedCrl("negative serial number")
    tag, payload, rest = der.decode_tlv(rest)
    date = der.time_from_tlv(tag, payload)
    reason = None
    if rest:
        ext_payload = der.decode_exact(rest, der.SEQUENCE, "entry extensions")
        reason = _decode_extensions(ext_payload, "entry extension")
    return RevokedEntry(serial, date, reason)


def tbs_bytes(crl: CertificateRevocationList) -> bytes:
    """Canonical DER tbsCertList for `crl` (entries sorted by serial)."""
    if crl.version not in (1, 2):
        raise ValueError("version must be 1 or 2")
    parts = []
    if crl.version == 2:
        parts.append(der.encode_tlv(der.INTEGER, der.encode_integer(1)))
    parts.append(_algorithm_identifier(crl.signature_algorithm))
    parts.append(encode_name(crl.issuer))
    parts.append(der.encode_time(crl.this_update))
    if crl.next_update is not None:
        parts.append(der.encode_time(crl.next_update))
    if crl.entries:
        ordered = sorted(crl.entries, key=lambda e: e.serial)
        parts.append(
            der.encode_tlv(der.SEQUENCE, b"".join(_encode_entry(e) for e in ordered))
        )
    return der.encode_tlv(der.SEQUENCE, b"".join(parts))


def encode_crl_der(crl: CertificateRevocationList) -> bytes:
    """Full DER CertificateList."""
    body = (
        tbs_bytes(crl)
        + _algorithm_identifier(crl.signature_algorithm)
        + der.encode_tlv(der.BIT_STRING, b"\x00" + crl.signature)
    )
    return der.encode_tlv(der.SEQUENCE, body)


def build_crl(
    issuer: DistinguishedName,
    entries: Iterable[RevokedEntry],
    this_update: Asn1Time,
    next_update: Optional[Asn1Time],
    signer,
) -> CertificateRevocationList:
    """Assemble, canonicalize and sign a CRL.

    The version is 2 exactly when any entry carries a reason code, since the
    reason rides in an entry extension and extensions require v2.
    """
    ordered = tuple(sorted(entries, key=lambda e: e.serial))
    seen = set()
    for entry in ordered:
        if entry.serial in seen:
            raise DuplicateSerial(f"serial {serial_hex(entry.serial)} listed twice")
        seen.add(entry.serial)
        if entry.revocation_date > this_update:
            raise ValueError("revocation date is after thisUpdate")
    if next_update is not None and next_update <= this_update:
        raise ValueError("nextUpdate must be after thisUpdate")
    version = 2 if any(e.reason is not None for e in ordered) else 1
    crl = CertificateRevocationList(
        version=version,
        signature_algorithm=signer.algorithm,
        issuer=issuer,
        this_update=this_update,
        next_update=next_update,
        entries=ordered,
        signature=b"",
    )
    tbs = tbs_bytes(crl)
    signature = signer.sign(tbs)
    return CertificateRevocationList(
        version=version,
        signature_algorithm=signer.algorithm,
        issuer=issuer,
        this_update=this_update,
        next_update=next_update,
        entries=ordered,
        signature=signature,
        raw_tbs=tbs,
    )


def decode_crl_der(
    data: bytes, *, allow_v1_entry_extensions: bool = False
) -> CertificateRevocationList:
    """Strictly decode a DER CertificateList.

    `allow_v1_entry_extensions` accepts lists that omit the version field
    while still carrying entry extensions; some tooling emits these even
    though extensions formally require v2.
    """
    try:
        outer = der.decode_exact(data, der.SEQUENCE, "CertificateList")
        raw_tbs_start = outer
        tbs_payload, rest = der.expect_tlv(outer, der.SEQUENCE, "tbsCertList")
        raw_tbs = raw_tbs_start[: len(raw_tbs_start) - len(rest)]
        outer_algorithm, rest = _decode_algorithm(rest, "signature algorithm")
        sig_content = der.decode_exact(rest, der.BIT_STRING, "signature")
        if len(sig_content) < 1 or sig_content[0] != 0:
            raise MalformedCrl("signature BIT STRING must have no unused bits")
        signature = sig_content[1:]

        # tbsCertList walk
        version = 1
        cursor = tbs_payload
        tag, payload, after = der.decode_tlv(cursor)
        if tag == der.INTEGER:
            if der.decode_integer(payload) != 1:
                raise MalformedCrl("explicit version must be v2 (INTEGER 1)")
            version = 2
            cursor = after
        algorithm, cursor = _decode_algorithm(cursor, "tbs signature algorithm")
        if algorithm != outer_algorithm:
            raise MalformedCrl("algorithm mismatch between tbs and envelope")
        issuer, cursor = decode_name(cursor)
        tag, payload, cursor = der.decode_tlv(cursor)
        this_update = der.time_from_tlv(tag, payload)
        next_update = None
        entries: list[RevokedEntry] = []
        if cursor:
            tag, payload, after = der.decode_tlv(cursor)
            if tag in (der.UTC_TIME, der.GENERALIZED_TIME):
                next_update = der.time_from_tlv(tag, payload)
                cursor = after
        if cursor:
            tag, payload, after = der.decode_tlv(cursor)
            if tag == der.SEQUENCE:
                if not payload:
                    raise MalformedCrl("empty revokedCertificates must be omitted")
                for etag, entry_payload in der.iter_tlvs(payload):
                    if etag != der.SEQUENCE:
                        raise MalformedCrl("revoked entry must be a SEQUENCE")
                    entries.append(_decode_entry(entry_payload))
                cursor = after
        if cursor:
            tag, payload, after = der.decode_tlv(cursor)
            if tag == der.context(0):
                ext_payload = der.decode_exact(payload, der.SEQUENCE, "crlExtensions")
                _decode_extensions(ext_payload, "crl extension")
                cursor = after
        if cursor:
            raise MalformedCrl("trailing bytes inside tbsCertList")
    except der.DerError as exc:
        raise MalformedCrl(str(exc)) from exc

    serials = [e.serial for e in entries]
    if len(set(serials)) != len(serials):
        raise MalformedCrl("duplicate serial numbers")
    if version == 1 and any(e.reason is not None for e in entries):
        if not allow_v1_entry_extensions:
            raise MalformedCrl(
                "v1 CRL carries entry extensions (pass allow_v1_entry_extensions to accept)"
            )
    return CertificateRevocationList(
        version=version,
        signature_algorithm=algorithm,
        issuer=issuer,
        this_update=this_update,
        next_update=next_update,
        entries=tuple(entries),
        signature=signature,
        raw_tbs=raw_tbs,
    )


def crl_to_pem(crl: CertificateRevocationList) -> str:
    return der.pem_encode("X509 CRL", encode_crl_der(crl))


def crl_from_pem(
    text: str, *, allow_v1_entry_extensions: bool = False
) -> CertificateRevocationList:
    label, data = der.pem_decode(text)
    if label != "X509 CRL":
        raise der.BadArmor(f"expected an X509 CRL block, found {label!r}")
    return decode_crl_der(data, allow_v1_entry_extensions=allow_v1_entry_extensions)


def verify_crl(crl: CertificateRevocationList, public_key) -> bool:
    """True iff the signature verifies over the exact signed tbs bytes."""
    if crl.signature_algorithm != keys.SHA256_WITH_RSA_OID:
        raise UnsupportedAlgorithm(
            ".".join(str(a) for a in crl.signature_algorithm)
        )
    tbs = crl.raw_tbs if crl.raw_tbs is not None else tbs_bytes(crl)
    return keys.verify_rsa_sha256(tbs, crl.signature, public_key)


# --- text rendering ---------------------------------------------------------

_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun",
           "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")


def _gmt(t: Asn1Time) -> str:
    dt = t.to_datetime()
    return (
        f"{_MONTHS[dt.month - 1]} {dt.day:2d} "
        f"{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d} {dt.year} GMT"
    )


def algorithm_name(arcs: tuple[int, ...]) -> str:
    return _ALGORITHM_NAMES.get(arcs, ".".join(str(a) for a in arcs))


def render_crl_text(crl: CertificateRevocationList) -> str:
    """Human-readable dump in the style of classic CRL pretty-printers."""
    lines = [
        "Certificate Revocation List (CRL):",
        f"  Version {crl.version} (0x{crl.version - 1:x})",
        f"  Signature Algorithm: {algorithm_name(crl.signature_algorithm)}",
        f"  Issuer: {crl.issuer.render()}",
        f"  Last Update: {_gmt(crl.this_update)}",
        f"  Next Update: {_gmt(crl.next_update) if crl.next_update else 'NONE'}",
    ]
    if crl.entries:
        lines.append("Revoked Certificates:")
        for entry in crl.entries:
            lines.append(f"  Serial Number: {serial_hex(entry.serial)}")
            lines.append(f"    Revocation Date: {_gmt(entry.revocation_date)}")
            if entry.reason is not None:
                lines.append("    CRL entry extensions:")
                lines.append("      X509v3 CRL Reason Code:")
                lines.append(f"        {entry.reason.label}")
    else:
        lines.append("No Revoked Certificates.")
    lines.append(f"Signature Algorithm: {algorithm_name(crl.signature_algorithm)}")
    lines.append("Signature Value:")
    sig_hex = crl.signature.hex()
    pairs = [sig_hex[i:i + 2] for i in range(0, len(sig_hex), 2)]
    for i in range(0, len(pairs), 18):
        lines.append("    " + ":".join(pairs[i:i + 18]))
    return "\n".join(lines) + "\n"
