"""Strict DER encoding and decoding primitives, plus PEM armor.

Covers the closed subset of ASN.1 types needed for CRLs and OCSP messages:
SEQUENCE, SET, INTEGER, ENUMERATED, BIT STRING, OCTET STRING, NULL, OBJECT
IDENTIFIER, UTCTime, GeneralizedTime, PrintableString, UTF8String and
context-specific tags.  Decoding is strict: BER laxities such as indefinite
or non-minimal lengths are rejected rather than tolerated.
"""

from __future__ import annotations

import base64
import binascii
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterator, Optional

# Universal tag numbers (with constructed bit where it is mandatory).
INTEGER = 0x02
BIT_STRING = 0x03
OCTET_STRING = 0x04
NULL = 0x05
OBJECT_IDENTIFIER = 0x06
ENUMERATED = 0x0A
UTF8_STRING = 0x0C
PRINTABLE_STRING = 0x13
IA5_STRING = 0x16
UTC_TIME = 0x17
GENERALIZED_TIME = 0x18
SEQUENCE = 0x30
SET = 0x31


def context(number: int, constructed: bool = True) -> int:
    """Tag byte for a context-specific tag [number]."""
    if not 0 <= number <= 30:
        raise ValueError("context tag number out of range")
    return (0xA0 if constructed else 0x80) | number


class DerError(ValueError):
    """Base class for DER encode/decode failures."""


class Truncated(DerError):
    """Input ended before the declared element did."""


class NonMinimalLength(DerError):
    """Length octets are valid BER but not the minimal DER form."""


class MalformedDer(DerError):
    """Structurally invalid DER (bad tag, indefinite length, bad content)."""


class EmptyOid(DerError):
    """Object identifier with fewer than two arcs."""


class ArcOverflow(DerError):
    """OID arc continuation that never terminates."""


class MalformedTime(DerError):
    """UTCTime/GeneralizedTime content that is not strict DER."""


class BadArmor(DerError):
    """PEM armor is missing, mismatched, or carries invalid base64."""


_MAX_PAYLOAD = 1 << 32


def encode_length(length: int) -> bytes:
    """Minimal DER length octets for a payload of `length` bytes."""
    if length < 0:
        raise ValueError("negative length")
    if length < 0x80:
        return bytes([length])
    octets = length.to_bytes((length.bit_length() + 7) // 8, "big")
    return bytes([0x80 | len(octets)]) + octets


def encode_tlv(tag: int, payload: bytes) -> bytes:
    """Assemble one tag-length-value element with a minimal length."""
    if not 0 <= tag <= 0xFF:
        raise ValueError("tag must fit in one octet")
    if len(payload) >= _MAX_PAYLOAD:
        raise ValueError("payload too large")
    return bytes([tag]) + encode_length(len(payload)) + bytes(payload)


def decode_tlv(data: bytes) -> tuple[int, bytes, bytes]:
    """Split one element off `data`; returns (tag, payload, rest).

    Raises Truncated when the buffer is short, NonMinimalLength for
    redundant length forms, and MalformedDer for indefinite lengths or
    multi-byte tags (outside the supported subset).
    """
    if len(data) < 1:
        raise Truncated("empty input")
    tag = data[0]
    if tag & 0x1F == 0x1F:
        raise MalformedDer("multi-byte tags are not supported")
    if len(data) < 2:
        raise Truncated("missing length octet")
    first = data[1]
    if first < 0x80:
        length, header = first, 2
    elif first == 0x80:
        raise MalformedDer("indefinite length is not DER")
    elif first == 0xFF:
        raise MalformedDer("reserved length octet 0xFF")
    else:
        count = first & 0x7F
        if count > 4:
            raise MalformedDer("length of length exceeds 4 octets")
        if len(data) < 2 + count:
            raise Truncated("length octets truncated")
        octets = data[2:2 + count]
        if octets[0] == 0x00:
            raise NonMinimalLength("leading zero in long-form length")
        length = int.from_bytes(octets, "big")
        if length < 0x80:
            raise NonMinimalLength("long form used for short length")
        header = 2 + count
    end = header + length
    if len(data) < end:
        raise Truncated(f"payload needs {length} bytes, have {len(data) - header}")
    return tag, bytes(data[header:end]), bytes(data[end:])


def expect_tlv(data: bytes, tag: int, what: str = "element") -> tuple[bytes, bytes]:
    """decode_tlv that also checks the tag; returns (payload, rest)."""
    got, payload, rest = decode_tlv(data)
    if got != tag:
        raise MalformedDer(f"expected tag 0x{tag:02X} for {what}, got 0x{got:02X}")
    return payload, rest


def decode_exact(data: bytes, tag: int, what: str = "element") -> bytes:
    """Decode a lone element; trailing bytes are an error."""
    payload, rest = expect_tlv(data, tag, what)
    if rest:
        raise MalformedDer(f"trailing bytes after {what}")
    return payload


def iter_tlvs(data: bytes) -> Iterator[tuple[int, bytes]]:
    """Yield (tag, payload) pairs until the buffer is exhausted."""
    while data:
        tag, payload, data = decode_tlv(data)
        yield tag, payload


def encode_integer(value: int) -> bytes:
    """Content octets for a non-negative INTEGER (minimal two's complement)."""
    if value < 0:
        raise ValueError("only non-negative integers are supported")
    nbytes = value.bit_length() // 8 + 1
    return value.to_bytes(nbytes, "big")


def decode_integer(content: bytes) -> int:
    """Integer value from content octets; rejects redundant padding."""
    if len(content) == 0:
        raise MalformedDer("INTEGER with empty content")
    if len(content) > 1:
        if content[0] == 0x00 and content[1] < 0x80:
            raise MalformedDer("INTEGER has redundant leading 0x00")
        if content[0] == 0xFF and content[1] >= 0x80:
            raise MalformedDer("INTEGER has redundant leading 0xFF")
    return int.from_bytes(content, "big", signed=True)


def encode_oid(arcs: tuple[int, ...]) -> bytes:
    """Content octets for an OBJECT IDENTIFIER."""
    if len(arcs) < 2:
        raise EmptyOid("an OID needs at least two arcs")
    first, second = arcs[0], arcs[1]
    if first not in (0, 1, 2):
        raise ValueError("first arc must be 0, 1 or 2")
    if first < 2 and second >= 40:
        raise ValueError("second arc must be < 40 when the first is 0 or 1")
    if any(a < 0 for a in arcs):
        raise ValueError("arcs must be non-negative")
    out = bytearray()
    for value in (first * 40 + second,) + tuple(arcs[2:]):
        chunk = [value & 0x7F]
        value >>= 7
        while value:
            chunk.append(0x80 | (value & 0x7F))
            value >>= 7
        out.extend(reversed(chunk))
    return bytes(out)


def decode_oid(content: bytes) -> tuple[int, ...]:
    """Arcs of an OBJECT IDENTIFIER from content octets."""
    if len(content) == 0:
        raise EmptyOid("OID with empty content")
    values = []
    acc = 0
    started = False
    for byte in content:
        if not started and byte == 0x80:
            raise MalformedDer("non-minimal OID arc encoding")
        started = True
        acc = (acc << 7) | (byte & 0x7F)
        if not byte & 0x80:
            values.append(acc)
            acc = 0
            started = False
    if started:
        raise ArcOverflow("OID arc continuation never terminates")
    head = values[0]
    if head < 40:
        arcs = (0, head)
    elif head < 80:
        arcs = (1, head - 40)
    else:
        arcs = (2, head - 80)
    return arcs + tuple(values[1:])


@dataclass(frozen=True, order=True)
class Asn1Time:
    """A UTC timestamp with one-second resolution, held as epoch seconds."""

    epoch_seconds: int

    @classmethod
    def now(cls) -> "Asn1Time":
        return cls(int(datetime.now(timezone.utc).timestamp()))

    @classmethod
    def from_datetime(cls, dt: datetime) -> "Asn1Time":
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return cls(int(dt.timestamp()))

    @classmethod
    def parse(cls, text: str) -> "Asn1Time":
        """Accepts integer epoch seconds or an ISO-8601 UTC timestamp."""
        text = text.strip()
        if re.fullmatch(r"-?\d+", text):
            return cls(int(text))
        iso = text[:-1] + "+00:00" if text.endswith("Z") else text
        try:
            dt = datetime.fromisoformat(iso)
        except ValueError as exc:
            raise ValueError(f"unrecognized time {text!r}") from exc
        return cls.from_datetime(dt)

    def to_datetime(self) -> datetime:
        return datetime.fromtimestamp(self.epoch_seconds, tz=timezone.utc)

    def plus(self, seconds: float) -> "Asn1Time":
        return Asn1Time(self.epoch_seconds + int(seconds))

    @property
    def year(self) -> int:
        return self.to_datetime().year

    def __str__(self) -> str:
        return self.to_datetime().strftime("%Y-%m-%dT%H:%M:%SZ")


def encode_time(t: Asn1Time) -> bytes:
    """Full TLV for the CRL Time choice.

    Years 1950-2049 use UTCTime, 2050-9999 use GeneralizedTime, matching
    the canonical choice rule for certificate and CRL validity fields.
    """
    year = t.year
    if 1950 <= year <= 2049:
        dt = t.to_datetime()
        content = (
            f"{year % 100:02d}{dt.month:02d}{dt.day:02d}"
            f"{dt.hour:02d}{dt.minute:02d}{dt.second:02d}Z"
        )
        return encode_tlv(UTC_TIME, content.encode("ascii"))
    if 2050 <= year <= 9999:
        return encode_generalized_time(t)
    raise ValueError(f"year {year} outside the encodable range 1950-9999")


def encode_generalized_time(t: Asn1Time) -> bytes:
    """Full TLV for GeneralizedTime regardless of year (OCSP fields)."""
    dt = t.to_datetime()
    if not 1 <= dt.year <= 9999:
        raise ValueError("year outside GeneralizedTime range")
    content = (
        f"{dt.year:04d}{dt.month:02d}{dt.day:02d}"
        f"{dt.hour:02d}{dt.minute:02d}{dt.second:02d}Z"
    )
    return encode_tlv(GENERALIZED_TIME, content.encode("ascii"))


def _parse_stamp(text: str, year: int) -> Asn1Time:
    try:
        dt = datetime(
            year,
            int(text[0:2]), int(text[2:4]),
            int(text[4:6]), int(text[6:8]), int(text[8:10]),
            tzinfo=timezone.utc,
        )
    except ValueError as exc:
        raise MalformedTime(f"invalid calendar time: {exc}") from exc
    return Asn1Time(int(dt.timestamp()))


def time_from_tlv(tag: int, content: bytes, *, choice: bool = True) -> Asn1Time:
    """Interpret an already-split time element.

    With choice=True (the CRL Time rule) a GeneralizedTime before 2050 is
    rejected as non-canonical; with choice=False any GeneralizedTime year
    is accepted, which is what OCSP timestamp fields need.
    """
    try:
        text = content.decode("ascii")
    except UnicodeDecodeError as exc:
        raise MalformedTime("time content is not ASCII") from exc
    if tag == UTC_TIME:
        if len(text) != 13 or not text[:-1].isdigit() or text[-1] != "Z":
            raise MalformedTime(f"UTCTime must be YYMMDDHHMMSSZ, got {text!r}")
        yy = int(text[:2])
        year = 1900 + yy if yy >= 50 else 2000 + yy
        return _parse_stamp(text[2:], year)
    if tag == GENERALIZED_TIME:
        if len(text) != 15 or not text[:-1].isdigit() or text[-1] != "Z":
            raise MalformedTime(f"GeneralizedTime must be YYYYMMDDHHMMSSZ, got {text!r}")
        year = int(text[:4])
        if choice and year < 2050:
            raise MalformedTime("years before 2050 must use UTCTime")
        return _parse_stamp(text[4:], year)
    raise MalformedTime(f"tag 0x{tag:02X} is not a time type")


def decode_time(data: bytes) -> Asn1Time:
    """Decode a lone Time element (UTCTime or GeneralizedTime TLV)."""
    tag, content, rest = decode_tlv(data)
    if rest:
        raise MalformedTime("trailing bytes after time element")
    return time_from_tlv(tag, content)


def decode_generalized_time(data: bytes) -> Asn1Time:
    """Decode a lone GeneralizedTime element, any year allowed."""
    tag, content, rest = decode_tlv(data)
    if rest:
        raise MalformedTime("trailing bytes after time element")
    if tag != GENERALIZED_TIME:
        raise MalformedTime("expected GeneralizedTime")
    return time_from_tlv(tag, content, choice=False)


_PEM_LINE = 64
_LABEL_RE = re.compile(r"^[A-Z0-9 ]+$")


def pem_encode(label: str, der: bytes) -> str:
    """Wrap DER bytes in RFC 7468 armor with 64-column base64 lines."""
    if not label or not _LABEL_RE.match(label):
        raise ValueError(f"bad PEM label {label!r}")
    body = base64.b64encode(der).decode("ascii")
    lines = [body[i:i + _PEM_LINE] for i in range(0, len(body), _PEM_LINE)]
    return "".join(
        [f"-----BEGIN {label}-----\n"]
        + [line + "\n" for line in lines]
        + [f"-----END {label}-----\n"]
    )


def pem_decode(text: str) -> tuple[str, bytes]:
    """Return (label, der) from the first PEM block in `text`."""
    begin = re.search(r"-----BEGIN ([A-Z0-9 ]+)-----", text)
    if begin is None:
        raise BadArmor("no BEGIN line found")
    label = begin.group(1)
    end = re.search(r"-----END ([A-Z0-9 ]+)-----", text[begin.end():])
    if end is None:
        raise BadArmor("no END line found")
    if end.group(1) != label:
        raise BadArmor(f"label mismatch: BEGIN {label}, END {end.group(1)}")
    body = text[begin.end():begin.end() + end.start()]
    compact = "".join(body.split())
    try:
        der = base64.b64decode(compact, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadArmor(f"invalid base64 payload: {exc}") from exc
    return label, der
