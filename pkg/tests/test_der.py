"""Unit and property tests for the strict DER codec and PEM armor."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridpki import der
from gridpki.der import (
    Asn1Time,
    ArcOverflow,
    BadArmor,
    EmptyOid,
    MalformedDer,
    MalformedTime,
    NonMinimalLength,
    Truncated,
)

# --- TLV encoding -----------------------------------------------------------


def test_encode_tlv_short_form():
    assert der.encode_tlv(0x02, b"\x05") == bytes.fromhex("020105")


def test_encode_tlv_empty_payload():
    assert der.encode_tlv(0x05, b"") == bytes.fromhex("0500")


def test_encode_tlv_long_form_boundary():
    payload = bytes(130)
    out = der.encode_tlv(0x30, payload)
    assert out[:3] == bytes.fromhex("308182")
    assert out[3:] == payload
    # 127 bytes still fits the short form
    assert der.encode_tlv(0x30, bytes(127))[:2] == bytes.fromhex("307F")


def test_encode_tlv_two_byte_length():
    out = der.encode_tlv(0x30, bytes(256))
    assert out[:4] == bytes.fromhex("30820100")


def test_decode_tlv_returns_rest():
    tag, payload, rest = der.decode_tlv(bytes.fromhex("020105") + b"tail")
    assert (tag, payload, rest) == (0x02, b"\x05", b"tail")


def test_decode_rejects_non_minimal_length():
    with pytest.raises(NonMinimalLength):
        der.decode_tlv(bytes.fromhex("028105") + bytes(5))


def test_decode_rejects_leading_zero_length():
    data = bytes.fromhex("30820082") + bytes(0x82)
    with pytest.raises(NonMinimalLength):
        der.decode_tlv(data)


def test_decode_rejects_indefinite_length():
    with pytest.raises(MalformedDer):
        der.decode_tlv(bytes.fromhex("3080020105000000"))


def test_decode_rejects_multibyte_tag():
    with pytest.raises(MalformedDer):
        der.decode_tlv(bytes.fromhex("3F100105"))


def test_decode_truncated_payload():
    with pytest.raises(Truncated):
        der.decode_tlv(bytes.fromhex("300509"))
    with pytest.raises(Truncated):
        der.decode_tlv(bytes.fromhex("3082FFFF0000"))
    with pytest.raises(Truncated):
        der.decode_tlv(b"\x30")
    with pytest.raises(Truncated):
        der.decode_tlv(b"")


@given(tag=st.integers(0, 0xFF).filter(lambda t: t & 0x1F != 0x1F),
       payload=st.binary(max_size=600))
def test_tlv_round_trip(tag, payload):
    encoded = der.encode_tlv(tag, payload)
    got_tag, got_payload, rest = der.decode_tlv(encoded)
    assert (got_tag, got_payload, rest) == (tag, payload, b"")


# --- INTEGER ----------------------------------------------------------------


def test_integer_content_zero():
    assert der.encode_integer(0) == b"\x00"


def test_integer_sign_padding():
    assert der.encode_integer(0x80) == bytes.fromhex("0080")
    assert der.encode_integer(0x7F) == b"\x7f"


def test_integer_64_bit_serial():
    assert der.encode_integer(0x221A0A99711F9968) == bytes.fromhex("221A0A99711F9968")


def test_integer_rejects_negative():
    with pytest.raises(ValueError):
        der.encode_integer(-1)


def test_decode_integer_strictness():
    with pytest.raises(MalformedDer):
        der.decode_integer(b"")
    with pytest.raises(MalformedDer):
        der.decode_integer(bytes.fromhex("0005"))
    with pytest.raises(MalformedDer):
        der.decode_integer(bytes.fromhex("FF85"))
    # required padding is fine
    assert der.decode_integer(bytes.fromhex("0080")) == 0x80


@given(st.integers(min_value=0, max_value=1 << 200))
def test_integer_round_trip(value):
    assert der.decode_integer(der.encode_integer(value)) == value


# --- OBJECT IDENTIFIER ------------------------------------------------------


def _oracle_oid(arcs):
    """Independent base-128 packer used to cross-check encode_oid."""
    out = []
    values = [arcs[0] * 40 + arcs[1]] + list(arcs[2:])
    for v in values:
        digits = []
        while True:
            digits.append(v % 128)
            v //= 128
            if v == 0:
                break
        digits = list(reversed(digits))
        out.extend(d | 0x80 for d in digits[:-1])
        out.append(digits[-1])
    return bytes(out)


def test_oid_crl_reason_code():
    assert der.encode_oid((2, 5, 29, 21)) == bytes.fromhex("551D15")


def test_oid_sha256_with_rsa():
    arcs = (1, 2, 840, 113549, 1, 1, 11)
    assert der.encode_oid(arcs) == bytes.fromhex("2A864886F70D01010B")
    assert der.encode_oid(arcs) == _oracle_oid(arcs)


def test_oid_decode_known():
    assert der.decode_oid(bytes.fromhex("551D15")) == (2, 5, 29, 21)
    assert der.decode_oid(bytes.fromhex("2A864886F70D01010B")) == (1, 2, 840, 113549, 1, 1, 11)


def test_oid_rejects_short():
    with pytest.raises(EmptyOid):
        der.encode_oid((2,))
    with pytest.raises(EmptyOid):
        der.decode_oid(b"")


def test_oid_rejects_unterminated_arc():
    with pytest.raises(ArcOverflow):
        der.decode_oid(bytes.fromhex("2A86"))


def test_oid_rejects_padded_arc():
    with pytest.raises(MalformedDer):
        der.decode_oid(bytes.fromhex("2A8086F70D"))


_oid_arcs = st.tuples(
    st.integers(0, 2),
    st.integers(0, 39),
).flatmap(
    lambda head: st.lists(st.integers(0, 1 << 40), max_size=6).map(
        lambda tail: head + tuple(tail)
    )
)


@given(_oid_arcs)
def test_oid_round_trip(arcs):
    encoded = der.encode_oid(arcs)
    assert encoded == _oracle_oid(arcs)
    assert der.decode_oid(encoded) == arcs


# --- Time -------------------------------------------------------------------


def test_utctime_example():
    t = Asn1Time.parse("2023-05-04T19:57:27Z")
    assert t.epoch_seconds == 1683230247
    encoded = der.encode_time(t)
    assert encoded == der.encode_tlv(der.UTC_TIME, b"230504195727Z")
    assert der.decode_time(encoded) == t


def test_generalized_time_boundary():
    t = Asn1Time.parse("2050-01-01T00:00:00Z")
    encoded = der.encode_time(t)
    assert encoded == der.encode_tlv(der.GENERALIZED_TIME, b"20500101000000Z")
    assert der.decode_time(encoded) == t
    # 2049 still uses UTCTime
    before = Asn1Time.parse("2049-12-31T23:59:59Z")
    assert der.encode_time(before)[0] == der.UTC_TIME


def test_utctime_window_wraps_1950():
    t = der.decode_time(der.encode_tlv(der.UTC_TIME, b"500101000000Z"))
    assert t.year == 1950
    t = der.decode_time(der.encode_tlv(der.UTC_TIME, b"491231235959Z"))
    assert t.year == 2049


def test_decode_time_rejects_malformed():
    bad = [
        der.encode_tlv(der.UTC_TIME, b"2305041957Z"),       # missing seconds
        der.encode_tlv(der.UTC_TIME, b"230504195727"),      # no Z suffix
        der.encode_tlv(der.UTC_TIME, b"231304195727Z"),     # month 13
        der.encode_tlv(der.UTC_TIME, b"230504195727+0000"),  # offset form
        der.encode_tlv(der.GENERALIZED_TIME, b"20230504195727Z"),  # wrong choice
        der.encode_tlv(der.GENERALIZED_TIME, b"20500101000000.5Z"),
        der.encode_tlv(der.OCTET_STRING, b"230504195727Z"),
    ]
    for data in bad:
        with pytest.raises(MalformedTime):
            der.decode_time(data)


def test_generalized_decoder_allows_early_years():
    data = der.encode_generalized_time(Asn1Time.parse("2023-05-04T19:57:27Z"))
    assert der.decode_generalized_time(data).epoch_seconds == 1683230247


@given(st.integers(min_value=-631152000, max_value=253402300799))
def test_time_round_trip(epoch):
    t = Asn1Time(epoch)
    assert der.decode_time(der.encode_time(t)) == t


@given(st.integers(min_value=-631152000, max_value=253402300799))
def test_generalized_time_round_trip(epoch):
    t = Asn1Time(epoch)
    assert der.decode_generalized_time(der.encode_generalized_time(t)) == t


def test_asn1time_parse_forms():
    assert Asn1Time.parse("1683230247") == Asn1Time(1683230247)
    assert Asn1Time.parse("2023-05-04T19:57:27+00:00") == Asn1Time(1683230247)
    assert str(Asn1Time(1683230247)) == "2023-05-04T19:57:27Z"


# --- PEM armor --------------------------------------------------------------


def test_pem_round_trip():
    der_bytes = bytes(range(200))
    text = der.pem_encode("X509 CRL", der_bytes)
    assert text.startswith("-----BEGIN X509 CRL-----\n")
    assert text.endswith("-----END X509 CRL-----\n")
    label, decoded = der.pem_decode(text)
    assert label == "X509 CRL"
    assert decoded == der_bytes


def test_pem_line_width():
    text = der.pem_encode("X509 CRL", bytes(300))
    lines = text.splitlines()
    for line in lines[1:-1]:
        assert len(line) <= 64
    assert all(len(line) == 64 for line in lines[1:-2])


def test_pem_label_mismatch():
    text = der.pem_encode("X509 CRL", b"abc").replace("END X509 CRL", "END CERTIFICATE")
    with pytest.raises(BadArmor):
        der.pem_decode(text)


def test_pem_missing_armor():
    with pytest.raises(BadArmor):
        der.pem_decode("no armor here")


def test_pem_invalid_base64():
    text = "-----BEGIN X509 CRL-----\n@@@@\n-----END X509 CRL-----\n"
    with pytest.raises(BadArmor):
        der.pem_decode(text)


def test_pem_tolerates_surrounding_text():
    text = "junk before\n" + der.pem_encode("X509 CRL", b"\x01\x02") + "junk after\n"
    assert der.pem_decode(text) == ("X509 CRL", b"\x01\x02")


@settings(max_examples=50)
@given(st.binary(min_size=1, max_size=2000))
def test_pem_always_larger_than_der(payload):
    text = der.pem_encode("X509 CRL", payload)
    assert len(text.encode()) > len(payload)
    assert der.pem_decode(text)[1] == payload
