"""Interest / ContentObject packets and the canonical TLV wire codec.

The wire format is a minimal canonical TLV: 1-byte type tag, unsigned
LEB128 length, value.  Field order inside each packet is fixed, so any
well-formed packet has exactly one encoding and decode(encode(p)) == p.
Golden vectors live under vectors/ as hex files.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .names import Name

# Type tags. Top level:
TAG_INTEREST = 0x01
TAG_CONTENT = 0x02
# Nested fields:
TAG_NAME = 0x10
TAG_COMPONENT = 0x11
TAG_NONCE = 0x12
TAG_LIFETIME = 0x13
TAG_PAYLOAD = 0x20
TAG_KEY_LOCATOR = 0x21
TAG_SIGNATURE = 0x22
TAG_TIMESTAMP = 0x23

NONCE_LEN = 8


class CodecError(ValueError):
    pass


class TruncatedBuffer(CodecError):
    pass


class UnknownTag(CodecError):
    pass


class TrailingBytes(CodecError):
    pass


@dataclass(frozen=True)
class Interest:
    """A request for content; carries a fresh nonce and a lifetime."""

    name: Name
    nonce: bytes
    lifetime_ms: int = 4000

    def __post_init__(self):
        if len(self.nonce) != NONCE_LEN:
            raise ValueError(f"nonce must be {NONCE_LEN} bytes")
        if self.lifetime_ms <= 0:
            raise ValueError("lifetime_ms must be positive")

    @classmethod
    def fresh(cls, name: Name, rng=None, lifetime_ms: int = 4000) -> "Interest":
        """Build an interest with a uniform-random nonce.

        Pass a seeded random.Random for deterministic simulation runs;
        otherwise the nonce comes from the OS.
        """
        if rng is None:
            import secrets

            nonce = secrets.token_bytes(NONCE_LEN)
        else:
            nonce = rng.randbytes(NONCE_LEN)
        return cls(name=name, nonce=nonce, lifetime_ms=lifetime_ms)


@dataclass(frozen=True)
class ContentObject:
    """A named, signed payload.

    The signature covers encode(name) || payload || encode(key_locator)
    under a domain-separation prefix (see crypto.sign_content); an empty
    signature is invalid everywhere outside codec unit tests.
    """

    name: Name
    payload: bytes = b""
    key_locator: Name = field(default_factory=Name)
    signature: bytes = b""
    timestamp_ms: int = 0

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be non-negative")


Packet = Interest | ContentObject


def _varint(n: int) -> bytes:
    """Unsigned LEB128."""
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise TruncatedBuffer("varint runs off buffer")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise CodecError("varint too large")


def _tlv(tag: int, value: bytes) -> bytes:
    return bytes([tag]) + _varint(len(value)) + value


def _read_tlv(buf: bytes, pos: int, expect_tag: int) -> tuple[bytes, int]:
    if pos >= len(buf):
        raise TruncatedBuffer(f"expected tag 0x{expect_tag:02x} at end of buffer")
    tag = buf[pos]
    if tag != expect_tag:
        raise UnknownTag(f"expected tag 0x{expect_tag:02x}, found 0x{tag:02x}")
    length, pos = _read_varint(buf, pos + 1)
    if pos + length > len(buf):
        raise TruncatedBuffer(f"value of tag 0x{tag:02x} runs off buffer")
    return buf[pos : pos + length], pos + length


def _uint_bytes(n: int) -> bytes:
    """Minimal big-endian encoding, at least one byte."""
    return n.to_bytes(max(1, (n.bit_length() + 7) // 8), "big")


def _read_uint(value: bytes) -> int:
    if not value:
        raise CodecError("empty integer value")
    if len(value) > 1 and value[0] == 0:
        raise CodecError("non-minimal integer encoding")
    return int.from_bytes(value, "big")


def encode_name(name: Name) -> bytes:
    inner = b"".join(_tlv(TAG_COMPONENT, c) for c in name.components)
    return _tlv(TAG_NAME, inner)


def decode_name_value(value: bytes) -> Name:
    comps = []
    pos = 0
    while pos < len(value):
        c, pos = _read_tlv(value, pos, TAG_COMPONENT)
        comps.append(c)
    return Name(comps)


def _decode_name(buf: bytes, pos: int, tag: int = TAG_NAME) -> tuple[Name, int]:
    value, pos = _read_tlv(buf, pos, tag)
    return decode_name_value(value), pos


def encode_packet(p: Packet) -> bytes:
    if isinstance(p, Interest):
        body = encode_name(p.name) + _tlv(TAG_NONCE, p.nonce) + _tlv(TAG_LIFETIME, _uint_bytes(p.lifetime_ms))
        return _tlv(TAG_INTEREST, body)
    if isinstance(p, ContentObject):
        body = (
            encode_name(p.name)
            + _tlv(TAG_PAYLOAD, p.payload)
            + _tlv(TAG_KEY_LOCATOR, encode_name(p.key_locator))
            + _tlv(TAG_SIGNATURE, p.signature)
            + _tlv(TAG_TIMESTAMP, _uint_bytes(p.timestamp_ms))
        )
        return _tlv(TAG_CONTENT, body)
    raise TypeError(f"not a packet: {type(p).__name__}")


def decode_packet(buf: bytes) -> Packet:
    if not buf:
        raise TruncatedBuffer("empty buffer")
    tag = buf[0]
    if tag not in (TAG_INTEREST, TAG_CONTENT):
        raise UnknownTag(f"unknown packet tag 0x{tag:02x}")
    length, pos = _read_varint(buf, 1)
    if pos + length > len(buf):
        raise TruncatedBuffer("packet body runs off buffer")
    if pos + length != len(buf):
        raise TrailingBytes(f"{len(buf) - pos - length} bytes after packet")
    body = buf[pos : pos + length]
    if tag == TAG_INTEREST:
        bpos = 0
        name, bpos = _decode_name(body, bpos)
        nonce, bpos = _read_tlv(body, bpos, TAG_NONCE)
        lifetime, bpos = _read_tlv(body, bpos, TAG_LIFETIME)
        if bpos != len(body):
            raise TrailingBytes(f"{len(body) - bpos} bytes after interest fields")
        return Interest(name=name, nonce=nonce, lifetime_ms=_read_uint(lifetime))
    bpos = 0
    name, bpos = _decode_name(body, bpos)
    payload, bpos = _read_tlv(body, bpos, TAG_PAYLOAD)
    kl_value, bpos = _read_tlv(body, bpos, TAG_KEY_LOCATOR)
    key_locator, kpos = _decode_name(kl_value, 0)
    if kpos != len(kl_value):
        raise TrailingBytes("bytes after key locator name")
    signature, bpos = _read_tlv(body, bpos, TAG_SIGNATURE)
    timestamp, bpos = _read_tlv(body, bpos, TAG_TIMESTAMP)
    if bpos != len(body):
        raise TrailingBytes(f"{len(body) - bpos} bytes after content fields")
    return ContentObject(
        name=name,
        payload=payload,
        key_locator=key_locator,
        signature=signature,
        timestamp_ms=_read_uint(timestamp),
    )
