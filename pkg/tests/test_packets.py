import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from lumen.names import Name
from lumen.packets import (
    ContentObject,
    Interest,
    TrailingBytes,
    TruncatedBuffer,
    UnknownTag,
    decode_packet,
    encode_packet,
)

VECTORS = Path(__file__).resolve().parent.parent / "vectors"

component = st.binary(min_size=1, max_size=40)
names = st.lists(component, min_size=0, max_size=6).map(Name)

interests = st.builds(
    Interest,
    name=names,
    nonce=st.binary(min_size=8, max_size=8),
    lifetime_ms=st.integers(min_value=1, max_value=2**32),
)

contents = st.builds(
    ContentObject,
    name=names,
    payload=st.binary(max_size=64),
    key_locator=names,
    signature=st.binary(max_size=64),
    timestamp_ms=st.integers(min_value=0, max_value=2**48),
)


def _random_packet(rng):
    def rand_name():
        return Name([rng.randbytes(rng.randrange(1, 12)) for _ in range(rng.randrange(0, 6))])

    if rng.random() < 0.5:
        return Interest(rand_name(), rng.randbytes(8), rng.randrange(1, 1 << 20))
    return ContentObject(
        name=rand_name(),
        payload=rng.randbytes(rng.randrange(0, 40)),
        key_locator=rand_name(),
        signature=rng.randbytes(rng.randrange(0, 40)),
        timestamp_ms=rng.randrange(0, 1 << 40),
    )


def test_golden_interest_vector():
    golden = bytes.fromhex((VECTORS / "interest_empty.hex").read_text().strip())
    i = Interest(Name(()), b"\x00" * 8, 4000)
    assert encode_packet(i) == golden
    assert decode_packet(golden) == i


def test_golden_content_vector():
    golden = bytes.fromhex((VECTORS / "content_null.hex").read_text().strip())
    c = decode_packet(golden)
    assert isinstance(c, ContentObject)
    assert c.name == Name.parse("/v")
    assert c.payload == b"x"
    assert c.key_locator == Name.parse("/v/key")
    assert encode_packet(c) == golden


def test_round_trip_10k_random_packets():
    rng = random.Random(20110820)
    for _ in range(10_000):
        p = _random_packet(rng)
        assert decode_packet(encode_packet(p)) == p


@given(st.one_of(interests, contents))
def test_round_trip_property(p):
    assert decode_packet(encode_packet(p)) == p


def test_truncation_fails_everywhere():
    p = Interest(Name.parse("/a/b"), b"\x01" * 8, 123)
    buf = encode_packet(p)
    with pytest.raises(TruncatedBuffer):
        decode_packet(buf[:-1])


def test_every_prefix_fails():
    p = ContentObject(name=Name.parse("/x/y"), payload=b"pp", key_locator=Name.parse("/k"), signature=b"s")
    buf = encode_packet(p)
    for cut in range(len(buf)):
        with pytest.raises((TruncatedBuffer, UnknownTag, TrailingBytes, ValueError)):
            decode_packet(buf[:cut])


def test_trailing_bytes_rejected():
    buf = encode_packet(Interest(Name(()), b"\x00" * 8, 1))
    with pytest.raises(TrailingBytes):
        decode_packet(buf + b"\x00")


def test_unknown_tag_rejected():
    buf = encode_packet(Interest(Name(()), b"\x00" * 8, 1))
    with pytest.raises(UnknownTag):
        decode_packet(b"\x7f" + buf[1:])


def test_invalid_fields_rejected():
    with pytest.raises(ValueError):
        Interest(Name(()), b"\x00" * 7, 1)
    with pytest.raises(ValueError):
        Interest(Name(()), b"\x00" * 8, 0)
    with pytest.raises(ValueError):
        ContentObject(name=Name(()), timestamp_ms=-1)
