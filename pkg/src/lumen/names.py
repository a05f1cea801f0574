"""Hierarchical names: ordered byte-string components with a URI form.

Names are the universal address and identity carrier.  Components are
opaque byte strings; the URI rendering escapes anything that is not
printable ASCII (and the ``/`` and ``%`` delimiters themselves) as %XX.
"""

from __future__ import annotations

from typing import Iterable, Iterator

MAX_COMPONENT_LEN = 255
MAX_COMPONENTS = 32

# Bytes rendered literally in URIs: printable ASCII minus '/' and '%'.
_LITERAL = frozenset(b for b in range(0x21, 0x7F) if b not in (0x2F, 0x25))
_HEX = "0123456789ABCDEF"


class NameError_(ValueError):
    """Base class for name construction/parsing failures."""


class MalformedEscape(NameError_):
    """A %XX escape in a URI is incomplete or not hex."""


class ComponentTooLong(NameError_):
    """A component exceeds the 255-byte limit."""


class TooManyComponents(NameError_):
    """A name exceeds the 32-component limit."""


class Name:
    """An immutable sequence of 1..255-byte components, at most 32 of them."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[bytes] = ()):
        comps = tuple(bytes(c) for c in components)
        if len(comps) > MAX_COMPONENTS:
            raise TooManyComponents(f"{len(comps)} components (max {MAX_COMPONENTS})")
        for c in comps:
            if not c:
                raise NameError_("empty component")
            if len(c) > MAX_COMPONENT_LEN:
                raise ComponentTooLong(f"{len(c)} bytes (max {MAX_COMPONENT_LEN})")
        object.__setattr__(self, "components", comps)

    def __setattr__(self, *a):
        raise AttributeError("Name is immutable")

    @classmethod
    def parse(cls, uri: str) -> "Name":
        """Parse a /-delimited URI with %XX escapes into a Name.

        The URI must begin with '/'; '/' alone is the empty name.
        """
        if not uri.startswith("/"):
            raise NameError_(f"URI must start with '/': {uri!r}")
        if uri == "/":
            return cls(())
        comps = []
        for raw in uri[1:].split("/"):
            comps.append(_unescape(raw))
        return cls(comps)

    def uri(self) -> str:
        """Render as a URI; parse(uri()) round-trips exactly."""
        if not self.components:
            return "/"
        return "".join("/" + _escape(c) for c in self.components)

    def is_prefix_of(self, other: "Name") -> bool:
        """True iff every component of self equals the corresponding leading component of other."""
        if len(self.components) > len(other.components):
            return False
        return self.components == other.components[: len(self.components)]

    def append(self, *components: bytes) -> "Name":
        return Name(self.components + tuple(components))

    def __add__(self, other: "Name") -> "Name":
        return Name(self.components + other.components)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Name(self.components[i])
        return self.components[i]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[bytes]:
        return iter(self.components)

    def __eq__(self, other) -> bool:
        return isinstance(other, Name) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __repr__(self) -> str:
        return f"Name({self.uri()!r})"

    def __str__(self) -> str:
        return self.uri()


def _escape(component: bytes) -> str:
    out = []
    for b in component:
        if b in _LITERAL:
            out.append(chr(b))
        else:
            out.append("%" + _HEX[b >> 4] + _HEX[b & 0xF])
    return "".join(out)


def _unescape(raw: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "%":
            if len(raw) - i < 3:
                raise MalformedEscape(f"truncated escape in {raw!r}")
            try:
                out.append(int(raw[i + 1 : i + 3], 16))
            except ValueError:
                raise MalformedEscape(f"bad hex in {raw!r}") from None
            i += 3
        else:
            code = ord(ch)
            if code > 0xFF:
                raise MalformedEscape(f"non-byte character {ch!r} in {raw!r}")
            out.append(code)
            i += 1
    if len(out) > MAX_COMPONENT_LEN:
        raise ComponentTooLong(f"{len(out)} bytes (max {MAX_COMPONENT_LEN})")
    return bytes(out)


def name_parse(uri: str) -> Name:
    return Name.parse(uri)


def name_is_prefix(a: Name, b: Name) -> bool:
    return a.is_prefix_of(b)
