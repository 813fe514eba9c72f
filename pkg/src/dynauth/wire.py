"""Message types, canonical framing and transcripts.

A frame is one tag octet followed by the message fields in declaration
order. Fixed-width fields (points, scalars, masks, digests) are written
bare; variable-length identity strings get a one-octet length prefix.
Widths come from the :class:`Codec`'s suite and digest length, so a frame
is only meaningful together with the backend that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import ClassVar, Iterable, Iterator

from .algebra import MaskBlob, PairingSuite, Point
from .errors import PointInvalid, Truncated, UnknownTag

# field kinds
POINT, SCALAR, BLOB, OCTETS, DIGEST = "point", "scalar", "blob", "octets", "digest"


class Message:
    TAG: ClassVar[int]
    KINDS: ClassVar[tuple[str, ...]]

    @property
    def type_name(self) -> str:
        return type(self).__name__


def _msg(tag: int, *kinds: str):
    def wrap(cls):
        cls = dataclass(frozen=True)(cls)
        cls.TAG = tag
        cls.KINDS = kinds
        return cls
    return wrap


# -- proposed scheme -------------------------------------------------------------

@_msg(0x01, POINT, POINT)
class LoginRequest(Message):
    DID: Point
    R: Point


@_msg(0x02, POINT, POINT, SCALAR)
class ServerChallenge(Message):
    W: Point
    R_j: Point
    auth: int


@_msg(0x03, POINT, POINT)
class UserResponse(Message):
    M: Point
    B: Point


@_msg(0x11, OCTETS, BLOB, POINT)
class PwChangeRequest(Message):
    ID: bytes
    AID: MaskBlob
    Z: Point


@_msg(0x12, SCALAR)
class PwChangeAck(Message):
    V1: int


@_msg(0x13, BLOB, SCALAR)
class PwChangeNew(Message):
    V2: MaskBlob
    V3: int


@_msg(0x14, BLOB, SCALAR)
class PwChangeIssue(Message):
    V4: MaskBlob
    V5: int


# registration travels over secure links only

@_msg(0x21, OCTETS, POINT)
class UserRegRequest(Message):
    ID: bytes
    HPW: Point


@_msg(0x22, BLOB, SCALAR)
class CardIssue(Message):
    reg: MaskBlob
    H: int


@_msg(0x23, OCTETS, POINT)
class ServerRegRequest(Message):
    SID: bytes
    V: Point


@_msg(0x24, POINT, SCALAR)
class ServerKeyIssue(Message):
    W: Point
    s_partial: int


# -- hash-only baseline ------------------------------------------------------------

@_msg(0x31, DIGEST, DIGEST, DIGEST, DIGEST)
class LiLogin(Message):
    P_ij: bytes
    CID: bytes
    M1: bytes
    M2: bytes


@_msg(0x32, DIGEST, DIGEST)
class LiChallenge(Message):
    M3: bytes
    M4: bytes


@_msg(0x33, DIGEST)
class LiConfirm(Message):
    M5: bytes


@_msg(0x34, OCTETS, DIGEST)
class LiRegRequest(Message):
    ID: bytes
    A: bytes


@_msg(0x35, DIGEST, DIGEST, DIGEST, DIGEST)
class LiCardIssue(Message):
    C: bytes
    D: bytes
    E: bytes
    hy: bytes


MESSAGE_TYPES: dict[int, type] = {
    cls.TAG: cls
    for cls in (
        LoginRequest, ServerChallenge, UserResponse,
        PwChangeRequest, PwChangeAck, PwChangeNew, PwChangeIssue,
        UserRegRequest, CardIssue, ServerRegRequest, ServerKeyIssue,
        LiLogin, LiChallenge, LiConfirm, LiRegRequest, LiCardIssue,
    )
}
BY_NAME: dict[str, type] = {cls.__name__: cls for cls in MESSAGE_TYPES.values()}


class Codec:
    """Encoder/decoder bound to one suite and one digest length."""

    def __init__(self, suite: PairingSuite | None, digest_len: int = 32):
        self.suite = suite
        self.digest_len = digest_len

    def _width(self, kind: str) -> int:
        if kind in (POINT, BLOB):
            return self.suite.point_len
        if kind == SCALAR:
            return self.suite.scalar_len
        return self.digest_len

    def encode(self, msg: Message) -> bytes:
        out = bytearray([msg.TAG])
        for f, kind in zip(fields(msg), msg.KINDS):
            v = getattr(msg, f.name)
            if kind == SCALAR:
                b = self.suite.encode_scalar(v)
            elif kind == OCTETS:
                b = bytes(v)
                if len(b) > 255:
                    raise ValueError(f"{f.name} longer than 255 octets")
                out.append(len(b))
            else:
                b = bytes(v)
                if len(b) != self._width(kind):
                    raise ValueError(f"{f.name} has width {len(b)}, expected {self._width(kind)}")
            out += b
        return bytes(out)

    def decode(self, data: bytes) -> Message:
        if not data:
            raise Truncated("empty frame")
        cls = MESSAGE_TYPES.get(data[0])
        if cls is None:
            raise UnknownTag(f"unknown message tag 0x{data[0]:02x}")
        pos, values = 1, []
        for kind in cls.KINDS:
            if kind == OCTETS:
                if pos >= len(data):
                    raise Truncated("missing length prefix")
                width = data[pos]
                pos += 1
            else:
                width = self._width(kind)
            chunk = data[pos:pos + width]
            if len(chunk) != width:
                raise Truncated(f"{cls.__name__} frame truncated")
            pos += width
            if kind == POINT:
                values.append(self.suite.decode_point(chunk))
            elif kind == SCALAR:
                values.append(self.suite.decode_scalar(chunk))
            elif kind == BLOB:
                values.append(MaskBlob(chunk))
            else:
                values.append(bytes(chunk))
        if pos != len(data):
            raise PointInvalid(f"{len(data) - pos} trailing octets after {cls.__name__}")
        return cls(*values)

    def peek_type(self, data: bytes) -> str:
        cls = MESSAGE_TYPES.get(data[0]) if data else None
        return cls.__name__ if cls else "?"


def encode(suite: PairingSuite, msg: Message, digest_len: int = 32) -> bytes:
    return Codec(suite, digest_len).encode(msg)


def decode(suite: PairingSuite, data: bytes, digest_len: int = 32) -> Message:
    return Codec(suite, digest_len).decode(data)


# -- transcripts -----------------------------------------------------------------

@dataclass(frozen=True)
class Entry:
    ts: int
    src: str
    dst: str
    type: str
    payload: bytes

    def to_record(self) -> dict:
        return {"ts": self.ts, "from": self.src, "to": self.dst,
                "type": self.type, "payload": self.payload.hex()}

    @classmethod
    def from_record(cls, rec: dict) -> "Entry":
        return cls(int(rec["ts"]), rec["from"], rec["to"], rec["type"],
                   bytes.fromhex(rec["payload"]))


class Transcript:
    """Append-only record of every frame put on the wire."""

    def __init__(self, entries: Iterable[Entry] = ()):
        self._entries: list[Entry] = list(entries)

    def append(self, entry: Entry) -> None:
        if self._entries and entry.ts < self._entries[-1].ts:
            raise ValueError("transcript timestamps must be monotone")
        self._entries.append(entry)

    def __iter__(self) -> Iterator[Entry]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, i):
        return self._entries[i]

    def select(self, type: str | None = None, src: str | None = None,
               dst: str | None = None) -> list[Entry]:
        return [e for e in self._entries
                if (type is None or e.type == type)
                and (src is None or e.src == src)
                and (dst is None or e.dst == dst)]

    def replay(self, consumer) -> None:
        """Feed every payload, in order, to ``consumer(entry)``."""
        for e in self._entries:
            consumer(e)

    def dumps(self) -> str:
        return "".join(json.dumps(e.to_record(), sort_keys=True) + "\n" for e in self._entries)

    @classmethod
    def loads(cls, text: str) -> "Transcript":
        return cls(Entry.from_record(json.loads(line)) for line in text.splitlines() if line.strip())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path: str | Path) -> "Transcript":
        return cls.loads(Path(path).read_text())
