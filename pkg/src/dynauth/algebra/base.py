"""Backend-independent pieces of the bilinear group layer."""

from __future__ import annotations

import hashlib
import random
import secrets
import threading
from abc import ABC, abstractmethod
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Union

from ..errors import EncodingError, MaskCorrupt, PointInvalid

OPS = ("pairing", "g1_mul", "g1_add", "map_to_point", "hash")

_system_rng = secrets.SystemRandom()


class Point:
    """An element of the additive source group.

    ``raw`` is the backend's native representation, ``data`` the canonical
    encoding. Equality and hashing go through ``data`` so points from
    different code paths compare correctly regardless of coordinate system.
    ``twin`` is only set for published points (the generator and the RC
    public key) and holds the mirrored representative in the second source
    group of an asymmetric pairing.
    """

    __slots__ = ("raw", "data", "is_identity", "twin")

    def __init__(self, raw: Any, data: bytes, is_identity: bool, twin: Any = None):
        self.raw = raw
        self.data = data
        self.is_identity = is_identity
        self.twin = twin

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Point) and self.data == other.data

    def __hash__(self) -> int:
        return hash(self.data)

    def __bytes__(self) -> bytes:
        return self.data

    def __repr__(self) -> str:
        return f"Point({self.data.hex()})"


@dataclass(frozen=True)
class MaskBlob:
    """Result of XOR-ing point encodings; not required to be a group element."""

    data: bytes

    def __bytes__(self) -> bytes:
        return self.data

    def __len__(self) -> int:
        return len(self.data)


Field = Union[Point, MaskBlob, int, bytes, str]


class OpCounters:
    """Monotone tallies of the expensive group operations."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts = dict.fromkeys(OPS, 0)

    def bump(self, op: str, n: int = 1) -> None:
        with self._lock:
            self._counts[op] += n

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def __getitem__(self, op: str) -> int:
        return self._counts[op]


class PairingSuite(ABC):
    """Cyclic groups, pairing, hashes and encodings for one backend.

    Only ``scalar_mul``, ``point_add``, ``pairing``, ``map_to_point`` and
    ``hash`` touch the counters; encoding, masking and validation are free,
    matching how the cost model treats XOR and modular arithmetic.
    """

    backend_id: str
    q: int
    point_len: int
    P: Point

    def __init__(self) -> None:
        self.counters = OpCounters()

    # -- descriptors -----------------------------------------------------------

    @property
    @abstractmethod
    def descriptor(self) -> str:
        """Short string from which :func:`suite_from_descriptor` rebuilds the suite."""

    @property
    def scalar_len(self) -> int:
        return (self.q.bit_length() + 7) // 8

    # -- counted operations ----------------------------------------------------

    def scalar_mul(self, k: int, X: Point) -> Point:
        self.counters.bump("g1_mul")
        return self._mul(k % self.q, X)

    def point_add(self, X: Point, Y: Point) -> Point:
        self.counters.bump("g1_add")
        return self._add(X, Y)

    def pairing(self, X: Point, Y: Point):
        self.counters.bump("pairing")
        return self._pair(X, Y)

    def map_to_point(self, msg: bytes | str) -> Point:
        self.counters.bump("map_to_point")
        if isinstance(msg, str):
            msg = msg.encode()
        return self._map(msg)

    def hash(self, *fields: Field) -> int:
        """Hash length-prefixed fields to a scalar mod ``q``."""
        self.counters.bump("hash")
        return self._hash([self.field_bytes(f) for f in fields])

    def publish(self, k: int) -> Point:
        """``k·P`` carrying its mirrored second-group representative.

        Counts as one scalar multiplication; the mirror is bookkeeping for
        asymmetric curves and does not exist in the symmetric cost model.
        """
        self.counters.bump("g1_mul")
        return self._publish(k % self.q)

    # -- free helpers ----------------------------------------------------------

    def field_bytes(self, f: Field) -> bytes:
        if isinstance(f, (Point, MaskBlob)):
            return f.data
        if isinstance(f, bool):
            raise TypeError("refusing to hash a bool")
        if isinstance(f, int):
            return self.encode_scalar(f)
        if isinstance(f, str):
            return f.encode()
        if isinstance(f, (bytes, bytearray)):
            return bytes(f)
        raise TypeError(f"cannot hash {type(f).__name__}")

    def frame(self, *fields: Field) -> bytes:
        out = bytearray()
        for f in fields:
            b = self.field_bytes(f)
            if len(b) > 255:
                raise EncodingError("hash field longer than 255 octets")
            out.append(len(b))
            out += b
        return bytes(out)

    def encode_scalar(self, k: int) -> bytes:
        return (k % self.q).to_bytes(self.scalar_len, "big")

    def decode_scalar(self, data: bytes) -> int:
        if len(data) != self.scalar_len:
            raise PointInvalid("scalar has wrong length")
        k = int.from_bytes(data, "big")
        if k >= self.q:
            raise PointInvalid("scalar out of range")
        return k

    def encode_point(self, X: Point) -> bytes:
        return X.data

    def random_scalar(self, rng=None) -> int:
        """Uniform scalar in ``[1, q-1]``; ``rng`` is any ``random.Random``-like source."""
        return (rng or _system_rng).randrange(1, self.q)

    def mask_xor(self, a: Point | MaskBlob, b: Point | MaskBlob) -> MaskBlob:
        x, y = a.data, b.data
        if len(x) != len(y) or len(x) != self.point_len:
            raise EncodingError("mask operands differ in length")
        return MaskBlob(bytes(i ^ j for i, j in zip(x, y)))

    def unmask_to_point(self, blob: MaskBlob, key: Point) -> Point:
        plain = self.mask_xor(blob, key)
        try:
            return self.decode_point(plain.data)
        except PointInvalid as exc:
            raise MaskCorrupt(str(exc)) from None

    @contextmanager
    def measure(self) -> Iterator[dict[str, int]]:
        """Collect the counter deltas of the enclosed block into the yielded dict."""
        before = self.counters.snapshot()
        delta: dict[str, int] = {}
        try:
            yield delta
        finally:
            after = self.counters.snapshot()
            delta.update({op: after[op] - before[op] for op in OPS})

    # -- backend hooks ---------------------------------------------------------

    @property
    @abstractmethod
    def identity(self) -> Point: ...

    @property
    @abstractmethod
    def gt_identity(self): ...

    @abstractmethod
    def decode_point(self, data: bytes) -> Point:
        """Parse and validate (on-curve, in-subgroup) a canonical encoding."""

    @abstractmethod
    def _mul(self, k: int, X: Point) -> Point: ...

    @abstractmethod
    def _add(self, X: Point, Y: Point) -> Point: ...

    @abstractmethod
    def _pair(self, X: Point, Y: Point): ...

    @abstractmethod
    def _map(self, msg: bytes) -> Point: ...

    @abstractmethod
    def _hash(self, fields: list[bytes]) -> int: ...

    @abstractmethod
    def _publish(self, k: int) -> Point: ...

    @abstractmethod
    def encode_twin(self, X: Point) -> bytes: ...

    @abstractmethod
    def decode_published(self, data: bytes, twin: bytes) -> Point: ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.descriptor}>"


def seeded_rng(seed: bytes | str | int, *labels: str | int):
    """Deterministic ``random.Random`` derived from a seed and a label path."""
    if isinstance(seed, int):
        seed = str(seed)
    if isinstance(seed, str):
        seed = seed.encode()
    h = hashlib.sha256(seed)
    for label in labels:
        h.update(b"\x00" + str(label).encode())
    return random.Random(int.from_bytes(h.digest(), "big"))
