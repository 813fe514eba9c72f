"""Insecure small-prime model of a symmetric pairing group.

G1 is ``Z_q`` under addition with ``P = 1``, so every point *is* its own
discrete log. The target group is modelled by exponents as well:
``pairing(a·P, b·P)`` is the element with exponent ``a·b mod q``. This makes
every protocol identity checkable by plain modular arithmetic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..errors import PointInvalid
from .base import PairingSuite, Point

TF1_Q = 101
DEFAULT_Q = 2**127 - 1


@dataclass(frozen=True)
class TransparentGt:
    """Target-group element stored as its exponent, written multiplicatively."""

    exponent: int
    q: int

    def __mul__(self, other: "TransparentGt") -> "TransparentGt":
        return TransparentGt((self.exponent + other.exponent) % self.q, self.q)

    def __pow__(self, k: int) -> "TransparentGt":
        return TransparentGt(self.exponent * k % self.q, self.q)

    @property
    def is_identity(self) -> bool:
        return self.exponent == 0


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    small = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
    for p in small:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in small:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class TransparentSuite(PairingSuite):
    """Transparent backend.

    ``hash_mode="bytesum"`` is the desk-check oracle: a scalar hash is the sum
    of the field payload octets mod ``q`` (length prefixes excluded) and
    map-to-point is the octet sum of the message. ``hash_mode="sha256"``
    reduces SHA-256 of the framed input mod ``q`` instead, which is what the
    adversarial probes need so that lucky collisions are negligible.

    ``hash_table`` / ``map_table`` override individual inputs; keys are the
    framed hash input and the raw map-to-point message respectively.
    """

    backend_id = "transparent"

    def __init__(self, q: int = DEFAULT_Q, hash_mode: str = "sha256"):
        super().__init__()
        if not _is_prime(q):
            raise ValueError(f"group order {q} is not prime")
        if hash_mode not in ("bytesum", "sha256"):
            raise ValueError(f"unknown hash mode {hash_mode!r}")
        self.q = q
        self.hash_mode = hash_mode
        self.point_len = self.scalar_len
        self.hash_table: dict[bytes, int] = {}
        self.map_table: dict[bytes, int] = {}
        self.P = self._point(1, twin=1)

    @classmethod
    def tf1(cls) -> "TransparentSuite":
        """The q=101 byte-sum instance that all hand-derived fixtures use."""
        return cls(TF1_Q, "bytesum")

    @property
    def descriptor(self) -> str:
        return f"transparent:{self.q}:{self.hash_mode}"

    def _point(self, v: int, twin=None) -> Point:
        v %= self.q
        return Point(v, v.to_bytes(self.point_len, "big"), v == 0, twin)

    def point(self, dlog: int) -> Point:
        """Point with the given discrete log (test convenience, uncounted)."""
        return self._point(dlog)

    def gt(self, exponent: int) -> TransparentGt:
        return TransparentGt(exponent % self.q, self.q)

    @property
    def identity(self) -> Point:
        return self._point(0)

    @property
    def gt_identity(self) -> TransparentGt:
        return self.gt(0)

    def decode_point(self, data: bytes) -> Point:
        if len(data) != self.point_len:
            raise PointInvalid("point encoding has wrong length")
        v = int.from_bytes(data, "big")
        if v >= self.q:
            raise PointInvalid("residue not below group order")
        return self._point(v)

    def _mul(self, k: int, X: Point) -> Point:
        return self._point(k * X.raw)

    def _add(self, X: Point, Y: Point) -> Point:
        return self._point(X.raw + Y.raw)

    def _pair(self, X: Point, Y: Point) -> TransparentGt:
        return self.gt(X.raw * Y.raw)

    def _map(self, msg: bytes) -> Point:
        if msg in self.map_table:
            v = self.map_table[msg] % self.q
        elif self.hash_mode == "bytesum":
            v = sum(msg) % self.q
        else:
            digest = hashlib.sha256(b"dynauth/map-to-point\x00" + msg).digest()
            v = int.from_bytes(digest, "big") % (self.q - 1) + 1
        # H must never return the identity
        return self._point(v or 1)

    def _hash(self, fields: list[bytes]) -> int:
        framed = b"".join(bytes([len(f)]) + f for f in fields)
        if framed in self.hash_table:
            return self.hash_table[framed] % self.q
        if self.hash_mode == "bytesum":
            return sum(sum(f) for f in fields) % self.q
        return int.from_bytes(hashlib.sha256(framed).digest(), "big") % self.q

    def _publish(self, k: int) -> Point:
        v = k % self.q
        return self._point(v, twin=v)

    def encode_twin(self, X: Point) -> bytes:
        return X.data

    def decode_published(self, data: bytes, twin: bytes) -> Point:
        X = self.decode_point(data)
        if twin != data:
            raise PointInvalid("mirror does not match point")
        X.twin = X.raw
        return X
