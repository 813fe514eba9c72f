"""BN254 backend delegating curve arithmetic to ``py_ecc``.

BN254 carries an asymmetric (type 3) pairing ``G1 x G2 -> GT``. Protocol
equations are written for a symmetric pairing, so each published point that
appears as a second pairing argument keeps a ``twin`` in G2 generated from
the same scalar (see :meth:`PairingSuite.publish`).

Point encoding is 32 octets: the big-endian x coordinate with flag bits in
the top of the first octet (0x80 = y is odd, 0x40 = point at infinity).
"""

from __future__ import annotations

import hashlib

from py_ecc import optimized_bn128 as bn

from ..errors import PointInvalid
from .base import PairingSuite, Point

FIELD_P = bn.field_modulus
ORDER = bn.curve_order
_Y_ODD = 0x80
_INF = 0x40
_MAP_DST = b"dynauth/bn254/map-to-point\x00"
_HASH_DST = b"dynauth/bn254/h\x00"


def _sqrt(a: int) -> int | None:
    # p = 3 mod 4
    y = pow(a, (FIELD_P + 1) // 4, FIELD_P)
    return y if y * y % FIELD_P == a % FIELD_P else None


def _encode(raw) -> bytes:
    if bn.is_inf(raw):
        return bytes([_INF]) + bytes(31)
    x, y = bn.normalize(raw)
    out = bytearray(x.n.to_bytes(32, "big"))
    if y.n & 1:
        out[0] |= _Y_ODD
    return bytes(out)


class BN254Suite(PairingSuite):
    backend_id = "production"
    point_len = 32

    def __init__(self) -> None:
        super().__init__()
        self.q = ORDER
        self.P = self._wrap(bn.G1, twin=bn.G2)

    @property
    def descriptor(self) -> str:
        return "production:bn254"

    def _wrap(self, raw, twin=None) -> Point:
        return Point(raw, _encode(raw), bn.is_inf(raw), twin)

    @property
    def identity(self) -> Point:
        return self._wrap(bn.Z1)

    @property
    def gt_identity(self):
        return bn.FQ12.one()

    def decode_point(self, data: bytes) -> Point:
        if len(data) != 32:
            raise PointInvalid("point encoding has wrong length")
        flags = data[0] & 0xC0
        body = bytes([data[0] & 0x3F]) + data[1:]
        if flags & _INF:
            if flags != _INF or any(body):
                raise PointInvalid("malformed infinity encoding")
            return self.identity
        x = int.from_bytes(body, "big")
        if x >= FIELD_P:
            raise PointInvalid("x not reduced")
        y = _sqrt((x * x * x + 3) % FIELD_P)
        if y is None:
            raise PointInvalid("x is not on the curve")
        if (y & 1) != bool(flags & _Y_ODD):
            y = FIELD_P - y
        # cofactor 1: every curve point lies in the order-q subgroup
        return Point((bn.FQ(x), bn.FQ(y), bn.FQ.one()), data, False)

    def _mul(self, k: int, X: Point) -> Point:
        return self._wrap(bn.multiply(X.raw, k))

    def _add(self, X: Point, Y: Point) -> Point:
        return self._wrap(bn.add(X.raw, Y.raw))

    def _pair(self, X: Point, Y: Point):
        if Y.twin is None:
            raise ValueError("second pairing argument must be a published point")
        return bn.pairing(Y.twin, X.raw)

    def _map(self, msg: bytes) -> Point:
        ctr = 0
        while True:
            digest = hashlib.sha256(_MAP_DST + ctr.to_bytes(4, "big") + msg).digest()
            x = int.from_bytes(digest, "big") % FIELD_P
            y = _sqrt((x * x * x + 3) % FIELD_P)
            if y is not None:
                if y & 1:
                    y = FIELD_P - y
                return self._wrap((bn.FQ(x), bn.FQ(y), bn.FQ.one()))
            ctr += 1

    def _hash(self, fields: list[bytes]) -> int:
        framed = b"".join(bytes([len(f)]) + f for f in fields)
        return int.from_bytes(hashlib.sha256(_HASH_DST + framed).digest(), "big") % self.q

    def _publish(self, k: int) -> Point:
        return self._wrap(bn.multiply(bn.G1, k), twin=bn.multiply(bn.G2, k))

    def encode_twin(self, X: Point) -> bytes:
        if X.twin is None:
            raise ValueError("point has no mirror")
        x, y = bn.normalize(X.twin)
        return b"".join(c.to_bytes(32, "big") for c in (*x.coeffs, *y.coeffs))

    def decode_published(self, data: bytes, twin: bytes) -> Point:
        X = self.decode_point(data)
        if len(twin) != 128:
            raise PointInvalid("mirror encoding has wrong length")
        c = [int.from_bytes(twin[i:i + 32], "big") for i in range(0, 128, 32)]
        if any(v >= FIELD_P for v in c):
            raise PointInvalid("mirror coordinate not reduced")
        T = (bn.FQ2(c[0:2]), bn.FQ2(c[2:4]), bn.FQ2.one())
        if not bn.is_on_curve(T, bn.b2) or not bn.is_inf(bn.multiply(T, ORDER)):
            raise PointInvalid("mirror not in G2")
        # same discrete log on both sides
        if bn.pairing(T, bn.G1) != bn.pairing(bn.G2, X.raw):
            raise PointInvalid("mirror does not match point")
        X.twin = T
        return X
