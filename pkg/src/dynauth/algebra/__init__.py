"""Pluggable bilinear-group backends.

>>> suite = TransparentSuite.tf1()
>>> suite.scalar_mul(7, suite.P).raw
7
"""

from .base import OPS, Field, MaskBlob, OpCounters, PairingSuite, Point, seeded_rng
from .transparent import DEFAULT_Q, TF1_Q, TransparentGt, TransparentSuite

__all__ = [
    "OPS",
    "Field",
    "MaskBlob",
    "OpCounters",
    "PairingSuite",
    "Point",
    "TransparentGt",
    "TransparentSuite",
    "DEFAULT_Q",
    "TF1_Q",
    "make_suite",
    "seeded_rng",
    "suite_from_descriptor",
]


def make_suite(backend: str = "transparent") -> PairingSuite:
    """Build a suite by name: ``transparent``, ``tf1`` or ``production``."""
    if backend == "transparent":
        return TransparentSuite()
    if backend == "tf1":
        return TransparentSuite.tf1()
    if backend == "production":
        from .production import BN254Suite

        return BN254Suite()
    raise ValueError(f"unknown backend {backend!r}")


def suite_from_descriptor(desc: str) -> PairingSuite:
    kind, _, rest = desc.partition(":")
    if kind == "transparent":
        q, _, mode = rest.partition(":")
        return TransparentSuite(int(q), mode or "sha256")
    if desc == "production:bn254":
        return make_suite("production")
    raise ValueError(f"unknown suite descriptor {desc!r}")
