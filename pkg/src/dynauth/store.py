"""On-disk key store: versioned binary containers with integrity checksums.

Container layout (all integers big-endian)::

    magic   4  b"DYNA"
    version 1  0x01
    role    1  b"P" params | b"R" rc | b"S" server | b"C" card
    desc    1 + n  suite descriptor, length-prefixed
    count   1  number of fields
    fields  (2 + n) each, length-prefixed
    digest  32 SHA-256 over every preceding octet

A bad magic, version, role or checksum refuses the load; there is no
migration path.
"""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
from pathlib import Path

from . import proposed as pr
from .algebra import MaskBlob, PairingSuite, suite_from_descriptor
from .errors import DuplicateEntry, EntryMissing, StoreCorrupt

MAGIC = b"DYNA"
VERSION = 1
ROLES = {"params": b"P", "rc": b"R", "server": b"S", "card": b"C"}
_SAFE = re.compile(r"[A-Za-z0-9._@+-]{1,64}")


def pack(role: str, descriptor: str, fields: list[bytes]) -> bytes:
    desc = descriptor.encode()
    out = bytearray(MAGIC + bytes([VERSION]) + ROLES[role] + bytes([len(desc)]) + desc)
    out.append(len(fields))
    for f in fields:
        out += len(f).to_bytes(2, "big") + f
    return bytes(out) + hashlib.sha256(out).digest()


def unpack(data: bytes, role: str) -> tuple[str, list[bytes]]:
    if len(data) < 40 or data[:4] != MAGIC:
        raise StoreCorrupt("not a key-store container")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise StoreCorrupt("checksum mismatch")
    if body[4] != VERSION:
        raise StoreCorrupt(f"unsupported container version {body[4]}")
    if body[5:6] != ROLES[role]:
        raise StoreCorrupt(f"container holds {body[5:6]!r}, expected {role}")
    try:
        n = body[6]
        descriptor = body[7:7 + n].decode()
        pos = 7 + n
        count = body[pos]
        pos += 1
        fields = []
        for _ in range(count):
            ln = int.from_bytes(body[pos:pos + 2], "big")
            fields.append(bytes(body[pos + 2:pos + 2 + ln]))
            pos += 2 + ln
    except (IndexError, UnicodeDecodeError):
        raise StoreCorrupt("container header malformed") from None
    if pos != len(body):
        raise StoreCorrupt("container length does not match its fields")
    return descriptor, fields


def _int(b: bytes) -> int:
    return int.from_bytes(b, "big")


def _ib(k: int) -> bytes:
    return k.to_bytes(max(1, (k.bit_length() + 7) // 8), "big")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _name(ident: bytes | str) -> str:
    s = ident.decode() if isinstance(ident, bytes) else ident
    return s if _SAFE.fullmatch(s) else "x-" + s.encode().hex()


class KeyStore:
    """Directory of containers: ``params``, ``rc``, ``servers/*``, ``cards/*``."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _path(self, role: str, ident: bytes | str | None = None) -> Path:
        if role in ("params", "rc"):
            return self.root / f"{role}.bin"
        sub = {"server": "servers", "card": "cards"}[role]
        return self.root / sub / f"{_name(ident)}.bin"

    def _read(self, role: str, ident=None) -> tuple[str, list[bytes]]:
        path = self._path(role, ident)
        if not path.exists():
            raise EntryMissing(f"no {role} entry at {path}")
        return unpack(path.read_bytes(), role)

    def _write(self, role: str, descriptor: str, fields: list[bytes], ident=None,
               overwrite: bool = False) -> Path:
        path = self._path(role, ident)
        if path.exists() and not overwrite:
            raise DuplicateEntry(f"{role} entry already exists at {path}")
        _atomic_write(path, pack(role, descriptor, fields))
        return path

    def exists(self, role: str, ident=None) -> bool:
        return self._path(role, ident).exists()

    # -- RC and public parameters ----------------------------------------------------

    def save_rc(self, rc: pr.RegistrationCenter, overwrite: bool = False) -> None:
        """Write public parameters and the RC container (master secret and server directory)."""
        s = rc.suite
        if not overwrite and (self.exists("params") or self.exists("rc")):
            raise DuplicateEntry(f"store at {self.root} is already initialized")
        self._write("params", s.descriptor, [rc.pub_rc.data, s.encode_twin(rc.pub_rc)], overwrite=True)
        self.update_rc(rc)

    def update_rc(self, rc: pr.RegistrationCenter) -> None:
        fields = [_ib(rc.s_rc)]
        for SID, W in rc.registered_servers.items():
            fields += [SID, W.data]
        self._write("rc", rc.suite.descriptor, fields, overwrite=True)

    def suite(self) -> PairingSuite:
        descriptor, _ = self._read("params")
        return suite_from_descriptor(descriptor)

    def load_params(self, suite: PairingSuite | None = None) -> pr.PublicParams:
        descriptor, fields = self._read("params")
        if len(fields) != 2:
            raise StoreCorrupt("params container needs two fields")
        pub, twin = fields
        suite = suite or suite_from_descriptor(descriptor)
        self._check_suite(suite, descriptor)
        return pr.PublicParams(suite, suite.decode_published(pub, twin))

    def load_rc(self, suite: PairingSuite | None = None, rng=None) -> pr.RegistrationCenter:
        params = self.load_params(suite)
        descriptor, fields = self._read("rc")
        s = params.suite
        self._check_suite(s, descriptor)
        if len(fields) % 2 != 1:
            raise StoreCorrupt("rc container has a dangling server entry")
        rc = pr.RegistrationCenter(s, _int(fields[0]), rng)
        if rc.pub_rc != params.pub_rc:
            raise StoreCorrupt("rc master secret does not match published key")
        for i in range(1, len(fields), 2):
            rc.registered_servers[bytes(fields[i])] = s.decode_point(fields[i + 1])
        return rc

    # -- servers and cards -----------------------------------------------------------

    def save_server(self, identity: pr.ServerIdentity, suite: PairingSuite, overwrite: bool = False) -> Path:
        return self._write("server", suite.descriptor,
                           [identity.SID, identity.W.data, _ib(identity.s), identity.pub.data],
                           identity.SID, overwrite)

    def load_server(self, SID: bytes | str, suite: PairingSuite) -> pr.ServerIdentity:
        descriptor, f = self._read("server", SID)
        self._check_suite(suite, descriptor)
        if len(f) != 4:
            raise StoreCorrupt("server container needs four fields")
        return pr.ServerIdentity(bytes(f[0]), suite.decode_point(f[1]), _int(f[2]), suite.decode_point(f[3]))

    def save_card(self, ID: bytes | str, card: pr.SmartCard, suite: PairingSuite,
                  overwrite: bool = False) -> Path:
        return self._write("card", suite.descriptor,
                           [card.reg.data, suite.encode_scalar(card.H), suite.encode_scalar(card.b)],
                           ID, overwrite)

    def load_card(self, ID: bytes | str, suite: PairingSuite) -> pr.SmartCard:
        descriptor, f = self._read("card", ID)
        self._check_suite(suite, descriptor)
        if len(f) != 3 or len(f[0]) != suite.point_len:
            raise StoreCorrupt("card container malformed")
        return pr.SmartCard(MaskBlob(bytes(f[0])), suite.decode_scalar(f[1]), suite.decode_scalar(f[2]))

    def card_path(self, ID) -> Path:
        return self._path("card", ID)

    @staticmethod
    def _check_suite(suite: PairingSuite, descriptor: str) -> None:
        if suite.descriptor != descriptor:
            raise StoreCorrupt(f"entry belongs to backend {descriptor}, not {suite.descriptor}")
