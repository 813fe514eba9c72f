"""Hash-only dynamic-ID multi-server scheme of Li et al. (the attack target).

The RC hands every server the same two constants, ``h(x‖y)`` and
``h(SID_j‖h(y))``, and every card carries ``h(y)``. Anybody holding those
two values can strip the XOR masks off any login request, which is what
:mod:`dynauth.attacks` exploits. The scheme is implemented as specified, flaws included;
do not harden it here.

All XOR operands are digest-sized. A password is zero-padded to the digest
length before it is XOR-ed with the card random ``b``.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass

from .errors import LocalCheckFailed, M1Invalid, M3Invalid, M5Invalid, StateError
from .wire import LiCardIssue, LiChallenge, LiConfirm, LiLogin, LiRegRequest


def _b(s: bytes | str) -> bytes:
    return s.encode() if isinstance(s, str) else bytes(s)


def xor(*parts: bytes) -> bytes:
    n = len(parts[0])
    if any(len(p) != n for p in parts):
        raise ValueError("XOR operands must have equal length")
    out = bytearray(n)
    for p in parts:
        for i, c in enumerate(p):
            out[i] ^= c
    return bytes(out)


class LiHash:
    """Framed hash ``h(a‖b‖...)`` with a fixed digest length.

    ``mode="toy"`` is the one-octet byte-sum oracle used for hand-checked
    fixtures: the digest is the sum of the field payloads mod 256.
    """

    def __init__(self, mode: str = "sha256"):
        if mode not in ("sha256", "toy"):
            raise ValueError(f"unknown Li hash mode {mode!r}")
        self.mode = mode
        self.digest_len = 32 if mode == "sha256" else 1
        self.calls = 0

    def __call__(self, *fields: bytes | str) -> bytes:
        self.calls += 1
        parts = [_b(f) for f in fields]
        if self.mode == "toy":
            return bytes([sum(sum(p) for p in parts) % 256])
        h = hashlib.sha256(b"dynauth/li\x00")
        for p in parts:
            if len(p) > 255:
                raise ValueError("hash field longer than 255 octets")
            h.update(bytes([len(p)]) + p)
        return h.digest()

    def pad(self, pw: bytes | str) -> bytes:
        pw = _b(pw)
        if len(pw) > self.digest_len:
            raise ValueError(f"password longer than {self.digest_len} octets")
        return pw + bytes(self.digest_len - len(pw))

    def nonce(self, rng=None) -> bytes:
        if rng is None:
            return secrets.token_bytes(self.digest_len)
        return rng.randbytes(self.digest_len)


@dataclass(frozen=True)
class LiSmartCard:
    C: bytes
    D: bytes
    E: bytes
    b: bytes
    hy: bytes


@dataclass(frozen=True)
class LiServerState:
    SID: bytes
    hxy: bytes
    h_sid_hy: bytes


class LiRegistrationCenter:
    def __init__(self, hasher: LiHash, x: bytes | str, y: bytes | str):
        self.h = hasher
        self.x, self.y = _b(x), _b(y)
        self.hy = hasher(self.y)
        self.hxy = hasher(self.x, self.y)

    def server_state(self, SID: bytes | str) -> LiServerState:
        SID = _b(SID)
        return LiServerState(SID, self.hxy, self.h(SID, self.hy))

    def issue_card(self, req: LiRegRequest) -> LiCardIssue:
        h = self.h
        B = h(req.ID, self.x)
        C = h(req.ID, self.hy, req.A)
        D = h(B, self.hxy)
        E = xor(B, self.hxy)
        return LiCardIssue(C, D, E, self.hy)


def li_register_request(hasher: LiHash, ID, PW, b: bytes) -> LiRegRequest:
    return LiRegRequest(_b(ID), hasher(xor(b, hasher.pad(PW))))


def li_register(rc: LiRegistrationCenter, ID, PW, b: bytes) -> LiSmartCard:
    issue = rc.issue_card(li_register_request(rc.h, ID, PW, b))
    return LiSmartCard(issue.C, issue.D, issue.E, b, issue.hy)


def li_local_check(hasher: LiHash, card: LiSmartCard, ID, PW) -> bytes:
    """Return ``A_i`` if ``C*_i == C_i``, else raise LocalCheckFailed."""
    A = hasher(xor(card.b, hasher.pad(PW)))
    if hasher(_b(ID), card.hy, A) != card.C:
        raise LocalCheckFailed("smart card rejected identity/password")
    return A


@dataclass(frozen=True)
class LiLoginSecrets:
    """Values a server (or anyone holding its constants) strips out of a login."""

    N_i: bytes
    E: bytes
    B: bytes
    D: bytes
    A: bytes


def recover_login_secrets(hasher: LiHash, SID: bytes, h_sid_hy: bytes, hxy: bytes,
                          msg: LiLogin) -> LiLoginSecrets:
    N_i = xor(msg.M2, h_sid_hy)
    E = xor(msg.P_ij, hasher(h_sid_hy, N_i))
    B = xor(E, hxy)
    D = hasher(B, hxy)
    A = xor(msg.CID, hasher(D, SID, N_i))
    return LiLoginSecrets(N_i, E, B, D, A)


def build_login(hasher: LiHash, SID: bytes, h_sid_hy: bytes, A: bytes, D: bytes,
                E: bytes, N_i: bytes) -> LiLogin:
    P_ij = xor(E, hasher(h_sid_hy, N_i))
    CID = xor(A, hasher(D, SID, N_i))
    M1 = hasher(P_ij, CID, D, N_i)
    return LiLogin(P_ij, CID, M1, xor(h_sid_hy, N_i))


def session_key(hasher: LiHash, D: bytes, A: bytes, N_i: bytes, N_j: bytes, SID: bytes) -> bytes:
    return hasher(D, A, N_i, N_j, SID)


class LiUserSession:
    def __init__(self, hasher: LiHash, card: LiSmartCard, ID, PW, SID, rng=None):
        self.h = hasher
        self.card = card
        self.ID, self._PW, self.SID = _b(ID), _b(PW), _b(SID)
        self._rng = rng
        self.A = self.N_i = None
        self.sk: bytes | None = None
        self.state = "Idle"

    def login(self) -> LiLogin:
        if self.state != "Idle":
            raise StateError("login already sent")
        try:
            self.A = li_local_check(self.h, self.card, self.ID, self._PW)
        except LocalCheckFailed:
            self.state = "Failed"
            raise
        self.N_i = self.h.nonce(self._rng)
        h_sid_hy = self.h(self.SID, self.card.hy)
        self.state = "AwaitChallenge"
        return build_login(self.h, self.SID, h_sid_hy, self.A, self.card.D, self.card.E, self.N_i)

    def on_challenge(self, ch: LiChallenge) -> LiConfirm:
        if self.state != "AwaitChallenge":
            raise StateError("unexpected challenge")
        h, D, A = self.h, self.card.D, self.A
        N_j = xor(A, self.N_i, ch.M4)
        if h(D, A, N_j, self.SID) != ch.M3:
            self.state = "Failed"
            raise M3Invalid("M_3 does not authenticate the server")
        self.sk = session_key(h, D, A, self.N_i, N_j, self.SID)
        self.state = "Established"
        return LiConfirm(h(D, A, self.N_i, self.SID))


@dataclass
class LiServerSession:
    secrets: LiLoginSecrets
    N_j: bytes
    state: str = "AwaitConfirm"
    sk: bytes | None = None


class LiServer:
    def __init__(self, hasher: LiHash, state: LiServerState, rng=None):
        self.h = hasher
        self.state = state
        self._rng = rng

    @property
    def SID(self) -> bytes:
        return self.state.SID

    def handle_login(self, msg: LiLogin) -> tuple[LiChallenge, LiServerSession]:
        h, st = self.h, self.state
        sec = recover_login_secrets(h, st.SID, st.h_sid_hy, st.hxy, msg)
        if h(msg.P_ij, msg.CID, sec.D, sec.N_i) != msg.M1:
            raise M1Invalid("M_1 mismatch")
        N_j = h.nonce(self._rng)
        M3 = h(sec.D, sec.A, N_j, st.SID)
        M4 = xor(sec.A, sec.N_i, N_j)
        return LiChallenge(M3, M4), LiServerSession(sec, N_j)

    def handle_confirm(self, sess: LiServerSession, msg: LiConfirm) -> bytes:
        if sess.state != "AwaitConfirm":
            raise StateError("unexpected confirmation")
        sec = sess.secrets
        if self.h(sec.D, sec.A, sec.N_i, self.SID) != msg.M5:
            sess.state = "Failed"
            raise M5Invalid("M_5 mismatch")
        sess.sk = session_key(self.h, sec.D, sec.A, sec.N_i, sess.N_j, self.SID)
        sess.state = "Established"
        return sess.sk


def li_password_change(hasher: LiHash, card: LiSmartCard, ID, PW, PW_new, b_new: bytes) -> LiSmartCard:
    """Offline update of ``C_i`` and ``b``; ``D_i`` and ``E_i`` are left untouched."""
    li_local_check(hasher, card, ID, PW)
    A_new = hasher(xor(b_new, hasher.pad(PW_new)))
    C_new = hasher(_b(ID), card.hy, A_new)
    return LiSmartCard(C_new, card.D, card.E, b_new, card.hy)


def run_li_login(hasher: LiHash, server: LiServer, card: LiSmartCard, ID, PW, rng=None):
    user = LiUserSession(hasher, card, ID, PW, server.SID, rng)
    ch, sess = server.handle_login(user.login())
    server.handle_confirm(sess, user.on_challenge(ch))
    return user, sess
