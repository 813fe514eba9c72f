"""Pairing-based dynamic-ID multi-server scheme with self-certified server keys.

Participants are a registration center (RC), users holding smart cards and
service servers. The RC is offline during login: a server authenticates a
user with one pairing equation against the RC public key, and the user
authenticates the server through a key derived from the server's
self-certified public key.

Only the five "calculated" group operations touch the suite counters, so
wrapping any call in ``suite.measure()`` yields its exact cost vector.
"""

from __future__ import annotations

import enum
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

from .algebra import MaskBlob, PairingSuite, Point, seeded_rng
from .errors import (
    AuthLocalFailed,
    DegeneratePoint,
    DuplicateServer,
    MaskCorrupt,
    RcAuthFailed,
    ReplayDetected,
    ServerAuthFailed,
    StateError,
    UserAuthFailed,
    VerificationFailed,
)
from .wire import (
    CardIssue,
    LoginRequest,
    PwChangeAck,
    PwChangeIssue,
    PwChangeNew,
    PwChangeRequest,
    ServerChallenge,
    ServerKeyIssue,
    ServerRegRequest,
    UserRegRequest,
    UserResponse,
)


def _b(s: bytes | str) -> bytes:
    return s.encode() if isinstance(s, str) else bytes(s)


def _require_non_identity(name: str, X: Point) -> None:
    if X.is_identity:
        raise DegeneratePoint(f"{name} is the identity element")


class State(enum.Enum):
    IDLE = "Idle"
    AWAIT_CHALLENGE = "AwaitChallenge"
    AWAIT_RESPONSE = "AwaitResponse"
    ESTABLISHED = "Established"
    FAILED = "Failed"


@dataclass(frozen=True)
class PublicParams:
    """What every participant may know: the suite, ``P`` and ``pub_RC``."""

    suite: PairingSuite
    pub_rc: Point

    @property
    def P(self) -> Point:
        return self.suite.P


def server_public_key(params: PublicParams, SID: bytes | str, W: Point) -> Point:
    """Extract a self-certified key: ``h(SID‖W)·pub_RC + W``."""
    s = params.suite
    return s.point_add(s.scalar_mul(s.hash(_b(SID), W), params.pub_rc), W)


# -- system initialization and RC ------------------------------------------------

class RegistrationCenter:
    """RC state: master secret, public key, and the server-witness directory.

    Nothing about users is retained after a card is issued.
    """

    def __init__(self, suite: PairingSuite, s_rc: int, rng=None):
        if not 0 < s_rc < suite.q:
            raise ValueError("master secret must lie in [1, q-1]")
        self.suite = suite
        self.s_rc = s_rc
        self.pub_rc = suite.publish(s_rc)
        self.registered_servers: dict[bytes, Point] = {}
        self._rng = rng
        self._lock = threading.Lock()

    @property
    def params(self) -> PublicParams:
        return PublicParams(self.suite, self.pub_rc)

    def issue_card(self, req: UserRegRequest) -> CardIssue:
        s = self.suite
        QID = s.map_to_point(req.ID)
        CID = s.scalar_mul(self.s_rc, QID)
        reg = s.mask_xor(CID, s.scalar_mul(self.s_rc, req.HPW))
        return CardIssue(reg, s.hash(QID, CID))

    def issue_server_key(self, req: ServerRegRequest, w: int | None = None) -> ServerKeyIssue:
        s = self.suite
        with self._lock:
            if req.SID in self.registered_servers:
                raise DuplicateServer(f"server {req.SID!r} already registered")
            if w is None:
                w = s.random_scalar(self._rng)
            W = s.point_add(s.scalar_mul(w, s.P), req.V)
            s_partial = (self.s_rc * s.hash(req.SID, W) + w) % s.q
            self.registered_servers[req.SID] = W
        return ServerKeyIssue(W, s_partial)

    def password_change(self) -> "RcPasswordChange":
        return RcPasswordChange(self)


def system_init(suite: PairingSuite, seed: bytes | str | None = None,
                s_rc: int | None = None) -> RegistrationCenter:
    """Choose ``s_RC`` (from ``seed`` when given) and publish ``pub_RC``."""
    rng = seeded_rng(seed, "rc") if seed is not None else None
    if s_rc is None:
        s_rc = suite.random_scalar(rng)
    return RegistrationCenter(suite, s_rc, rng)


# -- user registration -----------------------------------------------------------

@dataclass(frozen=True)
class SmartCard:
    reg: MaskBlob
    H: int
    b: int


def user_register_begin(params: PublicParams, ID: bytes | str, pw: bytes | str,
                        rng=None, b: int | None = None) -> tuple[UserRegRequest, int]:
    """Return the registration request and the card random ``b_i`` to retain."""
    ID, pw = _b(ID), _b(pw)
    if not ID or not pw:
        raise ValueError("identity and password must be non-empty")
    s = params.suite
    if b is None:
        b = s.random_scalar(rng)
    HPW = s.scalar_mul(s.hash(ID, pw, b), s.P)
    return UserRegRequest(ID, HPW), b


def insert_card(issue: CardIssue, b: int) -> SmartCard:
    return SmartCard(issue.reg, issue.H, b)


def register_user(rc: RegistrationCenter, ID, pw, rng=None) -> SmartCard:
    req, b = user_register_begin(rc.params, ID, pw, rng)
    return insert_card(rc.issue_card(req), b)


def card_unlock(params: PublicParams, card: SmartCard, ID, pw) -> tuple[Point, Point]:
    """Local password verification. Returns ``(QID_i, CID_i)``."""
    s = params.suite
    ID, pw = _b(ID), _b(pw)
    QID = s.map_to_point(ID)
    key = s.scalar_mul(s.hash(ID, pw, card.b), params.pub_rc)
    try:
        CID = s.unmask_to_point(card.reg, key)
    except MaskCorrupt:
        # same op profile as the H* mismatch path
        s.hash(QID, s.identity)
        raise AuthLocalFailed("card rejected identity/password") from None
    if s.hash(QID, CID) != card.H:
        raise AuthLocalFailed("card rejected identity/password")
    return QID, CID


# -- server registration ---------------------------------------------------------

@dataclass(frozen=True)
class ServerIdentity:
    SID: bytes
    W: Point
    s: int
    pub: Point


class ServerEnrollment:
    """Server side of key issuance: holds ``v_j`` between request and finalize."""

    def __init__(self, params: PublicParams, SID: bytes | str, rng=None, v: int | None = None):
        self.params = params
        self.SID = _b(SID)
        s = params.suite
        self._v = s.random_scalar(rng) if v is None else v
        self.request = ServerRegRequest(self.SID, s.scalar_mul(self._v, s.P))

    def finalize(self, issue: ServerKeyIssue) -> ServerIdentity:
        s = self.params.suite
        sk = (issue.s_partial + self._v) % s.q
        pub = s.scalar_mul(sk, s.P)
        if pub != server_public_key(self.params, self.SID, issue.W):
            raise VerificationFailed("issued key fails the self-certification equation")
        self._v = None
        return ServerIdentity(self.SID, issue.W, sk, pub)


def server_register(rc: RegistrationCenter, SID, rng=None) -> ServerIdentity:
    enrollment = ServerEnrollment(rc.params, SID, rng)
    return enrollment.finalize(rc.issue_server_key(enrollment.request))


# -- login, authentication and key agreement -------------------------------------

def precompute_ephemeral(params: PublicParams, rng=None) -> tuple[int, Point]:
    """Offline ``(r_i, r_i·P)`` pair a client may prepare before login."""
    s = params.suite
    r = s.random_scalar(rng)
    return r, s.scalar_mul(r, s.P)


def pairing_check(params: PublicParams, M: Point, DID: Point, d: int, B: Point) -> bool:
    """``e(M + d·DID, pub_RC) == e(B, P)``."""
    s = params.suite
    lhs = s.pairing(s.point_add(M, s.scalar_mul(d, DID)), params.pub_rc)
    return lhs == s.pairing(B, s.P)


class UserSession:
    """One login run of a card holder against one server."""

    def __init__(self, params: PublicParams, card: SmartCard, ID, pw, SID, rng=None):
        self.params = params
        self.card = card
        self.ID, self._pw, self.SID = _b(ID), _b(pw), _b(SID)
        self._rng = rng
        self.state = State.IDLE
        self.error: Exception | None = None
        self.u = self.r = None
        self.QID = self.CID = self.DID = self.R = None
        self.T = self.K = None
        self._sk: int | None = None

    def _fail(self, exc: Exception):
        self.state = State.FAILED
        self.error = exc
        self.close()
        return exc

    def login(self, precomputed: tuple[int, Point] | None = None) -> LoginRequest:
        if self.state is not State.IDLE:
            raise self._fail(StateError(f"login from state {self.state.value}"))
        try:
            self.QID, self.CID = card_unlock(self.params, self.card, self.ID, self._pw)
        except AuthLocalFailed as exc:
            raise self._fail(exc)
        s = self.params.suite
        self.u = s.random_scalar(self._rng)
        self.DID = s.scalar_mul(self.u, self.QID)
        if precomputed is None:
            precomputed = precompute_ephemeral(self.params, self._rng)
        self.r, self.R = precomputed
        self.state = State.AWAIT_CHALLENGE
        return LoginRequest(self.DID, self.R)

    def respond(self, ch: ServerChallenge) -> UserResponse:
        if self.state is not State.AWAIT_CHALLENGE:
            raise self._fail(StateError(f"challenge in state {self.state.value}"))
        try:
            _require_non_identity("R_j", ch.R_j)
        except DegeneratePoint as exc:
            raise self._fail(exc)
        s, r = self.params.suite, self.r
        T = s.scalar_mul(r, ch.R_j)
        pub_j = server_public_key(self.params, self.SID, ch.W)
        K = s.scalar_mul(r, pub_j)
        if s.hash(self.DID, self.SID, K, ch.R_j) != ch.auth:
            raise self._fail(ServerAuthFailed("Auth_ji does not match"))
        M = s.scalar_mul(r, self.DID)
        N = s.scalar_mul(self.u, self.CID)
        d = s.hash(self.DID, self.SID, K, M)
        B = s.scalar_mul(r + d, N)
        self.T, self.K = T, K
        self._sk = s.hash(self.DID, self.SID, K, T)
        self.state = State.ESTABLISHED
        self.close()
        return UserResponse(M, B)

    def session_key(self) -> int:
        if self.state is not State.ESTABLISHED:
            raise StateError("no session key before mutual authentication")
        return self._sk

    def close(self) -> None:
        """Zeroize ephemeral scalars."""
        self.u = self.r = None


@dataclass
class ServerSession:
    DID: Point
    R_i: Point
    R_j: Point
    T: Point
    K: Point
    replayed: bool = False
    state: State = State.AWAIT_RESPONSE
    error: Exception | None = None
    _r: int | None = field(default=None, repr=False)
    _sk: int | None = field(default=None, repr=False)

    def session_key(self) -> int:
        if self.state is not State.ESTABLISHED:
            raise StateError("no session key before mutual authentication")
        return self._sk

    def close(self) -> None:
        self._r = None


class ReplayCache:
    """Bounded LRU of ``(DID_i, R_i)`` pairs already seen by a server."""

    def __init__(self, capacity: int = 4096):
        self.capacity = capacity
        self._seen: OrderedDict[tuple[bytes, bytes], None] = OrderedDict()
        self._lock = threading.Lock()

    def check_and_add(self, DID: Point, R: Point) -> bool:
        """Record the pair; True if it had been seen before."""
        key = (DID.data, R.data)
        with self._lock:
            if key in self._seen:
                self._seen.move_to_end(key)
                return True
            self._seen[key] = None
            if len(self._seen) > self.capacity:
                self._seen.popitem(last=False)
            return False

    def __len__(self) -> int:
        return len(self._seen)


class Server:
    """Service server endpoint. Sessions share only the identity and replay cache.

    A duplicate ``(DID_i, R_i)`` still receives a challenge; the session is
    marked and rejected at user verification, which is where a replaying
    adversary without ``u_i``/``r_i`` would fail anyway.
    """

    def __init__(self, params: PublicParams, identity: ServerIdentity,
                 replay_cache: ReplayCache | bool = True, rng=None):
        self.params = params
        self.identity = identity
        if replay_cache is True:
            replay_cache = ReplayCache()
        elif replay_cache is False:
            replay_cache = None
        self.replay_cache: ReplayCache | None = replay_cache
        self._rng = rng

    @property
    def SID(self) -> bytes:
        return self.identity.SID

    def challenge(self, req: LoginRequest) -> tuple[ServerChallenge, ServerSession]:
        _require_non_identity("DID_i", req.DID)
        _require_non_identity("R_i", req.R)
        s = self.params.suite
        replayed = (self.replay_cache is not None
                    and self.replay_cache.check_and_add(req.DID, req.R))
        r = s.random_scalar(self._rng)
        R_j = s.scalar_mul(r, s.P)
        T = s.scalar_mul(r, req.R)
        K = s.scalar_mul(self.identity.s, req.R)
        auth = s.hash(req.DID, self.SID, K, R_j)
        sess = ServerSession(req.DID, req.R, R_j, T, K, replayed=replayed, _r=r)
        return ServerChallenge(self.identity.W, R_j, auth), sess

    def verify(self, sess: ServerSession, resp: UserResponse) -> int:
        """Accept the user's response and return the session key, or raise."""
        if sess.state is not State.AWAIT_RESPONSE:
            sess.state = State.FAILED
            raise StateError(f"response in state {sess.state.value}")
        s = self.params.suite
        d = s.hash(sess.DID, self.SID, sess.K, resp.M)
        if not pairing_check(self.params, resp.M, sess.DID, d, resp.B):
            sess.state, sess.error = State.FAILED, UserAuthFailed("pairing equation fails")
            sess.close()
            raise sess.error
        if sess.replayed:
            sess.state, sess.error = State.FAILED, ReplayDetected("login request replayed")
            sess.close()
            raise sess.error
        sess._sk = s.hash(sess.DID, self.SID, sess.K, sess.T)
        sess.state = State.ESTABLISHED
        sess.close()
        return sess._sk


def derive_session_key(session: UserSession | ServerSession) -> int:
    """Session key of either role; StateError before acceptance."""
    return session.session_key()


# -- password change -------------------------------------------------------------

class PasswordChangeClient:
    """Card-side driver of the five-message password update.

    The card object is never mutated; :meth:`finish` returns a new card only
    after V_5 verifies and the new card unlocks under the new password.
    """

    def __init__(self, params: PublicParams, card: SmartCard, ID, pw, pw_new, rng=None):
        self.params = params
        self.card = card
        self.ID, self._pw, self._pw_new = _b(ID), _b(pw), _b(pw_new)
        if not self._pw_new:
            raise ValueError("new password must be non-empty")
        self._rng = rng
        self._z = self._blind = self._CID = None
        self._b_new = self._HPW_new = None
        self.round = 0

    def start(self) -> PwChangeRequest:
        if self.round != 0:
            raise StateError("password change already started")
        _, self._CID = card_unlock(self.params, self.card, self.ID, self._pw)
        s = self.params.suite
        self._z = s.random_scalar(self._rng)
        Z = s.scalar_mul(self._z, s.P)
        self._blind = s.scalar_mul(self._z, self.params.pub_rc)
        self.round = 1
        return PwChangeRequest(self.ID, s.mask_xor(self._CID, self._blind), Z)

    def on_ack(self, ack: PwChangeAck) -> PwChangeNew:
        if self.round != 1:
            raise StateError("unexpected V_1")
        s = self.params.suite
        if s.hash(self._CID, self._blind) != ack.V1:
            raise RcAuthFailed("V_1 does not authenticate the RC")
        self._b_new = s.random_scalar(self._rng)
        self._HPW_new = s.scalar_mul(s.hash(self.ID, self._pw_new, self._b_new), s.P)
        V2 = s.mask_xor(self._HPW_new, self._blind)
        V3 = s.hash(self._CID, self._blind, self._HPW_new)
        self.round = 3
        return PwChangeNew(V2, V3)

    def finish(self, issue: PwChangeIssue) -> SmartCard:
        if self.round != 3:
            raise StateError("unexpected V_4/V_5")
        s = self.params.suite
        reg_new = s.mask_xor(issue.V4, self._blind)
        if s.hash(self._blind, reg_new) != issue.V5:
            raise RcAuthFailed("V_5 does not authenticate the RC")
        candidate = SmartCard(reg_new, self.card.H, self._b_new)
        try:
            card_unlock(self.params, candidate, self.ID, self._pw_new)
        except AuthLocalFailed:
            raise RcAuthFailed("issued card does not unlock with the new password") from None
        self.round = 5
        self._z = self._blind = None
        return candidate


class RcPasswordChange:
    """RC side of one password update; discarded when the exchange ends."""

    def __init__(self, rc: RegistrationCenter):
        self.rc = rc
        self._ID = self._CID = self._blind = None

    def on_request(self, req: PwChangeRequest) -> PwChangeAck:
        _require_non_identity("Z_i", req.Z)
        s, rc = self.rc.suite, self.rc
        blind = s.scalar_mul(rc.s_rc, req.Z)
        try:
            CID = s.unmask_to_point(req.AID, blind)
        except MaskCorrupt:
            raise UserAuthFailed("AID_i does not unmask to a point") from None
        QID = s.map_to_point(req.ID)
        if s.pairing(CID, s.P) != s.pairing(QID, rc.pub_rc):
            raise UserAuthFailed("e(CID, P) != e(QID, pub_RC)")
        self._ID, self._CID, self._blind = req.ID, CID, blind
        return PwChangeAck(s.hash(CID, blind))

    def on_new(self, msg: PwChangeNew) -> PwChangeIssue:
        if self._CID is None:
            raise StateError("V_2/V_3 before an authenticated request")
        s, rc = self.rc.suite, self.rc
        try:
            HPW_new = s.unmask_to_point(msg.V2, self._blind)
        except MaskCorrupt:
            raise UserAuthFailed("V_2 does not unmask to a point") from None
        if s.hash(self._CID, self._blind, HPW_new) != msg.V3:
            raise UserAuthFailed("V_3 mismatch")
        reg_new = s.mask_xor(self._CID, s.scalar_mul(rc.s_rc, HPW_new))
        V4 = s.mask_xor(reg_new, self._blind)
        V5 = s.hash(self._blind, reg_new)
        self._ID = self._CID = self._blind = None
        return PwChangeIssue(V4, V5)


def password_change(rc: RegistrationCenter, card: SmartCard, ID, pw, pw_new, rng=None) -> SmartCard:
    """Run the whole exchange in-process and return the updated card."""
    client = PasswordChangeClient(rc.params, card, ID, pw, pw_new, rng)
    handler = rc.password_change()
    ack = handler.on_request(client.start())
    issue = handler.on_new(client.on_ack(ack))
    return client.finish(issue)


def run_login(params: PublicParams, server: Server, card: SmartCard, ID, pw,
              rng=None, precomputed=None) -> tuple[UserSession, ServerSession]:
    """Honest in-process login; raises on any failure."""
    user = UserSession(params, card, ID, pw, server.SID, rng)
    ch, sess = server.challenge(user.login(precomputed))
    server.verify(sess, user.respond(ch))
    return user, sess
