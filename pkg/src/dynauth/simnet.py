"""Deterministic in-process network of protocol actors with an active adversary.

Every frame is serialized with :class:`~dynauth.wire.Codec`, written to the
transcript, run through the adversary rules and delivered one logical tick
later. The scheduler is a single heap ordered by ``(tick, sequence)``, so a
transcript is a pure function of the scenario and its seed.

Registration messages travel on the ``registration`` channel, which is
always secure: adversary rules never see it and a rule that names it is
refused with :class:`SecureLinkViolation`. Secure frames appear in the
transcript with an empty payload.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Generator, Iterable

from . import li as li_scheme
from . import proposed as pr
from .algebra import PairingSuite, make_suite, seeded_rng
from .errors import (
    DecodeError,
    Deadlock,
    DynAuthError,
    ScriptError,
    SecureLinkViolation,
    SelectorEmpty,
    ServerAuthFailed,
    UserAuthFailed,
)
from .wire import (
    BY_NAME,
    CardIssue,
    Codec,
    Entry,
    LiCardIssue,
    LiChallenge,
    LiConfirm,
    LiLogin,
    LiRegRequest,
    LoginRequest,
    Message,
    PwChangeAck,
    PwChangeIssue,
    PwChangeNew,
    PwChangeRequest,
    ServerChallenge,
    ServerKeyIssue,
    ServerRegRequest,
    Transcript,
    UserRegRequest,
    UserResponse,
)

REGISTRATION = "registration"
SESSION = "session"
REGISTRATION_TYPES = frozenset(
    {"UserRegRequest", "CardIssue", "ServerRegRequest", "ServerKeyIssue",
     "LiRegRequest", "LiCardIssue"})
TERMINAL = frozenset({"Established", "Done", "Failed"})


@dataclass(frozen=True)
class Frame:
    seq: int
    src: str         # claimed sender
    dst: str
    type: str
    payload: bytes
    channel: str
    origin: str      # principal that actually transmitted it
    copied: bool = False


@dataclass
class Rule:
    """Adversary rule: frames matching every given field get ``action``.

    ``copy`` delivers the frame and also hands a copy to the adversary;
    ``drop`` swallows it; ``replace`` delivers ``mutate(payload)`` instead;
    ``deliver`` passes it on untouched and stops rule evaluation.
    """

    adversary: str
    action: str
    src: str | None = None
    dst: str | None = None
    type: str | None = None
    channel: str | None = None
    mutate: Callable[[bytes], bytes] | None = None

    def __post_init__(self):
        if self.action not in ("copy", "drop", "replace", "deliver"):
            raise ScriptError(f"unknown rule action {self.action!r}")
        if self.action == "replace" and self.mutate is None:
            raise ScriptError("replace rule needs a mutation")

    def matches(self, f: Frame) -> bool:
        return ((self.src is None or self.src == f.src)
                and (self.dst is None or self.dst == f.dst)
                and (self.type is None or self.type == f.type)
                and (self.channel is None or self.channel == f.channel))


@dataclass
class SessionRecord:
    label: str
    principal: str
    peer: str
    kind: str
    session: Any = None
    error: Exception | None = None
    state: str = "Running"
    sk: Any = None

    @property
    def outcome(self) -> str:
        if self.error is not None:
            return type(self.error).__name__
        return self.state


class Principal:
    role = "principal"

    def __init__(self, id: str):
        self.id = id
        self.net: Network | None = None
        self.inbox: deque[Frame] = deque()
        self.rng = None

    def attach(self, net: "Network") -> None:
        self.net = net
        self.rng = net.rng(self.id)

    def receive(self, frame: Frame) -> None:
        self.inbox.append(frame)
        while self.inbox:
            f = self.inbox.popleft()
            try:
                msg = self.net.codec.decode(f.payload)
            except DecodeError as exc:
                self.on_garbage(f, exc)
                continue
            self.on_message(f, msg)

    def on_garbage(self, frame: Frame, exc: DecodeError) -> None:
        rec = self.net.live_session(self.id, frame.src)
        if rec is not None:
            self.net.fail(rec, exc)

    def on_message(self, frame: Frame, msg: Message) -> None:
        raise NotImplementedError

    def send(self, dst: str, msg: Message, channel: str = SESSION, src: str | None = None) -> None:
        self.net.send(self.id if src is None else src, dst, msg, channel=channel, origin=self.id)


# -- proposed scheme actors --------------------------------------------------------

class RcActor(Principal):
    role = "rc"

    def __init__(self, id: str = "rc", rc: pr.RegistrationCenter | None = None):
        super().__init__(id)
        self.rc = rc
        self._pw: dict[str, tuple[SessionRecord, pr.RcPasswordChange]] = {}

    def attach(self, net):
        super().attach(net)
        if self.rc is None:
            self.rc = pr.system_init(net.suite, seed=net.seed_bytes(self.id))
        net.params = self.rc.params

    def on_message(self, f, msg):
        net = self.net
        if isinstance(msg, UserRegRequest):
            self.send(f.src, self.rc.issue_card(msg), REGISTRATION)
        elif isinstance(msg, ServerRegRequest):
            try:
                self.send(f.src, self.rc.issue_server_key(msg), REGISTRATION)
            except DynAuthError as exc:
                net.errors.append((self.id, exc))
        elif isinstance(msg, PwChangeRequest):
            rec = net.open_session(self.id, f.src, "pwchange", initiator=False)
            handler = self.rc.password_change()
            self._pw[f.src] = (rec, handler)
            try:
                self.send(f.src, handler.on_request(msg))
                rec.state = "AwaitRound3"
            except DynAuthError as exc:
                net.fail(rec, exc)
        elif isinstance(msg, PwChangeNew) and f.src in self._pw:
            rec, handler = self._pw.pop(f.src)
            try:
                self.send(f.src, handler.on_new(msg))
                rec.state = "Done"
            except DynAuthError as exc:
                net.fail(rec, exc)


class UserActor(Principal):
    role = "user"

    def __init__(self, id: str, identity: str, password: str, rc: str = "rc"):
        super().__init__(id)
        self.identity, self.password, self.rc_id = identity, password, rc
        self.card: pr.SmartCard | None = None
        self._b = None
        self._pw: tuple[SessionRecord, pr.PasswordChangeClient, str] | None = None

    def register(self):
        req, self._b = pr.user_register_begin(self.net.params, self.identity, self.password, self.rng)
        self.send(self.rc_id, req, REGISTRATION)

    def login(self, server: str, password: str | None = None, precompute: bool = False):
        if self.card is None:
            raise ScriptError(f"{self.id} has no card")
        net = self.net
        sess = pr.UserSession(net.params, self.card, self.identity,
                              self.password if password is None else password, server, self.rng)
        rec = net.open_session(self.id, server, "login", sess)
        pre = pr.precompute_ephemeral(net.params, self.rng) if precompute else None
        try:
            req = sess.login(pre)
        except DynAuthError as exc:
            net.fail(rec, exc)
            return
        rec.state = sess.state.value
        self.send(server, req)

    def change_password(self, new_password: str, password: str | None = None):
        net = self.net
        client = pr.PasswordChangeClient(net.params, self.card, self.identity,
                                         self.password if password is None else password,
                                         new_password, self.rng)
        rec = net.open_session(self.id, self.rc_id, "pwchange", client)
        try:
            req = client.start()
        except DynAuthError as exc:
            net.fail(rec, exc)
            return
        self._pw = (rec, client, new_password)
        rec.state = "AwaitRound2"
        self.send(self.rc_id, req)

    def on_garbage(self, frame, exc):
        rec = self.net.live_session(self.id, frame.src)
        if rec is not None:
            self.net.fail(rec, ServerAuthFailed(f"undecodable reply: {exc}"))

    def on_message(self, f, msg):
        net = self.net
        if isinstance(msg, CardIssue):
            self.card = pr.insert_card(msg, self._b)
            self._b = None
        elif isinstance(msg, ServerChallenge):
            rec = net.live_session(self.id, f.src, "login")
            if rec is None:
                return
            try:
                resp = rec.session.respond(msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state, rec.sk = "Established", rec.session.session_key()
            self.send(f.src, resp)
        elif isinstance(msg, (PwChangeAck, PwChangeIssue)) and self._pw:
            rec, client, new_pw = self._pw
            try:
                if isinstance(msg, PwChangeAck):
                    self.send(f.src, client.on_ack(msg))
                    rec.state = "AwaitRound4"
                else:
                    self.card = client.finish(msg)
                    self.password = new_pw
                    self._pw = None
                    rec.state = "Done"
            except DynAuthError as exc:
                self._pw = None
                net.fail(rec, exc)


class ServerActor(Principal):
    role = "server"

    def __init__(self, id: str, rc: str = "rc", replay_cache: bool = True):
        super().__init__(id)
        self.rc_id = rc
        self.server: pr.Server | None = None
        self._enrollment = None
        self._replay_cache = replay_cache

    def register(self):
        self._enrollment = pr.ServerEnrollment(self.net.params, self.id, self.rng)
        self.send(self.rc_id, self._enrollment.request, REGISTRATION)

    def on_garbage(self, frame, exc):
        rec = self.net.live_session(self.id, frame.src)
        if rec is not None:
            self.net.fail(rec, UserAuthFailed(f"undecodable response: {exc}"))

    def on_message(self, f, msg):
        net = self.net
        if isinstance(msg, ServerKeyIssue):
            try:
                identity = self._enrollment.finalize(msg)
            except DynAuthError as exc:
                net.errors.append((self.id, exc))
                return
            self.server = pr.Server(net.params, identity, self._replay_cache, self.rng)
        elif isinstance(msg, LoginRequest):
            if self.server is None:
                return
            rec = net.open_session(self.id, f.src, "login", initiator=False)
            try:
                ch, rec.session = self.server.challenge(msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state = "AwaitResponse"
            self.send(f.src, ch)
        elif isinstance(msg, UserResponse):
            rec = net.live_session(self.id, f.src, "login")
            if rec is None or rec.session is None:
                return
            try:
                rec.sk = self.server.verify(rec.session, msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state = "Established"


# -- hash-only baseline actors -----------------------------------------------------

class LiRcActor(Principal):
    role = "rc"

    def __init__(self, id: str = "rc"):
        super().__init__(id)
        self.rc: li_scheme.LiRegistrationCenter | None = None

    def attach(self, net):
        super().attach(net)
        self.rc = li_scheme.LiRegistrationCenter(net.hasher, self.rng.randbytes(16), self.rng.randbytes(16))
        net.li_rc = self.rc

    def on_message(self, f, msg):
        if isinstance(msg, LiRegRequest):
            self.send(f.src, self.rc.issue_card(msg), REGISTRATION)


class LiUserActor(Principal):
    role = "user"

    def __init__(self, id: str, identity: str, password: str, rc: str = "rc"):
        super().__init__(id)
        self.identity, self.password, self.rc_id = identity, password, rc
        self.card: li_scheme.LiSmartCard | None = None
        self._b = None

    def register(self):
        h = self.net.hasher
        self._b = h.nonce(self.rng)
        self.send(self.rc_id, li_scheme.li_register_request(h, self.identity, self.password, self._b),
                  REGISTRATION)

    def login(self, server: str, password: str | None = None, precompute: bool = False):
        net = self.net
        sess = li_scheme.LiUserSession(net.hasher, self.card, self.identity,
                                       self.password if password is None else password,
                                       server, self.rng)
        rec = net.open_session(self.id, server, "login", sess)
        try:
            req = sess.login()
        except DynAuthError as exc:
            net.fail(rec, exc)
            return
        rec.state = sess.state
        self.send(server, req)

    def on_message(self, f, msg):
        net = self.net
        if isinstance(msg, LiCardIssue):
            self.card = li_scheme.LiSmartCard(msg.C, msg.D, msg.E, self._b, msg.hy)
        elif isinstance(msg, LiChallenge):
            rec = net.live_session(self.id, f.src, "login")
            if rec is None:
                return
            try:
                confirm = rec.session.on_challenge(msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state, rec.sk = "Established", rec.session.sk
            self.send(f.src, confirm)


class LiServerActor(Principal):
    role = "server"

    def __init__(self, id: str, rc: str = "rc", replay_cache: bool = True):
        super().__init__(id)
        self.server: li_scheme.LiServer | None = None

    def register(self):
        # the RC hands h(x‖y) and h(SID‖h(y)) over a secure channel at setup
        self.server = li_scheme.LiServer(self.net.hasher, self.net.li_rc.server_state(self.id), self.rng)

    def on_message(self, f, msg):
        net = self.net
        if isinstance(msg, LiLogin):
            rec = net.open_session(self.id, f.src, "login", initiator=False)
            try:
                ch, rec.session = self.server.handle_login(msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state = "AwaitConfirm"
            self.send(f.src, ch)
        elif isinstance(msg, LiConfirm):
            rec = net.live_session(self.id, f.src, "login")
            if rec is None or rec.session is None:
                return
            try:
                rec.sk = self.server.handle_confirm(rec.session, msg)
            except DynAuthError as exc:
                net.fail(rec, exc)
                return
            rec.state = "Established"


# -- adversary ---------------------------------------------------------------------

Program = Generator["Message | Final | None", Message, Any]


@dataclass(frozen=True)
class Final:
    """Yielded by a program to send one last message and finish with ``result``."""

    msg: Message | None
    result: Any = None


class AdversaryActor(Principal):
    """Holds captured frames, stolen material and at most one running program.

    A program is a generator: it yields the next message to transmit (or
    ``None`` to wait) and is resumed with each decoded message that reaches
    the adversary. Its return value lands in ``results``.
    """

    role = "adversary"

    def __init__(self, id: str, knows: Iterable[str] = ()):
        super().__init__(id)
        self.captured = Transcript()
        self.knows = set(knows)
        self.knowledge: dict[str, Any] = {}
        self.stolen: dict[str, Any] = {}
        self.results: list[Any] = []
        self._program: Program | None = None
        self._rec: SessionRecord | None = None
        self._peer: str | None = None
        self._spoof_as: str | None = None
        self._feed_copies = False

    def attach(self, net):
        super().attach(net)
        if net.li_rc is not None:
            # corrupted a user and a server: the shared constants leak
            if "hy" in self.knows:
                self.knowledge["hy"] = net.li_rc.hy
            if "hxy" in self.knows:
                self.knowledge["hxy"] = net.li_rc.hxy

    def capture(self, frame: Frame) -> None:
        self.captured.append(Entry(frame.seq, frame.src, frame.dst, frame.type, frame.payload))

    def start(self, program: Program, peer: str, spoof_as: str | None = None,
              feed_copies: bool = False, label_peer: str | None = None) -> SessionRecord:
        self._program, self._peer = program, peer
        self._spoof_as, self._feed_copies = spoof_as, feed_copies
        self._rec = self.net.open_session(self.id, label_peer or peer, "attack", program)
        self._advance(None)
        return self._rec

    def _advance(self, msg: Message | None) -> None:
        try:
            out = next(self._program) if msg is None else self._program.send(msg)
        except StopIteration as stop:
            self._rec.state, self._rec.sk = "Done", stop.value
            self.results.append(stop.value)
            self._program = None
            return
        except DynAuthError as exc:
            self.net.fail(self._rec, exc)
            self._program = None
            return
        if isinstance(out, Final):
            self._program = None
            if out.msg is not None:
                self.send(self._peer, out.msg, src=self._spoof_as)
            self._rec.state, self._rec.sk = "Done", out.result
            self.results.append(out.result)
        elif out is not None:
            self.send(self._peer, out, src=self._spoof_as)

    def receive(self, frame: Frame) -> None:
        if frame.copied:
            self.capture(frame)
            if not (self._program and self._feed_copies):
                return
        elif self._program is None:
            return
        try:
            msg = self.net.codec.decode(frame.payload)
        except DecodeError:
            return
        self._advance(msg)


ACTOR_TYPES = {
    ("proposed", "rc"): RcActor,
    ("proposed", "user"): UserActor,
    ("proposed", "server"): ServerActor,
    ("li", "rc"): LiRcActor,
    ("li", "user"): LiUserActor,
    ("li", "server"): LiServerActor,
}


# -- network -------------------------------------------------------------------------

class Network:
    def __init__(self, suite: PairingSuite, seed: int | str = 0, scheme: str = "proposed",
                 li_hash: str = "sha256"):
        if scheme not in ("proposed", "li"):
            raise ScriptError(f"unknown scheme {scheme!r}")
        self.suite = suite
        self.seed = seed
        self.scheme = scheme
        self.hasher = li_scheme.LiHash(li_hash)
        self.codec = Codec(suite, self.hasher.digest_len)
        self.params: pr.PublicParams | None = None
        self.li_rc: li_scheme.LiRegistrationCenter | None = None
        self.principals: dict[str, Principal] = {}
        self.secure_links: set[frozenset] = set()
        self.rules: list[Rule] = []
        self.transcript = Transcript()
        self.stats: Counter = Counter()
        self.sessions: list[SessionRecord] = []
        self.errors: list[tuple[str, Exception]] = []
        self._pair_counts: Counter = Counter()
        self._heap: list = []
        self._seq = 0
        self.now = 0

    def seed_bytes(self, *labels: str) -> bytes:
        return seeded_rng(self.seed, "seed", *labels).randbytes(32)

    def rng(self, *labels: str):
        return seeded_rng(self.seed, *labels)

    def add(self, principal: Principal) -> Principal:
        if principal.id in self.principals:
            raise ScriptError(f"duplicate principal {principal.id!r}")
        self.principals[principal.id] = principal
        principal.attach(self)
        return principal

    def __getitem__(self, pid: str) -> Principal:
        try:
            return self.principals[pid]
        except KeyError:
            raise ScriptError(f"no principal {pid!r}") from None

    def set_link(self, a: str, b: str, mode: str) -> None:
        if mode not in ("secure", "public"):
            raise ScriptError(f"unknown link mode {mode!r}")
        key = frozenset((a, b))
        if mode == "secure":
            self.secure_links.add(key)
        else:
            self.secure_links.discard(key)

    def is_secure(self, f: Frame) -> bool:
        return f.channel == REGISTRATION or frozenset((f.src, f.dst)) in self.secure_links

    # -- adversary interface -------------------------------------------------------

    def adversary_tap(self, rule: Rule) -> Rule:
        if rule.channel == REGISTRATION or rule.type in REGISTRATION_TYPES:
            raise SecureLinkViolation("registration traffic is on a secure channel")
        if rule.src and rule.dst and frozenset((rule.src, rule.dst)) in self.secure_links:
            raise SecureLinkViolation(f"link {rule.src}-{rule.dst} is secure")
        if not isinstance(self.principals.get(rule.adversary), AdversaryActor):
            raise ScriptError(f"{rule.adversary!r} is not an adversary")
        self.rules.append(rule)
        return rule

    def replay_from_transcript(self, transcript: Transcript, selector: dict, adversary: str,
                               to: str, then: str = "stall") -> SessionRecord:
        """Re-inject a recorded frame as ``adversary``; ``then`` picks the follow-up.

        ``stall`` sends nothing more, ``replay_response`` answers a challenge
        with the next recorded user response, ``forge_response`` answers with
        a best-effort response built without the user's secrets, and
        ``li_complete`` finishes a baseline-scheme session with the leaked
        server constants.
        """
        sel = dict(selector)
        index = sel.pop("index", -1)
        candidates = [e for e in transcript.select(**sel) if e.payload]
        if not candidates:
            raise SelectorEmpty(f"no transcript entry matches {selector}")
        try:
            entry = candidates[index]
        except IndexError:
            raise SelectorEmpty(f"selector index {index} out of range") from None
        adv = self[adversary]
        first = self.codec.decode(entry.payload)
        follow: list[Message] = []
        if then == "replay_response":
            later = [e for e in transcript if e.ts > entry.ts and e.src == entry.src
                     and e.type == "UserResponse" and e.payload]
            follow = [self.codec.decode(later[0].payload)] if later else []
        if then == "li_complete":
            from .attacks import li_replay_program
            program = li_replay_program(self.hasher, adv.knowledge.get("hy"), adv.knowledge.get("hxy"),
                                        to.encode(), first)
        elif then == "forge_response":
            from .attacks import forged_response_program
            program = forged_response_program(self.params, first, adv.rng)
        elif then in ("stall", "replay_response"):
            program = _scripted_program(first, follow)
        else:
            raise ScriptError(f"unknown replay follow-up {then!r}")
        return adv.start(program, to)

    # -- transport -----------------------------------------------------------------

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def at(self, tick: int, fn: Callable[[], None]) -> None:
        heapq.heappush(self._heap, (tick, self._next_seq(), fn))

    def send(self, src: str, dst: str, msg: Message, channel: str = SESSION,
             origin: str | None = None) -> None:
        if dst not in self.principals:
            raise ScriptError(f"no principal {dst!r}")
        payload = self.codec.encode(msg)
        self._transmit(Frame(self._next_seq(), src, dst, msg.type_name, payload,
                             channel, origin or src))

    def _transmit(self, f: Frame) -> None:
        secure = self.is_secure(f)
        self.stats["sent"] += 1
        self.transcript.append(Entry(f.seq, f.src, f.dst, f.type, b"" if secure else f.payload))
        origin = self.principals.get(f.origin)
        if secure or isinstance(origin, AdversaryActor):
            self._deliver_later(f, "delivered")
            return
        for rule in self.rules:
            if not rule.matches(f):
                continue
            if rule.action == "copy":
                self.stats["copied"] += 1
                copy = Frame(f.seq, f.src, f.dst, f.type, f.payload, f.channel, f.origin, True)
                self.at(self.now + 1, lambda c=copy, a=rule.adversary: self.principals[a].receive(c))
                continue
            if rule.action == "drop":
                self.stats["dropped"] += 1
                return
            if rule.action == "replace":
                new = rule.mutate(f.payload)
                rf = Frame(self._next_seq(), f.src, f.dst, self.codec.peek_type(new), new,
                           f.channel, rule.adversary)
                self.transcript.append(Entry(rf.seq, rule.adversary, rf.dst, rf.type, new))
                self._deliver_later(rf, "replaced")
                return
            break
        self._deliver_later(f, "delivered")

    def _deliver_later(self, f: Frame, disposition: str) -> None:
        self.stats[disposition] += 1
        self.at(self.now + 1, lambda: self.principals[f.dst].receive(f))

    def run(self, max_events: int = 1_000_000) -> None:
        n = 0
        while self._heap:
            tick, _, fn = heapq.heappop(self._heap)
            self.now = max(self.now, tick)
            fn()
            n += 1
            if n >= max_events:
                raise Deadlock("event budget exhausted")

    # -- session bookkeeping ---------------------------------------------------------

    def open_session(self, principal: str, peer: str, kind: str, session: Any = None,
                     initiator: bool = True) -> SessionRecord:
        n = self._pair_counts[(principal, peer, kind)]
        self._pair_counts[(principal, peer, kind)] += 1
        arrow = "->" if initiator else "<-"
        suffix = "" if kind in ("login", "attack") else f":{kind}"
        rec = SessionRecord(f"{principal}{arrow}{peer}#{n}{suffix}", principal, peer, kind, session)
        self.sessions.append(rec)
        return rec

    def live_session(self, principal: str, peer: str, kind: str | None = None) -> SessionRecord | None:
        for rec in reversed(self.sessions):
            if (rec.principal == principal and rec.peer == peer
                    and (kind is None or rec.kind == kind)):
                return None if rec.outcome in TERMINAL or rec.error else rec
        return None

    def fail(self, rec: SessionRecord, exc: Exception) -> None:
        rec.error = exc
        rec.state = "Failed"

    def outcomes(self) -> dict[str, str]:
        return {rec.label: rec.outcome for rec in self.sessions}

    def keys_equal(self) -> dict[str, bool]:
        out = {}
        by_label = {rec.label: rec for rec in self.sessions}
        for rec in self.sessions:
            if rec.kind != "login" or "->" not in rec.label:
                continue
            twin = by_label.get(rec.label.replace(f"{rec.principal}->{rec.peer}",
                                                  f"{rec.peer}<-{rec.principal}"))
            out[rec.label] = (twin is not None and rec.sk is not None and rec.sk == twin.sk)
        return out

    def stalled(self) -> list[SessionRecord]:
        return [r for r in self.sessions if r.outcome not in TERMINAL and r.error is None]


def _scripted_program(first: Message, follow: list[Message]) -> Program:
    if not follow:
        yield Final(first)
        return
    yield first
    for msg in follow[:-1]:
        yield msg  # each waits for the next inbound message
    yield Final(follow[-1])


# -- scenarios -----------------------------------------------------------------------

def _field_span(codec: Codec, data: bytes, field_name: str) -> tuple[int, int]:
    from dataclasses import fields as dc_fields

    cls = BY_NAME.get(codec.peek_type(data))
    if cls is None:
        raise ScriptError("cannot mutate an unknown frame")
    pos = 1
    for f, kind in zip(dc_fields(cls), cls.KINDS):
        if kind == "octets":
            width = data[pos]
            pos += 1
        else:
            width = codec._width(kind)
        if f.name == field_name:
            return pos, pos + width
        pos += width
    raise ScriptError(f"{cls.__name__} has no field {field_name!r}")


def make_mutation(net: Network, spec: dict, rng) -> Callable[[bytes], bytes]:
    """Build a payload rewrite from ``{"field", "op", ...}``.

    ``flipbit`` flips bit ``bit`` (0 = least significant bit of the field);
    ``random`` overwrites the field with a fresh valid element of its kind.
    """
    field_name, op = spec.get("field"), spec.get("op", "flipbit")

    def mutate(data: bytes) -> bytes:
        start, end = _field_span(net.codec, data, field_name)
        buf = bytearray(data)
        if op == "flipbit":
            bit = int(spec.get("bit", 0))
            buf[end - 1 - bit // 8] ^= 1 << (bit % 8)
        elif op == "random":
            cls = BY_NAME[net.codec.peek_type(data)]
            from dataclasses import fields as dc_fields

            kind = dict(zip((f.name for f in dc_fields(cls)), cls.KINDS))[field_name]
            s = net.suite
            if kind == "point":
                new = s._mul(s.random_scalar(rng), s.P).data
            elif kind == "scalar":
                new = s.encode_scalar(s.random_scalar(rng))
            else:
                new = rng.randbytes(end - start)
            buf[start:end] = new
        else:
            raise ScriptError(f"unknown mutation {op!r}")
        return bytes(buf)

    return mutate


@dataclass
class Scenario:
    seed: int | str = 0
    backend: str = "transparent"
    scheme: str = "proposed"
    cast: list[dict] = field(default_factory=list)
    links: list[dict] = field(default_factory=list)
    rules: list[dict] = field(default_factory=list)
    script: list[dict] = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    on_stall: str = "error"
    li_hash: str = "sha256"

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ScriptError(f"unknown scenario keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ScriptError(f"{path}: {exc}") from None


@dataclass
class ScenarioResult:
    transcript: Transcript
    outcomes: dict[str, str]
    keys_equal: dict[str, bool]
    unmet: list[str]
    net: Network

    def summary(self, user: str, server: str, n: int = 0) -> dict:
        label = f"{user}->{server}#{n}"
        return {"user": self.outcomes.get(label),
                "server": self.outcomes.get(f"{server}<-{user}#{n}"),
                "keys_equal": self.keys_equal.get(label, False)}


def build_network(s: Scenario, suite: PairingSuite | None = None) -> Network:
    net = Network(suite or make_suite(s.backend), s.seed, s.scheme, s.li_hash)
    cast = sorted(s.cast, key=lambda c: {"rc": 0}.get(c.get("role"), 1))
    for c in cast:
        role, pid = c.get("role"), c.get("id")
        if not pid:
            raise ScriptError(f"cast entry without id: {c}")
        if role == "adversary":
            net.add(AdversaryActor(pid, c.get("knows", ())))
        elif (s.scheme, role) in ACTOR_TYPES:
            actor = ACTOR_TYPES[(s.scheme, role)]
            if role == "user":
                net.add(actor(pid, c.get("identity", pid), c["password"], c.get("rc", "rc")))
            elif role == "server":
                net.add(actor(pid, c.get("rc", "rc"), c.get("replay_cache", True)))
            else:
                net.add(actor(pid))
        else:
            raise ScriptError(f"unknown role {role!r}")
    for link in s.links:
        net.set_link(link["a"], link["b"], link.get("mode", "public"))
    for i, r in enumerate(s.rules):
        net.adversary_tap(_rule_from_dict(net, r, i))
    return net


def _rule_from_dict(net: Network, r: dict, i: int) -> Rule:
    match = r.get("match", {})
    mutate = None
    if r.get("action") == "replace":
        mutate = make_mutation(net, r.get("mutate", {}), net.rng("rule", str(i)))
    return Rule(r.get("adversary", ""), r.get("action", "copy"), match.get("from"),
                match.get("to"), match.get("type"), match.get("channel"), mutate)


def _do(net: Network, step: dict, idx: int) -> None:
    verb = step.get("do")
    try:
        if verb in ("register_user", "register_server"):
            net[step.get("user") or step["server"]].register()
        elif verb == "login":
            net[step["user"]].login(step["server"], step.get("password"), step.get("precompute", False))
        elif verb == "change_password":
            net[step["user"]].change_password(step["new_password"], step.get("password"))
        elif verb == "steal_card":
            adv = net[step["adversary"]]
            adv.stolen[step["user"]] = net[step["user"]].card
        elif verb == "tap":
            net.adversary_tap(_rule_from_dict(net, step, 1000 + idx))
        elif verb == "replay":
            adv = net[step["adversary"]]
            source = adv.captured if step.get("source", "captured") == "captured" else net.transcript
            net.replay_from_transcript(source, step.get("select", {}), adv.id, step["to"],
                                       step.get("then", "stall"))
        elif verb == "attack":
            from .attacks import start_sim_attack

            start_sim_attack(net, step)
        else:
            raise ScriptError(f"unknown script verb {verb!r}")
    except KeyError as exc:
        raise ScriptError(f"step {idx} ({verb}) missing {exc}") from None


def run_scenario(s: Scenario, suite: PairingSuite | None = None) -> ScenarioResult:
    net = build_network(s, suite)
    for idx, step in enumerate(s.script):
        net.at(int(step.get("at", idx * 10)), lambda st=step, i=idx: _do(net, st, i))
    net.run()
    stalled = net.stalled()
    if stalled and s.on_stall == "error":
        raise Deadlock("quiescent with unfinished sessions: "
                       + ", ".join(f"{r.label}={r.outcome}" for r in stalled))
    outcomes, keys = net.outcomes(), net.keys_equal()
    unmet = []
    for label, want in s.expect.items():
        if label == "keys_equal":
            for k, v in want.items():
                if keys.get(k) != v:
                    unmet.append(f"keys_equal[{k}]: want {v}, got {keys.get(k)}")
        elif outcomes.get(label) != want:
            unmet.append(f"{label}: want {want}, got {outcomes.get(label)}")
    return ScenarioResult(net.transcript, outcomes, keys, unmet, net)
