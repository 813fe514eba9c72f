"""Adversary programs against both schemes.

Against the hash-only baseline, an adversary holding ``h(y)`` and
``h(x‖y)`` (leaked by one corrupted user plus one corrupted server) can
unmask every login request. The four attacks here succeed deterministically
under those preconditions. Against the pairing scheme, the analogous probes
must fail in every trial; a success raises
:class:`~dynauth.errors.ProbeUnexpectedlySucceeded`.

Attack logic is written as simulator programs (see
:class:`~dynauth.simnet.AdversaryActor`) and consumes only what the
adversary legitimately holds: its :class:`AdversaryContext`, captured
frames and public parameters.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from . import proposed as pr
from .errors import (
    AttackFailed,
    AuthLocalFailed,
    DynAuthError,
    LocalCheckFailed,
    MissingKnowledge,
    NotInDictionary,
    ProbeUnexpectedlySucceeded,
    ScriptError,
)
from .li import (
    LiHash,
    LiServer,
    LiUserSession,
    build_login,
    li_local_check,
    recover_login_secrets,
    session_key,
    xor,
)
from .simnet import AdversaryActor, Final, Network, Rule, Scenario, UserActor, run_scenario
from .wire import Codec, LiConfirm, LiLogin, LiChallenge, LoginRequest, ServerChallenge, Transcript, UserResponse

PROBES = ("replay", "impersonate", "spoof_server", "stolen_card_dictionary", "dos_password_change")
LI_ATTACKS = ("li_stolen_card_dictionary", "li_replay", "li_impersonate", "li_spoof_server")


@dataclass
class AdversaryContext:
    knows_hy: bytes | None = None
    knows_hxy: bytes | None = None
    stolen_card: Any = None
    captured: list[Transcript] = field(default_factory=list)
    dictionary: list[str] = field(default_factory=list)
    id_candidates: list[str] = field(default_factory=list)
    hasher: LiHash = field(default_factory=LiHash)

    def require(self, *names: str) -> None:
        missing = [n for n in names if getattr(self, n) in (None, [])]
        if missing:
            raise MissingKnowledge(f"attack needs {', '.join(missing)}")

    def last_login(self):
        """Most recent captured baseline login as ``(entry, message)``."""
        codec = Codec(None, self.hasher.digest_len)
        for t in reversed(self.captured):
            hits = [e for e in t.select(type="LiLogin") if e.payload]
            if hits:
                return hits[-1], codec.decode(hits[-1].payload)
        raise MissingKnowledge("no captured login request")


@dataclass
class AttackOutcome:
    attack: str
    success: bool
    sk: Any = None
    peer_sk: Any = None
    error: str | None = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("sk", "peer_sk"):
            if isinstance(d[k], bytes):
                d[k] = d[k].hex()
        return d


@dataclass(frozen=True)
class Credentials:
    ID: str
    PW: str
    A: bytes


# -- baseline scheme: programs --------------------------------------------------------

def li_replay_program(hasher: LiHash, hy: bytes | None, hxy: bytes | None, SID: bytes, login: LiLogin):
    """Replay a captured login and finish the exchange with the stripped secrets."""
    if hy is None or hxy is None:
        raise MissingKnowledge("replay needs h(y) and h(x||y)")
    sec = recover_login_secrets(hasher, SID, hasher(SID, hy), hxy, login)
    ch = yield login
    N_j = xor(sec.A, sec.N_i, ch.M4)
    # M3 is not a gate here: a wrong derivation surfaces as a rejected M5
    sk = session_key(hasher, sec.D, sec.A, sec.N_i, N_j, SID)
    yield Final(LiConfirm(hasher(sec.D, sec.A, sec.N_i, SID)), sk)


def li_impersonate_program(hasher: LiHash, hy: bytes | None, hxy: bytes | None, SID: bytes, rng=None):
    """Fabricate a login for an arbitrary user without any card."""
    if hy is None or hxy is None:
        raise MissingKnowledge("impersonation needs h(y) and h(x||y)")
    A = hasher(hasher.nonce(rng))
    B = hasher(hasher.nonce(rng))
    D, E = hasher(B, hxy), xor(B, hxy)
    N_i = hasher.nonce(rng)
    ch = yield build_login(hasher, SID, hasher(SID, hy), A, D, E, N_i)
    N_j = xor(A, N_i, ch.M4)
    sk = session_key(hasher, D, A, N_i, N_j, SID)
    yield Final(LiConfirm(hasher(D, A, N_i, SID)), sk)


def li_spoof_program(hasher: LiHash, hy: bytes | None, hxy: bytes | None, SID: bytes,
                     rng=None, login: LiLogin | None = None, intercept: bool = True):
    """Answer an intercepted login as the server and verify the victim's M5.

    With ``intercept`` false the adversary has no login to strip and has to
    guess ``A_i`` and ``N_i``.
    """
    if hy is None or hxy is None:
        raise MissingKnowledge("server spoofing needs h(y) and h(x||y)")
    if login is None and intercept:
        login = yield None
    if intercept:
        sec = recover_login_secrets(hasher, SID, hasher(SID, hy), hxy, login)
        A, N_i, D = sec.A, sec.N_i, sec.D
    else:
        A, N_i, D = hasher.nonce(rng), hasher.nonce(rng), hasher.nonce(rng)
    N_j = hasher.nonce(rng)
    confirm = yield LiChallenge(hasher(D, A, N_j, SID), xor(A, N_i, N_j))
    if hasher(D, A, N_i, SID) != confirm.M5:
        return None
    return session_key(hasher, D, A, N_i, N_j, SID)


# -- baseline scheme: in-process drivers ------------------------------------------------

def _drive(program, respond: Callable[[Any], Any]):
    out = next(program)
    try:
        while True:
            if isinstance(out, Final):
                if out.msg is not None:
                    respond(out.msg)
                return out.result
            reply = respond(out) if out is not None else None
            out = program.send(reply)
    except StopIteration as stop:
        return stop.value


def _li_server_peer(server: LiServer):
    state = {}

    def respond(msg):
        if isinstance(msg, LiLogin):
            ch, state["sess"] = server.handle_login(msg)
            return ch
        if isinstance(msg, LiConfirm):
            return server.handle_confirm(state["sess"], msg)
        raise ScriptError(f"server cannot handle {type(msg).__name__}")

    return respond, state


def attack_li_stolen_card_dictionary(ctx: AdversaryContext) -> Credentials:
    """Recover ``(ID_i, PW_i)`` with two independent single-list searches."""
    ctx.require("stolen_card", "captured", "knows_hy", "knows_hxy")
    h, card = ctx.hasher, ctx.stolen_card
    entry, login = ctx.last_login()
    SID = entry.dst.encode()
    A = recover_login_secrets(h, SID, h(SID, ctx.knows_hy), ctx.knows_hxy, login).A
    ID = next((c for c in ctx.id_candidates if h(c, card.hy, A) == card.C), None)
    if ID is None:
        raise NotInDictionary("identity not in candidate list")
    PW = next((pw for pw in ctx.dictionary
               if len(pw.encode()) <= h.digest_len and h(xor(card.b, h.pad(pw))) == A), None)
    if PW is None:
        raise NotInDictionary("password not in dictionary")
    return Credentials(ID, PW, A)


def attack_li_replay(ctx: AdversaryContext, server: LiServer) -> AttackOutcome:
    ctx.require("knows_hy", "knows_hxy", "captured")
    _, login = ctx.last_login()
    respond, state = _li_server_peer(server)
    program = li_replay_program(ctx.hasher, ctx.knows_hy, ctx.knows_hxy, server.SID, login)
    return _li_outcome("li_replay", program, respond, state)


def attack_li_impersonate_user(ctx: AdversaryContext, server: LiServer, rng=None) -> AttackOutcome:
    ctx.require("knows_hy", "knows_hxy")
    respond, state = _li_server_peer(server)
    program = li_impersonate_program(ctx.hasher, ctx.knows_hy, ctx.knows_hxy, server.SID, rng)
    return _li_outcome("li_impersonate", program, respond, state)


def _li_outcome(name, program, respond, state) -> AttackOutcome:
    try:
        sk = _drive(program, respond)
    except DynAuthError as exc:
        return AttackOutcome(name, False, error=type(exc).__name__)
    sess = state.get("sess")
    peer_sk = sess.sk if sess is not None else None
    return AttackOutcome(name, sk is not None and sk == peer_sk, sk, peer_sk)


def attack_li_spoof_server(ctx: AdversaryContext, victim: LiUserSession, rng=None) -> AttackOutcome:
    """Play the server against ``victim`` (a session that already sent its login)."""
    ctx.require("knows_hy", "knows_hxy")
    try:
        _, login = ctx.last_login()
    except MissingKnowledge:
        login = None
    program = li_spoof_program(ctx.hasher, ctx.knows_hy, ctx.knows_hxy, victim.SID, rng,
                               login, intercept=login is not None)
    try:
        sk = _drive(program, victim.on_challenge)
    except DynAuthError as exc:
        return AttackOutcome("li_spoof_server", False, error=type(exc).__name__)
    return AttackOutcome("li_spoof_server", sk is not None and sk == victim.sk, sk, victim.sk,
                         details={"m5_verified": sk is not None})


# -- proposed scheme: programs ----------------------------------------------------------

def forged_response_program(params: pr.PublicParams, login: LoginRequest, rng=None):
    """Replay ``login`` and answer its challenge without ``u_i``, ``r_i`` or ``CID_i``."""
    s = params.suite
    yield login
    M = s._mul(s.random_scalar(rng), s.P)
    B = s._mul(s.random_scalar(rng), s.P)
    yield Final(UserResponse(M, B))


def proposed_impersonate_program(params: pr.PublicParams, ID: str, SID: bytes, rng=None):
    """Run the user side honestly except for ``CID_i``, which needs ``s_RC``."""
    s = params.suite
    QID = s._map(ID.encode())
    CID_guess = s._mul(s.random_scalar(rng), s.P)
    u, r = s.random_scalar(rng), s.random_scalar(rng)
    DID = s._mul(u, QID)
    ch = yield LoginRequest(DID, s._mul(r, s.P))
    s_pub = pr.server_public_key(params, SID, ch.W)
    K = s._mul(r, s_pub)
    M = s._mul(r, DID)
    d = s.hash(DID, SID, K, M)
    B = s._mul((r + d) % s.q, s._mul(u, CID_guess))
    yield Final(UserResponse(M, B))


def proposed_spoof_program(params: pr.PublicParams, SID: bytes, rng=None):
    """Answer an intercepted login as ``SID`` with a witness the adversary made up."""
    s = params.suite
    login = yield None
    w, r = s.random_scalar(rng), s.random_scalar(rng)
    W = s._mul(w, s.P)
    R_j = s._mul(r, s.P)
    # without s_RC the h(SID||W)·s_RC·R_i share of K is out of reach
    K_guess = s._mul(w, login.R)
    yield Final(ServerChallenge(W, R_j, s.hash(login.DID, SID, K_guess, R_j)))


# -- simulator integration --------------------------------------------------------------

def start_sim_attack(net: Network, step: dict):
    """Start the attack named in a scenario ``attack`` step."""
    name = step.get("name")
    adv = net[step["adversary"]]
    if not isinstance(adv, AdversaryActor):
        raise ScriptError(f"{adv.id!r} is not an adversary")
    h = net.hasher
    hy, hxy = adv.knowledge.get("hy"), adv.knowledge.get("hxy")
    if name == "li_impersonate":
        return adv.start(li_impersonate_program(h, hy, hxy, step["to"].encode(), adv.rng), step["to"])
    if name == "li_replay":
        return net.replay_from_transcript(adv.captured, {"type": "LiLogin", **step.get("select", {})},
                                          adv.id, step["to"], "li_complete")
    if name == "proposed_impersonate":
        program = proposed_impersonate_program(net.params, step["identity"], step["to"].encode(), adv.rng)
        return adv.start(program, step["to"])
    if name in ("li_spoof_server", "proposed_spoof_server"):
        victim, server = step["victim"], step["as"]
        login_type, confirm_type = (("LiLogin", "LiConfirm") if name == "li_spoof_server"
                                    else ("LoginRequest", "UserResponse"))
        for t in (login_type, confirm_type):
            net.adversary_tap(Rule(adv.id, "copy", src=victim, dst=server, type=t))
            net.adversary_tap(Rule(adv.id, "drop", src=victim, dst=server, type=t))
        if name == "li_spoof_server":
            program = li_spoof_program(h, hy, hxy, server.encode(), adv.rng)
        else:
            program = proposed_spoof_program(net.params, server.encode(), adv.rng)
        return adv.start(program, victim, spoof_as=server, feed_copies=True)
    raise ScriptError(f"unknown attack {name!r}")


def wordlist(prefix: str, n: int, plant: str | None = None, seed: int | str = 0) -> list[str]:
    """``n`` deterministic candidates, optionally with ``plant`` at a seeded position."""
    from .algebra import seeded_rng

    words = [f"{prefix}{i:04d}" for i in range(n)]
    if plant is not None:
        words[seeded_rng(seed, "plant", prefix).randrange(n)] = plant
    return words


def _li_cast(password: str, knows=("hy", "hxy")) -> list[dict]:
    return [{"role": "rc", "id": "rc"},
            {"role": "user", "id": "alice", "identity": "alice", "password": password},
            {"role": "server", "id": "S1"},
            {"role": "server", "id": "S2"},
            {"role": "adversary", "id": "eve", "knows": list(knows)}]


_SETUP = [{"at": 0, "do": "register_user", "user": "alice"},
          {"at": 0, "do": "register_server", "server": "S1"},
          {"at": 0, "do": "register_server", "server": "S2"}]


def run_li_attack(name: str, seed: int | str = 0, n_passwords: int = 1000, n_ids: int = 100,
                  li_hash: str = "sha256") -> AttackOutcome:
    """Mount one baseline attack in a fresh simulated deployment."""
    if name not in LI_ATTACKS:
        raise ScriptError(f"unknown attack {name!r}; choose from {', '.join(LI_ATTACKS)}")
    from .algebra import seeded_rng

    password = f"pw-{seeded_rng(seed, 'password').randrange(10**6):06d}"
    tap = [{"adversary": "eve", "action": "copy", "match": {"from": "alice", "to": "S1", "type": "LiLogin"}}]
    script = list(_SETUP)
    rules: list[dict] = []
    if name == "li_replay":
        rules = tap
        script += [{"at": 10, "do": "login", "user": "alice", "server": "S1"},
                   {"at": 50, "do": "attack", "name": "li_replay", "adversary": "eve", "to": "S1"}]
        peer, victim_label = "S1<-eve#0", None
    elif name == "li_impersonate":
        script += [{"at": 10, "do": "attack", "name": "li_impersonate", "adversary": "eve", "to": "S1"}]
        peer, victim_label = "S1<-eve#0", None
    elif name == "li_spoof_server":
        script += [{"at": 5, "do": "attack", "name": "li_spoof_server", "adversary": "eve",
                    "victim": "alice", "as": "S1"},
                   {"at": 10, "do": "login", "user": "alice", "server": "S1"}]
        peer, victim_label = None, "alice->S1#0"
    else:
        rules = tap
        script += [{"at": 10, "do": "login", "user": "alice", "server": "S1"},
                   {"at": 50, "do": "steal_card", "adversary": "eve", "user": "alice"}]
        peer = victim_label = None
    scn = Scenario(seed=seed, scheme="li", cast=_li_cast(password), rules=rules, script=script,
                   li_hash=li_hash)
    res = run_scenario(scn)
    adv: AdversaryActor = res.net["eve"]
    if name == "li_stolen_card_dictionary":
        ctx = AdversaryContext(adv.knowledge.get("hy"), adv.knowledge.get("hxy"), adv.stolen["alice"],
                               [adv.captured], wordlist("pw", n_passwords, password, seed),
                               wordlist("user", n_ids, "alice", seed), res.net.hasher)
        try:
            cred = attack_li_stolen_card_dictionary(ctx)
            li_local_check(res.net.hasher, ctx.stolen_card, cred.ID, cred.PW)
        except (NotInDictionary, LocalCheckFailed) as exc:
            return AttackOutcome(name, False, error=type(exc).__name__)
        return AttackOutcome(name, (cred.ID, cred.PW) == ("alice", password),
                             details={"ID": cred.ID, "PW": cred.PW})
    adv_rec = next(r for r in res.net.sessions if r.principal == "eve")
    if peer is not None:
        other = next(r for r in res.net.sessions if r.label == peer)
    else:
        other = next(r for r in res.net.sessions if r.label == victim_label)
    ok = other.outcome == "Established" and adv_rec.sk is not None and adv_rec.sk == other.sk
    return AttackOutcome(name, ok, adv_rec.sk, other.sk,
                         None if ok else (other.outcome if other.error else adv_rec.outcome),
                         {"outcomes": res.outcomes})


# -- proposed scheme: resistance probes -------------------------------------------------

@dataclass
class ProbeReport:
    probe: str
    trials: int
    failures: int
    failure_stage: str | None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _proposed_cast(password: str) -> list[dict]:
    return [{"role": "rc", "id": "rc"},
            {"role": "user", "id": "alice", "identity": "alice@example", "password": password},
            {"role": "server", "id": "S1"},
            {"role": "adversary", "id": "eve"}]


def _stage(rec) -> tuple[bool, str, str]:
    """(attack succeeded, stage, outcome) for the record that should reject."""
    if rec.error is None:
        return rec.outcome == "Established", "none", rec.outcome
    return False, getattr(rec.error, "stage", "?"), rec.outcome


def _trial(kind: str, seed: str, backend: str, suite) -> tuple[bool, str, str]:
    from .algebra import seeded_rng

    rng = seeded_rng(seed, "probe")
    password = f"secret-{rng.randrange(10**6):06d}"
    script = [{"at": 0, "do": "register_user", "user": "alice"},
              {"at": 0, "do": "register_server", "server": "S1"}]
    rules: list[dict] = []
    if kind == "replay":
        rules = [{"adversary": "eve", "action": "copy", "match": {"from": "alice", "type": t}}
                 for t in ("LoginRequest", "UserResponse")]
        then = "replay_response" if rng.random() < 0.5 else "forge_response"
        script += [{"at": 10, "do": "login", "user": "alice", "server": "S1"},
                   {"at": 50, "do": "replay", "adversary": "eve", "to": "S1",
                    "select": {"type": "LoginRequest"}, "then": then}]
        target = "S1<-eve#0"
    elif kind == "impersonate":
        script += [{"at": 10, "do": "attack", "name": "proposed_impersonate", "adversary": "eve",
                    "to": "S1", "identity": "alice@example"}]
        target = "S1<-eve#0"
    elif kind == "spoof_server":
        script += [{"at": 5, "do": "attack", "name": "proposed_spoof_server", "adversary": "eve",
                    "victim": "alice", "as": "S1"},
                   {"at": 10, "do": "login", "user": "alice", "server": "S1"}]
        target = "alice->S1#0"
    else:
        rules = [{"adversary": "eve", "action": "copy", "match": {"from": "alice"}}]
        script += [{"at": 10, "do": "login", "user": "alice", "server": "S1"},
                   {"at": 50, "do": "steal_card", "adversary": "eve", "user": "alice"}]
        target = None
    scn = Scenario(seed=seed, backend=backend, cast=_proposed_cast(password), rules=rules, script=script)
    res = run_scenario(scn, suite)
    if target is not None:
        return _stage(next(r for r in res.net.sessions if r.label == target))
    net = res.net
    card = net["eve"].stolen["alice"]
    if kind == "stolen_card_dictionary":
        return _dictionary_trial(net, card, password, rng)
    return _dos_trial(net, card, password, rng)


def _dictionary_trial(net: Network, card: pr.SmartCard, password: str, rng):
    """Single-list searches: true password with wrong identities, and the reverse."""
    true_id = "alice@example"
    pw_list = wordlist("pw", 20, password, str(rng.random()))
    id_list = wordlist("user", 10, true_id, str(rng.random()))
    wrong_ids = [f"x-{i}" for i in range(10)]
    wrong_pws = [f"y-{i}" for i in range(20)]
    hits = 0
    for ids, pws in ((wrong_ids, pw_list), (id_list, wrong_pws)):
        for ID in ids:
            for pw in pws:
                try:
                    pr.card_unlock(net.params, card, ID, pw)
                    hits += 1
                except AuthLocalFailed:
                    pass
    return hits > 0, "card_unlock", "AuthLocalFailed" if hits == 0 else "Unlocked"


def _dos_trial(net: Network, card: pr.SmartCard, password: str, rng):
    """Drive a password update from a stolen card with a guessed identity/password."""
    mode = rng.randrange(3)
    guess_id = "alice@example" if mode == 1 else f"guess-{rng.randrange(10**6)}"
    guess_pw = password if mode == 0 else f"guess-{rng.randrange(10**6)}"
    reader = net.add(UserActor("eve-reader", guess_id, guess_pw))
    reader.card = card
    before = len(net.transcript)
    reader.change_password("attacker-chosen")
    net.run()
    rec = next(r for r in net.sessions if r.principal == "eve-reader")
    unchanged = reader.card == card and len(net.transcript) == before
    pr.card_unlock(net.params, net["alice"].card, "alice@example", password)
    succeeded = rec.outcome == "Done" or not unchanged
    return succeeded, getattr(rec.error, "stage", "none"), rec.outcome


def probe_proposed_resistance(kind: str, trials: int = 100, seed: int | str = 0,
                              backend: str = "transparent", suite=None) -> ProbeReport:
    """Mount ``kind`` against fresh deployments; every trial must fail."""
    if kind not in PROBES:
        raise ScriptError(f"unknown probe {kind!r}; choose from {', '.join(PROBES)}")
    from .algebra import make_suite

    suite = suite or make_suite(backend)
    stages: Counter = Counter()
    outcomes: Counter = Counter()
    successes = 0
    for i in range(trials):
        ok, stage, outcome = _trial(kind, f"{seed}/{kind}/{i}", backend, suite)
        successes += ok
        stages[stage] += 1
        outcomes[outcome] += 1
    failures = trials - successes
    stage = stages.most_common(1)[0][0] if len(stages) == 1 else None
    report = ProbeReport(kind, trials, failures, stage,
                         {"stages": dict(stages), "outcomes": dict(outcomes), "backend": suite.descriptor})
    if successes:
        exc = ProbeUnexpectedlySucceeded(f"{kind} probe succeeded in {successes}/{trials} trials")
        exc.report = report
        raise exc
    return report


def require_success(outcome: AttackOutcome) -> AttackOutcome:
    if not outcome.success:
        raise AttackFailed(f"{outcome.attack} did not succeed: {outcome.error}")
    return outcome
