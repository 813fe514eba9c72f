import random

import pytest

from dynauth import attacks as at
from dynauth import li
from dynauth.errors import (AttackFailed, M1Invalid, M3Invalid, M5Invalid, MissingKnowledge, NotInDictionary,
                            ProbeUnexpectedlySucceeded, ScriptError)
from dynauth.wire import Codec, Entry, Transcript


@pytest.fixture
def deployment():
    h = li.LiHash()
    rc = li.LiRegistrationCenter(h, b"secret-x", b"secret-y")
    card = li.li_register(rc, "alice", "pw-0042", h.nonce(random.Random(9)))
    server = li.LiServer(h, rc.server_state("S1"), random.Random(2))
    user = li.LiUserSession(h, card, "alice", "pw-0042", "S1", random.Random(3))
    login = user.login()
    captured = Transcript([Entry(1, "alice", "S1", "LiLogin", Codec(None).encode(login))])
    ch, sess = server.handle_login(login)
    server.handle_confirm(sess, user.on_challenge(ch))
    ctx = at.AdversaryContext(rc.hy, rc.hxy, card, [captured], at.wordlist("pw", 1000, "pw-0042"),
                              at.wordlist("user", 100, "alice"), h)
    return h, rc, card, server, ctx


class TestLiInProcess:
    def test_dictionary(self, deployment):
        *_, ctx = deployment
        cred = at.attack_li_stolen_card_dictionary(ctx)
        assert (cred.ID, cred.PW) == ("alice", "pw-0042")

    def test_dictionary_miss(self, deployment):
        *_, ctx = deployment
        ctx.dictionary = at.wordlist("pw", 50)
        with pytest.raises(NotInDictionary):
            at.attack_li_stolen_card_dictionary(ctx)
        ctx.dictionary, ctx.id_candidates = ["pw-0042"], ["bob"]
        with pytest.raises(NotInDictionary):
            at.attack_li_stolen_card_dictionary(ctx)

    def test_dictionary_needs_card(self, deployment):
        *_, ctx = deployment
        ctx.stolen_card = None
        with pytest.raises(MissingKnowledge):
            at.attack_li_stolen_card_dictionary(ctx)

    def test_replay(self, deployment):
        _, _, _, server, ctx = deployment
        out = at.attack_li_replay(ctx, server)
        assert out.success and out.sk == out.peer_sk

    def test_replay_without_hxy(self, deployment):
        _, _, _, server, ctx = deployment
        ctx.knows_hxy = None
        with pytest.raises(MissingKnowledge):
            at.attack_li_replay(ctx, server)

    def test_replay_wrong_hxy(self, deployment):
        _, _, _, server, ctx = deployment
        ctx.knows_hxy = bytes(32)
        out = at.attack_li_replay(ctx, server)
        assert not out.success and out.error == M5Invalid.__name__

    @pytest.mark.parametrize("seed", range(10))
    def test_impersonation(self, deployment, seed):
        _, _, _, server, ctx = deployment
        out = at.attack_li_impersonate_user(ctx, server, random.Random(seed))
        assert out.success

    def test_impersonation_wrong_hy(self, deployment):
        _, _, _, server, ctx = deployment
        ctx.knows_hy = bytes(32)
        out = at.attack_li_impersonate_user(ctx, server, random.Random(0))
        assert out.error == M1Invalid.__name__

    def test_spoof_server(self, deployment):
        h, rc, card, _, ctx = deployment
        victim = li.LiUserSession(h, card, "alice", "pw-0042", "S1", random.Random(11))
        login = victim.login()
        ctx.captured = [Transcript([Entry(1, "alice", "S1", "LiLogin", Codec(None).encode(login))])]
        out = at.attack_li_spoof_server(ctx, victim, random.Random(1))
        assert out.success and victim.state == "Established"

    def test_spoof_without_intercept(self, deployment):
        h, _, card, _, ctx = deployment
        victim = li.LiUserSession(h, card, "alice", "pw-0042", "S1", random.Random(11))
        victim.login()
        ctx.captured = []
        out = at.attack_li_spoof_server(ctx, victim, random.Random(1))
        assert not out.success and out.error == M3Invalid.__name__


class TestLiInSimulator:
    @pytest.mark.parametrize("name", at.LI_ATTACKS)
    def test_attack_succeeds(self, name):
        out = at.run_li_attack(name, seed=1, n_passwords=100, n_ids=20)
        assert out.success, out
        if name != "li_stolen_card_dictionary":
            assert out.sk == out.peer_sk is not None

    def test_unknown(self):
        with pytest.raises(ScriptError):
            at.run_li_attack("li_magic")

    def test_require_success(self):
        with pytest.raises(AttackFailed):
            at.require_success(at.AttackOutcome("x", False))

    def test_outcome_serializes(self):
        d = at.run_li_attack("li_replay", seed=2).to_dict()
        assert isinstance(d["sk"], str) and d["success"]


class TestProbes:
    EXPECTED_STAGE = {"replay": "server_verify_user", "impersonate": "server_verify_user",
                      "spoof_server": "user_verify_and_respond", "stolen_card_dictionary": "card_unlock",
                      "dos_password_change": "card_unlock"}

    @pytest.mark.parametrize("kind", at.PROBES)
    def test_all_trials_fail(self, kind):
        report = at.probe_proposed_resistance(kind, trials=10, seed="unit")
        assert report.failures == report.trials == 10
        assert report.failure_stage == self.EXPECTED_STAGE[kind]

    def test_unknown_probe(self):
        with pytest.raises(ScriptError):
            at.probe_proposed_resistance("teleport")

    def test_success_raises(self, monkeypatch):
        monkeypatch.setattr(at, "_trial", lambda *a: (True, "none", "Established"))
        with pytest.raises(ProbeUnexpectedlySucceeded) as info:
            at.probe_proposed_resistance("replay", trials=3)
        assert info.value.report.failures == 0

    def test_report_json(self):
        report = at.probe_proposed_resistance("impersonate", trials=2)
        assert '"failures": 2' in report.to_json()


class TestWordlist:
    def test_plant_deterministic(self):
        a = at.wordlist("pw", 100, "target", seed=5)
        assert a == at.wordlist("pw", 100, "target", seed=5)
        assert a.count("target") == 1 and len(a) == 100

    def test_empty(self):
        assert at.wordlist("pw", 0) == []
