import json

import pytest

from dynauth.algebra import make_suite
from dynauth.errors import Deadlock, ScriptError, SecureLinkViolation, SelectorEmpty
from dynauth.simnet import (AdversaryActor, Network, RcActor, Rule, Scenario, ServerActor, UserActor,
                            make_mutation, run_scenario)

CAST = [{"role": "rc", "id": "rc"},
        {"role": "user", "id": "alice", "password": "pw"},
        {"role": "server", "id": "S1"},
        {"role": "adversary", "id": "eve"}]
SETUP = [{"at": 0, "do": "register_user", "user": "alice"},
         {"at": 0, "do": "register_server", "server": "S1"}]
LOGIN = {"at": 10, "do": "login", "user": "alice", "server": "S1"}
COPY_LOGIN = {"adversary": "eve", "action": "copy", "match": {"from": "alice", "type": "LoginRequest"}}


def scenario(script=(), rules=(), **kw):
    return Scenario(seed=kw.pop("seed", 7), cast=kw.pop("cast", CAST), rules=list(rules),
                    script=SETUP + list(script), **kw)


class TestHonest:
    def test_three_frames_and_agreement(self):
        res = run_scenario(scenario([LOGIN]))
        assert res.summary("alice", "S1") == {"user": "Established", "server": "Established", "keys_equal": True}
        public = [e for e in res.transcript if e.payload]
        assert [e.type for e in public] == ["LoginRequest", "ServerChallenge", "UserResponse"]

    def test_registration_frames_hidden(self):
        res = run_scenario(scenario([LOGIN]))
        reg = [e for e in res.transcript if e.type in ("UserRegRequest", "CardIssue",
                                                       "ServerRegRequest", "ServerKeyIssue")]
        assert len(reg) == 4 and all(e.payload == b"" for e in reg)

    def test_deterministic_transcript(self):
        a = run_scenario(scenario([LOGIN], [COPY_LOGIN])).transcript.dumps()
        b = run_scenario(scenario([LOGIN], [COPY_LOGIN])).transcript.dumps()
        c = run_scenario(scenario([LOGIN], [COPY_LOGIN], seed=8)).transcript.dumps()
        assert a == b and a != c

    def test_frame_conservation(self):
        res = run_scenario(scenario([LOGIN], [COPY_LOGIN]))
        st = res.net.stats
        assert st["sent"] == st["delivered"] + st["dropped"] + st["replaced"]
        assert st["copied"] == 1

    def test_two_logins(self):
        res = run_scenario(scenario([LOGIN, dict(LOGIN, at=20)]))
        assert res.outcomes["alice->S1#1"] == "Established"
        assert res.keys_equal == {"alice->S1#0": True, "alice->S1#1": True}

    def test_wrong_password(self):
        res = run_scenario(scenario([dict(LOGIN, password="nope")]))
        assert res.outcomes == {"alice->S1#0": "AuthLocalFailed"}
        assert not [e for e in res.transcript if e.payload]

    def test_password_change_then_login(self):
        script = [{"at": 10, "do": "change_password", "user": "alice", "new_password": "pw2"},
                  dict(LOGIN, at=30)]
        res = run_scenario(scenario(script))
        assert res.outcomes["alice->rc#0:pwchange"] == "Done"
        assert res.outcomes["rc<-alice#0:pwchange"] == "Done"
        assert res.outcomes["alice->S1#0"] == "Established"


class TestAdversary:
    def test_secure_link_refused(self):
        net = Network(make_suite(), 0)
        net.add(RcActor())
        net.add(AdversaryActor("eve"))
        with pytest.raises(SecureLinkViolation):
            net.adversary_tap(Rule("eve", "copy", type="CardIssue"))
        with pytest.raises(SecureLinkViolation):
            net.adversary_tap(Rule("eve", "copy", channel="registration"))
        net.set_link("alice", "S1", "secure")
        with pytest.raises(SecureLinkViolation):
            net.adversary_tap(Rule("eve", "copy", src="alice", dst="S1"))

    def test_secure_link_hides_login(self):
        res = run_scenario(scenario([LOGIN], links=[{"a": "alice", "b": "S1", "mode": "secure"}]))
        assert res.outcomes["alice->S1#0"] == "Established"
        assert all(e.payload == b"" for e in res.transcript)

    def test_copy_is_byte_identical(self):
        res = run_scenario(scenario([LOGIN], [COPY_LOGIN]))
        captured = res.net["eve"].captured
        sent = res.transcript.select(type="LoginRequest")
        assert len(captured) == 1 and captured[0].payload == sent[0].payload

    def test_replace_auth_aborts_user(self):
        rule = {"adversary": "eve", "action": "replace", "match": {"type": "ServerChallenge"},
                "mutate": {"field": "auth", "op": "flipbit"}}
        res = run_scenario(scenario([LOGIN], [rule], on_stall="record"))
        assert res.outcomes["alice->S1#0"] == "ServerAuthFailed"
        assert res.outcomes["S1<-alice#0"] == "AwaitResponse"

    @pytest.mark.parametrize("op", ["flipbit", "random"])
    def test_replace_b_rejected(self, op):
        rule = {"adversary": "eve", "action": "replace", "match": {"type": "UserResponse"},
                "mutate": {"field": "B", "op": op}}
        res = run_scenario(scenario([LOGIN], [rule]))
        assert res.outcomes["S1<-alice#0"] == "UserAuthFailed"
        assert res.keys_equal["alice->S1#0"] is False
        assert res.net.stats["replaced"] == 1

    def test_drop_stalls(self):
        rule = {"adversary": "eve", "action": "drop", "match": {"type": "ServerChallenge"}}
        with pytest.raises(Deadlock):
            run_scenario(scenario([LOGIN], [rule]))
        res = run_scenario(scenario([LOGIN], [rule], on_stall="record"))
        assert res.outcomes["alice->S1#0"] == "AwaitChallenge"
        assert res.net.stats["dropped"] == 1

    def test_proposed_replay_stalls(self):
        replay = {"at": 50, "do": "replay", "adversary": "eve", "to": "S1", "select": {"type": "LoginRequest"}}
        res = run_scenario(scenario([LOGIN, replay], [COPY_LOGIN], on_stall="record"))
        assert res.outcomes["S1<-eve#0"] == "AwaitResponse"
        assert res.net["S1"].server is not None
        assert res.outcomes["eve->S1#0"] == "Done"

    def test_proposed_full_replay_rejected(self):
        rules = [COPY_LOGIN, {"adversary": "eve", "action": "copy", "match": {"type": "UserResponse"}}]
        replay = {"at": 50, "do": "replay", "adversary": "eve", "to": "S1",
                  "select": {"type": "LoginRequest"}, "then": "replay_response"}
        res = run_scenario(scenario([LOGIN, replay], rules))
        assert res.outcomes["S1<-eve#0"] == "ReplayDetected"

    def test_selector_empty(self):
        replay = {"at": 50, "do": "replay", "adversary": "eve", "to": "S1", "select": {"type": "LoginRequest"}}
        with pytest.raises(SelectorEmpty):
            run_scenario(scenario([LOGIN, replay]))

    def test_li_replay_completes(self):
        cast = [{"role": "rc", "id": "rc"}, {"role": "user", "id": "alice", "password": "pw"},
                {"role": "server", "id": "S1"}, {"role": "adversary", "id": "eve", "knows": ["hy", "hxy"]}]
        rule = {"adversary": "eve", "action": "copy", "match": {"type": "LiLogin"}}
        script = [LOGIN, {"at": 50, "do": "attack", "name": "li_replay", "adversary": "eve", "to": "S1"}]
        res = run_scenario(scenario(script, [rule], cast=cast, scheme="li"))
        assert res.outcomes["S1<-eve#0"] == "Established"
        adv = next(r for r in res.net.sessions if r.label == "eve->S1#0")
        srv = next(r for r in res.net.sessions if r.label == "S1<-eve#0")
        assert adv.sk == srv.sk is not None


class TestScenarioFiles:
    def test_load_and_expect(self, tmp_path):
        d = {"seed": 3, "cast": CAST, "script": SETUP + [LOGIN],
             "expect": {"alice->S1#0": "Established", "keys_equal": {"alice->S1#0": True}}}
        path = tmp_path / "s.json"
        path.write_text(json.dumps(d))
        assert run_scenario(Scenario.load(path)).unmet == []

    def test_unmet_reported(self):
        res = run_scenario(scenario([LOGIN], expect={"S1<-alice#0": "Failed"}))
        assert res.unmet == ["S1<-alice#0: want Failed, got Established"]

    def test_unknown_keys(self):
        with pytest.raises(ScriptError):
            Scenario.from_dict({"seed": 1, "bogus": True})

    def test_unknown_verb(self):
        with pytest.raises(ScriptError):
            run_scenario(scenario([{"at": 10, "do": "dance"}]))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ScriptError):
            Scenario.load(path)

    def test_shipped_scenarios(self):
        from pathlib import Path
        root = Path(__file__).resolve().parent.parent / "scenarios"
        files = sorted(root.glob("*.json"))
        assert files
        for path in files:
            assert run_scenario(Scenario.load(path)).unmet == [], path.name


class TestMechanics:
    def test_mutation_bit_position(self):
        net = Network(make_suite("tf1"), 0)
        from dynauth.wire import UserResponse
        s = net.suite
        data = net.codec.encode(UserResponse(s.point(4), s.point(8)))
        flipped = make_mutation(net, {"field": "M", "op": "flipbit", "bit": 1}, None)(data)
        assert flipped == bytes([0x03, 6, 8])

    def test_duplicate_principal(self):
        net = Network(make_suite(), 0)
        net.add(UserActor("alice", "alice", "pw"))
        with pytest.raises(ScriptError):
            net.add(ServerActor("alice"))

    def test_rule_validation(self):
        with pytest.raises(ScriptError):
            Rule("eve", "explode")
        with pytest.raises(ScriptError):
            Rule("eve", "replace")
