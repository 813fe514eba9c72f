"""Hash-only baseline: a one-octet byte-sum fixture plus sha256 round trips."""

import random

import pytest
from hypothesis import given, strategies as st

from dynauth import li
from dynauth.errors import LocalCheckFailed, M1Invalid, M3Invalid, M5Invalid, StateError
from dynauth.wire import LiChallenge, LiConfirm


def toy(*fields):
    return sum(sum(f) for f in fields) % 256


class ToyOracle:
    ID, PW, b, x, y = b"u", b"p", 0x01, b"x", b"y"
    A = toy(bytes([b ^ PW[0]]))
    hy = toy(y)
    hxy = toy(x, y)
    B = toy(ID, x)
    C = toy(ID, bytes([hy]), bytes([A]))
    D = toy(bytes([B]), bytes([hxy]))
    E = B ^ hxy


TOY_FROZEN = dict(A=113, hy=121, hxy=241, B=237, C=95, D=222, E=28)


@pytest.fixture
def toy_world():
    h = li.LiHash("toy")
    rc = li.LiRegistrationCenter(h, b"x", b"y")
    return h, rc, li.li_register(rc, b"u", b"p", b"\x01")


@pytest.fixture
def sha_world():
    h = li.LiHash()
    rc = li.LiRegistrationCenter(h, b"master-x", b"master-y")
    card = li.li_register(rc, "alice", "secret", h.nonce(random.Random(1)))
    return h, rc, card


class TestToyFixture:
    @pytest.mark.parametrize("name", sorted(TOY_FROZEN))
    def test_oracle_frozen(self, name):
        assert getattr(ToyOracle, name) == TOY_FROZEN[name]

    def test_registration(self, toy_world):
        h, rc, card = toy_world
        assert rc.hy == bytes([121]) and rc.hxy == bytes([241])
        assert (card.C, card.D, card.E) == (bytes([95]), bytes([222]), bytes([28]))
        assert li.li_local_check(h, card, b"u", b"p") == bytes([113])

    def test_mask_involution(self, toy_world):
        _, rc, card = toy_world
        assert li.xor(card.E, rc.hxy) == bytes([237])

    def test_toy_login_runs(self, toy_world):
        h, rc, card = toy_world
        server = li.LiServer(h, rc.server_state(b"S"), random.Random(3))
        user, sess = li.run_li_login(h, server, card, b"u", b"p", random.Random(4))
        assert user.sk == sess.sk


class TestLogin:
    @pytest.mark.parametrize("seed", range(100))
    def test_honest_agreement(self, sha_world, seed):
        h, rc, card = sha_world
        server = li.LiServer(h, rc.server_state("S1"), random.Random(seed))
        user, sess = li.run_li_login(h, server, card, "alice", "secret", random.Random(1000 + seed))
        assert user.state == sess.state == "Established"
        assert user.sk == sess.sk

    def test_server_recovers_card_values(self, sha_world):
        h, rc, card = sha_world
        st_ = rc.server_state("S1")
        user = li.LiUserSession(h, card, "alice", "secret", "S1", random.Random(0))
        msg = user.login()
        sec = li.recover_login_secrets(h, st_.SID, st_.h_sid_hy, st_.hxy, msg)
        assert (sec.N_i, sec.E, sec.D, sec.A) == (user.N_i, card.E, card.D, user.A)
        assert sec.B == h(b"alice", rc.x)

    def test_wrong_password_local(self, sha_world):
        h, _, card = sha_world
        user = li.LiUserSession(h, card, "alice", "guess", "S1")
        with pytest.raises(LocalCheckFailed):
            user.login()
        assert user.state == "Failed"

    def test_tampered_m1(self, sha_world):
        h, rc, card = sha_world
        server = li.LiServer(h, rc.server_state("S1"))
        msg = li.LiUserSession(h, card, "alice", "secret", "S1").login()
        from dataclasses import replace
        with pytest.raises(M1Invalid):
            server.handle_login(replace(msg, M1=li.xor(msg.M1, b"\x01" + bytes(31))))

    def test_tampered_m3(self, sha_world):
        h, rc, card = sha_world
        server = li.LiServer(h, rc.server_state("S1"))
        user = li.LiUserSession(h, card, "alice", "secret", "S1")
        ch, _ = server.handle_login(user.login())
        with pytest.raises(M3Invalid):
            user.on_challenge(LiChallenge(bytes(32), ch.M4))

    def test_tampered_m5(self, sha_world):
        h, rc, card = sha_world
        server = li.LiServer(h, rc.server_state("S1"))
        user = li.LiUserSession(h, card, "alice", "secret", "S1")
        ch, sess = server.handle_login(user.login())
        user.on_challenge(ch)
        with pytest.raises(M5Invalid):
            server.handle_confirm(sess, LiConfirm(bytes(32)))
        with pytest.raises(StateError):
            server.handle_confirm(sess, LiConfirm(bytes(32)))

    def test_all_servers_share_constants(self, sha_world):
        _, rc, _ = sha_world
        assert rc.server_state("S1").hxy == rc.server_state("S2").hxy


class TestPasswordChange:
    def test_update(self, sha_world):
        h, rc, card = sha_world
        new = li.li_password_change(h, card, "alice", "secret", "fresh", b"\x07" * 32)
        assert (new.D, new.E) == (card.D, card.E) and new.C != card.C
        with pytest.raises(LocalCheckFailed):
            li.li_local_check(h, new, "alice", "secret")
        server = li.LiServer(h, rc.server_state("S1"))
        user, sess = li.run_li_login(h, server, new, "alice", "fresh")
        assert user.sk == sess.sk

    def test_requires_old_password(self, sha_world):
        h, _, card = sha_world
        with pytest.raises(LocalCheckFailed):
            li.li_password_change(h, card, "alice", "nope", "fresh", bytes(32))


class TestPrimitives:
    @given(st.binary(min_size=8, max_size=8), st.binary(min_size=8, max_size=8))
    def test_xor_involution(self, a, b):
        assert li.xor(li.xor(a, b), b) == a

    def test_xor_length_mismatch(self):
        with pytest.raises(ValueError):
            li.xor(b"ab", b"a")

    def test_pad(self):
        h = li.LiHash()
        assert h.pad("pw") == b"pw" + bytes(30)
        with pytest.raises(ValueError):
            h.pad("x" * 33)

    def test_framed(self):
        h = li.LiHash()
        assert h(b"ab", b"c") != h(b"a", b"bc")
