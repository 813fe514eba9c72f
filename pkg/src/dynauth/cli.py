"""Command-line driver: key lifecycle, logins, scenarios, attacks, probes, bench.

Every failure exits with the ``exit_code`` of the raised exception (see
``dynauth.errors``); argument errors exit 2 and unmet scenario
expectations exit 3.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import proposed as pr
from .algebra import make_suite, seeded_rng
from .attacks import LI_ATTACKS, PROBES, probe_proposed_resistance, run_li_attack
from .bench import run_bench
from .errors import AttackFailed, DuplicateEntry, DynAuthError, ScriptError
from .simnet import AdversaryActor, Network, RcActor, Rule, Scenario, ServerActor, UserActor, make_mutation, run_scenario
from .store import KeyStore

STORE_ENV = "DYNAUTH_STORE"
EXPECTATIONS_UNMET = 3

# --tamper names -> (message type, field)
TAMPER_FIELDS = {
    "DID_i": ("LoginRequest", "DID"),
    "R_i": ("LoginRequest", "R"),
    "W_j": ("ServerChallenge", "W"),
    "R_j": ("ServerChallenge", "R_j"),
    "Auth_ji": ("ServerChallenge", "auth"),
    "M_i": ("UserResponse", "M"),
    "B_i": ("UserResponse", "B"),
}


def _rng(args, *labels):
    return None if args.seed is None else seeded_rng(args.seed, *labels)


def _store(args) -> KeyStore:
    return KeyStore(args.store or os.environ.get(STORE_ENV) or "dynauth-store")


def _fingerprint(sk) -> str:
    return hashlib.sha256(str(sk).encode()).hexdigest()[:16]


def cmd_init_rc(args) -> int:
    store = _store(args)
    suite = make_suite(args.backend)
    rc = pr.system_init(suite, seed=None if args.seed is None else f"{args.seed}/rc")
    store.save_rc(rc, overwrite=args.force)
    print(f"backend {suite.descriptor}")
    print(f"pub_RC  {rc.pub_rc.data.hex()}")
    return 0


def cmd_register_user(args) -> int:
    store = _store(args)
    rc = store.load_rc()
    if store.exists("card", args.id) and not args.force:
        raise DuplicateEntry(f"card for {args.id!r} already exists")
    req, b = pr.user_register_begin(rc.params, args.id, args.password, _rng(args, "user", args.id))
    card = pr.insert_card(rc.issue_card(req), b)
    pr.card_unlock(rc.params, card, args.id, args.password)
    path = store.save_card(args.id, card, rc.suite, overwrite=args.force)
    print(f"card {path}")
    return 0


def cmd_register_server(args) -> int:
    store = _store(args)
    if store.exists("server", args.sid):
        raise DuplicateEntry(f"server {args.sid!r} already registered")
    rc = store.load_rc(rng=_rng(args, "rc-issue", args.sid))
    enrollment = pr.ServerEnrollment(rc.params, args.sid, _rng(args, "server", args.sid))
    identity = enrollment.finalize(rc.issue_server_key(enrollment.request))
    store.save_server(identity, rc.suite)
    store.update_rc(rc)
    print(f"server {args.sid}")
    print(f"W_j    {identity.W.data.hex()}")
    print(f"pub_j  {identity.pub.data.hex()}")
    return 0


def _login_network(args, store: KeyStore):
    params = store.load_params()
    net = Network(params.suite, args.seed if args.seed is not None else os.urandom(16).hex())
    net.params = params
    user = net.add(UserActor(args.user, args.user, args.password))
    user.card = store.load_card(args.user, params.suite)
    server = net.add(ServerActor(args.server))
    server.server = pr.Server(params, store.load_server(args.server, params.suite), True, server.rng)
    return net, user


def cmd_login(args) -> int:
    store = _store(args)
    net, user = _login_network(args, store)
    if args.tamper:
        net.add(AdversaryActor("mitm"))
        mtype, fname = TAMPER_FIELDS[args.tamper]
        net.adversary_tap(Rule("mitm", "replace", type=mtype,
                               mutate=make_mutation(net, {"field": fname, "op": "flipbit"}, None)))
    net.at(0, lambda: user.login(args.server, precompute=args.precompute))
    net.run()
    if args.transcript:
        net.transcript.save(args.transcript)
    for label in (f"{args.user}->{args.server}#0", f"{args.server}<-{args.user}#0"):
        rec = next((r for r in net.sessions if r.label == label), None)
        if rec is not None and rec.error is not None:
            raise rec.error
    keys = net.keys_equal()
    if not keys.get(f"{args.user}->{args.server}#0"):
        raise ScriptError("session did not complete")
    rec = next(r for r in net.sessions if r.label == f"{args.user}->{args.server}#0")
    print(f"established {args.user} <-> {args.server}; SK fingerprint {_fingerprint(rec.sk)}")
    print(f"messages {len(net.transcript)}")
    return 0


def cmd_change_password(args) -> int:
    store = _store(args)
    rc = store.load_rc()
    suite = rc.suite
    net = Network(suite, args.seed if args.seed is not None else os.urandom(16).hex())
    net.add(RcActor("rc", rc))
    user = net.add(UserActor(args.user, args.user, args.password))
    user.card = old = store.load_card(args.user, suite)
    net.at(0, lambda: user.change_password(args.new_password))
    net.run()
    rec = next(r for r in net.sessions if r.principal == args.user)
    if rec.error is not None:
        raise rec.error
    if user.card == old:
        raise ScriptError("password change did not complete")
    store.save_card(args.user, user.card, suite, overwrite=True)
    print(f"card {store.card_path(args.user)} updated")
    return 0


def cmd_run_scenario(args) -> int:
    scn = Scenario.load(args.path)
    if args.seed is not None:
        scn.seed = args.seed
    res = run_scenario(scn)
    if args.transcript:
        res.transcript.save(args.transcript)
    print(json.dumps({"outcomes": res.outcomes, "keys_equal": res.keys_equal, "unmet": res.unmet},
                     indent=2, sort_keys=True))
    return EXPECTATIONS_UNMET if res.unmet else 0


def _write_report(path, record: dict) -> None:
    text = json.dumps(record, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    print(text)


def cmd_attack(args) -> int:
    outcome = run_li_attack(args.name, seed=args.seed if args.seed is not None else 0)
    _write_report(args.report, outcome.to_dict())
    if not outcome.success:
        raise AttackFailed(f"{args.name} did not succeed")
    return 0


def cmd_probe(args) -> int:
    try:
        report = probe_proposed_resistance(args.name, args.trials,
                                           args.seed if args.seed is not None else 0, args.backend)
    except DynAuthError as exc:
        if getattr(exc, "report", None) is not None:
            _write_report(args.report, exc.report.to_dict())
        raise
    _write_report(args.report, report.to_dict())
    return 0


def cmd_bench(args) -> int:
    report = run_bench(make_suite(args.backend), args.seed if args.seed is not None else "bench")
    print(report.to_json() if args.json else report.render())
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", default=None, help="seed for all randomness (default: system RNG)")
    common.add_argument("--backend", choices=["transparent", "production"], default="transparent")
    common.add_argument("--store", default=None, help=f"key store directory (env {STORE_ENV})")

    p = argparse.ArgumentParser(prog="dynauth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("init-rc", parents=[common], help="create RC master key and public parameters")
    s.add_argument("--force", action="store_true", help="overwrite an existing store")
    s.set_defaults(func=cmd_init_rc)

    s = sub.add_parser("register-user", parents=[common], help="issue a smart card")
    s.add_argument("--id", required=True)
    s.add_argument("--password", required=True)
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_register_user)

    s = sub.add_parser("register-server", parents=[common], help="issue a self-certified server key")
    s.add_argument("--sid", required=True)
    s.set_defaults(func=cmd_register_server)

    s = sub.add_parser("login", parents=[common], help="run one login between stored principals")
    s.add_argument("--user", required=True)
    s.add_argument("--password", required=True)
    s.add_argument("--server", required=True)
    s.add_argument("--transcript", help="write the wire transcript (JSON lines) here")
    s.add_argument("--tamper", choices=sorted(TAMPER_FIELDS), help="flip one bit of this field in transit")
    s.add_argument("--precompute", action="store_true", help="prepare r_i·P before the session")
    s.set_defaults(func=cmd_login)

    s = sub.add_parser("change-password", parents=[common], help="run the password update with the RC")
    s.add_argument("--user", required=True)
    s.add_argument("--password", required=True)
    s.add_argument("--new-password", required=True)
    s.set_defaults(func=cmd_change_password)

    s = sub.add_parser("run-scenario", parents=[common], help="execute a scenario file")
    s.add_argument("path")
    s.add_argument("--transcript")
    s.set_defaults(func=cmd_run_scenario)

    s = sub.add_parser("attack", parents=[common], help="run an attack on the hash-only baseline")
    s.add_argument("name", choices=LI_ATTACKS)
    s.add_argument("--report")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("probe", parents=[common], help="run a resistance probe on the pairing scheme")
    s.add_argument("name", choices=PROBES)
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--report")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("bench", parents=[common], help="trace operation counts per cost phase")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DynAuthError as exc:
        stage = getattr(exc, "stage", None)
        where = f" [{stage}]" if stage else ""
        print(f"error{where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
