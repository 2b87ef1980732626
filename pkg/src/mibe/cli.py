"""``mibe`` command-line entry point.

Exit status: 0 success, 1 cryptographic failure (reject, failed validation),
2 usage error, 3 I/O or protocol failure.  Set ``MIBE_TEST_SEED`` to make
every random choice reproducible.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import random
import sys
from pathlib import Path

from mibe import bench, ceremony, hybrid, keyfile
from mibe.backend import get_backend
from mibe.errors import (
    BackendError,
    DecodeError,
    ExpiredIdentityError,
    KeyFileError,
    MibeError,
    ProtocolError,
    RemoteError,
    TransportError,
    VerificationError,
)
from mibe.keyfile import Role

log = logging.getLogger("mibe")

EXIT_OK = 0
EXIT_CRYPTO = 1
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def make_rng():
    seed = os.environ.get("MIBE_TEST_SEED")
    if seed is not None:
        return random.Random(int(seed))
    return random.SystemRandom()


def _persistent_backend(name: str):
    backend = get_backend(name)
    if backend.is_toy:
        raise UsageError("the toy backend is an algebra oracle and cannot hold real key material")
    return backend


def _emit(args, payload: dict, text: str | None = None) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, sort_keys=True))
    elif text is not None:
        print(text)


# -- subcommands ------------------------------------------------------------


def cmd_setup(args) -> int:
    backend = _persistent_backend(args.backend)
    params, secret = ceremony.pkg_setup(make_rng(), backend)
    keyfile.write(args.out_secret, keyfile.dump_pkg_secret(params, secret))
    keyfile.write(args.out_params, keyfile.dump_params(params))
    _emit(args, {"pkg_secret": args.out_secret, "params": args.out_params}, f"wrote {args.out_secret} and {args.out_params}")
    return EXIT_OK


def cmd_pkpo_init(args) -> int:
    partial, _ = keyfile.read(args.params, Role.PARAMS)
    _persistent_backend(partial.backend.name)
    if partial.complete:
        raise UsageError("parameters already carry a PKPO public key")
    params, secret = ceremony.pkpo_setup(make_rng(), partial)
    keyfile.write(args.out_secret, keyfile.dump_pkpo_secret(params, secret))
    keyfile.write(args.out_params, keyfile.dump_params(params))
    _emit(args, {"pkpo_secret": args.out_secret, "params": args.out_params}, f"wrote {args.out_secret} and {args.out_params}")
    return EXIT_OK


def _complete_params(path: str):
    params, _ = keyfile.read(path, Role.PARAMS)
    if not params.complete:
        raise UsageError(f"{path} lacks the PKPO public key; run pkpo-init first")
    return params


def cmd_user_keygen(args) -> int:
    params = _complete_params(args.params)
    user = ceremony.user_keygen(make_rng(), params, args.id)
    keyfile.write(args.out, keyfile.dump_user_keypair(params, user))
    _emit(args, {"identity": args.id, "out": args.out}, f"wrote {args.out}")
    return EXIT_OK


def cmd_ceremony(args) -> int:
    from mibe import netproto

    params, user = keyfile.read(args.user, Role.USER_KEYPAIR)
    if args.local:
        if not (args.pkg_secret and args.pkpo_secret):
            raise UsageError("--local needs --pkg-secret and --pkpo-secret")
        _, pkg = keyfile.read(args.pkg_secret, Role.PKG_SECRET)
        _, pkpo = keyfile.read(args.pkpo_secret, Role.PKPO_SECRET)
        key, _ = ceremony.run_ceremony(params, pkg, pkpo, user)
    else:
        if not (args.pkg and args.pkpo):
            raise UsageError("give --pkg and --pkpo addresses, or --local")
        key = netproto.client_run_ceremony(user, args.pkg, args.pkpo, params=params, timeout=args.timeout)
    keyfile.write(args.out, keyfile.dump_private_key(params, key))
    _emit(args, {"identity": key.identity, "out": args.out, "valid": True}, f"private key for {key.identity!r} written to {args.out}")
    return EXIT_OK


def cmd_verify_key(args) -> int:
    params, key = keyfile.read(args.key, Role.PRIVATE_KEY)
    identity = args.id or key.identity
    ok = ceremony.validate_private_key(params, identity, key)
    _emit(args, {"identity": identity, "valid": ok}, "valid" if ok else "INVALID")
    return EXIT_OK if ok else EXIT_CRYPTO


def cmd_encrypt(args) -> int:
    params = _complete_params(args.params)
    identity = args.to
    if args.expiry:
        identity = ceremony.with_expiry(identity, _dt.date.fromisoformat(args.expiry))
    body = Path(args.infile).read_bytes()
    Path(args.outfile).write_bytes(hybrid.seal(params, identity, body, make_rng()))
    _emit(args, {"recipient": identity, "bytes": len(body)}, None)
    return EXIT_OK


def cmd_decrypt(args) -> int:
    params, key = keyfile.read(args.key, Role.PRIVATE_KEY)
    plain = hybrid.open_envelope(params, key, Path(args.infile).read_bytes())
    if plain is None:
        print("ciphertext rejected", file=sys.stderr)
        return EXIT_CRYPTO
    Path(args.outfile).write_bytes(plain)
    return EXIT_OK


def cmd_recover(args) -> int:
    _, pkg = keyfile.read(args.pkg_secret, Role.PKG_SECRET)
    params, pkpo = keyfile.read(args.pkpo_secret, Role.PKPO_SECRET)
    key = ceremony.court_recover(pkg, pkpo, params, args.id)
    if not ceremony.validate_private_key(params, args.id, key):
        print("recovered key failed validation; secrets do not belong to these parameters", file=sys.stderr)
        return EXIT_CRYPTO
    keyfile.write(args.out, keyfile.dump_private_key(params, key))
    _emit(args, {"identity": args.id, "out": args.out}, f"recovered key for {args.id!r} written to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from mibe import metering

    backend = get_backend(args.backend)
    rng = make_rng()
    chosen = ["mibe", "bf"] if args.scheme == "all" else [args.scheme]
    results = {s: bench.profile_scheme(s, args.trials, backend, rng) for s in chosen}
    rows = bench.build_report(results)
    records = []
    for row in rows:
        d = row.as_dict()
        key = next(k for k, v in bench.SCHEME_LABELS.items() if v == row.scheme)
        d["mean_ms"] = round(results[key][row.phase].mean_ms, 3)
        records.append(d)
    if args.json:
        for rec in records:
            print(json.dumps(rec, sort_keys=True))
    else:
        sys.stdout.write(metering.render_table(rows))
        sys.stdout.write("\n")
        sys.stdout.write(metering.render_rows(rows))
    if args.report_dir:
        from mibe import plotting

        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "cost_profile.tsv").write_text(metering.render_rows(rows))
        (out / "cost_profile.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
        plotting.plot_profile(rows, out / "cost_profile.png")
    mismatch = any(r.status == "MISMATCH" for r in rows)
    return EXIT_CRYPTO if mismatch else EXIT_OK


def cmd_game(args) -> int:
    from mibe import games

    catalog = games.builtin_adversaries()
    if args.adversary not in catalog:
        raise UsageError(f"unknown adversary {args.adversary!r}; choose from {', '.join(sorted(catalog))}")
    outcome = games.run_game(
        args.scheme,
        games.AdversaryRules.for_type(args.type),
        catalog[args.adversary],
        args.trials,
        args.seed,
        get_backend(args.backend),
    )
    print(outcome.to_json())
    return EXIT_OK


def _serve(server, args) -> int:
    host, port = server.address
    print(f"listening on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _transcript_log(args, params):
    if not args.transcript:
        return None
    return ceremony.TranscriptLog(params.backend, open(args.transcript, "a", encoding="utf-8"))


def cmd_serve_pkg(args) -> int:
    from mibe import netproto

    _, secret = keyfile.read(args.secret, Role.PKG_SECRET)
    params = _complete_params(args.params)
    if args.allow_any:
        vet = ceremony.accept_all
    else:
        allowed = list(args.allow or [])
        if args.allowlist:
            allowed += [ln.strip() for ln in Path(args.allowlist).read_text().splitlines() if ln.strip()]
        if not allowed:
            raise UsageError("configure --allow/--allowlist, or pass --allow-any")
        vet = ceremony.allowlist(allowed)
    server = netproto.pkg_serve(secret, params, vet, (args.host, args.port), _transcript_log(args, params))
    return _serve(server, args)


def cmd_serve_pkpo(args) -> int:
    from mibe import netproto

    params, secret = keyfile.read(args.secret, Role.PKPO_SECRET)
    server = netproto.pkpo_serve(secret, params, (args.host, args.port), _transcript_log(args, params))
    return _serve(server, args)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mibe", description="Escrow-split identity-based encryption")
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        return sp

    sp = add("setup", cmd_setup, "PKG: create the master key and partial parameters")
    sp.add_argument("--backend", default="production")
    sp.add_argument("--out-secret", required=True)
    sp.add_argument("--out-params", required=True)

    sp = add("pkpo-init", cmd_pkpo_init, "PKPO: create its key and complete the parameters")
    sp.add_argument("--params", required=True)
    sp.add_argument("--out-secret", required=True)
    sp.add_argument("--out-params", required=True)

    sp = add("user-keygen", cmd_user_keygen, "create a user's blinding keypair")
    sp.add_argument("--params", required=True)
    sp.add_argument("--id", required=True)
    sp.add_argument("--out", required=True)

    sp = add("ceremony", cmd_ceremony, "obtain a private key from both authorities")
    sp.add_argument("--user", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--pkg")
    sp.add_argument("--pkpo")
    sp.add_argument("--local", action="store_true")
    sp.add_argument("--pkg-secret")
    sp.add_argument("--pkpo-secret")
    sp.add_argument("--timeout", type=float, default=10.0)

    sp = add("verify-key", cmd_verify_key, "check a private key against the parameters")
    sp.add_argument("--key", required=True)
    sp.add_argument("--id")

    sp = add("encrypt", cmd_encrypt, "encrypt a file to an identity")
    sp.add_argument("--params", required=True)
    sp.add_argument("--to", required=True)
    sp.add_argument("--expiry", help="YYYY-MM-DD; appended to the identity")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", dest="outfile", required=True)

    sp = add("decrypt", cmd_decrypt, "decrypt a file with a private key")
    sp.add_argument("--key", required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", dest="outfile", required=True)

    sp = add("recover", cmd_recover, "court-ordered key recovery from both authority secrets")
    sp.add_argument("--pkg-secret", required=True)
    sp.add_argument("--pkpo-secret", required=True)
    sp.add_argument("--id", required=True)
    sp.add_argument("--out", required=True)

    sp = add("bench", cmd_bench, "operation-count profile against the published cost table")
    sp.add_argument("--scheme", choices=("mibe", "bf", "all"), default="all")
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--backend", default="production")
    sp.add_argument("--report-dir", help="write cost_profile.{tsv,jsonl,png} here")

    sp = add("game", cmd_game, "estimate a built-in adversary's advantage")
    sp.add_argument("--adversary", required=True)
    sp.add_argument("--type", choices=("I", "II"), required=True)
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scheme", choices=("basic", "full"), default="full")
    sp.add_argument("--backend", default="production")

    for name, func, default_port in (
        ("serve-pkg", cmd_serve_pkg, 7401),
        ("serve-pkpo", cmd_serve_pkpo, 7402),
    ):
        sp = add(name, func, f"run the {name[6:].upper()} daemon")
        sp.add_argument("--secret", required=True)
        sp.add_argument("--host", default="127.0.0.1")
        sp.add_argument("--port", type=int, default=default_port)
        sp.add_argument("--transcript", help="append ceremony transcripts to this file")
        if name == "serve-pkg":
            sp.add_argument("--params", required=True)
            sp.add_argument("--allow", action="append", help="identity to accept (repeatable)")
            sp.add_argument("--allowlist", help="file with one accepted identity per line")
            sp.add_argument("--allow-any", action="store_true")
    return p


def dispatch(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VerificationError, ExpiredIdentityError) as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_CRYPTO
    except RemoteError as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_CRYPTO if exc.code == 2 else EXIT_IO
    except (KeyFileError, DecodeError, ProtocolError, TransportError, OSError) as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_IO
    except (MibeError, ValueError) as exc:
        print(f"mibe: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
