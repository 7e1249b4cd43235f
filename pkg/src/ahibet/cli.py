"""Command-line front end: parameter generation, key lifecycle,
encryption, decryption, and batch trace filtering.

Exit codes: 0 success, 1 cryptographic rejection, 2 usage/IO/format
errors (including parameter-digest mismatches between input files).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .encoding import frame_path
from .errors import AhibetError
from .sampling import RandomSource
from .scheme import (
    decrypt_detailed,
    derive,
    derive_params,
    encrypt,
    extract,
    setup,
    tk_ver,
    tsk_gen,
)
from .serialize import (
    FormatError,
    load_ct,
    load_identity,
    load_mpk,
    load_msk,
    load_params,
    load_sk,
    load_tsk,
    params_digest,
    read_envelope,
    save_ct,
    save_mpk,
    save_msk,
    save_params,
    save_sk,
    save_tsk,
)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2


class CliError(Exception):
    """Fatal usage/IO error carrying the message for stderr."""


def _rng_from_seed(seed_hex):
    if seed_hex is None:
        return RandomSource()
    try:
        seed = bytes.fromhex(seed_hex)
    except ValueError as exc:
        raise CliError(f"--seed must be hexadecimal: {exc}") from exc
    if len(seed) != RandomSource.SEED_BYTES:
        raise CliError("--seed must be exactly 64 hex characters (32 bytes)")
    return RandomSource(seed)


def _bits_from_bytes(data: bytes, lam: int) -> np.ndarray:
    """Left-justify message bytes into lam bits, zero padded."""
    capacity = lam // 8
    if len(data) > capacity:
        raise CliError(f"message is {len(data)} bytes; at most {capacity} "
                       f"fit into {lam} bits")
    padded = data + b"\x00" * (-(-lam // 8) - len(data))
    bits = np.unpackbits(np.frombuffer(padded, dtype=np.uint8))
    return bits[:lam].astype(np.int64)


def _bytes_from_bits(bits: np.ndarray, msg_len: int) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    padded = np.zeros(-(-bits.shape[0] // 8) * 8, dtype=np.uint8)
    padded[:bits.shape[0]] = bits
    return np.packbits(padded).tobytes()[:msg_len]


def _load_mpk_checked(path):
    mpk = load_mpk(path)
    return mpk, params_digest(mpk.params)


# ---------------------------------------------------------------------------
# subcommands

def cmd_params(args) -> int:
    p = derive_params(args.lam, args.depth, args.profile)
    save_params(args.output, p)
    return EXIT_OK


def cmd_setup(args) -> int:
    p = load_params(args.params)
    rng = _rng_from_seed(args.seed)
    mpk, msk = setup(p, rng)
    save_mpk(args.output, mpk)
    save_msk(args.msk, p, msk)
    return EXIT_OK


def cmd_extract(args) -> int:
    mpk, digest = _load_mpk_checked(args.mpk)
    msk = load_msk(args.msk, digest)
    ident = load_identity(args.identity)
    sk = extract(mpk, msk, ident, _rng_from_seed(args.seed))
    save_sk(args.output, mpk.params, sk)
    return EXIT_OK


def cmd_derive(args) -> int:
    mpk, digest = _load_mpk_checked(args.mpk)
    parent = load_sk(args.sk, digest)
    child = load_identity(args.identity)
    sk = derive(mpk, parent, child, _rng_from_seed(args.seed))
    save_sk(args.output, mpk.params, sk)
    return EXIT_OK


def cmd_tskgen(args) -> int:
    mpk, digest = _load_mpk_checked(args.mpk)
    msk = load_msk(args.msk, digest)
    ident = load_identity(args.identity)
    if args.registry is not None:
        _registry_note(args.registry, ident)
    tsk = tsk_gen(mpk, msk, ident, _rng_from_seed(args.seed))
    save_tsk(args.output, mpk.params, tsk)
    return EXIT_OK


def _registry_note(path, ident) -> None:
    """Advisory duplicate check: each identity should receive exactly one
    tracing key; warn (do not fail) when one was already issued."""
    tag = frame_path(ident).hex()
    try:
        with open(path, "r", encoding="ascii") as fh:
            issued = json.load(fh)
    except FileNotFoundError:
        issued = []
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read registry {path}: {exc}") from exc
    if not isinstance(issued, list):
        raise CliError(f"registry {path} must hold a JSON list")
    if tag in issued:
        print(f"warning: a tracing key for this identity was already "
              f"issued per {path}", file=sys.stderr)
    else:
        issued.append(tag)
        with open(path, "w", encoding="ascii") as fh:
            json.dump(issued, fh)
            fh.write("\n")


def cmd_encrypt(args) -> int:
    mpk, _ = _load_mpk_checked(args.mpk)
    ident = load_identity(args.identity)
    try:
        with open(args.message, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read message: {exc}") from exc
    bits = _bits_from_bytes(data, mpk.params.lam)
    ct = encrypt(mpk, ident, bits, _rng_from_seed(args.seed))
    save_ct(args.output, mpk.params, ct, len(data))
    return EXIT_OK


def cmd_decrypt(args) -> int:
    mpk, digest = _load_mpk_checked(args.mpk)
    sk = load_sk(args.sk, digest)
    ct, msg_len = load_ct(args.ct, digest)
    res = decrypt_detailed(mpk, ct, sk)
    if not res.ok:
        print("REJECT")
        return EXIT_REJECT
    data = _bytes_from_bits(res.plaintext, msg_len)
    if args.output is not None:
        with open(args.output, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    return EXIT_OK


def cmd_tkver(args) -> int:
    mpk, digest = _load_mpk_checked(args.mpk)
    tsk = load_tsk(args.tsk, digest)
    ct, _ = load_ct(args.ct, digest)
    if tk_ver(mpk, tsk, ct):
        print("MATCH")
        return EXIT_OK
    print("NO-MATCH")
    return EXIT_REJECT


def cmd_trace(args) -> int:
    tsk_env = read_envelope(args.tsk, "tsk")
    digest = tsk_env["params_digest"]
    tsk = load_tsk(args.tsk)
    had_error = False
    for path in args.ciphertexts:
        try:
            ct, _ = load_ct(path, digest)
            verdict = "MATCH" if tk_ver(None, tsk, ct) else "NO-MATCH"
        except (FormatError, AhibetError, OSError):
            verdict = "ERROR"
            had_error = True
        print(f"{path}\t{verdict}")
    return EXIT_USAGE if had_error else EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", metavar="HEX64", default=None,
                        help="32-byte hex seed for deterministic output")

    parser = argparse.ArgumentParser(
        prog="ahibet",
        description="Anonymous hierarchical identity-based encryption "
                    "with traceable identities")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", parents=[common],
                       help="derive and write a parameter set")
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--profile", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("setup", parents=[common],
                       help="generate master keys")
    p.add_argument("--params", required=True)
    p.add_argument("--msk", required=True, help="master secret key output")
    p.add_argument("-o", "--output", required=True,
                   help="master public key output")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("extract", parents=[common],
                       help="issue a depth-1 secret key")
    p.add_argument("--mpk", required=True)
    p.add_argument("--msk", required=True)
    p.add_argument("--id", dest="identity", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("derive", parents=[common],
                       help="delegate a key one level down")
    p.add_argument("--mpk", required=True)
    p.add_argument("--sk", required=True, help="parent secret key")
    p.add_argument("--id", dest="identity", required=True,
                   help="child identity file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("tskgen", parents=[common],
                       help="issue a tracing key")
    p.add_argument("--mpk", required=True)
    p.add_argument("--msk", required=True)
    p.add_argument("--id", dest="identity", required=True)
    p.add_argument("--registry", default=None,
                   help="advisory one-key-per-identity registry file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_tskgen)

    p = sub.add_parser("encrypt", parents=[common],
                       help="encrypt a message file to an identity")
    p.add_argument("--mpk", required=True)
    p.add_argument("--id", dest="identity", required=True)
    p.add_argument("--in", dest="message", required=True,
                   help="plaintext file (at most lambda/8 bytes)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", parents=[common],
                       help="decrypt a ciphertext")
    p.add_argument("--mpk", required=True)
    p.add_argument("--sk", required=True)
    p.add_argument("--ct", required=True)
    p.add_argument("-o", "--output", default=None,
                   help="plaintext output (default stdout)")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("tkver", parents=[common],
                       help="verify one ciphertext against a tracing key")
    p.add_argument("--mpk", required=True)
    p.add_argument("--tsk", required=True)
    p.add_argument("--ct", required=True)
    p.set_defaults(func=cmd_tkver)

    p = sub.add_parser("trace", parents=[common],
                       help="batch-filter ciphertexts with a tracing key")
    p.add_argument("--tsk", required=True)
    p.add_argument("ciphertexts", nargs="*")
    p.set_defaults(func=cmd_trace)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help; keep both
        return int(exc.code or 0) and EXIT_USAGE
    try:
        return args.func(args)
    except (CliError, FormatError, AhibetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
