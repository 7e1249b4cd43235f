"""File formats: matrix/vector payloads (base64 of 8-byte little-endian
words), versioned JSON envelopes bound to a parameter digest, and
identity-path files.
"""

from __future__ import annotations

import base64
import hashlib
import json
from typing import Optional

import numpy as np

from .encoding import IdentityPath
from .errors import AhibetError, ShapeError
from .linalg import IntMatrix, ModMatrix, ModVector
from .scheme import (
    Ciphertext,
    MasterPublicKey,
    MasterSecretKey,
    ParamSet,
    SecretKey,
    TracingKey,
)
from .trapdoor import ShortBasis

FORMAT_VERSION = 1
DIGEST_HEX_LEN = 32  # 16 bytes of SHAKE-256


class FormatError(AhibetError, ValueError):
    """A file failed to parse or violated the envelope contract."""


def _pack_words(values, signed: bool) -> str:
    out = b"".join(int(v).to_bytes(8, "little", signed=signed)
                   for v in values)
    return base64.b64encode(out).decode("ascii")


def _unpack_words(data: str, count: int, signed: bool) -> list:
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    if len(raw) != 8 * count:
        raise FormatError("matrix payload has wrong length")
    return [int.from_bytes(raw[8 * i:8 * i + 8], "little", signed=signed)
            for i in range(count)]


def mod_matrix_to_json(m: ModMatrix) -> dict:
    return {"rows": m.rows, "cols": m.cols, "q": m.q,
            "data": _pack_words(m.entries.reshape(-1), signed=False)}


def mod_matrix_from_json(obj: dict) -> ModMatrix:
    rows, cols, q = int(obj["rows"]), int(obj["cols"]), int(obj["q"])
    vals = _unpack_words(obj["data"], rows * cols, signed=False)
    return ModMatrix(np.array(vals, dtype=object).reshape(rows, cols), q)


def int_matrix_to_json(m: IntMatrix) -> dict:
    return {"rows": m.rows, "cols": m.cols, "q": None,
            "data": _pack_words(m.entries.reshape(-1), signed=True)}


def int_matrix_from_json(obj: dict) -> IntMatrix:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    if obj.get("q") is not None:
        raise FormatError("expected a signed integer matrix")
    vals = _unpack_words(obj["data"], rows * cols, signed=True)
    return IntMatrix(np.array(vals, dtype=np.int64).reshape(rows, cols))


def mod_vector_to_json(v: ModVector) -> dict:
    return {"n": v.n, "q": v.q, "data": _pack_words(v.values, signed=False)}


def mod_vector_from_json(obj: dict) -> ModVector:
    n, q = int(obj["n"]), int(obj["q"])
    return ModVector(_unpack_words(obj["data"], n, signed=False), q)


# ---------------------------------------------------------------------------
# parameters and the digest binding all files of one deployment

def params_to_body(p: ParamSet) -> dict:
    return {"profile": p.profile, "lambda": p.lam, "d": p.d, "n": p.n,
            "q": p.q, "k": p.k, "omega": p.omega, "m": p.m,
            "sigma": list(p.sigma), "tau": p.tau, "r": p.r}


def params_from_body(body: dict) -> ParamSet:
    try:
        p = ParamSet(profile=str(body["profile"]), lam=int(body["lambda"]),
                     d=int(body["d"]), n=int(body["n"]), q=int(body["q"]),
                     k=int(body["k"]), omega=int(body["omega"]),
                     m=int(body["m"]), sigma=tuple(int(s) for s in body["sigma"]),
                     tau=int(body["tau"]), r=int(body["r"]),
                     alpha=int(body["r"]) / int(body["q"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed parameter body: {exc}") from exc
    p.validate()
    return p


def params_digest(p: ParamSet) -> str:
    canonical = json.dumps(params_to_body(p), sort_keys=True,
                           separators=(",", ":")).encode("ascii")
    return hashlib.shake_256(canonical).hexdigest(DIGEST_HEX_LEN // 2)


# ---------------------------------------------------------------------------
# envelopes

def write_envelope(path, kind: str, params: ParamSet, body: dict) -> None:
    env = {"version": FORMAT_VERSION, "kind": kind,
           "params_digest": params_digest(params), "body": body}
    with open(path, "w", encoding="ascii") as fh:
        json.dump(env, fh, separators=(",", ":"), sort_keys=False)
        fh.write("\n")


def read_envelope(path, kind: str,
                  expected_digest: Optional[str] = None) -> dict:
    try:
        with open(path, "r", encoding="ascii") as fh:
            env = json.load(fh)
    except (OSError, ValueError, UnicodeError) as exc:
        raise FormatError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(env, dict) or env.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unknown format version")
    if env.get("kind") != kind:
        raise FormatError(f"{path}: expected kind {kind!r}, "
                          f"found {env.get('kind')!r}")
    if expected_digest is not None and env.get("params_digest") != expected_digest:
        raise FormatError(f"{path}: parameter digest mismatch")
    body = env.get("body")
    if not isinstance(body, dict):
        raise FormatError(f"{path}: missing body")
    return env


# ---------------------------------------------------------------------------
# key material and ciphertexts

def save_params(path, p: ParamSet) -> None:
    write_envelope(path, "params", p, params_to_body(p))


def load_params(path) -> ParamSet:
    return params_from_body(read_envelope(path, "params")["body"])


def save_mpk(path, mpk: MasterPublicKey) -> None:
    body = {"a": mod_matrix_to_json(mpk.a),
            "a_blocks": [mod_matrix_to_json(b) for b in mpk.a_blocks],
            "u1": mod_matrix_to_json(mpk.u1),
            "u2": mod_matrix_to_json(mpk.u2),
            "params": params_to_body(mpk.params)}
    write_envelope(path, "mpk", mpk.params, body)


def load_mpk(path) -> MasterPublicKey:
    body = read_envelope(path, "mpk")["body"]
    try:
        params = params_from_body(body["params"])
        mpk = MasterPublicKey(
            params=params,
            a=mod_matrix_from_json(body["a"]),
            a_blocks=tuple(mod_matrix_from_json(b) for b in body["a_blocks"]),
            u1=mod_matrix_from_json(body["u1"]),
            u2=mod_matrix_from_json(body["u2"]))
    except (KeyError, TypeError, ValueError, ShapeError) as exc:
        raise FormatError(f"{path}: malformed master public key: {exc}") from exc
    return mpk


def save_msk(path, params: ParamSet, msk: MasterSecretKey) -> None:
    body = {"r0": int_matrix_to_json(msk.r0), "r1": int_matrix_to_json(msk.r1)}
    write_envelope(path, "msk", params, body)


def load_msk(path, expected_digest: Optional[str] = None) -> MasterSecretKey:
    body = read_envelope(path, "msk", expected_digest)["body"]
    try:
        return MasterSecretKey(r0=int_matrix_from_json(body["r0"]),
                               r1=int_matrix_from_json(body["r1"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed master secret key: {exc}") from exc


def _path_to_json(p: IdentityPath) -> list:
    return [list(c) for c in p.components]


def _path_from_json(obj) -> IdentityPath:
    try:
        return IdentityPath(tuple(tuple(int(x) for x in comp) for comp in obj))
    except (TypeError, ValueError, AhibetError) as exc:
        raise FormatError(f"malformed identity path: {exc}") from exc


def save_sk(path, params: ParamSet, sk: SecretKey) -> None:
    body = {"id": _path_to_json(sk.id),
            "basis": int_matrix_to_json(sk.basis.matrix)}
    write_envelope(path, "sk", params, body)


def load_sk(path, expected_digest: Optional[str] = None) -> SecretKey:
    body = read_envelope(path, "sk", expected_digest)["body"]
    try:
        return SecretKey(id=_path_from_json(body["id"]),
                         basis=ShortBasis.from_matrix(
                             int_matrix_from_json(body["basis"])))
    except (KeyError, TypeError, ValueError, AhibetError) as exc:
        raise FormatError(f"{path}: malformed secret key: {exc}") from exc


def save_tsk(path, params: ParamSet, tsk: TracingKey) -> None:
    body = {"id": _path_to_json(tsk.id), "d_id": int_matrix_to_json(tsk.d_id)}
    write_envelope(path, "tsk", params, body)


def load_tsk(path, expected_digest: Optional[str] = None) -> TracingKey:
    body = read_envelope(path, "tsk", expected_digest)["body"]
    try:
        return TracingKey(id=_path_from_json(body["id"]),
                          d_id=int_matrix_from_json(body["d_id"]))
    except (KeyError, TypeError, ValueError, AhibetError) as exc:
        raise FormatError(f"{path}: malformed tracing key: {exc}") from exc


def save_ct(path, params: ParamSet, ct: Ciphertext, msg_len: int) -> None:
    body = {"depth": ct.depth,
            "c0": mod_vector_to_json(ct.c0),
            "c1": mod_vector_to_json(ct.c1),
            "c2": mod_vector_to_json(ct.c2),
            "c3": mod_vector_to_json(ct.c3),
            "c4": mod_vector_to_json(ct.c4),
            "k": [int(b) for b in ct.k],
            "msg_len": int(msg_len)}
    write_envelope(path, "ct", params, body)


def load_ct(path, expected_digest: Optional[str] = None):
    """Returns (ciphertext, recorded plaintext byte length)."""
    body = read_envelope(path, "ct", expected_digest)["body"]
    try:
        k = np.array([int(b) for b in body["k"]], dtype=np.int64)
        if np.any((k != 0) & (k != 1)):
            raise FormatError("tag bits must be 0/1")
        ct = Ciphertext(depth=int(body["depth"]),
                        c0=mod_vector_from_json(body["c0"]),
                        c1=mod_vector_from_json(body["c1"]),
                        c2=mod_vector_from_json(body["c2"]),
                        c3=mod_vector_from_json(body["c3"]),
                        c4=mod_vector_from_json(body["c4"]),
                        k=k)
        return ct, int(body["msg_len"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed ciphertext: {exc}") from exc


def save_identity(path, p: IdentityPath) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump({"components": _path_to_json(p)}, fh,
                  separators=(",", ":"))
        fh.write("\n")


def load_identity(path) -> IdentityPath:
    try:
        with open(path, "r", encoding="ascii") as fh:
            obj = json.load(fh)
        return _path_from_json(obj["components"])
    except (OSError, ValueError, KeyError, UnicodeError) as exc:
        raise FormatError(f"cannot parse identity file {path}: {exc}") from exc
