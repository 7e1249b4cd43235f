"""File formats: envelopes, digests, roundtrips, corruption detection."""

import json

import numpy as np
import pytest

from ahibet.encoding import IdentityPath
from ahibet.sampling import RandomSource
from ahibet.scheme import encrypt, extract, tsk_gen
from ahibet.serialize import (
    FormatError,
    load_ct,
    load_identity,
    load_mpk,
    load_msk,
    load_params,
    load_sk,
    load_tsk,
    params_digest,
    save_ct,
    save_identity,
    save_mpk,
    save_msk,
    save_params,
    save_sk,
    save_tsk,
)

from conftest import random_path, seed


@pytest.fixture(scope="module")
def material(ps16, master16):
    mpk, msk = master16
    rng = RandomSource(seed(110))
    path = random_path(ps16, rng, 1)
    sk = extract(mpk, msk, path, rng)
    tsk = tsk_gen(mpk, msk, path, rng)
    ct = encrypt(mpk, path, rng.bits(ps16.lam), rng)
    return mpk, msk, path, sk, tsk, ct


# ---------------------------------------------------------------------------
# roundtrips

def test_params_roundtrip(tmp_path, ps16):
    f = tmp_path / "params.json"
    save_params(f, ps16)
    assert load_params(f) == ps16


def test_mpk_roundtrip(tmp_path, material):
    mpk = material[0]
    f = tmp_path / "mpk.json"
    save_mpk(f, mpk)
    got = load_mpk(f)
    assert got.a == mpk.a and got.u1 == mpk.u1 and got.u2 == mpk.u2
    assert got.a_blocks == mpk.a_blocks
    assert got.params == mpk.params


def test_msk_roundtrip(tmp_path, ps16, material):
    msk = material[1]
    f = tmp_path / "msk.json"
    save_msk(f, ps16, msk)
    got = load_msk(f, expected_digest=params_digest(ps16))
    assert got.r0 == msk.r0 and got.r1 == msk.r1


def test_sk_roundtrip(tmp_path, ps16, material):
    sk = material[3]
    f = tmp_path / "sk.json"
    save_sk(f, ps16, sk)
    got = load_sk(f, expected_digest=params_digest(ps16))
    assert got.id == sk.id
    assert np.array_equal(got.basis.matrix.entries, sk.basis.matrix.entries)


def test_tsk_roundtrip(tmp_path, ps16, material):
    tsk = material[4]
    f = tmp_path / "tsk.json"
    save_tsk(f, ps16, tsk)
    got = load_tsk(f)
    assert got.id == tsk.id and got.d_id == tsk.d_id


def test_ct_roundtrip(tmp_path, ps16, material):
    ct = material[5]
    f = tmp_path / "ct.json"
    save_ct(f, ps16, ct, msg_len=2)
    got, msg_len = load_ct(f)
    assert msg_len == 2
    assert got.depth == ct.depth
    for field in ("c0", "c1", "c2", "c3", "c4"):
        assert getattr(got, field) == getattr(ct, field)
    assert np.array_equal(got.k, ct.k)


def test_identity_roundtrip(tmp_path):
    p = IdentityPath(((1, 2, 3, 4), (5, 6, 7, 8)))
    f = tmp_path / "id.json"
    save_identity(f, p)
    assert load_identity(f) == p


# ---------------------------------------------------------------------------
# digest binding and corruption

def test_digest_deterministic_and_sensitive(ps16):
    import dataclasses

    d1 = params_digest(ps16)
    assert d1 == params_digest(ps16)
    other = dataclasses.replace(ps16, lam=ps16.lam + 1)
    assert params_digest(other) != d1


def test_digest_mismatch_rejected(tmp_path, ps16, material):
    sk = material[3]
    f = tmp_path / "sk.json"
    save_sk(f, ps16, sk)
    with pytest.raises(FormatError):
        load_sk(f, expected_digest="0" * 32)


def test_wrong_kind_rejected(tmp_path, ps16):
    f = tmp_path / "params.json"
    save_params(f, ps16)
    with pytest.raises(FormatError):
        load_msk(f)


def test_unknown_version_rejected(tmp_path, ps16):
    f = tmp_path / "params.json"
    save_params(f, ps16)
    env = json.loads(f.read_text())
    env["version"] = 99
    f.write_text(json.dumps(env))
    with pytest.raises(FormatError):
        load_params(f)


def test_truncated_file_rejected(tmp_path, ps16, material):
    f = tmp_path / "mpk.json"
    save_mpk(f, material[0])
    f.write_text(f.read_text()[: f.stat().st_size // 2])
    with pytest.raises(FormatError):
        load_mpk(f)


def test_corrupt_payload_rejected(tmp_path, ps16, material):
    sk = material[3]
    f = tmp_path / "sk.json"
    save_sk(f, ps16, sk)
    env = json.loads(f.read_text())
    env["body"]["basis"]["data"] = env["body"]["basis"]["data"][:-8]
    f.write_text(json.dumps(env))
    with pytest.raises(FormatError):
        load_sk(f)


def test_tampered_params_fail_validation(tmp_path, ps16):
    f = tmp_path / "params.json"
    save_params(f, ps16)
    env = json.loads(f.read_text())
    env["body"]["q"] = env["body"]["q"] + 1  # composite modulus
    f.write_text(json.dumps(env))
    with pytest.raises(Exception):
        load_params(f)


def test_missing_file_rejected(tmp_path):
    with pytest.raises(FormatError):
        load_params(tmp_path / "absent.json")


def test_save_byte_deterministic(tmp_path, ps16, material):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_mpk(a, material[0])
    save_mpk(b, material[0])
    assert a.read_bytes() == b.read_bytes()
