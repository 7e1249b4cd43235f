"""Acceptance gate: the pinned end-to-end, statistical, and algebraic
checks for the whole cryptosystem, with explicit pass thresholds.
"""

import itertools
import math

import numpy as np
import pytest

from ahibet.cli import EXIT_OK, main
from ahibet.encoding import IdentityPath, find_irreducible, frd
from ahibet.errors import PreconditionError, SolveError
from ahibet.linalg import (
    IntMatrix,
    ModMatrix,
    ModVector,
    int_matmul,
    mixed_mul_mod,
    modvec_mat,
)
from ahibet.oracles import brute_pmf, chi_square_uniform, lwe_instance
from ahibet.sampling import RandomSource, gs_slack, rerand, sample_z_batch
from ahibet.scheme import (
    build_f,
    build_f_trace,
    decrypt_detailed,
    derive,
    derive_params,
    encrypt,
    extract,
    setup,
    tk_ver,
    tsk_gen,
)
from ahibet.serialize import save_identity
from ahibet.trapdoor import (
    GadgetTrapdoor,
    ShortBasis,
    extend_basis,
    gadget_dim,
    invert_lwe,
    sample_basis,
    sample_pre,
    sample_right,
    trapdoor_to_basis,
)

from conftest import random_path, seed

TRIALS_PER_DEPTH = 100


def _object_matmul_zero(f: ModMatrix, t: IntMatrix) -> bool:
    return all(int(x) == 0 for x in mixed_mul_mod(f, t).entries.ravel())


def _noise_margin(sk, ct) -> int:
    """max |[e0 | e1]^T . T| over the secret-key basis columns."""
    e0, e1 = ct._noise[0], ct._noise[1]
    e = np.concatenate([e0, e1]).reshape(1, -1)
    prod = int_matmul(e, sk.basis.matrix.entries)
    return int(max(abs(int(v)) for v in prod.ravel()))


@pytest.fixture(scope="module")
def deployments():
    small = derive_params(16, 2, "toy-small")
    medium = derive_params(16, 3, "toy-medium")
    m_small = setup(small, RandomSource(seed(120)))
    m_medium = setup(medium, RandomSource(seed(121)))
    return {"toy-small": (small, m_small), "toy-medium": (medium, m_medium)}


@pytest.fixture(scope="module")
def end_to_end(deployments):
    """100 random (identity, message) end-to-end trials at each depth,
    collecting decrypt/trace outcomes, key-algebra violations, and the
    measured decryption noise margins."""
    stats = {}
    for profile, depth in (("toy-small", 1), ("toy-small", 2),
                           ("toy-medium", 3)):
        params, (mpk, msk) = deployments[profile]
        rng = RandomSource(seed(130 + depth))
        ok_decrypt = ok_trace = 0
        algebra_bad = 0
        margins = []
        for _ in range(TRIALS_PER_DEPTH):
            path = random_path(params, rng, 1)
            sk = extract(mpk, msk, path, rng)
            keys = [sk]
            while sk.id.depth < depth:
                path = path.child(
                    [int(x) + 1 for x in rng.integers(params.q - 1,
                                                      size=params.n)])
                sk = derive(mpk, sk, path, rng)
                keys.append(sk)
            tsk = tsk_gen(mpk, msk, path, rng)
            msg = rng.bits(params.lam)
            ct = encrypt(mpk, path, msg, rng)

            res = decrypt_detailed(mpk, ct, sk)
            if res.ok and np.array_equal(res.plaintext, msg):
                ok_decrypt += 1
            ok_trace += tk_ver(mpk, tsk, ct)
            margins.append(_noise_margin(sk, ct))

            for key in keys:
                if not _object_matmul_zero(build_f(mpk, key.id),
                                           key.basis.matrix):
                    algebra_bad += 1
            if mixed_mul_mod(build_f_trace(mpk, tsk.id), tsk.d_id) != mpk.u2:
                algebra_bad += 1
        stats[depth] = {"params": params, "decrypt": ok_decrypt,
                        "trace": ok_trace, "algebra_bad": algebra_bad,
                        "margins": margins}
    return stats


# ---------------------------------------------------------------------------
# 1. end-to-end correctness at every supported depth

def test_end_to_end_correctness(end_to_end):
    for depth, s in end_to_end.items():
        assert s["decrypt"] == TRIALS_PER_DEPTH, \
            f"depth {depth}: {s['decrypt']}/{TRIALS_PER_DEPTH} decrypts"
        assert s["trace"] == TRIALS_PER_DEPTH, \
            f"depth {depth}: {s['trace']}/{TRIALS_PER_DEPTH} trace matches"


# ---------------------------------------------------------------------------
# 2. soundness: wrong keys reject

def test_trace_soundness_wrong_identity(deployments):
    params, (mpk, msk) = deployments["toy-small"]
    rng = RandomSource(seed(140))
    tsks = [tsk_gen(mpk, msk, random_path(params, rng, 1), rng)
            for _ in range(10)]
    cts = [encrypt(mpk, random_path(params, rng, 1), rng.bits(params.lam),
                   rng)
           for _ in range(20)]
    wrong = sum(tk_ver(mpk, tsk, ct) for tsk in tsks for ct in cts)
    assert 200 - wrong >= 198, f"{wrong} false matches in 200 trials"


def test_decrypt_soundness_wrong_key(deployments):
    params, (mpk, msk) = deployments["toy-small"]
    rng = RandomSource(seed(141))
    sks = [extract(mpk, msk, random_path(params, rng, 1), rng)
           for _ in range(10)]
    cts = [encrypt(mpk, random_path(params, rng, 1), rng.bits(params.lam),
                   rng)
           for _ in range(20)]
    rejected = sum(decrypt_detailed(mpk, ct, sk).plaintext is None
                   for sk in sks for ct in cts)
    assert rejected >= 198, f"only {rejected}/200 mismatched decrypts rejected"


# ---------------------------------------------------------------------------
# 3. key algebra is exact for every key generated above

def test_key_algebra_exact(end_to_end):
    for depth, s in end_to_end.items():
        assert s["algebra_bad"] == 0, \
            f"depth {depth}: {s['algebra_bad']} key-algebra violations"


# ---------------------------------------------------------------------------
# 4. basis extension preserves the Gram-Schmidt norm

def test_extend_basis_gs_norm_equality():
    rng = RandomSource(seed(142))
    configs = itertools.cycle([(1, 521), (2, 521), (2, 257), (1, 12289)])
    for i in range(20):
        n, q = next(configs)
        m = n * gadget_dim(q) + 2 + i % 5
        td = GadgetTrapdoor.generate(n, m, q, 3.0, rng)
        basis = trapdoor_to_basis(td)
        left = ModMatrix.uniform(n, 1 + i % 4, q, rng) if i % 3 else None
        right = ModMatrix.uniform(n, 1 + i % 6, q, rng) if i % 2 else None
        out = extend_basis(basis, left, td.f, right)
        want = max(basis.gs_norm, 1.0)
        assert abs(out.gs_norm - want) <= 1e-9 * want


# ---------------------------------------------------------------------------
# 5. preimage column norms concentrate below sigma * sqrt(M)

def test_preimage_norm_concentration():
    rng = RandomSource(seed(143))
    td = GadgetTrapdoor.generate(2, 2 * gadget_dim(521) + 4, 521, 3.0, rng)
    basis = trapdoor_to_basis(td)
    m_tot = basis.dim
    sigma = basis.gs_norm * gs_slack(m_tot) * 1.05
    cols = []
    for routine in (lambda u: sample_pre(td.f, basis, u, sigma, rng),
                    lambda u: sample_right(td, u, sigma, rng)):
        for _ in range(5):
            u = ModMatrix.uniform(td.n, 100, td.q, rng)
            d = routine(u)
            cols.append(np.linalg.norm(d.entries.astype(np.float64), axis=0))
    norms = np.concatenate(cols)
    assert norms.shape[0] == 1000
    good = int(np.sum(norms <= sigma * math.sqrt(m_tot)))
    assert good >= 990, f"only {good}/1000 columns within sigma*sqrt(M)"


# ---------------------------------------------------------------------------
# 6. syndrome uniformity of A.r

def test_syndrome_uniformity_majority():
    n, q, m, draws = 2, 5, 12, 10**5
    passes = 0
    for rep in range(3):
        rng = RandomSource(seed(150 + rep))
        a = ModMatrix.uniform(n, m, q, rng).to_int64()
        r = sample_z_batch(3.0, np.zeros((m, draws)), rng)
        vals = (a @ r) % q
        counts = np.bincount((vals[0] * q + vals[1]).astype(np.int64),
                             minlength=q**n)
        passes += chi_square_uniform(counts) > 0.001
    assert passes >= 2, f"uniformity held in only {passes}/3 repetitions"


# ---------------------------------------------------------------------------
# 7. re-randomization variance contract

def test_rerand_variance_and_precondition():
    m = 4
    r, sigma = 4.0, 8.0
    q = 10**9 + 7
    d = IntMatrix.identity(m)
    c = ModVector([0] * m, q)
    rng = RandomSource(seed(151))
    trials = 10**5
    outs = np.empty((trials, m))
    for t in range(trials):
        outs[t] = [float(x) for x in rerand(d, c, r, sigma, rng)
                   .center_lifted()]
    want = brute_pmf(2 * r * sigma).variance()
    per_coord = np.var(outs, axis=0)
    assert np.all(np.abs(per_coord - want) <= 0.10 * want), per_coord
    with pytest.raises(PreconditionError):
        # sigma below the top singular value of the transform
        rerand(IntMatrix(3 * np.identity(m, dtype=np.int64)), c, r, 2.0, rng)


# ---------------------------------------------------------------------------
# 8. preimage distribution vs the exact coset Gaussian; draw budget

def test_preimage_matches_exact_coset_gaussian():
    q, sigma, n_draws = 5, 8.0, 2 * 10**5
    f = ModMatrix([[1, 2]], q)
    basis = ShortBasis.from_matrix(IntMatrix([[-2, 1], [1, 2]]))
    rng = RandomSource(seed(152))
    pts = []
    chunk = 5000
    for _ in range(n_draws // chunk):
        u = ModMatrix([[3] * chunk], q)
        pts.append(sample_pre(f, basis, u, sigma, rng).entries.T)
    pts = np.vstack(pts)

    radius = int(13 * sigma)
    xs = np.arange(-radius, radius + 1)
    x0, x1 = np.meshgrid(xs, xs, indexing="ij")
    coset = (x0 + 2 * x1) % q == 3
    p0, p1 = x0[coset], x1[coset]
    w = np.exp(-math.pi * (p0.astype(float)**2 + p1.astype(float)**2)
               / sigma**2)
    w /= w.sum()
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(p0, p1))}
    counts = np.zeros_like(w)
    for a, b in pts:
        counts[index[(int(a), int(b))]] += 1
    tv = 0.5 * float(np.abs(w - counts / n_draws).sum())
    assert tv <= 0.05, f"TV {tv}"


def test_basis_completion_draw_budget():
    rng0 = RandomSource(seed(153))
    td = GadgetTrapdoor.generate(2, 2 * gadget_dim(521) + 4, 521, 3.0, rng0)
    ref = trapdoor_to_basis(td)
    sigma = ref.gs_norm * gs_slack(ref.dim) * 1.05
    draws = [sample_basis(td.f, ref, sigma, RandomSource(seed(160 + t)))
             .draws_used
             for t in range(20)]
    assert float(np.mean(draws)) <= 3 * ref.dim


# ---------------------------------------------------------------------------
# 9. exact LWE inversion and violation detection

def test_lwe_inversion_and_violation_detection(deployments):
    params, (mpk, msk) = deployments["toy-small"]
    rng = RandomSource(seed(154))
    path = random_path(params, rng, 1)
    sk = extract(mpk, msk, path, rng)
    f = build_f(mpk, path)
    t = sk.basis.matrix.entries
    t_obj = t.astype(object)
    q = params.q
    # width placing the honest bound inside [q/16, q/4): the honest
    # instances satisfy the inversion precondition while the x8-scaled
    # noise is guaranteed to wrap at least one folded coordinate
    col = float(np.max(np.linalg.norm(t.astype(np.float64), axis=0)))
    sigma = q / (3.5 * col * math.sqrt(2 * math.log(sk.basis.dim)))
    recovered = detected = 0
    for _ in range(100):
        s = ModVector.uniform(params.n, q, rng)
        y, e = lwe_instance(f, s, sigma, rng)
        bound = max(abs(int(v)) for v in (e.astype(object) @ t_obj))
        assert q // 16 <= bound < q // 4
        s2, e2 = invert_lwe(f, sk.basis, y)
        recovered += (s2 == s and np.array_equal(e2, e))

        e8 = e * 8
        y8 = ModVector((modvec_mat(s, f).values + e8) % q, q)
        try:
            s3, e3 = invert_lwe(f, sk.basis, y8)
            detected += not (s3 == s and np.array_equal(e3, e8))
        except SolveError:
            detected += 1
    assert recovered == 100, f"{recovered}/100 honest recoveries"
    assert detected == 100, f"{detected}/100 violations detected"


# ---------------------------------------------------------------------------
# 10. full-rank difference encoding

def _det_mod(mat, q):
    a = [[int(x) % q for x in row] for row in mat]
    n = len(a)
    det = 1
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] % q), None)
        if piv is None:
            return 0
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det % q
        det = det * a[c][c] % q
        inv = pow(a[c][c], -1, q)
        a[c] = [v * inv % q for v in a[c]]
        for r in range(c + 1, n):
            if a[r][c]:
                fac = a[r][c]
                a[r] = [(vr - fac * vc) % q
                        for vr, vc in zip(a[r], a[c])]
    return det


def test_frd_difference_invertibility():
    for q in (3, 5):
        ctx = find_irreducible(2, q)
        vecs = list(itertools.product(range(q), repeat=2))
        mats = {u: frd(ctx, u) for u in vecs}
        for u, v in itertools.combinations(vecs, 2):
            assert _det_mod((mats[u] - mats[v]).entries, q) != 0, (u, v)

    q, n = 257, 4
    ctx = find_irreducible(n, q)
    rng = RandomSource(seed(155))
    checked = 0
    while checked < 1000:
        u = tuple(int(x) for x in rng.integers(q, size=n))
        v = tuple(int(x) for x in rng.integers(q, size=n))
        if u == v:
            continue
        assert _det_mod((frd(ctx, u) - frd(ctx, v)).entries, q) != 0
        checked += 1


# ---------------------------------------------------------------------------
# 11. measured decryption noise stays below q/4

def test_decryption_noise_bound(end_to_end):
    for depth, s in end_to_end.items():
        q4 = s["params"].q // 4
        worst = max(s["margins"])
        assert worst < q4, f"depth {depth}: noise {worst} >= q/4 = {q4}"


# ---------------------------------------------------------------------------
# 12. CLI pipeline reproducibility and batch tracing

def _hexseed(tag: int) -> str:
    return f"{tag:02x}" * 32


def _run_pipeline(d, idfiles, msg):
    (d / "msg.bin").write_bytes(msg)
    outputs = ["mpk.json", "msk.json", "sk1.json", "sk2.json", "tsk.json",
               "ct.json"]
    steps = [
        ["params", "--lambda", "16", "--depth", "2", "--profile",
         "toy-small", "-o", str(d / "params.json")],
        ["setup", "--params", str(d / "params.json"),
         "--msk", str(d / "msk.json"), "-o", str(d / "mpk.json"),
         "--seed", _hexseed(31)],
        ["extract", "--mpk", str(d / "mpk.json"),
         "--msk", str(d / "msk.json"), "--id", idfiles[0],
         "-o", str(d / "sk1.json"), "--seed", _hexseed(32)],
        ["derive", "--mpk", str(d / "mpk.json"), "--sk", str(d / "sk1.json"),
         "--id", idfiles[1], "-o", str(d / "sk2.json"),
         "--seed", _hexseed(33)],
        ["tskgen", "--mpk", str(d / "mpk.json"), "--msk", str(d / "msk.json"),
         "--id", idfiles[1], "-o", str(d / "tsk.json"),
         "--seed", _hexseed(34)],
        ["encrypt", "--mpk", str(d / "mpk.json"), "--id", idfiles[1],
         "--in", str(d / "msg.bin"), "-o", str(d / "ct.json"),
         "--seed", _hexseed(35)],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv
    assert main(["decrypt", "--mpk", str(d / "mpk.json"),
                 "--sk", str(d / "sk2.json"), "--ct", str(d / "ct.json"),
                 "-o", str(d / "out.bin")]) == EXIT_OK
    assert main(["tkver", "--mpk", str(d / "mpk.json"),
                 "--tsk", str(d / "tsk.json"),
                 "--ct", str(d / "ct.json")]) == EXIT_OK
    return outputs


def test_cli_pipeline_reproducible_and_traces(tmp_path, capsys):
    ids = tmp_path / "ids"
    ids.mkdir()
    save_identity(ids / "id1.json", IdentityPath(((1, 2, 3, 4),)))
    save_identity(ids / "id2.json",
                  IdentityPath(((1, 2, 3, 4), (5, 6, 7, 8))))
    save_identity(ids / "decoy.json", IdentityPath(((8, 7, 6, 5),)))
    idfiles = [str(ids / "id1.json"), str(ids / "id2.json")]
    msg = b"42"

    run_a = tmp_path / "a"
    run_b = tmp_path / "b"
    run_a.mkdir()
    run_b.mkdir()
    outputs = _run_pipeline(run_a, idfiles, msg)
    _run_pipeline(run_b, idfiles, msg)
    for name in outputs:
        assert (run_a / name).read_bytes() == (run_b / name).read_bytes(), \
            f"{name} not byte-reproducible"
    assert (run_a / "out.bin").read_bytes() == msg

    # batch trace: 3 planted matches among 10 ciphertexts
    d = run_a
    batch = []
    for i in range(10):
        ident = idfiles[1] if i in (2, 5, 9) else str(ids / "decoy.json")
        out = tmp_path / f"batch{i}.json"
        assert main(["encrypt", "--mpk", str(d / "mpk.json"), "--id", ident,
                     "--in", str(d / "msg.bin"), "-o", str(out)]) == EXIT_OK
        batch.append(str(out))
    capsys.readouterr()
    assert main(["trace", "--tsk", str(d / "tsk.json")] + batch) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    matches = [ln.split("\t")[0] for ln in lines if ln.endswith("\tMATCH")]
    assert matches == [batch[2], batch[5], batch[9]]
    assert len(lines) == 10
