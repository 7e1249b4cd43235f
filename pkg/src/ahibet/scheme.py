"""The anonymous hierarchical IBE with traceable identities: parameter
derivation plus the seven algorithms (setup, extract, derive, tracing-key
generation, encrypt, decrypt, tracing-key verification).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import sympy

from .encoding import (
    FrdContext,
    IdentityPath,
    find_irreducible,
    frd,
    hash_to_zqn,
    round_vec,
)
from .errors import ParameterError, PreconditionError, ShapeError, SolveError
from .linalg import (
    IntMatrix,
    ModMatrix,
    ModVector,
    mat_mul_mod,
    mixed_mul_mod,
    modvec_intmat,
    modvec_mat,
)
from .sampling import (
    RandomSource,
    gs_slack,
    rerand_slack,
    sample_z_batch,
    sample_z_matrix,
)
from .trapdoor import (
    GadgetTrapdoor,
    ShortBasis,
    gadget_dim,
    gadget_matrix,
    invert_lwe,
    sample_basis_left,
    sample_basis_right,
    sample_pre,
    trapdoor_to_basis,
)

Q_LIMIT = 2**62

# profile name -> (lattice dimension n, starting modulus, max supported depth)
PROFILES = {
    "toy-small": (4, 2**26, 2),
    "toy-medium": (4, 2**26, 3),
    "asymptotic-demo": (8, 2**26, 4),
}


@dataclass(frozen=True)
class ParamSet:
    """Complete public parameter set; all widths in the density convention
    of the sampling module (variance roughly sigma^2 / (2*pi))."""

    profile: str
    lam: int
    d: int
    n: int
    q: int
    k: int
    omega: int
    m: int
    sigma: Tuple[int, ...]
    tau: int
    r: int
    alpha: float

    def validate(self) -> None:
        if self.lam < 1:
            raise ParameterError("lambda must be >= 1")
        if self.d < 1:
            raise ParameterError("depth bound must be >= 1")
        if not sympy.isprime(self.q):
            raise ParameterError("modulus must be prime")
        if self.k != gadget_dim(self.q):
            raise ParameterError("k must equal ceil(log2 q)")
        if self.omega != self.n * self.k:
            raise ParameterError("omega must equal n*k")
        if self.m < self.n * self.k:
            raise ParameterError("need m >= n*k")
        if len(self.sigma) != self.d:
            raise ParameterError("sigma ladder must have one width per level")
        if any(s <= 0 for s in self.sigma):
            raise ParameterError("sigma widths must be positive")
        if any(a > b for a, b in zip(self.sigma, self.sigma[1:])):
            raise ParameterError("sigma ladder must be monotone")
        if self.tau < 1 or self.r < 1:
            raise ParameterError("tau and r must be positive")
        bound = 2 * self.r * self.tau * self.sigma[-1] * (self.m + self.d * self.omega)
        if not bound < self.q // 4:
            raise ParameterError("correctness bound 2*r*tau*sigma_d*(m+d*omega)"
                                 " must stay below q/4")

    @property
    def sigma_r(self) -> float:
        """Width of the master trapdoor entries."""
        return gs_slack(self.n)


def _ladder(n: int, q: int, d: int, lam: int):
    """All derived quantities for one modulus candidate."""
    k = gadget_dim(q)
    omega = n * k
    m = 2 * n * k
    sigma_r = gs_slack(n)
    # concrete stand-in for the largest singular value of a Gaussian
    # m x omega matrix of width sigma_r (Lemma-1-style row+column bound)
    s1_bound = 0.6 * sigma_r * (math.sqrt(m) + math.sqrt(omega))
    sigma = [
        math.ceil(1.3 * max(
            5.0 * s1_bound * gs_slack(n),
            2.0 * math.sqrt(5.0) * (s1_bound + 1.0) * gs_slack(m + omega),
        ))
    ]
    for ell in range(2, d + 1):
        prev_dim = m + (ell - 1) * omega
        sigma.append(math.ceil(
            1.1 * sigma[-1] * math.sqrt(prev_dim) * gs_slack(m + ell * omega)))
    # largest singular value of the d-block concatenation [R_1 | ... | R_d]
    tau = math.ceil(0.6 * sigma_r * (math.sqrt(m) + math.sqrt(d * omega)))
    r = math.ceil(rerand_slack(max(m, d * omega, lam)))
    return k, omega, m, tuple(sigma), tau, r


def derive_params(lam: int, d: int, profile: str) -> ParamSet:
    """Smallest parameter set of the profile meeting the correctness bound.

    The modulus is grown (next prime above a margin over the requirement)
    until 2*r*tau*sigma_d*(m+d*omega) < q/4; every other quantity is a
    deterministic function of (n, q, d, lambda).
    """
    if profile not in PROFILES:
        raise ParameterError(f"unknown profile {profile!r}")
    n, q_start, d_cap = PROFILES[profile]
    if d < 1:
        raise ParameterError("depth bound must be >= 1")
    if d > d_cap:
        raise ParameterError(
            f"profile {profile!r} supports depth at most {d_cap}")
    if lam < 1:
        raise ParameterError("lambda must be >= 1")
    q = int(sympy.nextprime(q_start))
    for _ in range(64):
        k, omega, m, sigma, tau, r = _ladder(n, q, d, lam)
        bound = 2 * r * tau * sigma[-1] * (m + d * omega)
        if bound < q // 4:
            params = ParamSet(profile=profile, lam=lam, d=d, n=n, q=q, k=k,
                              omega=omega, m=m, sigma=sigma, tau=tau, r=r,
                              alpha=r / q)
            params.validate()
            return params
        target = math.ceil(5.2 * bound)  # 4x for q/4 plus ~30% margin
        if target >= Q_LIMIT:
            raise ParameterError("no modulus below 2^62 satisfies the "
                                 "correctness bound for this profile")
        q = int(sympy.nextprime(max(target, 2 * q)))
    raise ParameterError("parameter search did not converge")


@functools.lru_cache(maxsize=32)
def _frd_context(n: int, q: int) -> FrdContext:
    return find_irreducible(n, q)


def frd_context(params: ParamSet) -> FrdContext:
    """The scheme-wide deterministic full-rank difference context."""
    return _frd_context(params.n, params.q)


# ---------------------------------------------------------------------------
# key material

@dataclass(frozen=True)
class MasterPublicKey:
    params: ParamSet
    a: ModMatrix                       # n x m
    a_blocks: Tuple[ModMatrix, ...]    # A_0 .. A_d, each n x omega
    u1: ModMatrix                      # n x lambda
    u2: ModMatrix                      # n x lambda

    def __post_init__(self):
        p = self.params
        if self.a.rows != p.n or self.a.cols != p.m:
            raise ShapeError("A must be n x m")
        if len(self.a_blocks) != p.d + 1:
            raise ShapeError("need blocks A_0 .. A_d")
        for blk in self.a_blocks:
            if blk.rows != p.n or blk.cols != p.omega:
                raise ShapeError("each block must be n x omega")
        for u in (self.u1, self.u2):
            if u.rows != p.n or u.cols != p.lam:
                raise ShapeError("U matrices must be n x lambda")


@dataclass(frozen=True)
class MasterSecretKey:
    r0: IntMatrix  # m x omega
    r1: IntMatrix  # m x omega


@dataclass(frozen=True)
class SecretKey:
    id: IdentityPath
    basis: ShortBasis  # for F_id, dimension m + depth*omega


@dataclass(frozen=True)
class TracingKey:
    id: IdentityPath
    d_id: IntMatrix  # (m + omega) x lambda


@dataclass(frozen=True)
class Ciphertext:
    depth: int
    c0: ModVector   # length m
    c1: ModVector   # length depth*omega
    c2: ModVector   # length lambda
    c3: ModVector   # length lambda
    c4: ModVector   # length omega
    k: np.ndarray   # lambda tag bits, in the clear


@dataclass(frozen=True)
class DecryptResult:
    """Decryption outcome with private diagnostics for the test suite."""

    plaintext: Optional[np.ndarray]
    reason: str                      # "ok" | "depth" | "inversion" | "tag"
    s: Optional[ModVector] = None
    noise: Optional[np.ndarray] = None

    @property
    def ok(self) -> bool:
        return self.reason == "ok"


# ---------------------------------------------------------------------------
# matrix builders

def _check_path(params: ParamSet, path: IdentityPath) -> None:
    if path.n != params.n:
        raise ShapeError("identity components must have length n")
    if not 1 <= path.depth <= params.d:
        raise PreconditionError("identity depth out of range")


def build_f(mpk: MasterPublicKey, path: IdentityPath) -> ModMatrix:
    """F_id = [A | A_1 + FRD(id_1) G | ... | A_l + FRD(id_l) G]."""
    p = mpk.params
    _check_path(p, path)
    ctx = frd_context(p)
    g = gadget_matrix(p.n, p.q)
    f = mpk.a
    for j, comp in enumerate(path.components, start=1):
        f = f.hstack(mpk.a_blocks[j] + mat_mul_mod(frd(ctx, comp), g))
    return f


def build_f_trace(mpk: MasterPublicKey, path: IdentityPath) -> ModMatrix:
    """F'_id = [A | A_0 + FRD(H(id)) G], a function of the digest only."""
    p = mpk.params
    _check_path(p, path)
    ctx = frd_context(p)
    g = gadget_matrix(p.n, p.q)
    digest = hash_to_zqn(ctx, path)
    return mpk.a.hstack(mpk.a_blocks[0] + mat_mul_mod(frd(ctx, digest), g))


# ---------------------------------------------------------------------------
# the seven algorithms

def setup(params: ParamSet, rng: RandomSource):
    """Master key generation: uniform A with two Gaussian trapdoors."""
    params.validate()
    p = params
    a = ModMatrix.uniform(p.n, p.m, p.q, rng)
    r0 = sample_z_matrix(p.m, p.omega, p.sigma_r, rng)
    r1 = sample_z_matrix(p.m, p.omega, p.sigma_r, rng)
    blocks = [mixed_mul_mod(a, r0), mixed_mul_mod(a, r1)]
    for _ in range(2, p.d + 1):
        blocks.append(ModMatrix.uniform(p.n, p.omega, p.q, rng))
    u1 = ModMatrix.uniform(p.n, p.lam, p.q, rng)
    u2 = ModMatrix.uniform(p.n, p.lam, p.q, rng)
    mpk = MasterPublicKey(params=p, a=a, a_blocks=tuple(blocks), u1=u1, u2=u2)
    return mpk, MasterSecretKey(r0=r0, r1=r1)


def extract(mpk: MasterPublicKey, msk: MasterSecretKey, path: IdentityPath,
            rng: RandomSource) -> SecretKey:
    """Depth-1 secret key: randomized short basis for F_id."""
    p = mpk.params
    _check_path(p, path)
    if path.depth != 1:
        raise PreconditionError("extract serves depth-1 identities only")
    ctx = frd_context(p)
    tag = frd(ctx, path.components[0])
    td = GadgetTrapdoor.build(mpk.a, msk.r1, tag)
    basis = sample_basis_right(td, float(p.sigma[0]), rng)
    return SecretKey(id=path, basis=basis)


def derive(mpk: MasterPublicKey, sk_parent: SecretKey, child: IdentityPath,
           rng: RandomSource) -> SecretKey:
    """One-level delegation: key for parent's immediate child identity."""
    p = mpk.params
    _check_path(p, child)
    if not (sk_parent.id.is_prefix_of(child)
            and child.depth == sk_parent.id.depth + 1):
        raise PreconditionError("child must extend the parent path by one")
    ctx = frd_context(p)
    ell = child.depth
    g = gadget_matrix(p.n, p.q)
    block = mpk.a_blocks[ell] + mat_mul_mod(frd(ctx, child.components[-1]), g)
    f_parent = build_f(mpk, sk_parent.id)
    basis = sample_basis_left(f_parent, sk_parent.basis, block,
                              float(p.sigma[ell - 1]), rng)
    return SecretKey(id=child, basis=basis)


def tsk_gen(mpk: MasterPublicKey, msk: MasterSecretKey, path: IdentityPath,
            rng: RandomSource) -> TracingKey:
    """Tracing key: short solution D with F'_id . D = U_2 (mod q).

    The preimage is sampled with the basis derived directly from the
    master trapdoor R_0 under the digest tag; the sampler's output
    distribution depends only on the lattice coset and the width, so
    this matches sampling with any intermediate re-randomized basis
    while satisfying the width precondition.
    """
    p = mpk.params
    _check_path(p, path)
    ctx = frd_context(p)
    digest = hash_to_zqn(ctx, path)
    if not np.any(digest.values != 0):
        raise ParameterError("identity digest is zero; tag not invertible")
    tag = frd(ctx, digest)
    td = GadgetTrapdoor.build(mpk.a, msk.r0, tag)
    basis = trapdoor_to_basis(td)
    d_id = sample_pre(td.f, basis, mpk.u2, float(p.sigma[0]), rng)
    return TracingKey(id=path, d_id=d_id)


def _encode_bits(bits, lam: int) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).reshape(-1)
    if arr.shape[0] != lam:
        raise ShapeError(f"message must be exactly {lam} bits")
    if np.any((arr != 0) & (arr != 1)):
        raise ShapeError("message entries must be bits")
    return arr


def encrypt(mpk: MasterPublicKey, path: IdentityPath, message,
            rng: RandomSource, *, _zero_noise: bool = False,
            _zero_tag: bool = False) -> Ciphertext:
    """Encrypt lambda message bits to an identity path."""
    p = mpk.params
    _check_path(p, path)
    msg = _encode_bits(message, p.lam)
    ell = path.depth
    f = build_f(mpk, path)
    b_id = ModMatrix(f.entries[:, p.m:], p.q)  # the identity blocks
    ctx = frd_context(p)
    g = gadget_matrix(p.n, p.q)
    a_trace = mpk.a_blocks[0] + mat_mul_mod(frd(ctx, hash_to_zqn(ctx, path)), g)

    k_bits = (np.zeros(p.lam, dtype=np.int64) if _zero_tag
              else rng.bits(p.lam))
    s = ModVector.uniform(p.n, p.q, rng)
    wide = 2.0 * p.r * p.tau

    def noise(width, count):
        if _zero_noise:
            return np.zeros(count, dtype=np.int64)
        return sample_z_batch(width, np.zeros(count), rng)

    e0 = noise(float(p.r), p.m)
    e1 = noise(wide, ell * p.omega)
    e2 = noise(float(p.r), p.lam)
    e3 = noise(wide, p.lam)
    e4 = noise(wide, p.omega)
    half = p.q // 2

    c0 = ModVector(modvec_mat(s, mpk.a).values + e0.astype(object), p.q)
    c1 = ModVector(modvec_mat(s, b_id).values + e1.astype(object), p.q)
    c2 = ModVector(modvec_mat(s, mpk.u1).values + e2.astype(object)
                   + msg.astype(object) * half, p.q)
    c3 = ModVector(modvec_mat(s, mpk.u2).values + e3.astype(object)
                   + k_bits.astype(object) * half, p.q)
    c4 = ModVector(modvec_mat(s, a_trace).values + e4.astype(object), p.q)
    ct = Ciphertext(depth=ell, c0=c0, c1=c1, c2=c2, c3=c3, c4=c4, k=k_bits)
    # transient values for the test suite; never serialized
    object.__setattr__(ct, "_s", s)
    object.__setattr__(ct, "_noise", (e0, e1, e2, e3, e4))
    return ct


def decrypt_detailed(mpk: MasterPublicKey, ct: Ciphertext,
                     sk: SecretKey) -> DecryptResult:
    """Decryption with diagnostics; the public outcome is plaintext or
    rejection, the reason field is for tests only."""
    p = mpk.params
    if ct.depth != sk.id.depth:
        return DecryptResult(plaintext=None, reason="depth")
    f = build_f(mpk, sk.id)
    y = ct.c0.concat(ct.c1)
    try:
        s, e = invert_lwe(f, sk.basis, y)
    except SolveError:
        return DecryptResult(plaintext=None, reason="inversion")
    k_hat = round_vec(ct.c3 - modvec_mat(s, mpk.u2))
    if not np.array_equal(k_hat, np.asarray(ct.k, dtype=np.int64)):
        return DecryptResult(plaintext=None, reason="tag", s=s, noise=e)
    msg = round_vec(ct.c2 - modvec_mat(s, mpk.u1))
    return DecryptResult(plaintext=msg, reason="ok", s=s, noise=e)


def decrypt(mpk: MasterPublicKey, ct: Ciphertext,
            sk: SecretKey) -> Optional[np.ndarray]:
    """Message bits on success, None on rejection."""
    return decrypt_detailed(mpk, ct, sk).plaintext


def tk_ver(mpk, tsk: TracingKey, ct: Ciphertext) -> int:
    """1 iff the ciphertext verifies against the tracing key's identity.

    Verification never touches the secret hierarchy: it folds [c0 | c4]
    through the tracing key and compares the rounded tag. mpk is part of
    the interface for symmetry but unused.
    """
    folded = modvec_intmat(ct.c0.concat(ct.c4), tsk.d_id)
    k_hat = round_vec(ct.c3 - folded)
    return int(np.array_equal(k_hat, np.asarray(ct.k, dtype=np.int64)))
