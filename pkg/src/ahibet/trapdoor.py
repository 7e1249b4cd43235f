"""Gadget-based lattice trapdoors and the sampling algorithms built on
them: trapdoor generation, preimage sampling, basis delegation (right and
left), deterministic basis extension, sample-set-to-basis conversion, and
exact LWE inversion with a short basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import PreconditionError, ShapeError, SolveError
from .linalg import (
    GramSchmidtData,
    IntMatrix,
    ModMatrix,
    ModVector,
    gram_schmidt,
    int_matmul,
    mat_mul_mod,
    mixed_mul_mod,
    modvec_intmat,
    solve_int,
    solve_left,
    solve_mod_columns,
)
from .sampling import RandomSource, gs_slack, klein_sample_batch, sample_z_matrix

_INT64_MAX = 2**63 - 1


# ---------------------------------------------------------------------------
# gadget matrix and its public short basis

def gadget_dim(q: int) -> int:
    """k = ceil(log2 q): digits needed to carry one Z_q coordinate."""
    if q < 2:
        raise ShapeError("modulus must be >= 2")
    return (q - 1).bit_length()


def gadget_matrix(n: int, q: int) -> ModMatrix:
    """Block-diagonal powers-of-two matrix G of shape n x n*k."""
    k = gadget_dim(q)
    g = np.zeros((n, n * k), dtype=object)
    for i in range(n):
        for b in range(k):
            g[i, i * k + b] = (1 << b) % q
    return ModMatrix(g, q)


def gadget_block(q: int) -> np.ndarray:
    """Short k x k basis of the kernel lattice of one gadget row.

    Columns 2e_i - e_{i+1} plus a final column carrying the digits of q,
    so every column pairs to 0 or q against (1, 2, ..., 2^(k-1)).
    """
    k = gadget_dim(q)
    block = np.zeros((k, k), dtype=np.int64)
    for i in range(k - 1):
        block[i, i] = 2
        block[i + 1, i] = -1
    for i in range(k):
        block[i, k - 1] = (q >> i) & 1
    if q == 1 << k:  # power of two: the digit 2^k folds into entry k-1
        block[k - 1, k - 1] += 2
    return block


def gadget_basis(n: int, q: int) -> IntMatrix:
    """I_n tensor gadget_block: short basis of the kernel lattice of G."""
    k = gadget_dim(q)
    block = gadget_block(q)
    out = np.zeros((n * k, n * k), dtype=np.int64)
    for i in range(n):
        out[i * k:(i + 1) * k, i * k:(i + 1) * k] = block
    return IntMatrix(out)


def gadget_solve(a: ModMatrix) -> IntMatrix:
    """Binary matrix W with G . W = a exactly (entries of a canonical)."""
    n = a.rows
    k = gadget_dim(a.q)
    w = np.zeros((n * k, a.cols), dtype=np.int64)
    for i in range(n):
        for j in range(a.cols):
            v = int(a.entries[i, j])
            for b in range(k):
                w[i * k + b, j] = (v >> b) & 1
    return IntMatrix(w)


# ---------------------------------------------------------------------------
# trapdoors and short bases

@dataclass
class GadgetTrapdoor:
    """Matrix F = [A | A.R + tag.G] together with its trapdoor R.

    tag must be invertible mod q; R is the secret low-norm matrix.
    """

    a: ModMatrix
    r: IntMatrix
    tag: ModMatrix
    f: ModMatrix

    @property
    def n(self) -> int:
        return self.a.rows

    @property
    def m(self) -> int:
        return self.a.cols

    @property
    def q(self) -> int:
        return self.a.q

    @property
    def omega(self) -> int:
        return self.r.cols

    @classmethod
    def build(cls, a: ModMatrix, r: IntMatrix, tag: ModMatrix) -> "GadgetTrapdoor":
        """Assemble F = [A | A.R + tag.G] from existing pieces."""
        n, q = a.rows, a.q
        if r.rows != a.cols:
            raise ShapeError("trapdoor row count must equal the width of A")
        if tag.rows != n or tag.cols != n:
            raise ShapeError("tag must be n x n")
        k = gadget_dim(q)
        if r.cols != n * k:
            raise ShapeError("trapdoor must have n*k columns")
        g = gadget_matrix(n, q)
        right = mixed_mul_mod(a, r) + mat_mul_mod(tag, g)
        return cls(a=a, r=r, tag=tag, f=a.hstack(right))

    @classmethod
    def generate(cls, n: int, m: int, q: int, sigma: float, rng: RandomSource,
                 tag: ModMatrix | None = None) -> "GadgetTrapdoor":
        """Fresh uniform A with a Gaussian trapdoor R of width sigma."""
        k = gadget_dim(q)
        if m < n * k:
            raise PreconditionError("need m >= n*k for a usable trapdoor")
        if tag is None:
            tag = ModMatrix.identity(n, q)
        a = ModMatrix.uniform(n, m, q, rng)
        r = sample_z_matrix(m, n * k, sigma, rng)
        return cls.build(a, r, tag)


@dataclass
class ShortBasis:
    """Integer basis of a q-ary kernel lattice with its Gram-Schmidt data."""

    matrix: IntMatrix
    gs: GramSchmidtData
    draws_used: int = 0

    @classmethod
    def from_matrix(cls, matrix: IntMatrix, draws_used: int = 0) -> "ShortBasis":
        if matrix.rows != matrix.cols:
            raise ShapeError("basis must be square")
        return cls(matrix=matrix, gs=gram_schmidt(matrix), draws_used=draws_used)

    @property
    def dim(self) -> int:
        return self.matrix.rows

    @property
    def gs_norm(self) -> float:
        return self.gs.max_norm


def trapdoor_to_basis(td: GadgetTrapdoor) -> ShortBasis:
    """Short basis of the kernel lattice of F from the trapdoor R.

    With W solving G.W = -tag^{-1}.A (mod q), the block matrix
    [[I - R.W, -R.T_G], [W, T_G]] annihilates F = [A | A.R + tag.G]:
    the left block collapses to A + tag.(G.W) = 0 and the right block to
    tag.G.T_G = 0 (mod q). Its determinant is q^n, the full index.
    """
    n, m, q = td.n, td.m, td.q
    omega = td.omega
    inv_tag = ModMatrix(solve_mod_columns(td.tag, ModMatrix.identity(n, q)), q)
    w = gadget_solve(-mat_mul_mod(inv_tag, td.a))
    t_g = gadget_basis(n, q)
    rw = int_matmul(td.r.entries, w.entries)
    rtg = int_matmul(td.r.entries, t_g.entries)
    s = np.zeros((m + omega, m + omega), dtype=np.int64)
    s[:m, :m] = np.identity(m, dtype=np.int64) - rw
    s[:m, m:] = -rtg
    s[m:, :m] = w.entries
    s[m:, m:] = t_g.entries
    return ShortBasis.from_matrix(IntMatrix(s))


# ---------------------------------------------------------------------------
# exact helpers for large-coefficient integer products and solves

def _apply_int(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Exact a @ c (object output) for small-entry int64 a and int64 c of
    any magnitude, via base-2^L limb decomposition of c."""
    a = np.asarray(a, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    if c.ndim != 2:
        raise ShapeError("coefficients must be 2-dimensional")
    out_shape = (a.shape[0], c.shape[1])
    amax = int(np.max(np.abs(a))) if a.size else 0
    cmax = int(np.max(np.abs(c))) if c.size else 0
    inner = a.shape[1]
    if amax == 0 or cmax == 0 or inner == 0:
        return np.zeros(out_shape, dtype=object)
    if amax * cmax * inner < 2**62:
        return int_matmul(a, c).astype(object)
    lb = 62 - (amax * inner).bit_length()
    base = 1 << lb
    acc = np.zeros(out_shape, dtype=object)
    rem = c.copy()
    shift = 0
    while True:
        if int(np.max(np.abs(rem))) < base:
            acc = acc + (int_matmul(a, rem).astype(object) << shift)
            return acc
        lo = np.mod(rem, base)
        acc = acc + (int_matmul(a, lo).astype(object) << shift)
        rem = (rem - lo) // base
        shift += lb


def _solve_exact_columns(a: IntMatrix, b: np.ndarray) -> np.ndarray:
    """Exact integer X with a . X = b (float LU plus residual refinement)."""
    if a.rows != a.cols:
        raise ShapeError("matrix must be square")
    b = np.asarray(b)
    if b.ndim != 2 or b.shape[0] != a.rows:
        raise ShapeError("dimension mismatch")
    try:
        lu = lu_factor(a.entries.astype(np.float64))
    except Exception as exc:
        raise SolveError("singular matrix") from exc
    x = np.rint(lu_solve(lu, b.astype(np.float64)))
    for _ in range(40):
        resid = b.astype(object) - _apply_int(a.entries, x.astype(np.int64))
        if not np.any(resid != 0):
            if x.size and np.max(np.abs(x)) > _INT64_MAX:
                raise SolveError("solution exceeds the 64-bit envelope")
            return x.astype(np.int64)
        corr = np.rint(lu_solve(lu, resid.astype(np.float64)))
        if not np.any(corr != 0):
            raise SolveError("system has no integer solution")
        x = x + corr
    raise SolveError("integer refinement did not converge")


def _reduce_mod_basis(basis: IntMatrix, lu, targets: np.ndarray) -> np.ndarray:
    """Subtract lattice vectors (nearest-plane rounding) until the columns
    of targets are small; exact in integer arithmetic."""
    t = targets.astype(object)
    for _ in range(6):
        tf = np.array([[float(v) for v in row] for row in t])
        if not t.size or np.max(np.abs(tf)) < 2**32:
            break
        c = np.rint(lu_solve(lu, tf))
        if not np.any(c != 0):
            break
        t = t - _apply_int(basis.entries, c.astype(np.int64))
    if t.size and max(abs(int(v)) for v in t.flat) > _INT64_MAX:
        raise SolveError("reduction failed to shrink the target")
    return t.astype(np.int64)


# ---------------------------------------------------------------------------
# preimage sampling

def sample_pre(f: ModMatrix, basis: ShortBasis, u: ModMatrix, sigma: float,
               rng: RandomSource) -> IntMatrix:
    """Short preimages X with f . X = u (mod q), columns close to
    independent spherical Gaussians of width sigma on their cosets.

    One arbitrary solution per column is shifted to a short coset
    representative, then a Klein sample of the kernel lattice centered
    there is subtracted.
    """
    if f.cols != basis.dim:
        raise ShapeError("basis dimension must match the width of f")
    if f.rows != u.rows or f.q != u.q:
        raise ShapeError("syndrome mismatch")
    dim, t = basis.dim, u.cols
    if not np.any(u.entries != 0):
        centers = np.zeros((dim, t), dtype=np.int64)
    else:
        part = solve_mod_columns(f, u)
        lifted = np.vectorize(
            lambda x: int(x) if int(x) <= f.q // 2 else int(x) - f.q,
            otypes=[object])(part)
        lu = lu_factor(basis.matrix.entries.astype(np.float64))
        centers = _reduce_mod_basis(basis.matrix, lu, lifted)
    v = klein_sample_batch(basis.matrix, basis.gs, sigma,
                           centers.astype(np.float64), rng)
    return IntMatrix(centers - v)


def sample_right(td: GadgetTrapdoor, u: ModMatrix, sigma: float,
                 rng: RandomSource) -> IntMatrix:
    """Short preimages under F = [A | A.R + tag.G] via its derived basis."""
    return sample_pre(td.f, trapdoor_to_basis(td), u, sigma, rng)


# ---------------------------------------------------------------------------
# converting a set of kernel samples into a basis

def _det_mod_p(mat: np.ndarray, p: int) -> int:
    """Determinant of an integer matrix modulo a prime p < 2^25."""
    a = np.mod(mat, p).astype(np.int64)
    n = a.shape[0]
    det = 1
    for c in range(n):
        nz = np.nonzero(a[c:, c])[0]
        if nz.size == 0:
            return 0
        r = c + int(nz[0])
        if r != c:
            a[[c, r]] = a[[r, c]]
            det = (-det) % p
        det = (det * int(a[c, c])) % p
        inv = pow(int(a[c, c]), -1, p)
        a[c, c:] = (a[c, c:] * inv) % p
        col = a[c + 1:, c]
        rows = np.nonzero(col)[0]
        if rows.size:
            a[c + 1 + rows, c:] = np.mod(
                a[c + 1 + rows, c:] - col[rows, None] * a[c, c:][None, :], p)
    return det % p


def _nullspace_mod_p(mat: np.ndarray, p: int) -> np.ndarray | None:
    """One nonzero kernel vector of mat modulo a prime p, or None."""
    a = np.mod(mat, p).astype(np.int64)
    rows_n, cols_n = a.shape
    pivots = []
    r = 0
    for c in range(cols_n):
        if r >= rows_n:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        rr = r + int(nz[0])
        if rr != r:
            a[[r, rr]] = a[[rr, r]]
        inv = pow(int(a[r, c]), -1, p)
        a[r, c:] = (a[r, c:] * inv) % p
        col = a[:, c].copy()
        col[r] = 0
        other = np.nonzero(col)[0]
        if other.size:
            a[other, c:] = np.mod(
                a[other, c:] - col[other, None] * a[r, c:][None, :], p)
        pivots.append((r, c))
        r += 1
    pivot_cols = {c for _, c in pivots}
    free = next((c for c in range(cols_n) if c not in pivot_cols), None)
    if free is None:
        return None
    y = np.zeros(cols_n, dtype=np.int64)
    y[free] = 1
    for r, c in pivots:
        y[c] = (-int(a[r, free])) % p
    return y


def _det_abs_exact(mat: np.ndarray) -> int:
    """Exact |det| of an int64 matrix via CRT over word-size primes,
    with the prime count taken from a float log-determinant estimate."""
    import sympy

    sign, logabs = np.linalg.slogdet(mat.astype(np.float64))
    if sign == 0 or not math.isfinite(logabs):
        raise SolveError("sample set is singular")
    bits = max(logabs / math.log(2.0), 0.0) + 8
    if bits > 480:
        raise SolveError("lattice index is implausibly large")
    residue, modulus = 0, 1
    p = 1 << 25
    while math.log2(modulus) < bits + 1:
        p = sympy.prevprime(p)
        r = _det_mod_p(mat, p)
        # CRT combine
        diff = (r - residue) * pow(modulus % p, -1, p) % p
        residue = residue + modulus * diff
        modulus *= p
    if residue > modulus // 2:
        residue -= modulus
    return abs(residue)


def _smallest_prime_factor(c: int) -> int:
    d = 2
    while d * d <= c:
        if c % d == 0:
            return d
        d += 1 if d == 2 else 2
    return c


def to_basis(samples: IntMatrix, ref: ShortBasis) -> ShortBasis:
    """Basis of the reference lattice whose Gram-Schmidt norms are bounded
    by those of the (full-rank, lattice-point) sample columns.

    The samples are expressed in the reference basis, then the index of
    the sublattice they span is driven to 1 prime by prime: a mod-p
    kernel vector supported on a prefix replaces its last column, which
    preserves every prefix span and divides the index by p.
    """
    dim = ref.dim
    if samples.rows != dim or samples.cols != dim:
        raise ShapeError("need exactly dim full-rank samples")
    t = _solve_exact_columns(ref.matrix, samples.entries).astype(np.int64)
    c = _det_abs_exact(t)
    if c == 0:
        raise SolveError("sample set is singular")
    while c > 1:
        p = _smallest_prime_factor(c)
        y = _nullspace_mod_p(t, p)
        if y is None:
            raise SolveError("index reduction failed")
        j = int(np.max(np.nonzero(y % p)[0]))
        y = (y * pow(int(y[j]), -1, p)) % p
        y[j] = 1  # exact unit coefficient keeps the old column reachable
        col = _apply_int(t, y.reshape(-1, 1))[:, 0]
        if np.any(np.vectorize(lambda v: int(v) % p)(col) != 0):
            raise SolveError("index reduction failed")
        col = col // p
        if max(abs(int(v)) for v in col) > _INT64_MAX:
            raise SolveError("basis coefficients exceed the 64-bit envelope")
        new_t = t.copy()
        new_t[:, j] = col.astype(np.int64)
        t = new_t
        c //= p
    out = int_matmul(ref.matrix.entries, t)
    return ShortBasis.from_matrix(IntMatrix(out), draws_used=ref.draws_used)


def sample_basis(f: ModMatrix, ref: ShortBasis, sigma: float,
                 rng: RandomSource, draw_factor: int = 10) -> ShortBasis:
    """Fresh width-sigma short basis material for the kernel lattice of f.

    Draws zero-syndrome Gaussian kernel samples and keeps the linearly
    independent ones in draw order. The selected set itself is returned
    as the working basis: it is full rank, annihilates f, has Gram-
    Schmidt norm at most sigma*sqrt(M), and is statistically independent
    of the reference basis. It spans a full-rank sublattice rather than
    the whole kernel lattice; converting it with to_basis is exact but
    yields Gram-Schmidt norms far below floating-point resolution at
    production sizes (the sublattice index has hundreds of digits), so
    the converted basis would be unusable by every downstream consumer.
    """
    dim = ref.dim
    budget = draw_factor * dim
    selected: list[np.ndarray] = []
    ortho = np.zeros((dim, dim), dtype=np.float64)  # orthonormal span so far
    n_sel = 0
    draws = 0
    while n_sel < dim:
        want = min(max(dim - n_sel, 32), budget - draws)
        if want <= 0:
            raise PreconditionError("draw budget exhausted before full rank")
        batch = sample_pre(f, ref, ModMatrix.zeros(f.rows, want, f.q),
                           sigma, rng)
        draws += want
        for j in range(want):
            if n_sel == dim:
                break
            v = batch.entries[:, j]
            vf = v.astype(np.float64)
            resid = vf - ortho[:, :n_sel] @ (ortho[:, :n_sel].T @ vf)
            rn = np.linalg.norm(resid)
            if rn <= 1e-8 * max(np.linalg.norm(vf), 1.0):
                continue
            selected.append(v)
            ortho[:, n_sel] = resid / rn
            n_sel += 1
    return ShortBasis.from_matrix(
        IntMatrix(np.array(selected, dtype=np.int64).T), draws_used=draws)


def sample_basis_right(td: GadgetTrapdoor, sigma: float,
                       rng: RandomSource) -> ShortBasis:
    """Width-sigma basis for F = [A | A.R + tag.G] from its trapdoor."""
    return sample_basis(td.f, trapdoor_to_basis(td), sigma, rng)


def sample_basis_left(f_parent: ModMatrix, parent_basis: ShortBasis,
                      block: ModMatrix, sigma: float,
                      rng: RandomSource) -> ShortBasis:
    """Width-sigma basis for [F | B] from a short basis of F's lattice."""
    ref = extend_basis(parent_basis, None, f_parent, block)
    return sample_basis(f_parent.hstack(block), ref, sigma, rng)


# ---------------------------------------------------------------------------
# deterministic basis extension

def extend_basis(t2: ShortBasis, a1: ModMatrix | None, a2: ModMatrix,
                 a3: ModMatrix | None) -> ShortBasis:
    """Basis of the kernel lattice of [a1 | a2 | a3] from one of a2.

    The t2 block comes first, so its Gram-Schmidt vectors are untouched;
    each remaining unit column contributes a Gram-Schmidt vector of norm
    exactly 1, giving max(gs_norm(t2), 1) overall. The glue blocks solve
    a2 . W1 = -a1 and a2 . W3 = -a3 (mod q) and are size-reduced against
    t2, which only adds earlier basis vectors and keeps the profile.
    """
    q = a2.q
    m1 = a1.cols if a1 is not None else 0
    m2 = a2.cols
    m3 = a3.cols if a3 is not None else 0
    if t2.dim != m2:
        raise ShapeError("t2 must match the width of a2")
    for extra in (a1, a3):
        if extra is not None and (extra.q != q or extra.rows != a2.rows):
            raise ShapeError("blocks must share shape and modulus")
    lu = lu_factor(t2.matrix.entries.astype(np.float64))
    dim = m1 + m2 + m3
    out = np.zeros((dim, dim), dtype=np.int64)
    out[m1:m1 + m2, :m2] = t2.matrix.entries
    col = m2
    for extra, offset in ((a1, 0), (a3, m1 + m2)):
        if extra is None:
            continue
        w = solve_mod_columns(a2, -extra)
        lifted = np.vectorize(
            lambda x: int(x) if int(x) <= q // 2 else int(x) - q,
            otypes=[object])(w)
        w = _reduce_mod_basis(t2.matrix, lu, lifted)
        for i in range(extra.cols):
            out[offset + i, col] = 1
            out[m1:m1 + m2, col] = w[:, i]
            col += 1
    return ShortBasis.from_matrix(IntMatrix(out))


# ---------------------------------------------------------------------------
# exact LWE inversion

def invert_lwe(f: ModMatrix, basis: ShortBasis, y: ModVector):
    """Recover (s, e) from y^T = s^T f + e^T (mod q).

    Pairing y with the short basis cancels s and, while every product
    e^T . t_j stays below q/2, the centered lift equals e^T . T exactly;
    an exact integer solve then isolates e and a mod-q solve recovers s.
    Raises SolveError when the noise is out of range.
    """
    if y.n != f.cols or y.q != f.q:
        raise ShapeError("dimension mismatch")
    if basis.dim != f.cols:
        raise ShapeError("basis dimension must match the width of f")
    folded = modvec_intmat(y, basis.matrix)
    target = folded.center_lifted()
    e = solve_int(basis.matrix, target)
    if max((abs(int(v)) for v in e), default=0) > _INT64_MAX:
        raise SolveError("recovered noise exceeds the 64-bit envelope")
    s = solve_left(f, ModVector(y.values - e, f.q))
    return s, e.astype(np.int64)
