"""Exact dense linear algebra over Z_q and over the signed integers.

Matrices over Z_q keep their entries canonically in [0, q) as Python
integers (numpy object arrays), so moduli up to 2^62 never overflow.
Signed integer matrices (trapdoors, noise, short bases) use int64 with
checked products; hot products route through int64/float fast paths when
the operand bounds make them exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    IntegerOverflowError,
    NonIntegralError,
    ShapeError,
    SolveError,
)

_INT64_MAX = 2**63 - 1


def _as_object_array(data, rows=None, cols=None):
    arr = np.array(data, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError("matrix data must be 2-dimensional")
    if rows is not None and arr.shape != (rows, cols):
        raise ShapeError(f"expected shape {(rows, cols)}, got {arr.shape}")
    return arr


class ModMatrix:
    """Dense matrix over Z_q; entries canonical in [0, q)."""

    __slots__ = ("rows", "cols", "q", "entries")

    def __init__(self, data, q: int):
        if q < 2:
            raise ShapeError("modulus must be >= 2")
        arr = _as_object_array(data)
        arr = np.vectorize(lambda x: int(x) % q, otypes=[object])(arr)
        self.entries = arr
        self.rows, self.cols = arr.shape
        self.q = int(q)
        self.entries.flags.writeable = False

    @classmethod
    def zeros(cls, rows: int, cols: int, q: int) -> "ModMatrix":
        return cls(np.zeros((rows, cols), dtype=object), q)

    @classmethod
    def identity(cls, n: int, q: int) -> "ModMatrix":
        return cls(np.identity(n, dtype=np.int64), q)

    @classmethod
    def uniform(cls, rows: int, cols: int, q: int, rng) -> "ModMatrix":
        return cls(rng.integers(q, size=(rows, cols)), q)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModMatrix)
            and self.q == other.q
            and self.entries.shape == other.entries.shape
            and bool(np.all(self.entries == other.entries))
        )

    def __add__(self, other: "ModMatrix") -> "ModMatrix":
        self._check_same(other)
        return ModMatrix(self.entries + other.entries, self.q)

    def __sub__(self, other: "ModMatrix") -> "ModMatrix":
        self._check_same(other)
        return ModMatrix(self.entries - other.entries, self.q)

    def __neg__(self) -> "ModMatrix":
        return ModMatrix(-self.entries, self.q)

    def scale(self, c: int) -> "ModMatrix":
        return ModMatrix(self.entries * (int(c) % self.q), self.q)

    def hstack(self, other: "ModMatrix") -> "ModMatrix":
        if self.q != other.q or self.rows != other.rows:
            raise ShapeError("hstack needs equal row counts and moduli")
        return ModMatrix(np.hstack([self.entries, other.entries]), self.q)

    def column(self, j: int) -> "ModVector":
        return ModVector(self.entries[:, j], self.q)

    def to_int64(self) -> np.ndarray:
        return self.entries.astype(np.int64)

    def _check_same(self, other: "ModMatrix"):
        if self.q != other.q:
            raise ShapeError("modulus mismatch")
        if self.entries.shape != other.entries.shape:
            raise ShapeError("shape mismatch")

    def __repr__(self):
        return f"ModMatrix({self.rows}x{self.cols} mod {self.q})"


class ModVector:
    """Row vector over Z_q; canonical entries in [0, q)."""

    __slots__ = ("n", "q", "values")

    def __init__(self, values, q: int):
        if q < 2:
            raise ShapeError("modulus must be >= 2")
        arr = np.array(values, dtype=object).reshape(-1)
        arr = np.vectorize(lambda x: int(x) % q, otypes=[object])(arr)
        self.values = arr
        self.n = arr.shape[0]
        self.q = int(q)
        self.values.flags.writeable = False

    @classmethod
    def zeros(cls, n: int, q: int) -> "ModVector":
        return cls([0] * n, q)

    @classmethod
    def uniform(cls, n: int, q: int, rng) -> "ModVector":
        return cls(rng.integers(q, size=n), q)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ModVector)
            and self.q == other.q
            and self.n == other.n
            and bool(np.all(self.values == other.values))
        )

    def __add__(self, other: "ModVector") -> "ModVector":
        if self.q != other.q or self.n != other.n:
            raise ShapeError("vector mismatch")
        return ModVector(self.values + other.values, self.q)

    def __sub__(self, other: "ModVector") -> "ModVector":
        if self.q != other.q or self.n != other.n:
            raise ShapeError("vector mismatch")
        return ModVector(self.values - other.values, self.q)

    def concat(self, other: "ModVector") -> "ModVector":
        if self.q != other.q:
            raise ShapeError("modulus mismatch")
        return ModVector(np.concatenate([self.values, other.values]), self.q)

    def center_lifted(self) -> np.ndarray:
        """Signed representatives in (-q/2, q/2], as python ints."""
        return np.array([center_lift(int(x), self.q) for x in self.values],
                        dtype=object)

    def __repr__(self):
        return f"ModVector(len {self.n} mod {self.q})"


class IntMatrix:
    """Dense signed-integer matrix (int64); products are overflow-checked."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, data):
        arr = np.array(data)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError("matrix data must be 2-dimensional")
        if arr.dtype == object:
            bound = max((abs(int(x)) for x in arr.flat), default=0)
            if bound > _INT64_MAX:
                raise IntegerOverflowError("entry exceeds the 64-bit envelope")
            arr = arr.astype(np.int64)
        else:
            arr = arr.astype(np.int64)
        self.entries = arr
        self.rows, self.cols = arr.shape
        self.entries.flags.writeable = False

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "IntMatrix":
        return cls(np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls(np.identity(n, dtype=np.int64))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IntMatrix)
            and self.entries.shape == other.entries.shape
            and bool(np.array_equal(self.entries, other.entries))
        )

    def max_abs(self) -> int:
        if self.entries.size == 0:
            return 0
        return int(np.max(np.abs(self.entries)))

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j]

    def matmul(self, other: "IntMatrix") -> "IntMatrix":
        if self.cols != other.rows:
            raise ShapeError("dimension mismatch")
        prod = int_matmul(self.entries, other.entries)
        return IntMatrix(prod)

    def __repr__(self):
        return f"IntMatrix({self.rows}x{self.cols})"


@dataclass(frozen=True)
class GramSchmidtData:
    """Gram-Schmidt orthogonalization of a column basis.

    ortho holds the (unnormalized) orthogonal vectors as float columns;
    norms their Euclidean lengths; max_norm the Gram-Schmidt norm.
    """

    ortho: np.ndarray
    norms: np.ndarray
    max_norm: float


def int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact product of signed integer matrices, overflow-checked.

    Picks float64 (BLAS) when every intermediate is exactly representable,
    int64 when partial sums cannot wrap, and falls back to python ints
    otherwise. Raises if the *result* does not fit int64.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    amax = int(np.max(np.abs(a))) if a.dtype != object else max(abs(int(x)) for x in a.flat)
    bmax = int(np.max(np.abs(b))) if b.dtype != object else max(abs(int(x)) for x in b.flat)
    inner = a.shape[1]
    bound = amax * bmax * inner
    if bound < 2**52:
        out = np.rint(a.astype(np.float64) @ b.astype(np.float64))
        return out.astype(np.int64)
    if bound < 2**62:
        return (a.astype(np.int64) @ b.astype(np.int64)).astype(np.int64)
    # exact big-int path; verify the result itself fits
    out = a.astype(object) @ b.astype(object)
    res_max = max((abs(int(x)) for x in out.flat), default=0)
    if res_max > _INT64_MAX:
        raise IntegerOverflowError("product exceeds the 64-bit envelope")
    return out.astype(np.int64)


def mat_mul_mod(a: ModMatrix, b: ModMatrix) -> ModMatrix:
    """(a . b) mod q with canonical entries."""
    if a.q != b.q:
        raise ShapeError("modulus mismatch")
    if a.cols != b.rows:
        raise ShapeError("dimension mismatch")
    return ModMatrix(a.entries @ b.entries, a.q)


def _limb_split(arr: np.ndarray, limb_bits: int):
    """Split a nonneg big-int object array into int64 limbs, low first."""
    limbs = []
    rem = arr
    mask = (1 << limb_bits) - 1
    while True:
        low = np.vectorize(lambda x: int(x) & mask, otypes=[object])(rem)
        limbs.append(low.astype(np.int64))
        rem = np.vectorize(lambda x: int(x) >> limb_bits, otypes=[object])(rem)
        if not np.any(rem != 0):
            break
    return limbs


def mixed_mul_mod(a: ModMatrix, r: IntMatrix) -> ModMatrix:
    """(a . (r mod q)) mod q for a mod-q matrix times a signed matrix."""
    if a.cols != r.rows:
        raise ShapeError("dimension mismatch")
    q = a.q
    rmax = r.max_abs()
    inner = a.cols
    # limb width chosen so limb * |r| * inner stays well inside int64
    if rmax == 0 or inner == 0:
        return ModMatrix.zeros(a.rows, r.cols, q)
    limb_bits = 62 - (rmax * inner).bit_length()
    if limb_bits >= 8:
        limbs = _limb_split(a.entries, limb_bits)
        acc = np.zeros((a.rows, r.cols), dtype=object)
        shift = 0
        for limb in limbs:
            part = int_matmul(limb, r.entries).astype(object)
            acc = (acc + (part << shift)) % q
            shift += limb_bits
        return ModMatrix(acc, q)
    return ModMatrix(a.entries @ r.entries.astype(object), q)


def modvec_mat(v: ModVector, a: ModMatrix) -> ModVector:
    """v^T . a mod q."""
    if v.n != a.rows:
        raise ShapeError("dimension mismatch")
    if v.q != a.q:
        raise ShapeError("modulus mismatch")
    return ModVector(v.values @ a.entries, a.q)


def modvec_intmat(v: ModVector, r: IntMatrix) -> ModVector:
    """v^T . r mod q, via limb decomposition when profitable."""
    if v.n != r.rows:
        raise ShapeError("dimension mismatch")
    q = v.q
    rmax = r.max_abs()
    if rmax == 0 or v.n == 0:
        return ModVector.zeros(r.cols, q)
    limb_bits = 62 - (rmax * v.n).bit_length()
    if limb_bits >= 8:
        limbs = _limb_split(v.values.reshape(1, -1), limb_bits)
        acc = np.zeros(r.cols, dtype=object)
        shift = 0
        for limb in limbs:
            part = int_matmul(limb, r.entries).astype(object)[0]
            acc = (acc + (part << shift)) % q
            shift += limb_bits
        return ModVector(acc, q)
    return ModVector(v.values @ r.entries.astype(object), q)


def center_lift(x: int, q: int) -> int:
    """Unique representative of x in (-q/2, q/2]; q/2 maps to +q/2."""
    if not 0 <= x < q:
        raise ShapeError("input must be canonical in [0, q)")
    return x if x <= q // 2 else x - q


def _inv_mod(x: int, q: int) -> int:
    return pow(x % q, -1, q)


def _row_echelon_mod(rows, q):
    """In-place elimination of [coeffs | rhs...] rows over Z_q (q prime).

    Returns the list of (row_index, pivot_col) in elimination order.
    """
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(n_cols):
        if r >= n_rows:
            break
        pivot = next((i for i in range(r, n_rows) if rows[i][c] % q != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = _inv_mod(rows[r][c], q)
        rows[r] = [(inv * v) % q for v in rows[r]]
        for i in range(n_rows):
            if i != r and rows[i][c] % q != 0:
                f = rows[i][c]
                rows[i] = [(vi - f * vr) % q for vi, vr in zip(rows[i], rows[r])]
        pivots.append((r, c))
        r += 1
    return pivots


def solve_left(a: ModMatrix, b: ModVector) -> ModVector:
    """Solve s^T . a = b^T (mod q) for the unique s; q must be prime.

    The system is treated column-wise: each column of a yields one
    equation in the n unknowns s_1..s_n.
    """
    if a.cols != b.n:
        raise ShapeError("dimension mismatch")
    if a.q != b.q:
        raise ShapeError("modulus mismatch")
    q = a.q
    n = a.rows
    rows = [
        [int(a.entries[i, j]) for i in range(n)] + [int(b.values[j])]
        for j in range(a.cols)
    ]
    pivots = _row_echelon_mod(rows, q)
    if len(pivots) < n or any(c >= n for _, c in pivots):
        # a pivot in the rhs column means 0 = nonzero
        if any(c == n for _, c in pivots):
            raise SolveError("inconsistent system")
        raise SolveError("rank-deficient system: no unique solution")
    s = [0] * n
    for r, c in pivots:
        s[c] = rows[r][n]
    # guard against inconsistency in the non-pivot equations
    for j in range(a.cols):
        lhs = sum(s[i] * int(a.entries[i, j]) for i in range(n)) % q
        if lhs != int(b.values[j]):
            raise SolveError("inconsistent system")
    return ModVector(s, q)


def solve_mod_columns(a: ModMatrix, u: ModMatrix) -> np.ndarray:
    """One integer solution X (object array, entries in [0, q)) of a.X = u.

    q must be prime and a must have full row rank n.
    """
    if a.rows != u.rows:
        raise ShapeError("dimension mismatch")
    if a.q != u.q:
        raise ShapeError("modulus mismatch")
    q = a.q
    n, m = a.rows, a.cols
    t = u.cols
    rows = [
        [int(a.entries[i, j]) for j in range(m)]
        + [int(u.entries[i, k]) for k in range(t)]
        for i in range(n)
    ]
    pivots = _row_echelon_mod(rows, q)
    if len(pivots) < n or any(c >= m for _, c in pivots):
        raise SolveError("matrix does not have full row rank")
    x = np.zeros((m, t), dtype=object)
    for r, c in pivots:
        for k in range(t):
            x[c, k] = rows[r][m + k]
    return x


def _exact_vecmat(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Exact x^T . t for integer vector x and int64 matrix t (object out)."""
    return (x.astype(object).reshape(1, -1) @ t.astype(object))[0]


def solve_int(t: IntMatrix, y) -> np.ndarray:
    """Solve x^T . t = y^T exactly over the integers.

    Raises SolveError if t is singular and NonIntegralError if the unique
    rational solution is not integral (noise out of bound in decryption).
    """
    if t.rows != t.cols:
        raise ShapeError("matrix must be square")
    y = np.array(y, dtype=object).reshape(-1)
    if y.shape[0] != t.cols:
        raise ShapeError("dimension mismatch")
    m = t.rows
    if m <= 64:
        return _solve_int_rational(t, y)
    tf = t.entries.astype(np.float64).T  # solve t^T x = y
    try:
        lu_piv = None
        from scipy.linalg import lu_factor, lu_solve
        lu_piv = lu_factor(tf)
    except Exception as exc:  # singular to working precision
        raise SolveError("singular matrix") from exc
    yf = y.astype(np.float64)
    x = np.rint(lu_solve(lu_piv, yf))
    for _ in range(30):
        resid = y - _exact_vecmat(x, t.entries)
        if not np.any(resid != 0):
            bound = max((abs(int(v)) for v in x), default=0)
            if bound > _INT64_MAX:
                raise IntegerOverflowError("solution exceeds 64-bit envelope")
            return x.astype(object)
        corr = lu_solve(lu_piv, resid.astype(np.float64))
        if not np.any(np.rint(corr) != 0):
            # converged to a fractional solution
            raise NonIntegralError("solution is not integral")
        x = x + np.rint(corr)
    raise NonIntegralError("solution is not integral")


def _solve_int_rational(t: IntMatrix, y: np.ndarray) -> np.ndarray:
    """Exact Fraction-based solve of x^T . t = y^T (small dimensions)."""
    m = t.rows
    rows = [
        [Fraction(int(t.entries[i, j])) for i in range(m)]
        + [Fraction(int(y[j]))]
        for j in range(m)
    ]
    for c in range(m):
        pivot = next((i for i in range(c, m) if rows[i][c] != 0), None)
        if pivot is None:
            raise SolveError("singular matrix")
        rows[c], rows[pivot] = rows[pivot], rows[c]
        inv = 1 / rows[c][c]
        rows[c] = [v * inv for v in rows[c]]
        for i in range(m):
            if i != c and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [vi - f * vc for vi, vc in zip(rows[i], rows[c])]
    sol = [rows[c][m] for c in range(m)]
    if any(v.denominator != 1 for v in sol):
        raise NonIntegralError("solution is not integral")
    return np.array([int(v) for v in sol], dtype=object)


GS_REL_TOL = 1e-9


def gram_schmidt(b: IntMatrix) -> GramSchmidtData:
    """Classical Gram-Schmidt of the columns of b, in column order.

    Computed via QR: the i-th orthogonal vector equals Q[:, i] * R[i, i].
    Raises SolveError when a column is (numerically) dependent.
    """
    a = b.entries.astype(np.float64)
    if b.rows < b.cols:
        raise SolveError("dependent columns: more columns than rows")
    qm, rm = np.linalg.qr(a)
    diag = np.diag(rm)
    norms = np.abs(diag)
    col_norms = np.linalg.norm(a, axis=0)
    if np.any(norms <= GS_REL_TOL * np.maximum(col_norms, 1.0)):
        raise SolveError("dependent columns")
    ortho = qm * diag[np.newaxis, :]
    ortho.flags.writeable = False
    norms.flags.writeable = False
    return GramSchmidtData(ortho=ortho, norms=norms, max_norm=float(np.max(norms)))


def s1_upper(r: IntMatrix) -> float:
    """Upper estimate of the largest singular value of r.

    Power iteration on the Gram matrix (100 iterations) inflated by 1%.
    """
    a = r.entries.astype(np.float64)
    if a.size == 0 or not np.any(a):
        return 0.0
    g = a.T @ a if a.shape[1] <= a.shape[0] else a @ a.T
    n = g.shape[0]
    v = np.ones(n) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    for _ in range(100):
        w = g @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    s1 = math.sqrt(float(v @ (g @ v)))
    return s1 * 1.01
