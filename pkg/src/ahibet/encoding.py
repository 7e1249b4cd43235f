"""Identity material: full-rank difference encoding into Z_q^{n x n},
hashing of identity paths onto Z_q^n, and the rounding decoder.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import PreconditionError, ShapeError
from .linalg import ModMatrix, ModVector


@dataclass(frozen=True)
class IdentityPath:
    """Hierarchical identity: an ordered tuple of nonzero vectors in Z_q^n."""

    components: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        comps = tuple(tuple(int(x) for x in c) for c in self.components)
        if not comps:
            raise PreconditionError("identity path must have depth >= 1")
        n = len(comps[0])
        for c in comps:
            if len(c) != n:
                raise ShapeError("identity components must share one length")
            if all(x == 0 for x in c):
                raise PreconditionError("identity component must be nonzero")
        object.__setattr__(self, "components", comps)

    @property
    def depth(self) -> int:
        return len(self.components)

    @property
    def n(self) -> int:
        return len(self.components[0])

    def prefix(self, depth: int) -> "IdentityPath":
        if not 1 <= depth <= self.depth:
            raise PreconditionError("invalid prefix depth")
        return IdentityPath(self.components[:depth])

    def child(self, component: Sequence[int]) -> "IdentityPath":
        return IdentityPath(self.components + (tuple(int(x) for x in component),))

    def is_prefix_of(self, other: "IdentityPath") -> bool:
        return (self.depth <= other.depth
                and other.components[: self.depth] == self.components)


# ---------------------------------------------------------------------------
# polynomial arithmetic mod (f, q) for the full-rank difference encoding

def _poly_mul_mod(a, b, f, q):
    """(a * b) mod (f, q); f monic of degree n given by its low coeffs."""
    n = len(f)
    prod = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % q
    # reduce: x^n = -f(x) (low part)
    for deg in range(len(prod) - 1, n - 1, -1):
        c = prod[deg]
        if c:
            prod[deg] = 0
            for i in range(n):
                prod[deg - n + i] = (prod[deg - n + i] - c * f[i]) % q
    out = prod[:n]
    out += [0] * (n - len(out))
    return out


def _poly_pow_x(e, f, q):
    """x^e mod (f, q) by square-and-multiply."""
    n = len(f)
    result = [1] + [0] * (n - 1)
    base = ([0, 1] + [0] * (n - 2))[:n] if n > 1 else [(-f[0]) % q]
    while e:
        if e & 1:
            result = _poly_mul_mod(result, base, f, q)
        base = _poly_mul_mod(base, base, f, q)
        e >>= 1
    return result


def _poly_gcd(a, b, q):
    a = [x % q for x in a]
    b = [x % q for x in b]

    def deg(p):
        for i in range(len(p) - 1, -1, -1):
            if p[i] % q:
                return i
        return -1

    while deg(b) >= 0:
        da, db = deg(a), deg(b)
        if da < db:
            a, b = b, a
            continue
        inv = pow(b[deg(b)], -1, q)
        shift = da - db
        f = (a[da] * inv) % q
        a = [(a[i] - f * b[i - shift]) % q
             if shift <= i < shift + len(b) else a[i]
             for i in range(len(a))]
        if deg(a) < deg(b):
            a, b = b, a
    return a


def _is_irreducible(coeffs, n, q):
    """Rabin irreducibility test of x^n + sum coeffs_i x^i over Z_q."""
    f = list(coeffs)  # low coefficients; leading 1 implicit
    # x^(q^n) == x mod f
    xqn = _poly_pow_x(q**n, f, q)
    x = ([0, 1] + [0] * (n - 2))[:n] if n > 1 else [(-f[0]) % q]
    if xqn != x:
        return False
    # gcd(x^(q^(n/p)) - x, f) == 1 for every prime p | n
    for p in _prime_factors(n):
        d = n // p
        xp = _poly_pow_x(q**d, f, q)
        diff = [(xi - yi) % q for xi, yi in zip(xp, x)]
        g = _poly_gcd(f + [1], diff, q)
        gdeg = max((i for i, c in enumerate(g) if c % q), default=-1)
        if gdeg != 0:
            return False
    return True


def _prime_factors(n):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@dataclass(frozen=True)
class FrdContext:
    """Degree, modulus, and the fixed irreducible modulus polynomial.

    f stores the low coefficients (c_0, ..., c_{n-1}) of the monic
    polynomial x^n + c_{n-1} x^{n-1} + ... + c_0.
    """

    n: int
    q: int
    f: Tuple[int, ...]

    def __post_init__(self):
        if len(self.f) != self.n:
            raise ShapeError("modulus polynomial has wrong degree")
        if not _is_irreducible(self.f, self.n, self.q):
            raise PreconditionError("modulus polynomial is not irreducible")


def find_irreducible(n: int, q: int) -> FrdContext:
    """Deterministic first irreducible monic polynomial of degree n.

    Candidates x^n + c_{n-1} x^{n-1} + ... + c_0 are scanned in ascending
    order of the value c_0 + c_1 q + ... + c_{n-1} q^(n-1).
    """
    if n < 1 or q < 2:
        raise PreconditionError("need n >= 1 and prime q")
    start = 0
    if n % 4 == 0 and q % 4 == 3:
        # Binomial criterion: for 4 | n, x^n - a is irreducible over Z_q
        # only when q = 1 (mod 4), so the whole constant-only prefix of
        # the scan is reducible and may be skipped wholesale.
        start = q
    for val in range(start, q**n):
        coeffs = []
        v = val
        for _ in range(n):
            coeffs.append(v % q)
            v //= q
        if _is_irreducible(tuple(coeffs), n, q):
            return FrdContext(n=n, q=q, f=tuple(coeffs))
    raise PreconditionError("no irreducible polynomial found")  # unreachable


def frd(ctx: FrdContext, u) -> ModMatrix:
    """Multiplication-by-g_u matrix in Z_q[x]/(f), g_u = sum u_i x^(i-1).

    Differences of distinct encodings are invertible because the quotient
    ring is a field.
    """
    n, q = ctx.n, ctx.q
    if isinstance(u, ModVector):
        u = [int(x) for x in u.values]
    u = [int(x) % q for x in u]
    if len(u) != n:
        raise ShapeError("vector length must equal n")
    f = list(ctx.f)
    cols = []
    power = [1] + [0] * (n - 1)  # x^(j-1)
    for _ in range(n):
        cols.append(_poly_mul_mod(u, power, f, q))
        power = _poly_mul_mod(power, ([0, 1] + [0] * (n - 2))[:n] if n > 1
                              else [(-f[0]) % q], f, q)
    return ModMatrix(np.array(cols, dtype=object).T, q)


# ---------------------------------------------------------------------------
# hashing identity paths onto Z_q^n

def frame_path(path: IdentityPath) -> bytes:
    """Canonical length-prefixed byte framing of an identity path."""
    out = [path.depth.to_bytes(8, "little")]
    for comp in path.components:
        out.append(len(comp).to_bytes(8, "little"))
        for x in comp:
            out.append(int(x).to_bytes(8, "little"))
    return b"".join(out)


def hash_to_zqn(ctx: FrdContext, path: IdentityPath) -> ModVector:
    """SHAKE-256 digest of the framed path, mapped unbiased onto Z_q^n."""
    n, q = ctx.n, ctx.q
    xof = hashlib.shake_256(frame_path(path))
    limit = (2**64 // q) * q  # rejection bound removes modulo bias
    coords = []
    chunk = 4096
    offset = 0
    stream = b""
    while len(coords) < n:
        if offset + 8 > len(stream):
            stream = xof.digest(len(stream) + chunk)
        v = int.from_bytes(stream[offset:offset + 8], "little")
        offset += 8
        if v < limit:
            coords.append(v % q)
    return ModVector(coords, q)


# ---------------------------------------------------------------------------
# rounding decoder

def round_bit(x: int, q: int) -> int:
    """0 iff x is strictly closer to 0 than to floor(q/2) mod q; ties -> 1."""
    if not 0 <= x < q:
        raise ShapeError("input must be canonical in [0, q)")
    d0 = min(x, q - x)
    half = q // 2
    d1 = min(abs(x - half), q - abs(x - half))
    return 0 if d0 < d1 else 1


def round_vec(v: ModVector) -> np.ndarray:
    """Coordinate-wise round_bit."""
    return np.array([round_bit(int(x), v.q) for x in v.values], dtype=np.int64)
