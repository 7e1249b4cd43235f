"""Structured randomness: discrete Gaussians over Z and over lattice
cosets, non-spherical compensation noise, and LWE-sample re-randomization.

Width convention: a Gaussian of width sigma has density proportional to
exp(-pi * x^2 / sigma^2), so its variance is roughly sigma^2 / (2*pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, ShapeError
from .linalg import GramSchmidtData, IntMatrix, ModVector, modvec_intmat, s1_upper

DEFAULT_TAILCUT = 13.0
_TWO_PI = 2.0 * math.pi


def slack_log(x: float) -> float:
    """Concrete stand-in for the omega(log .) asymptotic slack."""
    return math.log(2.0 * x) + 10.0


def gs_slack(x: float) -> float:
    """Concrete stand-in for the omega(sqrt(log .)) asymptotic slack."""
    return math.sqrt(slack_log(x))


# the re-randomization slack shares the same concrete family
rerand_slack = gs_slack


@dataclass(frozen=True)
class GaussianParam:
    """Width, center, and tail cut of a one-dimensional discrete Gaussian."""

    sigma: float
    center: float = 0.0
    tailcut: float = DEFAULT_TAILCUT

    def __post_init__(self):
        if self.sigma <= 0:
            raise PreconditionError("sigma must be positive")
        if self.tailcut < 6:
            raise PreconditionError("tailcut must be at least 6")


class RandomSource:
    """Seedable deterministic randomness; same seed, same stream.

    Owned by a single consumer at a time; distinct sources may run in
    parallel.
    """

    SEED_BYTES = 32

    def __init__(self, seed=None):
        if seed is None:
            import os

            seed = os.urandom(self.SEED_BYTES)
        if isinstance(seed, str):
            seed = bytes.fromhex(seed)
        if isinstance(seed, bytes):
            if len(seed) != self.SEED_BYTES:
                raise PreconditionError("seed must be exactly 32 bytes")
            seed = int.from_bytes(seed, "little")
        self._gen = np.random.Generator(np.random.PCG64(int(seed)))

    def bytes(self, n: int) -> bytes:
        return self._gen.bytes(n)

    def integers(self, high, low=None, size=None):
        """Uniform integers in [0, high) or [low, high] when low given."""
        if low is None:
            return self._gen.integers(0, high, size=size, dtype=np.int64)
        return self._gen.integers(low, high, size=size, endpoint=True,
                                  dtype=np.int64)

    def random(self, size=None):
        return self._gen.random(size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def bits(self, n: int) -> np.ndarray:
        return self._gen.integers(0, 2, size=n, dtype=np.int64)


def sample_z(p: GaussianParam, rng: RandomSource) -> int:
    """One draw from the discrete Gaussian D_{Z, sigma, center}.

    Rejection from the uniform distribution on the truncated support
    against the exact density; the output never leaves
    [center - t*sigma, center + t*sigma].
    """
    out = sample_z_batch(p.sigma, np.array([p.center]), rng, tailcut=p.tailcut)
    return int(out[0])


def sample_z_batch(sigma: float, centers: np.ndarray, rng: RandomSource,
                   tailcut: float = DEFAULT_TAILCUT) -> np.ndarray:
    """Independent D_{Z, sigma, c_i} draws, one per center (vectorized).

    Rejection from the uniform distribution on the truncated support
    against the exact density; per lane the first accepted candidate in
    draw order is kept, so blocking candidates changes nothing about the
    output law. The acceptance rate is about 1/(2*tailcut), hence the
    block size.
    """
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    centers = np.asarray(centers, dtype=np.float64)
    shape = centers.shape
    c = centers.reshape(-1)
    lo = np.ceil(c - tailcut * sigma).astype(np.int64)
    hi = np.floor(c + tailcut * sigma).astype(np.int64)
    out = np.zeros(c.shape[0], dtype=np.int64)
    pending = np.arange(c.shape[0])
    inv_s2 = math.pi / (sigma * sigma)
    block = max(8, int(3.0 * tailcut))
    while pending.size:
        cand = rng._gen.integers(lo[pending, None], hi[pending, None],
                                 size=(pending.size, block), endpoint=True,
                                 dtype=np.int64)
        u = rng.random((pending.size, block))
        delta = cand.astype(np.float64) - c[pending, None]
        accept = u < np.exp(-inv_s2 * delta * delta)
        hit = accept.any(axis=1)
        first = np.argmax(accept, axis=1)
        rows = np.nonzero(hit)[0]
        out[pending[rows]] = cand[rows, first[rows]]
        pending = pending[~hit]
    return out.reshape(shape)


def sample_z_matrix(rows: int, cols: int, sigma: float,
                    rng: RandomSource) -> IntMatrix:
    """Matrix of i.i.d. D_{Z, sigma} entries."""
    flat = sample_z_batch(sigma, np.zeros(rows * cols), rng)
    return IntMatrix(flat.reshape(rows, cols))


def klein_sample(basis: IntMatrix, gs: GramSchmidtData, sigma: float,
                 center, rng: RandomSource) -> np.ndarray:
    """One lattice point from (approximately) D_{L(basis), sigma, center}.

    Randomized nearest-plane descent in reverse column order.
    """
    out = klein_sample_batch(basis, gs, sigma,
                             np.asarray(center, dtype=np.float64).reshape(-1, 1),
                             rng)
    return out[:, 0]


def klein_sample_batch(basis: IntMatrix, gs: GramSchmidtData, sigma: float,
                       centers: np.ndarray, rng: RandomSource) -> np.ndarray:
    """Batched randomized nearest-plane sampling; one column per target.

    centers is (m, t); the t samples use independent per-coordinate
    Gaussian draws but share the descent structure, so a batch is
    distributed as t independent klein_sample calls.
    """
    m = basis.cols
    if basis.rows != m:
        raise ShapeError("basis must be square")
    if sigma < gs.max_norm * gs_slack(m):
        raise PreconditionError(
            f"sigma {sigma:g} below Gram-Schmidt bound "
            f"{gs.max_norm * gs_slack(m):g}")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] != m:
        raise ShapeError("centers must be (m, t)")
    t = centers.shape[1]
    coeffs = np.zeros((m, t), dtype=np.float64)
    bf = basis.entries.astype(np.float64)
    n2 = gs.norms ** 2
    # projections of the targets and of the basis columns onto the
    # Gram-Schmidt directions; mu is unit upper triangular, so the
    # center at step i is p[i] minus the contributions of the already
    # chosen coefficients z_{i+1..m-1}
    p = (gs.ortho.T @ centers) / n2[:, None]
    mu = (gs.ortho.T @ bf) / n2[:, None]
    for i in range(m - 1, -1, -1):
        ci = p[i] - mu[i, i + 1:] @ coeffs[i + 1:]
        coeffs[i] = sample_z_batch(sigma / gs.norms[i], ci, rng)
    # assemble exactly in integer arithmetic
    from .linalg import int_matmul

    return int_matmul(basis.entries, coeffs.astype(np.int64))


ROUNDING_WIDTH = 4.0


def sample_nonspherical(cov: np.ndarray, rng: RandomSource) -> np.ndarray:
    """Integer vector with (width-squared) covariance close to cov.

    cov is in width-squared units: cov = s^2 * I matches D_{Z, s} per
    coordinate. Sampled as Cholesky-correlated continuous Gaussians plus
    coordinate-wise randomized rounding of width ROUNDING_WIDTH.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ShapeError("covariance must be square")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise PreconditionError("covariance is not positive definite") from exc
    cont = chol @ (rng.normal(cov.shape[0]) / math.sqrt(_TWO_PI))
    return sample_z_batch(ROUNDING_WIDTH, cont, rng)


def rerand(d: IntMatrix, c: ModVector, r: float, sigma: float,
           rng: RandomSource) -> ModVector:
    """Re-randomize an LWE sample c^T = b^T + z^T into one over b^T . d.

    Output is c^T . d + w mod q where w compensates the covariance so the
    total noise is close to D_{Z, 2*r*sigma} per coordinate.
    """
    m, ell = d.rows, d.cols
    if c.n != m:
        raise ShapeError("dimension mismatch")
    s1 = s1_upper(d)
    if sigma < s1:
        raise PreconditionError(f"sigma {sigma:g} below s1 bound {s1:g}")
    if r < rerand_slack(max(m, ell)):
        raise PreconditionError("r below the re-randomization slack")
    df = d.entries.astype(np.float64)
    cov = (2.0 * r * sigma) ** 2 * np.eye(ell) - r * r * (df.T @ df)
    w = sample_nonspherical(cov, rng)
    base = modvec_intmat(c, d)
    return ModVector(base.values + w.astype(object), c.q)
