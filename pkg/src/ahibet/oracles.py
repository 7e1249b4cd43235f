"""Independent brute-force and statistical oracles used by the test
suite to validate the samplers and the scheme.

Nothing here may call into the modules it validates: only the mod-q
primitives and raw randomness are used.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .errors import PreconditionError, ShapeError
from .linalg import IntMatrix, ModMatrix, ModVector, modvec_mat


@dataclass(frozen=True)
class PmfTable:
    """Exact normalized probabilities of a truncated discrete Gaussian."""

    support: np.ndarray  # integer points, ascending
    probs: np.ndarray

    def __post_init__(self):
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-12:
            raise PreconditionError("probabilities must sum to 1")

    def mean(self) -> float:
        return float(np.sum(self.support * self.probs))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.sum((self.support - mu) ** 2 * self.probs))


def brute_pmf(sigma: float, center: float = 0.0,
              tailcut: float = 13.0) -> PmfTable:
    """Exact normalized table of rho_{sigma,center} on the truncated range."""
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    lo = math.ceil(center - tailcut * sigma)
    hi = math.floor(center + tailcut * sigma)
    support = np.arange(lo, hi + 1, dtype=np.int64)
    logw = -math.pi * (support.astype(np.float64) - center) ** 2 / sigma**2
    w = np.exp(logw - np.max(logw))
    probs = w / np.sum(w)
    return PmfTable(support=support, probs=probs)


def tv_distance(p: PmfTable, counts: np.ndarray) -> float:
    """Total-variation distance between p and an empirical histogram."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape != p.support.shape:
        raise ShapeError("support mismatch")
    if np.any(counts < 0):
        raise PreconditionError("counts must be nonnegative")
    n = np.sum(counts)
    return 0.5 * float(np.sum(np.abs(p.probs - counts / n)))


def histogram_on(support: np.ndarray, samples: np.ndarray) -> np.ndarray:
    """Counts of samples on an explicit integer support (exact match)."""
    lo = int(support[0])
    counts = np.zeros(support.shape[0], dtype=np.int64)
    idx = np.asarray(samples, dtype=np.int64) - lo
    if np.any(idx < 0) or np.any(idx >= counts.shape[0]):
        raise ShapeError("sample outside the oracle support")
    np.add.at(counts, idx, 1)
    return counts


def chi_square_uniform(counts: np.ndarray) -> float:
    """P-value of the Pearson test of counts over Z_q against uniform."""
    counts = np.asarray(counts, dtype=np.float64)
    q = counts.shape[0]
    n = np.sum(counts)
    if n < 10 * q:
        raise PreconditionError("undersampled: need at least 10*q draws")
    expected = n / q
    stat = float(np.sum((counts - expected) ** 2 / expected))
    return float(chi2.sf(stat, df=q - 1))


def lwe_instance(a: ModMatrix, s: ModVector, sigma: float, rng):
    """Honest LWE sample y^T = s^T a + e^T; returns (y, e) for ground truth."""
    if s.n != a.rows:
        raise ShapeError("dimension mismatch")
    clean = modvec_mat(s, a)
    if sigma == 0:
        e = np.zeros(a.cols, dtype=np.int64)
    else:
        from .sampling import sample_z_batch

        e = sample_z_batch(sigma, np.zeros(a.cols), rng)
    y = ModVector(clean.values + e.astype(object), a.q)
    return y, e


def enumerate_kernel(f: ModMatrix, radius: float,
                     budget: int = 10**8) -> list:
    """All vectors of the q-ary kernel lattice of f with norm <= radius.

    Exhaustive box scan; only usable for tiny dimensions.
    """
    m = f.cols
    q = f.q
    r = int(math.floor(radius))
    side = 2 * r + 1
    if side ** m > budget:
        raise PreconditionError("enumeration budget exceeded")
    fe = f.to_int64()
    # scan the box in chunks over the trailing m-1 coordinates
    tail = np.array(list(itertools.product(range(-r, r + 1), repeat=m - 1)),
                    dtype=np.int64) if m > 1 else np.zeros((1, 0), np.int64)
    out = []
    for x0 in range(-r, r + 1):
        pts = np.concatenate(
            [np.full((tail.shape[0], 1), x0, dtype=np.int64), tail], axis=1)
        keep = np.einsum("ij,ij->i", pts, pts) <= radius * radius
        pts = pts[keep]
        keep = np.all((pts @ fe.T) % q == 0, axis=1)
        out.extend(pts[keep])
    return out


def covariance_est(samples: np.ndarray) -> np.ndarray:
    """Unbiased sample covariance of row-wise observations."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] < 10**4:
        raise PreconditionError("undersampled: need at least 1e4 samples")
    return np.cov(samples, rowvar=False, bias=False)
