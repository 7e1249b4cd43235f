"""Shared fixtures: one toy parameter set with master keys, reused by
every test module that exercises the scheme end to end."""

import numpy as np
import pytest

from ahibet import IdentityPath, RandomSource, derive_params, setup


def seed(tag: int) -> bytes:
    """Deterministic 32-byte seed family for reproducible tests."""
    return bytes((tag + i * 37) % 256 for i in range(32))


def random_path(params, rng: RandomSource, depth: int) -> IdentityPath:
    comps = []
    for _ in range(depth):
        c = rng.integers(params.q, size=params.n)
        while not np.any(c != 0):
            c = rng.integers(params.q, size=params.n)
        comps.append(tuple(int(x) for x in c))
    return IdentityPath(tuple(comps))


@pytest.fixture(scope="session")
def ps16():
    return derive_params(16, 2, "toy-small")


@pytest.fixture(scope="session")
def master16(ps16):
    return setup(ps16, RandomSource(seed(1)))
