"""Shared fixtures."""

from __future__ import annotations

import numpy as np
import pytest

from primeab.arith import segmented_sieve
from primeab.buchstab import build_evaluator
from primeab.const import DEFAULT_TEST_SAMPLES
from primeab.decomposition import build_d1
from primeab.model import McParams


@pytest.fixture(scope="session")
def evaluator():
    """Default Buchstab evaluator on [1, 10]."""
    return build_evaluator()


@pytest.fixture(scope="session")
def d1():
    """The first decomposition."""
    return build_d1()


@pytest.fixture
def mc_params() -> McParams:
    """Sample size small enough for unit tests."""
    return McParams(samples=DEFAULT_TEST_SAMPLES, seed=7, strata_per_dim=8)


@pytest.fixture(scope="session")
def prime_indicator() -> np.ndarray:
    """rho(0), ..., rho(200000)."""
    table = segmented_sieve(2, 200_001)
    values = np.zeros(200_001)
    values[table.primes] = 1.0
    return values
