"""Hand-derived backward passes vs central finite differences."""

import zlib

import numpy as np
import pytest

from oracle_grad import ALL_CHECKS, TOL, run_check


def stable_rng(name, salt):
    return np.random.default_rng(zlib.crc32(name.encode()) + salt)


@pytest.mark.parametrize("name", sorted(ALL_CHECKS))
def test_float64_gradients(name):
    rng = stable_rng(name, 0)
    worst = max(run_check(ALL_CHECKS[name], rng, np.float64) for _ in range(5))
    assert worst < TOL[np.float64], f"{name}: worst rel err {worst:.3e}"


@pytest.mark.parametrize("name", sorted(ALL_CHECKS))
def test_float32_gradients(name):
    rng = stable_rng(name, 1)
    worst = max(run_check(ALL_CHECKS[name], rng, np.float32) for _ in range(3))
    assert worst < TOL[np.float32], f"{name}: worst rel err {worst:.3e}"
