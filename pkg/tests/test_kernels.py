"""Numba kernels against their pure-numpy reference implementations."""

import os
import subprocess
import sys

import numpy as np
import pytest

from ptfens import _kernels
from ptfens._kernels import (
    FAMILY_BC,
    FAMILY_CMP,
    FAMILY_VG,
    chi2_population_numpy,
    replica_mean_std_numpy,
    theta_points_numpy,
    using_numba,
)

HAS_NUMBA = using_numba()
needs_numba = pytest.mark.skipif(not HAS_NUMBA, reason="numba kernels disabled")


def mixed_family_batch(rng, n):
    codes = rng.integers(0, 3, size=n).astype(np.int8)
    params = np.zeros((n, 4))
    vg = codes == FAMILY_VG
    params[vg, 0] = rng.uniform(0.0, 0.15, vg.sum())
    params[vg, 1] = rng.uniform(0.3, 0.55, vg.sum())
    params[vg, 2] = rng.uniform(0.001, 0.15, vg.sum())
    params[vg, 3] = rng.uniform(1.05, 2.8, vg.sum())
    bc = codes == FAMILY_BC
    params[bc, 0] = rng.uniform(0.0, 0.15, bc.sum())
    params[bc, 1] = rng.uniform(0.3, 0.55, bc.sum())
    params[bc, 2] = rng.uniform(1.0, 80.0, bc.sum())
    params[bc, 3] = rng.uniform(0.1, 1.2, bc.sum())
    cmp_ = codes == FAMILY_CMP
    params[cmp_, 0] = rng.uniform(0.3, 0.55, cmp_.sum())
    params[cmp_, 1] = rng.uniform(1.0, 40.0, cmp_.sum())
    params[cmp_, 2] = rng.uniform(2.0, 14.0, cmp_.sum())
    psi = 10.0 ** rng.uniform(-1.0, 4.5, size=n)
    psi[rng.random(n) < 0.1] = 0.0  # exercise the wet branches
    return codes, params, psi


@needs_numba
def test_theta_points_pair():
    rng = np.random.default_rng(90)
    codes, params, psi = mixed_family_batch(rng, 5000)
    got = _kernels.theta_points_numba(codes, params, psi)
    want = theta_points_numpy(codes, params, psi)
    np.testing.assert_allclose(got, want, rtol=1e-13, atol=0.0)


@needs_numba
def test_chi2_population_pair():
    rng = np.random.default_rng(91)
    pop = rng.random((60, 5))
    pop[0] = 0.0  # degenerate genome
    preds = rng.uniform(0.0, 0.6, size=(5, 400))
    observed = rng.uniform(0.0, 0.6, size=400)
    got = _kernels.chi2_population_numba(pop, preds, observed)
    want = chi2_population_numpy(pop, preds, observed)
    np.testing.assert_allclose(got, want, rtol=1e-10)  # dot vs einsum ordering


@needs_numba
def test_replica_mean_std_pair():
    rng = np.random.default_rng(92)
    est = rng.uniform(0.0, 0.6, size=(40, 300))
    est[:, 7] = 0.125  # an exactly-constant column must give sd 0 in both
    got_m, got_s = _kernels.replica_mean_std_numba(est)
    want_m, want_s = replica_mean_std_numpy(est)
    np.testing.assert_allclose(got_m, want_m, rtol=1e-13)
    np.testing.assert_allclose(got_s, want_s, rtol=1e-10)
    assert got_s[7] == 0.0 and want_s[7] == 0.0
    assert got_m[7] == 0.125 and want_m[7] == 0.125


def test_zero_weight_genome_is_uniform():
    preds = np.array([[0.1, 0.1], [0.3, 0.3]])
    observed = np.array([0.2, 0.2])
    out = _kernels.chi2_population(np.zeros((1, 2)), preds, observed)
    assert out[0] == pytest.approx(0.0, abs=1e-30)  # uniform mix hits exactly


def test_selected_kernels_consistent_with_flag():
    if HAS_NUMBA:
        assert _kernels.theta_points is _kernels.theta_points_numba
    else:
        assert _kernels.theta_points is theta_points_numpy


def test_warmup_runs():
    _kernels.warmup()


def test_env_flag_forces_numpy_path():
    env = dict(os.environ, PTFENS_NO_NUMBA="1")
    code = (
        "from ptfens import _kernels\n"
        "assert not _kernels.using_numba()\n"
        "assert _kernels.theta_points is _kernels.theta_points_numpy\n"
        "assert _kernels.chi2_population is _kernels.chi2_population_numpy\n"
        "assert _kernels.replica_mean_std is _kernels.replica_mean_std_numpy\n"
        "_kernels.warmup()\n"
        "print('numpy-path-ok')\n"
    )
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0, proc.stderr
    assert "numpy-path-ok" in proc.stdout
