"""Water retention curve evaluators: fixed values, invariants, dispatch."""

import numpy as np
import pytest

from ptfens import (
    BrooksCoreyParams,
    CampbellParams,
    InputError,
    ParameterError,
    VanGenuchtenParams,
    bc_theta,
    campbell_theta,
    derived_points,
    theta_at,
    vg_theta,
)
from ptfens.retention import pack_params, theta_many

VG = VanGenuchtenParams(theta_r=0.1, theta_s=0.5, alpha=0.01, n=2.0)
BC = BrooksCoreyParams(theta_r=0.0, theta_s=0.4, psi_b=10.0, lambda_=0.5)
CMP = CampbellParams(theta_s=0.45, psi_e=5.0, b=4.0)


def test_vg_known_values():
    assert vg_theta(VG, 0.0) == 0.5
    # (alpha*psi)^n = 1 at psi=100, so theta = 0.1 + 0.4 * 2^-0.5
    assert vg_theta(VG, 100.0) == pytest.approx(0.1 + 0.4 / np.sqrt(2.0), abs=1e-12)
    assert vg_theta(VG, 1e9) == pytest.approx(0.1, abs=1e-4)


def test_bc_known_values():
    assert bc_theta(BC, 5.0) == 0.4
    assert bc_theta(BC, 40.0) == pytest.approx(0.4 * (10.0 / 40.0) ** 0.5, abs=1e-12)
    assert bc_theta(BC, 40.0) == pytest.approx(0.2, abs=1e-12)
    # continuous right at the air entry, nonzero residual too
    p = BrooksCoreyParams(theta_r=0.05, theta_s=0.4, psi_b=10.0, lambda_=0.5)
    assert bc_theta(p, 10.0) == pytest.approx(0.4, abs=1e-12)


def test_campbell_known_values():
    assert campbell_theta(CMP, 5.0) == 0.45
    assert campbell_theta(CMP, 0.0) == 0.45
    assert campbell_theta(CMP, 80.0) == pytest.approx(0.225, abs=1e-12)


def test_theta_at_dispatch():
    for p, psi in ((VG, 100.0), (BC, 40.0), (CMP, 80.0)):
        assert theta_at(p, psi) == {
            "vg": vg_theta, "bc": bc_theta, "cmp": campbell_theta,
        }[p.family](p, psi)
    assert theta_at(BC, 40.0) == pytest.approx(0.2, abs=1e-12)


def test_derived_points_vg():
    sat, fc, wp = derived_points(VG)
    assert sat == 0.5
    expected_fc = 0.1 + 0.4 * (1.0 + 3.3 ** 2) ** -0.5
    assert fc == pytest.approx(expected_fc, abs=1e-12)
    assert fc == pytest.approx(0.2160, abs=1e-4)
    assert sat >= fc >= wp


def test_derived_points_first_is_saturation():
    for p in (VG, BC, CMP):
        assert derived_points(p)[0] == theta_at(p, 0.0)
    assert derived_points(CMP)[0] == 0.45


def test_psi_array_matches_scalars():
    psi = np.array([0.0, 1.0, 50.0, 330.0, 15000.0])
    for p in (VG, BC, CMP):
        arr = theta_at(p, psi)
        assert arr.shape == psi.shape
        for i, x in enumerate(psi):
            assert arr[i] == theta_at(p, float(x))


def test_negative_or_nonfinite_psi_rejected():
    for p in (VG, BC, CMP):
        with pytest.raises(InputError):
            theta_at(p, -1.0)
        with pytest.raises(InputError):
            theta_at(p, np.nan)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        VanGenuchtenParams(theta_r=0.5, theta_s=0.4, alpha=0.01, n=2.0)
    with pytest.raises(ParameterError):
        VanGenuchtenParams(theta_r=0.1, theta_s=0.5, alpha=0.0, n=2.0)
    with pytest.raises(ParameterError):
        VanGenuchtenParams(theta_r=0.1, theta_s=0.5, alpha=0.01, n=1.0)
    with pytest.raises(ParameterError):
        BrooksCoreyParams(theta_r=0.1, theta_s=0.5, psi_b=-1.0, lambda_=0.5)
    with pytest.raises(ParameterError):
        BrooksCoreyParams(theta_r=0.1, theta_s=0.5, psi_b=1.0, lambda_=0.0)
    with pytest.raises(ParameterError):
        CampbellParams(theta_s=0.0, psi_e=5.0, b=4.0)
    with pytest.raises(ParameterError):
        CampbellParams(theta_s=0.45, psi_e=5.0, b=-4.0)


def _random_params(rng, family, n):
    out = []
    for _ in range(n):
        ts = rng.uniform(0.2, 1.0)
        tr = rng.uniform(0.0, 0.8) * ts
        if family == "vg":
            out.append(VanGenuchtenParams(tr, ts, rng.uniform(1e-4, 0.5),
                                          rng.uniform(1.01, 5.0)))
        elif family == "bc":
            out.append(BrooksCoreyParams(tr, ts, rng.uniform(0.1, 300.0),
                                         rng.uniform(0.05, 3.0)))
        else:
            out.append(CampbellParams(ts, rng.uniform(0.1, 300.0),
                                      rng.uniform(0.5, 20.0)))
    return out


def test_randomized_invariants():
    rng = np.random.default_rng(11)
    psi = np.sort(rng.uniform(0.0, 2e4, size=40))
    psi[0] = 0.0
    for family in ("vg", "bc", "cmp"):
        for p in _random_params(rng, family, 300):
            theta = theta_at(p, psi)
            assert theta[0] == p.theta_s
            assert np.all(np.diff(theta) <= 1e-15)  # nonincreasing
            lower = getattr(p, "theta_r", 0.0)
            assert np.all(theta <= p.theta_s + 1e-15)
            assert np.all(theta >= lower - 1e-15)


def test_air_entry_continuity():
    rng = np.random.default_rng(12)
    eps = 1e-6
    for p in _random_params(rng, "bc", 200):
        lo = bc_theta(p, p.psi_b * (1.0 - eps))
        hi = bc_theta(p, p.psi_b * (1.0 + eps))
        assert abs(lo - hi) < 1e-5
    for p in _random_params(rng, "cmp", 200):
        lo = campbell_theta(p, p.psi_e * (1.0 - eps))
        hi = campbell_theta(p, p.psi_e * (1.0 + eps))
        assert abs(lo - hi) < 1e-5


def test_batched_evaluation_matches_scalar():
    rng = np.random.default_rng(13)
    params = (_random_params(rng, "vg", 5) + _random_params(rng, "bc", 5)
              + _random_params(rng, "cmp", 5))
    psi = rng.uniform(0.0, 5000.0, size=len(params))
    codes, rows = pack_params(params)
    assert codes.shape == (15,) and rows.shape == (15, 4)
    theta = theta_many(params, psi)
    for i, p in enumerate(params):
        assert theta[i] == pytest.approx(theta_at(p, float(psi[i])), rel=1e-13)
