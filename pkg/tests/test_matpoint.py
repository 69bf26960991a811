import math

import numpy as np
import pytest
import scipy.optimize as sopt
from hypothesis import given
from hypothesis import strategies as st

from fatigue_pf import constitutive as C
from fatigue_pf import tensor as T
from fatigue_pf.errors import LoadCapacityError
from fatigue_pf.matpoint import (
    ControlMode, PointConfig, PointDriver, return_map_step, run_point,
)

from conftest import disp_table_spec, kh_spec_1d


def test_monotone_kinematic_hardening_closed_form():
    spec = kh_spec_1d()
    E, sp_, H = 205e3, 100.0, 22777.78
    strains = tuple(np.linspace(0.0, 0.01, 41)[1:])
    tr = run_point(ControlMode("displacement", values=strains), spec, n_cycles=1)
    eps = tr["strain"][1:]
    expected = np.maximum((E * eps - sp_) / (E + H), 0.0)
    assert np.max(np.abs(tr["eps_p_1"][1:] - expected)) <= 1e-10


def _ratchet_oracle(E, sp_, H, beta, path):
    """Scalar return map solved by bracketing: yield along the trial direction
    plus the lagged ratcheting term, one surface, no damage."""
    ep = er = kap = sig_n = 0.0
    out = []
    for eps in path:
        ng = 0.0 if abs(sig_n) <= 1e-8 * sp_ else math.copysign(1.0, sig_n)
        sig_tr = E * (eps - ep - er)
        n = math.copysign(1.0, sig_tr - H * ep)

        def f(dk):
            sig = E * (eps - ep - n * dk - er - beta * ng * dk)
            return n * sig - H * (ep + n * dk) * n + beta * ng * (sig - sig_n) - sp_

        dk = 0.0
        if f(0.0) > 0.0:
            hi = 1.0
            while f(hi) > 0.0:
                hi *= 2.0
            dk = sopt.brentq(f, 0.0, hi, xtol=1e-16, rtol=1e-15)
        ep += n * dk
        er += beta * ng * dk
        kap += dk
        sig_n = E * (eps - ep - er)
        out.append((ep, er, kap, sig_n))
    return np.array(out)


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_ratcheting_return_map_matches_scalar_oracle(beta):
    E, sp_, H = 205e3, 100.0, 22777.78
    spec = kh_spec_1d(E, sp_, H, beta=beta)
    sched = ControlMode("displacement", -0.003, 0.006)
    tr = run_point(sched, spec, steps_per_cycle=40, n_cycles=2)
    ref = _ratchet_oracle(E, sp_, H, beta, tr["strain"][1:])
    assert np.allclose(tr["eps_p_1"][1:], ref[:, 0], rtol=0, atol=1e-10)
    assert np.allclose(tr["eps_r"][1:], ref[:, 1], rtol=0, atol=1e-10)
    assert np.allclose(tr["kappa_1"][1:], ref[:, 2], rtol=0, atol=1e-10)
    assert np.allclose(tr["stress"][1:], ref[:, 3], rtol=1e-9, atol=1e-9)


def test_at2_homogeneous_damage_is_one_third():
    # elastic bar, 1/2 E eps^2 = w0/2  ->  alpha = B / (B + w0) = 1/3
    spec = C.MaterialSpec.from_young(2.0, surfaces=(C.SurfaceParams(1e9),), w0=1.0, damage_model="AT2",
                                     uniaxial=True)
    tr = run_point(ControlMode("displacement", values=(math.sqrt(0.5),)), spec)
    assert tr["alpha"][-1] == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert tr["stress"][-1] == pytest.approx(4.0 / 9.0 * 2.0 * math.sqrt(0.5), rel=1e-12)


def test_at1_has_elastic_threshold():
    spec = C.MaterialSpec.from_young(2.0, surfaces=(C.SurfaceParams(1e9),), w0=1.0, damage_model="AT1",
                                     uniaxial=True)
    # onset at 2 * (1/2 E eps^2) = w0
    below, above = math.sqrt(0.5) * 0.999, math.sqrt(0.5) * 1.2
    tr = run_point(ControlMode("displacement", values=(below, above)), spec)
    assert tr["alpha"][1] == 0.0
    B = 0.5 * 2.0 * above**2
    assert tr["alpha"][2] == pytest.approx(1.0 - 1.0 / (2.0 * B), rel=1e-12)


@given(st.integers(0, 10_000))
def test_return_map_kkt(seed):
    """Random multi-surface state: yield <= 0 on every surface and
    complementary to the hardening increments."""
    rng = np.random.default_rng(seed)
    spec = C.MaterialSpec.from_young(
        200e3, 0.3, surfaces=C.linear_surfaces(4, (100.0, 250.0), (3e4, 2e3), (rng.uniform(-50, 50), 5.0)),
        w0=1.0, beta=rng.uniform(0.0, 0.8),
    )
    st_n = C.PointState.virgin(spec)
    st_n.eps_p = rng.normal(scale=2e-4, size=(4, 6)) * np.array([1, 1, 0, 1, 1, 1])
    st_n.eps_p[:, 2] = -st_n.eps_p[:, 0] - st_n.eps_p[:, 1]
    st_n.kappa = rng.uniform(0, 1e-3, 4)
    eps = rng.normal(scale=3e-3, size=6)
    sigma_n = rng.normal(scale=100.0, size=6)
    alpha = rng.uniform(0.0, 0.5)
    out, info = return_map_step(st_n, eps, alpha, sigma_n, spec)
    scale = 1e-8 * float(spec.sigma_p[0])
    assert np.all(info.dkappa >= 0.0)
    assert np.all(info.fhat <= scale)
    assert np.all(np.abs(info.fhat * info.dkappa) <= scale * max(1.0, info.dkappa.max()))
    # plastic flow is deviatoric
    assert abs(T.trace(np.sum(out.eps_p, axis=0) + out.eps_r)) <= 1e-15


@given(st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=12))
def test_dissipation_non_negative_without_ratcheting(path):
    spec = disp_table_spec(H_iso=(0.02, 0.0018))
    driver = PointDriver(spec)
    for i, e in enumerate(path, start=1):
        before = driver.dissipation
        driver.advance(e, "displacement", i)
        assert driver.dissipation - before >= -1e-12


def test_force_control_hits_target():
    spec = kh_spec_1d(beta=0.4)
    tr = run_point(ControlMode("force", -120.0, 150.0), spec, steps_per_cycle=16, n_cycles=2)
    target = np.array([ControlMode("force", -120.0, 150.0).schedule(16, 2).sample(i) for i in range(33)])
    assert np.allclose(tr["stress"], target, rtol=0, atol=1e-10 * 150)


def test_force_beyond_capacity_raises_with_partial_trace():
    spec = C.MaterialSpec.from_young(1.0, surfaces=(C.SurfaceParams(1e9),), w0=1.0, damage_model="AT2",
                                     uniaxial=True)
    # sigma = eps / (1 + eps^2 / 2)^2 peaks at eps = sqrt(2/3) with 0.459
    with pytest.raises(LoadCapacityError) as err:
        run_point(ControlMode("force", values=(0.3, 0.45, 0.47)), spec)
    assert err.value.step == 3
    assert len(err.value.trace) == 3


def test_full_tensor_point_is_uniaxial_strain():
    spec = C.MaterialSpec.from_young(200e3, 0.3, surfaces=(C.SurfaceParams(1e9),), w0=1e12)
    tr = run_point(ControlMode("displacement", values=(1e-3,)), spec)
    assert tr["stress"][-1] == pytest.approx((spec.K + 4 * spec.mu / 3) * 1e-3, rel=1e-13)


def test_trace_rows_and_csv(tmp_path):
    spec = disp_table_spec()
    tr = run_point(ControlMode("displacement", -1.0, 2.0), spec, steps_per_cycle=16, n_cycles=3)
    assert len(tr) == 3 * 16 + 1
    assert tr.first_damage_cycle() is None
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].split(",")[:4] == ["step", "control", "stress", "strain"]
    assert len(lines) == len(tr) + 1


def test_point_config_tolerances_used():
    spec = disp_table_spec(H_iso=(-0.08, -0.0073), beta=0.2, w0=30.0, gamma0=1.0)
    driver = PointDriver(spec, PointConfig(stagger_tol=1e-10))
    driver.run(ControlMode("displacement", -1.0, 2.0).schedule(40, 2))
    assert max(driver.iterations) < driver.cfg.max_stagger
