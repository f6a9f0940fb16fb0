import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from verhulst_solow.integrator import (
    IntegratorConfig,
    NonFiniteError,
    StepUnderflowError,
    integrate,
    integrate_until_converged,
    late_time_rate,
)
from verhulst_solow.model import build_system, derive_params, fixed_point_finite, asymptotic_rates_infinite
from verhulst_solow.qp import lv_rhs

from conftest import random_params


def decay(x):
    return -x


def logistic(x):
    return x * (1 - x)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(min_step=1.0, max_step=0.5),
                                    dict(t_end=0), dict(method="euler")])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            IntegratorConfig(**kw)


class TestIntegrate:
    @pytest.mark.parametrize("log_space", [True, False])
    def test_linear_decay(self, log_space):
        cfg = IntegratorConfig(t_end=1.0, log_space=log_space)
        tr = integrate(decay, [1.0], cfg)
        assert tr.final_state[0] == pytest.approx(math.exp(-1), rel=cfg.rel_tol)
        assert tr.times[-1] == 1.0

    def test_logistic_converges(self):
        tr = integrate_until_converged(logistic, [0.1], IntegratorConfig())
        assert tr.converged
        assert tr.converged_to[0] == pytest.approx(1.0, abs=1e-8)

    def test_finite_model_converges(self, rng):
        p = random_params(rng, "finite")
        lv = build_system(p, "finite")
        tr = integrate_until_converged(lambda u: lv_rhs(lv, u), rng.uniform(0.2, 3, 3), log_rhs=lv.log_rhs)
        fp = fixed_point_finite(derive_params(p), p).as_array()
        np.testing.assert_allclose(tr.converged_to, fp, rtol=1e-6)

    def test_times_strictly_increasing_and_positive(self, rng):
        p = random_params(rng, "finite")
        lv = build_system(p, "finite")
        tr = integrate(lambda u: lv_rhs(lv, u), [0.01, 5.0, 0.02], IntegratorConfig(t_end=30, log_space=False))
        assert np.all(np.diff(tr.times) > 0)
        assert np.all(tr.states > 0)

    def test_scipy_cross_check(self, rng):
        for _ in range(5):
            p = random_params(rng, "finite")
            lv = build_system(p, "finite")
            x0 = rng.uniform(0.2, 3, 3)
            t_eval = np.linspace(1, 20, 8)
            ours = integrate(lambda u: lv_rhs(lv, u), x0, IntegratorConfig(t_end=20.0), t_eval=t_eval)
            ref = solve_ivp(lambda t, u: lv_rhs(lv, u), (0, 20), x0, method="DOP853", rtol=1e-12, atol=1e-14,
                            t_eval=t_eval)
            np.testing.assert_allclose(ours.at_nodes(t_eval), ref.y.T, rtol=1e-7)

    def test_rk4_matches_adaptive(self):
        cfg = IntegratorConfig(t_end=10.0)
        a = integrate(logistic, [0.1], cfg, t_eval=[5.0])
        b = integrate(logistic, [0.1], cfg.with_(method="rk4", max_step=0.01), t_eval=[5.0])
        np.testing.assert_allclose(b.at_nodes([5.0, 10.0]), a.at_nodes([5.0, 10.0]), rtol=10 * cfg.rel_tol)

    def test_halving_tolerance(self):
        cfg = IntegratorConfig(t_end=10.0, rel_tol=1e-7)
        a = integrate(logistic, [0.1], cfg).final_state
        b = integrate(logistic, [0.1], cfg.with_(rel_tol=5e-8)).final_state
        assert np.all(np.abs(a - b) <= cfg.rel_tol * np.abs(b))

    def test_positivity_guard_rejects_crossing(self):
        # x' = -5 sqrt(x) reaches zero at t = 0.4; the guard must refuse to step past it
        cfg = IntegratorConfig(t_end=1.0, log_space=False, min_step=1e-6)
        with pytest.raises(StepUnderflowError) as info:
            integrate(lambda x: -5 * np.sqrt(np.maximum(x, 0)), [1.0], cfg)
        assert info.value.state[0] > 0

    def test_non_finite_rhs(self):
        with pytest.raises(NonFiniteError) as info:
            integrate(lambda x: x * np.nan, [1.0])
        assert info.value.t == 0.0

    def test_t_eval_nodes_and_resampling(self):
        tr = integrate(decay, [1.0], IntegratorConfig(t_end=2.0), t_eval=[0.3, 1.7])
        assert tr.at_nodes([0.3])[0, 0] == pytest.approx(math.exp(-0.3), rel=1e-9)
        t = np.linspace(0, 2, 41)
        np.testing.assert_allclose(tr.resample(t)[:, 0], np.exp(-t), rtol=1e-6)
        with pytest.raises(ValueError):
            tr.at_nodes([0.31234])

    def test_rejects_non_positive_start(self):
        with pytest.raises(ValueError):
            integrate(decay, [0.0])

    def test_cap_without_convergence(self):
        tr = integrate_until_converged(lambda x: 0.1 * x, [1.0], IntegratorConfig(t_end=10, horizon_cap=40))
        assert not tr.converged and tr.metadata["converged"] is False
        assert tr.times[-1] == pytest.approx(40.0)


class TestLateTimeRate:
    def test_pure_exponential(self):
        tr = integrate(lambda x: 0.3 * x, [1.0], IntegratorConfig(t_end=20.0))
        assert late_time_rate(tr, 0, 10.0) == pytest.approx(0.3, abs=1e-9)

    def test_constant(self):
        tr = integrate(lambda x: 0 * x, [2.0], IntegratorConfig(t_end=5.0))
        assert late_time_rate(tr, 0, 4.0) == pytest.approx(0.0, abs=1e-14)

    def test_infinite_regime_r_rate(self, rng):
        from verhulst_solow.cli import simulate_knr
        from verhulst_solow.model import StateKNR

        p = random_params(rng, "infinite")
        tr = simulate_knr(p, "infinite", StateKNR(1.0, 1.0, 1.0), IntegratorConfig(t_end=150.0, max_step=1.0))
        lam = asymptotic_rates_infinite(p, derive_params(p)).lambda_R
        assert late_time_rate(tr, 2, 30.0) * p.d == pytest.approx(lam, abs=1e-4)

    def test_too_short(self):
        tr = integrate(decay, [1.0], IntegratorConfig(t_end=1.0))
        with pytest.raises(ValueError):
            late_time_rate(tr, 0, 2.0)
