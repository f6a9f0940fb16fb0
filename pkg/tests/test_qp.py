import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verhulst_solow.integrator import IntegratorConfig, integrate
from verhulst_solow.model import ModelParams, build_system, derive_params, knr_qp_system, x_scale
from verhulst_solow.qp import (
    DomainError,
    LVSystem,
    QPSystem,
    StructureError,
    eval_monomials,
    invert_embedding,
    lv_rhs,
    qp_rhs,
    qp_to_lv,
)


def naive_matmul(X, Y):
    X, Y = np.asarray(X), np.asarray(Y)
    out = np.zeros((X.shape[0], Y.shape[1]) if Y.ndim == 2 else X.shape[0])
    for i in range(X.shape[0]):
        if Y.ndim == 1:
            out[i] = sum(X[i, k] * Y[k] for k in range(X.shape[1]))
        else:
            for j in range(Y.shape[1]):
                out[i, j] = sum(X[i, k] * Y[k, j] for k in range(X.shape[1]))
    return out


class TestQPToLV:
    def test_identity_embedding(self):
        A = [[1.0, -2.0], [0.5, 3.0]]
        lv = qp_to_lv(QPSystem([0.3, -0.7], A, np.eye(2)))
        np.testing.assert_array_equal(lv.l, [0.3, -0.7])
        np.testing.assert_array_equal(lv.M, A)

    def test_random_against_triple_loop(self, rng):
        for _ in range(20):
            c = rng.normal(size=3)
            A = rng.normal(size=(3, 2))
            B = rng.normal(size=(2, 3))
            lv = qp_to_lv(QPSystem(c, A, B))
            np.testing.assert_allclose(lv.l, naive_matmul(B, c), rtol=0, atol=1e-13)
            np.testing.assert_allclose(lv.M, naive_matmul(B, A), rtol=0, atol=1e-13)

    def test_model_matrices_match_rescaled_interaction(self, rng):
        # KNR system reduced by B, then rescaled by X = D U, gives M_bar
        for _ in range(10):
            p = ModelParams.from_rescaled(rng.uniform(0.2, 0.8), rng.uniform(0.2, 1.0), rng.uniform(0.5, 2),
                                          rng.uniform(0.2, 2), RT=rng.uniform(10, 100), d=rng.uniform(0.5, 2))
            lv = qp_to_lv(knr_qp_system(p, "finite"))
            D = x_scale(p, "finite")
            ref = build_system(p, "finite")
            np.testing.assert_allclose(lv.l, ref.l, atol=1e-12)
            np.testing.assert_allclose(lv.M / D[None, :], ref.M, atol=1e-12)

    def test_linear_in_A(self, rng):
        c, A, B = rng.normal(size=3), rng.normal(size=(3, 3)), rng.normal(size=(3, 3))
        lv1 = qp_to_lv(QPSystem(c, A, B))
        lv2 = qp_to_lv(QPSystem(c, 2.5 * A, B))
        np.testing.assert_allclose(lv2.M, 2.5 * lv1.M)
        np.testing.assert_array_equal(lv2.l, lv1.l)

    def test_shape_mismatch(self):
        with pytest.raises(StructureError):
            QPSystem([1.0, 2.0], np.zeros((2, 3)), np.zeros((2, 2)))

    def test_non_finite(self):
        with pytest.raises(StructureError):
            QPSystem([np.nan], [[1.0]], [[1.0]])


class TestMonomials:
    def test_identity(self):
        np.testing.assert_allclose(eval_monomials(QPSystem([0, 0], np.zeros((2, 2)), np.eye(2)), [2, 3]), [2, 3])

    def test_square_roots(self):
        sys = QPSystem([0.0, 0.0], np.zeros((2, 1)), [[0.5, 0.5]])
        assert eval_monomials(sys, [4.0, 9.0])[0] == pytest.approx(6.0, abs=1e-14)

    def test_unit_state_gives_unit_monomials(self, half_params):
        sys = knr_qp_system(half_params, "finite")
        np.testing.assert_allclose(eval_monomials(sys, [1.0, 1.0, 1.0]), 1.0)

    def test_non_positive_names_component(self):
        sys = QPSystem([0, 0, 0], np.zeros((3, 3)), np.eye(3))
        with pytest.raises(DomainError, match=r"x\[1\]"):
            eval_monomials(sys, [1.0, 0.0, 2.0])


class TestRhs:
    def test_null_system(self):
        sys = QPSystem([0, 0], np.zeros((2, 2)), np.eye(2))
        np.testing.assert_array_equal(qp_rhs(sys, [0.3, 7.0]), 0.0)

    def test_logistic_midpoint(self):
        sys = QPSystem([1.0], [[-1.0]], [[1.0]])
        assert qp_rhs(sys, [0.5])[0] == pytest.approx(0.25)

    def test_model_rhs_zero_at_mapped_fixed_point(self, rng):
        from verhulst_solow.model import asymptotic_knr_finite

        for _ in range(10):
            p = ModelParams.from_rescaled(rng.uniform(0.2, 0.8), rng.uniform(0.2, 1.0), rng.uniform(0.5, 2),
                                          rng.uniform(0.2, 2), RT=rng.uniform(10, 100))
            s = asymptotic_knr_finite(p)
            x = np.array([s.K, s.N, s.R])
            r = qp_rhs(knr_qp_system(p, "finite"), x)
            np.testing.assert_allclose(r / x, 0.0, atol=1e-12)

    def test_lv_zero_face(self):
        lv = LVSystem([1.0, 2.0], [[-1.0, 0.5], [0.3, -1.0]])
        assert lv_rhs(lv, [0.0, 1.3])[0] == 0.0

    def test_lv_center(self):
        lv = LVSystem([1.0, -1.0], [[0.0, -1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(lv_rhs(lv, [1.0, 1.0]), [0.0, 0.0])

    def test_lv_negative_rejected(self):
        lv = LVSystem([1.0], [[-1.0]])
        with pytest.raises(DomainError):
            lv_rhs(lv, [-0.1])

    def test_model_lv_rhs_zero_at_fixed_point(self, half_params):
        lv = build_system(half_params, "finite")
        dp = derive_params(half_params)
        np.testing.assert_allclose(lv_rhs(lv, [1.0, dp.b_bar, dp.k_bar * dp.b_bar]), 0.0, atol=1e-14)


class TestInvert:
    def test_identity(self):
        sys = QPSystem([0, 0], np.zeros((2, 2)), np.eye(2))
        np.testing.assert_allclose(invert_embedding(sys, [2.0, 5.0]), [2.0, 5.0])

    def test_model_b_round_trip(self, half_params):
        from verhulst_solow.model import _finite_embedding

        sys = _finite_embedding(half_params)
        assert -np.linalg.det(sys.B) == pytest.approx(half_params.beta2)
        u = np.ones(3)
        np.testing.assert_allclose(eval_monomials(sys, invert_embedding(sys, u)), u, atol=1e-12)

    def test_singular(self):
        sys = QPSystem([0, 0], np.zeros((2, 2)), [[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(StructureError):
            invert_embedding(sys, [1.0, 1.0])

    def test_non_square(self):
        sys = QPSystem([0, 0], np.zeros((2, 1)), [[1.0, 2.0]])
        with pytest.raises(StructureError):
            invert_embedding(sys, [1.0])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_random_round_trip(self, seed):
        r = np.random.default_rng(seed)
        n = int(r.integers(1, 5))
        B = r.normal(size=(n, n))
        if abs(np.linalg.det(B)) < 0.1:
            B += 2 * np.eye(n)
        x = np.exp(r.uniform(-2, 2, size=n))
        sys = QPSystem(np.zeros(n), np.zeros((n, n)), B)
        np.testing.assert_allclose(invert_embedding(sys, eval_monomials(sys, x)), x, rtol=1e-10)


def test_trajectory_equivalence_qp_vs_lv(rng):
    """Integrating the QP system and mapping to monomials agrees with
    integrating the LV system from the mapped start."""
    cfg = IntegratorConfig(t_end=5.0, rel_tol=1e-10)
    for _ in range(5):
        n = 3
        c = rng.uniform(-0.5, 0.5, n)
        A = -np.eye(n) + 0.2 * rng.normal(size=(n, n))
        B = np.eye(n) + 0.3 * rng.normal(size=(n, n))
        qp = QPSystem(c, A, B)
        lv = qp_to_lv(qp)
        x0 = rng.uniform(0.5, 1.5, n)
        t_eval = np.linspace(0.5, 5.0, 10)
        tq = integrate(lambda x: qp_rhs(qp, x), x0, cfg, t_eval=t_eval)
        tl = integrate(lambda u: lv_rhs(lv, u), eval_monomials(qp, x0), cfg, t_eval=t_eval)
        mapped = np.array([eval_monomials(qp, x) for x in tq.at_nodes(t_eval)])
        np.testing.assert_allclose(mapped, tl.at_nodes(t_eval), rtol=10 * cfg.rel_tol)
