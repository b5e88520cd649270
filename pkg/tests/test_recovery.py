import math

import cvxpy as cp
import numpy as np
import pytest

from segcs.errors import DimensionError, InfeasibleError
from segcs.recovery import (
    DEFAULT_THRESHOLDS,
    ErmConfig,
    basis_pursuit,
    bpdn,
    empirical_risk,
    erm_objective,
    erm_recover,
    hard_threshold,
    largest_eigenvalue,
    risk,
    risk_gap_terms,
)
from segcs.sensing import generate_measurement_matrix, generate_sparse_signal, make_rng


def instance(K, N, S, seed, ensemble="gaussian"):
    A = generate_measurement_matrix(K, N, ensemble, seed=seed).entries
    x = generate_sparse_signal(N, S, seed=seed + 1000).values
    return A, x


def cvx_l1(A, y, gamma=None):
    x = cp.Variable(A.shape[1])
    cons = [A @ x == y] if gamma is None else [cp.norm(A @ x - y, 2) <= gamma]
    prob = cp.Problem(cp.Minimize(cp.norm(x, 1)), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


@pytest.mark.parametrize("seed", range(4))
def test_basis_pursuit_recovers_sparse_signal(seed):
    A, x = instance(32, 64, 2, seed)
    res = basis_pursuit(A, A @ x)
    assert res.converged and res.solver_tag == "highs-lp"
    np.testing.assert_allclose(res.x_hat, x, atol=1e-7)
    assert res.objective == pytest.approx(res.dual_objective, rel=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_basis_pursuit_matches_reference_when_not_exact(seed):
    A, x = instance(6, 40, 5, seed)
    y = A @ x
    res = basis_pursuit(A, y)
    assert res.objective == pytest.approx(cvx_l1(A, y), rel=1e-6)
    assert np.linalg.norm(A @ res.x_hat - y, np.inf) <= 1e-8


def test_basis_pursuit_zero_measurements():
    res = basis_pursuit(np.ones((2, 5)), np.zeros(2))
    np.testing.assert_array_equal(res.x_hat, 0)


def test_basis_pursuit_infeasible():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(InfeasibleError):
        basis_pursuit(A, np.array([1.0, 2.0]))


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        basis_pursuit(np.ones((3, 4)), np.ones(2))


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("gamma_frac", [0.05, 0.3])
def test_bpdn_matches_reference(seed, gamma_frac):
    A, x = instance(16, 64, 3, seed)
    y = A @ x + 0.01 * make_rng(seed).standard_normal(16)
    gamma = gamma_frac * np.linalg.norm(y)
    res = bpdn(A, y, gamma)
    assert res.solver_tag == "clarabel-socp"
    assert res.residual_norm <= gamma * (1 + 1e-6)
    assert res.objective == pytest.approx(cvx_l1(A, y, gamma), rel=1e-5)


def test_bpdn_edge_cases():
    A, x = instance(16, 64, 3, 0)
    y = A @ x
    trivial = bpdn(A, y, 2 * np.linalg.norm(y))
    assert trivial.solver_tag == "trivial"
    np.testing.assert_array_equal(trivial.x_hat, 0)
    exact = bpdn(A, y, 0.0)
    np.testing.assert_allclose(exact.x_hat, basis_pursuit(A, y).x_hat)
    with pytest.raises(ValueError):
        bpdn(A, y, -1.0)


@pytest.mark.parametrize("shape", [(8, 32), (24, 128), (40, 20)])
def test_largest_eigenvalue(shape):
    A = make_rng(1).standard_normal(shape)
    ref = np.linalg.eigvalsh(A.T @ A)[-1]
    assert largest_eigenvalue(A) == pytest.approx(ref, rel=1e-7)
    assert largest_eigenvalue(np.zeros(shape)) == 0.0


def test_hard_threshold():
    z = np.array([0.5, -0.2, 0.2, -0.7, 0.0])
    np.testing.assert_array_equal(hard_threshold(z, 0.2), [0.5, 0.0, 0.0, -0.7, 0.0])


def test_theoretical_threshold():
    lam, N, eps = 2.0, 128, 1 / 240
    tau = ErmConfig.theoretical_threshold(lam, N, eps)
    assert tau == pytest.approx(math.sqrt(2 * math.log(2) * math.log(N) / (lam * eps)))
    cfg = ErmConfig(epsilon=eps)
    t, step = cfg.resolve(lam, N)
    assert t == pytest.approx(tau) and step == 0.5
    # penalty tau^2 / step recovers 2 log2 log N / eps
    assert t**2 / step == pytest.approx(2 * math.log(2) * math.log(N) / eps)


@pytest.mark.parametrize(
    "kwargs", [{}, {"threshold": -1.0}, {"threshold": 0.1, "theta": 0}, {"threshold": 0.1, "max_iter": 0}, {"epsilon": -1}]
)
def test_erm_config_validation(kwargs):
    with pytest.raises(ValueError):
        ErmConfig(**kwargs)


def test_default_thresholds():
    assert DEFAULT_THRESHOLDS == {"extended": 0.035, "original": 0.05, "enlarged": 0.05}


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("ensemble", ["gaussian", "bernoulli"])
def test_erm_objective_never_increases(seed, ensemble):
    A, x = instance(24, 128, 3, seed, ensemble)
    y = A @ x + 0.02 * make_rng(seed).standard_normal(24)
    res = erm_recover(A, y, ErmConfig(threshold=0.05, record_history=True))
    h = np.array(res.history)
    assert len(h) == res.iterations + 1
    assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, h[:-1]))
    assert res.converged and res.iterations < 10_000


def test_erm_noiseless_recovery():
    A, x = instance(48, 128, 3, 7)
    res = erm_recover(A, A @ x, ErmConfig(threshold=0.05, theta=1e-8))
    assert set(np.flatnonzero(res.x_hat)) == set(np.flatnonzero(x))
    np.testing.assert_allclose(res.x_hat, x, atol=1e-5)


def test_erm_objective_value():
    A = np.eye(3)
    y = np.array([1.0, 0.0, 0.0])
    assert erm_objective(A, y, np.array([1.0, 0.0, 0.0]), 0.5) == pytest.approx(0.5)


def test_erm_respects_max_iter():
    A, x = instance(24, 128, 3, 0)
    res = erm_recover(A, A @ x, ErmConfig(threshold=0.05, theta=1e-14, max_iter=3))
    assert res.iterations == 3 and not res.converged


def test_risk_helpers():
    A = np.array([[1.0, 0.0], [0.0, 2.0]])
    f = np.array([1.0, 1.0])
    f_hat = np.array([1.0, 0.0])
    y = A @ f
    assert empirical_risk(f_hat, y, A) == pytest.approx(2.0)
    assert risk(f_hat, f, 0.1) == pytest.approx(0.5 + 0.1)
    np.testing.assert_allclose(risk_gap_terms(f, f_hat, y, A), [0.0, -4.0])
    with pytest.raises(DimensionError):
        empirical_risk(np.ones(3), y, A)
