import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import homogeneous_moments, random_simplex, random_stochastic
from tclagg.aggregate import (AggregateModel, aggregate_step, apportion, hadamard_map,
                              quadratic_form_identity, sigma_of_X)
from tclagg.chain import build_chain, build_partition
from tclagg.params import TclParams


def test_two_state_covariance_by_hand():
    p, q, x, n_p = 0.3, 0.1, 0.6, 5
    P = np.array([[1 - p, p], [q, 1 - q]])
    S = sigma_of_X([x, 1 - x], P, n_p)
    v = (x * p * (1 - p) + (1 - x) * q * (1 - q)) / n_p
    assert np.allclose(S, [[v, -v], [-v, v]], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 10_000), n_p=st.integers(1, 500))
def test_sigma_psd_and_zero_row_sums(n, seed, n_p):
    rng = np.random.default_rng(seed)
    P = random_stochastic(rng, n, zeros=0.3)
    X = random_simplex(rng, n)
    S = sigma_of_X(X, P, n_p)
    assert np.allclose(S, S.T)
    assert np.abs(S.sum(axis=1)).max() <= 1e-14
    assert np.linalg.eigvalsh(S).min() >= -1e-14


def test_quadratic_form_identity_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        P = random_stochastic(rng, n)
        X = random_simplex(rng, n)
        nu = rng.normal(size=n)
        lhs, rhs = quadratic_form_identity(nu, X, P, int(rng.integers(1, 1000)))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


def test_hadamard_map_definition():
    rng = np.random.default_rng(1)
    C = rng.normal(size=(2, 3))
    D = rng.normal(size=(3, 4))
    R = hadamard_map(C, D)
    for i in range(2):
        for j in range(4):
            want = sum(C[i, k] ** 2 * D[k, j] for k in range(3)) - sum(C[i, k] * D[k, j] for k in range(3)) ** 2
            assert R[i, j] == pytest.approx(want, abs=1e-13)


@pytest.mark.parametrize("n,counts", [(2, (1, 1)), (2, (2, 0)), (4, (1, 0, 1, 0)),
                                      (4, (0, 2, 0, 0)), (4, (1, 1, 0, 1))])
def test_moments_match_brute_force(n, counts):
    rng = np.random.default_rng(sum(counts) * 10 + n)
    P = random_stochastic(rng, n, zeros=0.2)
    n_p = sum(counts)
    X = np.array(counts) / n_p
    mean, cov = homogeneous_moments(P, counts)
    assert np.allclose(P.T @ X, mean, atol=1e-12)
    assert np.allclose(sigma_of_X(X, P, n_p), cov, atol=1e-12)


def test_multinomial_sampling_moments():
    rng = np.random.default_rng(3)
    P = random_stochastic(rng, 4)
    n_p = 20
    X = apportion(random_simplex(rng, 4), n_p) / n_p
    draws = np.array([aggregate_step(X, P, n_p, "exact-multinomial", rng) for _ in range(20000)])
    S = sigma_of_X(X, P, n_p)
    se = np.sqrt(np.diag(S) / len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - P.T @ X) <= 5 * se)
    emp = np.cov(draws.T)
    assert np.allclose(emp, S, atol=0.06 * np.abs(S).max())


@pytest.mark.parametrize("mode", ["mean-only", "gaussian", "exact-multinomial"])
def test_mass_conservation(mode):
    p = TclParams(sigma=0.032)
    model = AggregateModel.from_chain(build_chain(build_partition(p, 3, 12), p), 1000)
    X0 = np.zeros(model.n_states)
    X0[model.n_states // 4] = 1.0
    traj = model.simulate(X0, 200, mode, np.random.default_rng(0))
    assert np.abs(traj.sum(axis=1) - 1).max() <= 1e-12


def test_variance_scales_inverse_with_population():
    rng = np.random.default_rng(5)
    P = random_stochastic(rng, 5)
    X = random_simplex(rng, 5)
    assert np.allclose(sigma_of_X(X, P, 100), 4 * sigma_of_X(X, P, 400), rtol=1e-14)
    # sampled variance of one coordinate follows the same scaling
    var = []
    for n_p in (100, 400):
        Xc = apportion(X, n_p) / n_p
        d = np.array([aggregate_step(Xc, P, n_p, "exact-multinomial", rng)[0] for _ in range(6000)])
        var.append(d.var())
    assert var[0] / var[1] == pytest.approx(4, rel=0.15)


def test_gaussian_noise_is_approximately_normal():
    from scipy import stats
    rng = np.random.default_rng(8)
    P = random_stochastic(rng, 3)
    X = random_simplex(rng, 3)
    n_p = 5000
    S = sigma_of_X(X, P, n_p)
    z = np.array([aggregate_step(X, P, n_p, "gaussian", rng)[0] for _ in range(4000)])
    z = (z - (P.T @ X)[0]) / np.sqrt(S[0, 0])
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_apportion_sums():
    rng = np.random.default_rng(2)
    for _ in range(50):
        X = random_simplex(rng, 7)
        n_p = int(rng.integers(1, 300))
        c = apportion(X, n_p)
        assert c.sum() == n_p and c.min() >= 0
        assert np.abs(c - X * n_p).max() < 1


def test_mean_trajectory_and_output():
    p = TclParams(sigma=0.032)
    chain = build_chain(build_partition(p, 2, 6), p)
    model = AggregateModel.from_chain(chain, 50)
    X0 = np.full(model.n_states, 1 / model.n_states)
    tr = model.mean_trajectory(X0, 5)
    assert np.allclose(tr[5], np.linalg.matrix_power(chain.P.T, 5) @ X0)
    n = model.n_states // 2
    assert model.output(X0) == pytest.approx(50 * 5.6 * X0[n:].sum())
    with pytest.raises(ValueError):
        aggregate_step(X0, chain.P, 50, "gaussian", None)
    with pytest.raises(ValueError):
        AggregateModel.from_chain(chain, 0)
