import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revunc.errors import ValidationError
from revunc.ssm import (
    BandSystem,
    LinearGaussianSSM,
    band_cholesky_solve,
    build_tvp_precision_system,
    ffbs_draw,
    kalman_filter,
    posterior_mean,
    precision_draw,
)

from conftest import random_spd_block_tridiag


def ar1_plus_noise(n=40):
    return LinearGaussianSSM(
        Z=np.ones((1, 1)), T=np.full((1, 1), 0.7), Q=np.full((1, 1), 0.5),
        a1=np.zeros(1), P1=np.full((1, 1), 0.5 / (1 - 0.49)), H=np.full((1, 1), 0.3), n=n,
    )


def dense_joint(model):
    """Prior mean/covariance of states and observations, built by brute force."""
    n, m = model.n, model.n_states
    p = model.Z.shape[1]
    mean = np.zeros(n * m)
    mean[:m] = model.a1
    for t in range(1, n):
        mean[t * m:(t + 1) * m] = model.T[t - 1] @ mean[(t - 1) * m:t * m] + model.c[t - 1]
    cov = np.zeros((n * m, n * m))
    for t in range(n):
        for s in range(t + 1):
            if s == t:
                if t == 0:
                    block = model.P1
                else:
                    prev = cov[(t - 1) * m:t * m, (t - 1) * m:t * m]
                    block = model.T[t - 1] @ prev @ model.T[t - 1].T + model.Q[t - 1]
            else:
                block = model.T[t - 1] @ cov[(t - 1) * m:t * m, s * m:(s + 1) * m]
            cov[t * m:(t + 1) * m, s * m:(s + 1) * m] = block
            cov[s * m:(s + 1) * m, t * m:(t + 1) * m] = block.T
    Zb = np.zeros((n * p, n * m))
    for t in range(n):
        Zb[t * p:(t + 1) * p, t * m:(t + 1) * m] = model.Z[t]
    Hb = np.zeros((n * p, n * p))
    for t in range(n):
        Hb[t * p:(t + 1) * p, t * p:(t + 1) * p] = model.H[t]
    dvec = model.d.reshape(-1)
    return mean, cov, Zb, Hb, dvec


def dense_posterior(model, y):
    mean, cov, Zb, Hb, dvec = dense_joint(model)
    yv = np.asarray(y, float).reshape(-1)
    keep = ~np.isnan(yv)
    Zk, Hk = Zb[keep], Hb[np.ix_(keep, keep)]
    S = Zk @ cov @ Zk.T + Hk
    K = cov @ Zk.T @ np.linalg.inv(S)
    pm = mean + K @ (yv[keep] - Zk @ mean - dvec[keep])
    pc = cov - K @ Zk @ cov
    from scipy.stats import multivariate_normal

    ll = multivariate_normal(Zk @ mean + dvec[keep], S).logpdf(yv[keep])
    return pm, pc, ll


def test_filter_loglik_matches_dense_oracle(rng):
    model = ar1_plus_noise(30)
    _, y = model.simulate(rng)
    y[4] = np.nan
    _, _, ll = dense_posterior(model, y)
    assert kalman_filter(model, y).loglik == pytest.approx(ll, rel=1e-10)


def test_ffbs_moments_match_dense_posterior(rng):
    model = ar1_plus_noise(12)
    _, y = model.simulate(rng)
    y[3] = np.nan
    pm, pc, _ = dense_posterior(model, y)
    draws = ffbs_draw(model, y, rng, size=40_000)[:, :, 0]
    se = np.sqrt(np.diag(pc) / draws.shape[0])
    assert np.all(np.abs(draws.mean(0) - pm) < 4 * se)
    np.testing.assert_allclose(np.cov(draws.T), pc, atol=0.03)


def test_ffbs_handles_singular_state_noise(rng):
    # second state is a deterministic copy of the first one's shock: rank-1 Q
    Q = np.array([[1.0, -1.0], [-1.0, 1.0]])
    model = LinearGaussianSSM(Z=np.array([[1.0, 1.0]]), T=np.zeros((2, 2)), Q=Q, a1=np.zeros(2), P1=Q, H=np.full((1, 1), 0.1), n=20)
    _, y = model.simulate(rng)
    draws = ffbs_draw(model, y, rng, size=50)
    np.testing.assert_allclose(draws[..., 0], -draws[..., 1], atol=1e-8)


def test_simulate_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        LinearGaussianSSM(Z=np.ones((1, 2)), T=np.eye(3), Q=np.eye(2), a1=np.zeros(2), P1=np.eye(2), n=5)


def test_band_system_roundtrip_and_solve(rng):
    A = random_spd_block_tridiag(30, 2, rng)
    sys = BandSystem.from_dense(A, block_size=2)
    assert sys.bandwidth == 3
    np.testing.assert_allclose(sys.to_dense(), A)
    b = rng.standard_normal(A.shape[0])
    np.testing.assert_allclose(band_cholesky_solve(sys, b), np.linalg.solve(A, b), rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(n_blocks=st.integers(1, 25), k=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_band_solve_property(n_blocks, k, seed):
    r = np.random.default_rng(seed)
    A = random_spd_block_tridiag(n_blocks, k, r)
    sys = BandSystem.from_dense(A, block_size=k)
    b = r.standard_normal((A.shape[0], 2))
    x = band_cholesky_solve(sys, b)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b) * np.linalg.cond(A)


def tvp_example(rng, n=20):
    obs = rng.standard_normal(n)
    load = np.column_stack([np.ones(n), rng.standard_normal(n)])
    prec = rng.uniform(0.5, 2.0, n)
    Qp = np.diag([20.0, 50.0])
    return obs, load, prec, Qp


def tvp_as_ssm(obs, load, prec, Qp):
    n = len(obs)
    return LinearGaussianSSM(
        Z=load[:, None, :], T=np.eye(2), Q=np.linalg.inv(Qp), a1=np.zeros(2), P1=np.eye(2),
        H=(1.0 / prec)[:, None, None], n=n,
    ), obs[:, None]


def test_tvp_system_matches_dense_oracle(rng):
    obs, load, prec, Qp = tvp_example(rng)
    sys = build_tvp_precision_system(obs, load, prec, Qp, np.zeros(2), np.eye(2))
    model, y = tvp_as_ssm(obs, load, prec, Qp)
    pm, pc, _ = dense_posterior(model, y)
    np.testing.assert_allclose(posterior_mean(sys), pm, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(np.linalg.inv(sys.to_dense()), pc, rtol=1e-8, atol=1e-10)


def test_precision_draw_moments(rng):
    obs, load, prec, Qp = tvp_example(rng, 8)
    sys = build_tvp_precision_system(obs, load, prec, Qp, np.zeros(2), np.eye(2))
    x = precision_draw(sys, rng, size=40_000)
    cov = np.linalg.inv(sys.to_dense())
    se = np.sqrt(np.diag(cov) / x.shape[0])
    assert np.all(np.abs(x.mean(0) - posterior_mean(sys)) < 4 * se)
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.02)
    assert precision_draw(sys, rng).shape == (16,)


def test_tvp_system_validates_shapes(rng):
    with pytest.raises(ValidationError):
        build_tvp_precision_system(np.zeros(5), np.zeros((4, 2)), np.ones(5), np.eye(2), np.zeros(2), np.eye(2))
