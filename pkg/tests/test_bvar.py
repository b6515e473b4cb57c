import numpy as np
import pandas as pd
import pytest

from revunc import bvar
from revunc.errors import ConfigurationError, ValidationError


def simulate_var(rng, T=400):
    A = np.array([[0.5, 0.1], [0.0, 0.7]])
    L = np.array([[1.0, 0.0], [0.5, 0.8]])
    y = np.zeros((T, 2))
    for t in range(1, T):
        y[t] = A @ y[t - 1] + L @ rng.standard_normal(2)
    return y, A, L


SPEC2 = bvar.VarSpec(("x", "u"), p=1, transforms={}, uncertainty="u")


def test_spec_defaults_and_validation():
    s = bvar.VarSpec()
    assert s.p == 2 and s.band == 0.68 and s.variables[-1] == "uncertainty"
    assert s.quantiles == pytest.approx((0.16, 0.84))
    with pytest.raises(ValidationError):
        bvar.VarSpec(("uncertainty", "gdp"))
    with pytest.raises(ValidationError):
        bvar.VarSpec(p=0)
    with pytest.raises(ValidationError):
        bvar.VarSpec(transforms={"gdp": "cube"})


def test_transforms():
    assert bvar.apply_transform([1.0, np.e], "log100")[1] == pytest.approx(100.0)
    z = bvar.apply_transform([1.0, 2.0, 3.0], "standardize")
    assert z.tolist() == [-1.0, 0.0, 1.0]
    with pytest.raises(ValidationError):
        bvar.apply_transform([0.0, 1.0], "log100")


def test_ols_recovers_coefficients(rng):
    y, A, L = simulate_var(rng, 5000)
    Bhat, S, _ = bvar.ols(y, 1)
    np.testing.assert_allclose(Bhat[1:].T, A, atol=0.03)
    np.testing.assert_allclose(S / (len(y) - 1 - 3), L @ L.T, rtol=0.06, atol=0.03)


def test_posterior_centres_on_ols(rng):
    y, A, L = simulate_var(rng)
    post = bvar.fit_bvar(y, SPEC2, 3000, rng)
    np.testing.assert_allclose(post.coef.mean(0), post.ols_coef, atol=0.02)
    T, k = post.n_obs, 3
    _, S, _ = bvar.ols(y, 1)
    # IW(S, T - k) has mean S / (T - k - n - 1)
    np.testing.assert_allclose(post.sigma.mean(0), S / (T - k - 3), rtol=0.03)


def test_sample_too_short():
    y = np.random.default_rng(0).standard_normal((5, 2))
    with pytest.raises(ConfigurationError):
        bvar.fit_bvar(y, SPEC2, 5)


def test_identification_and_companion(rng):
    y, A, L = simulate_var(rng)
    post = bvar.fit_bvar(y, SPEC2, 50, rng)
    for s in post.sigma:
        C = bvar.identify_recursive(s)
        assert np.allclose(np.triu(C, 1), 0) and np.all(np.diag(C) > 0)
        np.testing.assert_allclose(C @ C.T, s, atol=1e-12)
    F = bvar.companion(np.array([[[0.5]], [[0.2]]]))
    np.testing.assert_array_equal(F, [[0.5, 0.2], [1.0, 0.0]])
    from revunc.errors import DecompositionError

    with pytest.raises(DecompositionError):
        bvar.identify_recursive(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_irf_of_known_var_matches_powers(rng):
    y, A, L = simulate_var(rng)
    post = bvar.fit_bvar(y, SPEC2, 10, rng)
    post.coef[:] = np.vstack([np.zeros(2), A.T])
    post.sigma[:] = L @ L.T
    out = bvar.irf(post, shock="x", horizons=5)
    for h in range(6):
        np.testing.assert_allclose(out.responses[:, h, 0], np.linalg.matrix_power(A, h) @ L[:, 0])
    assert out.explosive_share == 0.0
    frame = out.to_frame()
    assert list(frame.columns) == ["variable", "horizon", "mean", "q16", "q84"]
    assert len(frame) == 2 * 6


def test_explosive_draws_are_flagged(rng):
    y, *_ = simulate_var(rng)
    post = bvar.fit_bvar(y, SPEC2, 4, rng)
    post.coef[0, 1:] = np.diag([1.5, 0.1])
    out = bvar.irf(post, horizons=3)
    assert out.explosive.tolist() == [True, False, False, False]


def test_irf_csv_roundtrip(rng, tmp_path):
    y, *_ = simulate_var(rng)
    s = bvar.irf(bvar.fit_bvar(y, SPEC2, 100, rng), horizons=4)
    s.to_csv(tmp_path / "i.csv")
    back = bvar.read_irf_summary(tmp_path / "i.csv")
    np.testing.assert_array_equal(back["mean"].to_numpy(), s.to_frame()["mean"].to_numpy())


def test_panel_average_is_drawwise(rng):
    y, *_ = simulate_var(rng)
    a = bvar.irf(bvar.fit_bvar(y, SPEC2, 20, 1))
    b = bvar.irf(bvar.fit_bvar(y, SPEC2, 20, 2))
    avg = bvar.panel_average_irf({"A": a, "B": b}, {"A": 1.0, "B": 3.0})
    np.testing.assert_allclose(avg.responses, 0.25 * a.responses + 0.75 * b.responses)
    c = bvar.irf(bvar.fit_bvar(y, SPEC2, 10, 3))
    with pytest.raises(ValidationError):
        bvar.panel_average_irf([a, c])


def test_frame_input_and_sample_window(rng):
    y, *_ = simulate_var(rng, 200)
    df = pd.DataFrame(y + 10.0, columns=["x", "u"], index=range(200))
    spec = bvar.VarSpec(("x", "u"), p=1, transforms={"x": "log100"}, sample=(50, 199), uncertainty="u")
    post = bvar.fit_bvar(df, spec, 10, rng)
    assert post.n_obs == 149


def test_integrating_over_index_draws(rng):
    y, *_ = simulate_var(rng, 200)
    U = y[:, 1] + 0.01 * rng.standard_normal((150, 200))
    spec = bvar.VarSpec(("x", "u"), p=1, transforms={"u": "standardize"}, uncertainty="u")
    post = bvar.fit_bvar_with_uncertainty_draws(y[:, :1], U, spec, 200, rng)
    assert post.coef.shape == (200, 3, 2)
    with pytest.raises(ValidationError):
        bvar.fit_bvar_with_uncertainty_draws(y[:, :1], U[:50], spec, 10, rng)
    with pytest.raises(ValidationError):
        bvar.fit_bvar_with_uncertainty_draws(y[:100, :1], U, spec, 10, rng)
