"""The compiled extension and the pure-Python fallback agree on every kernel."""

import numpy as np
import pytest

from revunc import _pykernels, kernels
from revunc.errors import DecompositionError
from revunc.ssm import BandSystem
from revunc.svol import MIXTURE_MEANS, MIXTURE_PROBS, MIXTURE_VARIANCES

from conftest import random_spd_block_tridiag

_kernels = pytest.importorskip("revunc._kernels")


def news_noise_system(n, rng, H=None):
    m, p = 5, 2
    Z = np.broadcast_to(np.array([[1.0, 1, 0, 1, 0], [1, 0, 1, 0, 1]]), (n, p, m)).copy()
    d = rng.standard_normal((n, p)) * 0.1
    Hs = np.zeros((n, p, p)) if H is None else np.broadcast_to(H, (n, p, p)).copy()
    T = np.zeros((n, m, m))
    T[:, 0, 0] = rng.uniform(0.2, 0.9, n)
    c = np.zeros((n, m))
    c[:, 0] = rng.standard_normal(n)
    s = np.exp(0.5 * rng.normal(-1, 0.5, (n, 4)))
    R = np.zeros((n, m, 4))
    R[:, 0, 0], R[:, 0, 1], R[:, 1, 1] = s[:, 0], s[:, 1], -s[:, 1]
    R[:, 3, 2], R[:, 4, 3] = s[:, 2], s[:, 3]
    Q = np.einsum("tij,tkj->tik", R, R)
    y = rng.standard_normal((n, p))
    y[3, 1] = np.nan
    y[5] = np.nan
    return Z, d, Hs, T, c, Q, np.zeros(m), Q[0].copy(), y


def test_backend_selection_reports_a_known_backend():
    assert kernels.BACKEND in ("compiled", "python")


def test_band_cholesky_and_solves_match(rng):
    A = random_spd_block_tridiag(40, 3, rng)
    sys = BandSystem.from_dense(A, bandwidth=5)
    La = _pykernels.band_cholesky(sys.ab)
    Lb = _kernels.band_cholesky(sys.ab)
    np.testing.assert_allclose(La, Lb, rtol=1e-13, atol=1e-13)
    b = rng.standard_normal((A.shape[0], 3))
    for f in ("band_solve_lower", "band_solve_upper"):
        np.testing.assert_allclose(getattr(_pykernels, f)(La, b), getattr(_kernels, f)(Lb, b), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("with_noise", [False, True], ids=["H=0", "H>0"])
def test_kalman_filter_matches(rng, with_noise):
    H = np.array([[0.3, 0.1], [0.1, 0.2]]) if with_noise else None
    args = news_noise_system(30, rng, H)
    a = _pykernels.kalman_filter(*args)
    b = _kernels.kalman_filter(*args)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)


def test_backward_sample_matches(rng):
    args = news_noise_system(25, rng)
    out = _pykernels.kalman_filter(*args)
    z = rng.standard_normal((4, 25, 5))
    a = _pykernels.backward_sample(out[2], out[3], out[1], args[3], args[4], z)
    b = _kernels.backward_sample(out[2], out[3], out[1], args[3], args[4], z)
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-11)


def test_psd_cholesky_matches_on_singular_input(rng):
    B = rng.standard_normal((5, 2))
    A = B @ B.T
    La, Lb = _pykernels.psd_cholesky(A), _kernels.psd_cholesky(A)
    np.testing.assert_allclose(La, Lb, atol=1e-12)
    np.testing.assert_allclose(La @ La.T, A, atol=1e-12)
    X = rng.standard_normal((5, 3))
    rhs = A @ X
    np.testing.assert_allclose(_pykernels.psd_solve(La, rhs), _kernels.psd_solve(Lb, rhs), atol=1e-10)


def test_psd_cholesky_reference_scale_absorbs_rounding(backend):
    A = np.diag([-1e-12, 1.0])
    with pytest.raises(DecompositionError):
        backend.psd_cholesky(A)
    L = backend.psd_cholesky(A, 1e-3)
    assert L[0, 0] == 0.0 and L[1, 1] == 1.0


def test_psd_cholesky_rejects_indefinite(backend):
    with pytest.raises(DecompositionError) as err:
        backend.psd_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert err.value.index == 1


def test_band_cholesky_reports_pivot(backend):
    ab = np.array([[1.0, 1.0, -1.0], [0.0, 0.0, 0.0]])
    with pytest.raises(DecompositionError) as err:
        backend.band_cholesky(ab)
    assert err.value.index == 2


def test_mixture_indicators_match(rng):
    y = rng.normal(-2, 3, 500)
    h = rng.normal(-1, 1, 500)
    u = rng.random(500)
    a = _pykernels.draw_mixture_indicators(y, h, u, MIXTURE_PROBS, MIXTURE_MEANS, MIXTURE_VARIANCES)
    b = _kernels.draw_mixture_indicators(y, h, u, MIXTURE_PROBS, MIXTURE_MEANS, MIXTURE_VARIANCES)
    np.testing.assert_array_equal(a, b)


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, REVUNC_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from revunc import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
