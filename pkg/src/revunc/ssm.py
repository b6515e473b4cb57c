"""Linear-Gaussian state-space primitives.

Kalman filtering, forward-filtering backward-sampling (FFBS) and the banded
precision sampler used to draw latent paths in one shot ("all without a loop").

State-space convention, for ``t = 0, ..., n-1``::

    y_t     = d_t + Z_t a_t + e_t,          e_t ~ N(0, H_t)
    a_t     = c_t + T_t a_{t-1} + u_t,      u_t ~ N(0, Q_t)     (t >= 1)
    a_0     ~ N(a1, P1)

``T_0``, ``c_0`` and ``Q_0`` are carried for shape regularity but unused.
Missing observations are NaN entries of ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DecompositionError, ValidationError


def _stack(x, n: int, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape == shape:
        arr = np.broadcast_to(arr, (n,) + shape)
    if arr.shape != (n,) + shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {(n,) + shape} or {shape}")
    return np.ascontiguousarray(arr)


@dataclass
class LinearGaussianSSM:
    Z: np.ndarray
    T: np.ndarray
    Q: np.ndarray
    a1: np.ndarray
    P1: np.ndarray
    H: np.ndarray | None = None
    d: np.ndarray | None = None
    c: np.ndarray | None = None
    n: int | None = None

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if self.n is None:
            if Z.ndim != 3:
                raise ValidationError("n must be given when Z is time-invariant")
            self.n = Z.shape[0]
        n = int(self.n)
        p, m = Z.shape[-2:]
        self.Z = _stack(Z, n, (p, m), "Z")
        self.T = _stack(self.T, n, (m, m), "T")
        self.Q = _stack(self.Q, n, (m, m), "Q")
        self.H = _stack(np.zeros((p, p)) if self.H is None else self.H, n, (p, p), "H")
        self.d = _stack(np.zeros(p) if self.d is None else self.d, n, (p,), "d")
        self.c = _stack(np.zeros(m) if self.c is None else self.c, n, (m,), "c")
        self.a1 = np.asarray(self.a1, dtype=float).reshape(m)
        self.P1 = np.asarray(self.P1, dtype=float).reshape(m, m)

    @property
    def n_obs(self) -> int:
        return self.Z.shape[1]

    @property
    def n_states(self) -> int:
        return self.Z.shape[2]

    def check_covariances(self, tol: float = 1e-10) -> None:
        """Raise ValidationError unless H_t, Q_t and P1 are symmetric PSD."""
        problems = []
        for name, mats in (("H", self.H), ("Q", self.Q), ("P1", self.P1[None])):
            if not np.allclose(mats, np.swapaxes(mats, -1, -2), atol=tol):
                problems.append(f"{name} is not symmetric")
                continue
            lo = np.linalg.eigvalsh(mats).min()
            if lo < -tol * max(1.0, np.abs(mats).max()):
                problems.append(f"{name} has a negative eigenvalue ({lo:.3g})")
        if problems:
            raise ValidationError("invalid state-space covariances", problems)

    def simulate(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw a state path and observations from the model."""
        n, m, p = self.n, self.n_states, self.n_obs
        states = np.empty((n, m))
        obs = np.empty((n, p))
        for t in range(n):
            if t == 0:
                mean, cov = self.a1, self.P1
            else:
                mean, cov = self.c[t] + self.T[t] @ states[t - 1], self.Q[t]
            states[t] = mean + kernels.psd_cholesky(cov) @ rng.standard_normal(m)
            obs[t] = (
                self.d[t]
                + self.Z[t] @ states[t]
                + kernels.psd_cholesky(self.H[t]) @ rng.standard_normal(p)
            )
        return states, obs


@dataclass
class FilterOutput:
    predicted_mean: np.ndarray
    predicted_cov: np.ndarray
    filtered_mean: np.ndarray
    filtered_cov: np.ndarray
    loglik_terms: np.ndarray

    @property
    def loglik(self) -> float:
        return float(self.loglik_terms.sum())


def kalman_filter(model: LinearGaussianSSM, y) -> FilterOutput:
    """Run the Kalman filter; NaN entries of ``y`` are skipped."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != (model.n, model.n_obs):
        raise ValidationError(f"observations have shape {y.shape}, expected {(model.n, model.n_obs)}")
    out = kernels.kalman_filter(
        model.Z, model.d, model.H, model.T, model.c, model.Q, model.a1, model.P1, y
    )
    return FilterOutput(*out)


def ffbs_draw(
    model: LinearGaussianSSM,
    y,
    rng: np.random.Generator,
    size: int | None = None,
    filtered: FilterOutput | None = None,
) -> np.ndarray:
    """Draw state paths from p(a_0..a_{n-1} | y) by forward filtering, backward sampling.

    Returns an array of shape ``(n, m)``, or ``(size, n, m)`` when ``size`` is
    given. Directions with zero conditional variance (rank-deficient ``Q_t``)
    are handled through a semi-definite factorization, so only the stochastic
    subspace is sampled.
    """
    fo = kalman_filter(model, y) if filtered is None else filtered
    k = 1 if size is None else int(size)
    z = rng.standard_normal((k, model.n, model.n_states))
    draws = kernels.backward_sample(
        fo.filtered_mean, fo.filtered_cov, fo.predicted_cov, model.T, model.c, z
    )
    return draws[0] if size is None else draws


@dataclass
class BandSystem:
    """Symmetric positive-definite precision ``omega`` in lower band storage plus a covector.

    ``ab[i, j] == Omega[j + i, j]``. For a block-tridiagonal matrix with full
    ``block_size`` x ``block_size`` blocks the band has ``2 * block_size - 1``
    sub-diagonals.
    """

    ab: np.ndarray
    covector: np.ndarray
    block_size: int = 1
    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def bandwidth(self) -> int:
        return self.ab.shape[0] - 1

    @property
    def size(self) -> int:
        return self.ab.shape[1]

    def cholesky(self) -> np.ndarray:
        if self._chol is None:
            self._chol = kernels.band_cholesky(self.ab)
        return self._chol

    def to_dense(self) -> np.ndarray:
        n, bw = self.size, self.bandwidth
        out = np.zeros((n, n))
        for i in range(bw + 1):
            idx = np.arange(n - i)
            out[idx + i, idx] = self.ab[i, : n - i]
            out[idx, idx + i] = self.ab[i, : n - i]
        return out

    @classmethod
    def from_dense(cls, omega, covector=None, bandwidth: int | None = None, block_size: int = 1):
        omega = np.asarray(omega, dtype=float)
        n = omega.shape[0]
        if bandwidth is None:
            nz = np.nonzero(np.tril(omega))
            bandwidth = int((nz[0] - nz[1]).max()) if len(nz[0]) else 0
        ab = np.zeros((bandwidth + 1, n))
        for i in range(bandwidth + 1):
            idx = np.arange(n - i)
            ab[i, : n - i] = omega[idx + i, idx]
        cov = np.zeros(n) if covector is None else np.asarray(covector, dtype=float)
        return cls(ab, cov, block_size)

    @classmethod
    def from_blocks(cls, diag, off, covector) -> "BandSystem":
        """Assemble from diagonal blocks ``(n, k, k)`` and sub-diagonal blocks ``(n-1, k, k)``.

        ``off[t]`` is the block in block-row ``t + 1``, block-column ``t``.
        """
        diag = np.asarray(diag, dtype=float)
        off = np.asarray(off, dtype=float)
        nb, k, _ = diag.shape
        bw = 2 * k - 1 if nb > 1 else k - 1
        n = nb * k
        ab = np.zeros((bw + 1, n))
        ii, jj = np.tril_indices(k)
        base = np.arange(nb)[:, None] * k
        ab[(ii - jj)[None, :].repeat(nb, 0), base + jj] = diag[:, ii, jj]
        if nb > 1:
            oi, oj = np.indices((k, k)).reshape(2, -1)
            base = np.arange(nb - 1)[:, None] * k
            ab[(k + oi - oj)[None, :].repeat(nb - 1, 0), base + oj] = off[:, oi, oj]
        return cls(ab, np.asarray(covector, dtype=float).reshape(n), k)


def band_cholesky_solve(system: BandSystem, rhs) -> np.ndarray:
    """Solve ``Omega x = rhs`` with the band Cholesky factor; never forms an inverse."""
    L = system.cholesky()
    return kernels.band_solve_upper(L, kernels.band_solve_lower(L, rhs))


def _blocks(x, n: int, k: int, name: str, square: bool = True) -> np.ndarray:
    shape = (k, k) if square else (k,)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == len(shape):
        arr = np.broadcast_to(arr, (n,) + shape)
    if arr.shape != (n,) + shape:
        raise ValidationError(f"{name} has shape {arr.shape}, expected {(n,) + shape}")
    return arr


def build_tvp_precision_system(obs, loadings, obs_prec, state_prec, a1, P1) -> BandSystem:
    """Posterior precision and covector for random-walk coefficients.

    Model: ``obs_t = loadings_t @ b_t + e_t`` with ``e_t`` of precision
    ``obs_prec_t``; ``b_t = b_{t-1} + u_t`` with ``u_t`` of precision
    ``state_prec_t`` (indexed by the later period, ``t = 1..n-1``); ``b_0 ~
    N(a1, P1)``.

    ``obs`` is ``(n,)`` for scalar observations or ``(n, p)``; ``loadings`` is
    ``(n, k)`` or ``(n, p, k)``; ``obs_prec`` is ``(n,)`` or ``(n, p, p)``;
    ``state_prec`` is ``(k, k)`` or ``(n-1, k, k)``.
    """
    y = np.asarray(obs, dtype=float)
    Zt = np.asarray(loadings, dtype=float)
    A11 = np.asarray(obs_prec, dtype=float)
    n = y.shape[0]
    if y.ndim == 1:
        y = y[:, None]
        if Zt.ndim != 2:
            raise ValidationError("scalar observations need (n, k) loadings")
        Zt = Zt[:, None, :]
        A11 = np.broadcast_to(A11, (n,)).reshape(n, 1, 1)
    if Zt.shape[0] != n or Zt.shape[1] != y.shape[1]:
        raise ValidationError(f"loadings shape {Zt.shape} does not match observations {y.shape}")
    if A11.shape != (n, y.shape[1], y.shape[1]):
        raise ValidationError(f"obs_prec shape {A11.shape} does not match observations {y.shape}")
    k = Zt.shape[2]
    a1 = np.asarray(a1, dtype=float).reshape(-1)
    P1 = np.asarray(P1, dtype=float)
    if a1.shape != (k,) or P1.shape != (k, k):
        raise ValidationError(f"initial state must be ({k},) and ({k}, {k})")
    A22 = _blocks(state_prec, max(n - 1, 0), k, "state_prec")

    ZtA = np.einsum("tpk,tpq->tkq", Zt, A11)
    diag = np.einsum("tkq,tqj->tkj", ZtA, Zt)
    cov = np.einsum("tkq,tq->tk", ZtA, y)
    P1_inv = np.linalg.inv(P1)
    diag[0] += P1_inv
    cov[0] += P1_inv @ a1
    if n > 1:
        diag[:-1] += A22
        diag[1:] += A22
    return BandSystem.from_blocks(diag, -A22, cov.reshape(-1))


def precision_draw(system: BandSystem, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``x ~ N(Omega^{-1} C, Omega^{-1})``.

    Factor ``Omega = L L'``, solve ``L a = C``, then ``L' x = a + e`` with
    standard-normal ``e``. Returns ``(n,)`` or ``(size, n)``.
    """
    L = system.cholesky()
    a = kernels.band_solve_lower(L, system.covector)
    k = 1 if size is None else int(size)
    e = rng.standard_normal((system.size, k))
    x = kernels.band_solve_upper(L, a[:, None] + e)
    return x[:, 0] if size is None else x.T


def posterior_mean(system: BandSystem) -> np.ndarray:
    return band_cholesky_solve(system, system.covector)


__all__ = [
    "BandSystem",
    "DecompositionError",
    "FilterOutput",
    "LinearGaussianSSM",
    "band_cholesky_solve",
    "build_tvp_precision_system",
    "ffbs_draw",
    "kalman_filter",
    "posterior_mean",
    "precision_draw",
]
