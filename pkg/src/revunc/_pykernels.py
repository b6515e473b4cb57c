"""Pure-Python implementations of the numerical kernels.

These are the reference versions of the routines compiled in ``_kernels.pyx``.
Both modules expose the same functions with the same argument conventions, so
either can back :mod:`revunc.kernels`.

Band matrices use LAPACK lower storage: for a symmetric matrix ``A`` with
``bw`` sub-diagonals, ``ab[i, j] == A[j + i, j]`` for ``0 <= i <= bw``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DecompositionError

# Relative pivot size below which a PSD factorization treats a direction as
# deterministic, and the (negative) size beyond which it reports failure.
PSD_ZERO_TOL = 1e-10
PSD_NEG_TOL = 1e-6
# fraction of the predictive variance below which smoothed pivots count as rounding
PSD_REF_TOL = 1e-6

LOG_2PI = math.log(2.0 * math.pi)


def band_cholesky(ab):
    ab = np.asarray(ab, dtype=float)
    bw = ab.shape[0] - 1
    n = ab.shape[1]
    L = np.zeros_like(ab)
    for j in range(n):
        s = ab[0, j]
        for k in range(max(0, j - bw), j):
            ljk = L[j - k, k]
            s -= ljk * ljk
        if not s > 0.0:
            raise DecompositionError("band matrix is not positive definite", j)
        d = math.sqrt(s)
        L[0, j] = d
        for i in range(j + 1, min(n, j + bw + 1)):
            s = ab[i - j, j]
            for k in range(max(0, i - bw), j):
                s -= L[i - k, k] * L[j - k, k]
            L[i - j, j] = s / d
    return L


def band_solve_lower(L, b):
    L = np.asarray(L, dtype=float)
    x = np.array(b, dtype=float, copy=True)
    bw = L.shape[0] - 1
    n = L.shape[1]
    for i in range(n):
        for k in range(max(0, i - bw), i):
            x[i] -= L[i - k, k] * x[k]
        x[i] /= L[0, i]
    return x


def band_solve_upper(L, b):
    L = np.asarray(L, dtype=float)
    x = np.array(b, dtype=float, copy=True)
    bw = L.shape[0] - 1
    n = L.shape[1]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, min(n, i + bw + 1)):
            x[i] -= L[k - i, i] * x[k]
        x[i] /= L[0, i]
    return x


def psd_cholesky(A, ref=0.0):
    """Lower factor of a positive semi-definite matrix.

    Columns whose pivot vanishes (relative to the original diagonal, or to
    ``ref`` when that is larger) are set to zero, so ``L @ L.T`` reproduces
    ``A`` on its range. ``ref`` lets callers account for rounding inherited
    from the larger matrices ``A`` was computed from.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = A[j, j] - L[j, :j] @ L[j, :j]
        scale = max(abs(A[j, j]), ref)
        if s <= PSD_ZERO_TOL * scale or scale == 0.0:
            if s < -PSD_NEG_TOL * scale:
                raise DecompositionError("matrix is not positive semi-definite", j)
            continue
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, m):
            L[i, j] = (A[i, j] - L[i, :j] @ L[j, :j]) / d
    return L


def psd_solve(L, B):
    """Solve ``(L L') X = B`` for ``B`` in the range of ``L L'``."""
    X = np.array(B, dtype=float, copy=True)
    m = L.shape[0]
    for i in range(m):
        if L[i, i] == 0.0:
            X[i] = 0.0
        else:
            X[i] = (X[i] - L[i, :i] @ X[:i]) / L[i, i]
    for i in range(m - 1, -1, -1):
        if L[i, i] == 0.0:
            X[i] = 0.0
        else:
            X[i] = (X[i] - L[i + 1 :, i] @ X[i + 1 :]) / L[i, i]
    return X


def kalman_filter(Z, d, H, T, c, Q, a1, P1, y):
    n, p, m = Z.shape
    a_pred = np.empty((n, m))
    P_pred = np.empty((n, m, m))
    a_filt = np.empty((n, m))
    P_filt = np.empty((n, m, m))
    loglik = np.zeros(n)
    eye = np.eye(m)
    for t in range(n):
        if t == 0:
            a = np.array(a1, dtype=float)
            P = np.array(P1, dtype=float)
        else:
            a = c[t] + T[t] @ a_filt[t - 1]
            P = T[t] @ P_filt[t - 1] @ T[t].T + Q[t]
            P = 0.5 * (P + P.T)
        a_pred[t] = a
        P_pred[t] = P
        obs = ~np.isnan(y[t])
        if not obs.any():
            a_filt[t] = a
            P_filt[t] = P
            continue
        Zt = Z[t][obs]
        Ht = H[t][np.ix_(obs, obs)]
        v = y[t][obs] - d[t][obs] - Zt @ a
        F = Zt @ P @ Zt.T + Ht
        F = 0.5 * (F + F.T)
        try:
            Fc = np.linalg.cholesky(F)
        except np.linalg.LinAlgError:
            raise DecompositionError("innovation covariance is singular", t) from None
        PZt = P @ Zt.T
        # K = P Z' F^{-1}
        K = np.linalg.solve(Fc.T, np.linalg.solve(Fc, PZt.T)).T
        a_filt[t] = a + K @ v
        IKZ = eye - K @ Zt
        Pf = IKZ @ P @ IKZ.T + K @ Ht @ K.T
        P_filt[t] = 0.5 * (Pf + Pf.T)
        w = np.linalg.solve(Fc, v)
        k = int(obs.sum())
        loglik[t] = -0.5 * (k * LOG_2PI + 2.0 * np.log(np.diag(Fc)).sum() + w @ w)
    return a_pred, P_pred, a_filt, P_filt, loglik


def _ref_scale(P):
    return PSD_REF_TOL * float(np.abs(np.diagonal(P)).max())


def backward_sample(a_filt, P_filt, P_pred, T, c, z):
    n, m = a_filt.shape
    k = z.shape[0]
    draws = np.empty((k, n, m))
    S = psd_cholesky(P_filt[n - 1], _ref_scale(P_pred[n - 1]))
    draws[:, n - 1] = a_filt[n - 1] + z[:, n - 1] @ S.T
    for t in range(n - 2, -1, -1):
        Lm = psd_cholesky(P_pred[t + 1])
        G = T[t + 1] @ P_filt[t]
        J = psd_solve(Lm, G).T
        cov = P_filt[t] - J @ G
        ref = max(_ref_scale(P_pred[t]), _ref_scale(P_pred[t + 1]))
        S = psd_cholesky(0.5 * (cov + cov.T), ref)
        pred = c[t + 1] + T[t + 1] @ a_filt[t]
        mean = a_filt[t] + (draws[:, t + 1] - pred) @ J.T
        draws[:, t] = mean + z[:, t] @ S.T
    return draws


def draw_mixture_indicators(ystar, h, u, probs, means, variances):
    ystar = np.asarray(ystar, dtype=float)
    resid = ystar[:, None] - np.asarray(h, dtype=float)[:, None] - means[None, :]
    logw = np.log(probs) - 0.5 * np.log(variances) - 0.5 * resid**2 / variances
    logw -= logw.max(axis=1, keepdims=True)
    cum = np.cumsum(np.exp(logw), axis=1)
    target = np.asarray(u, dtype=float) * cum[:, -1]
    idx = (cum < target[:, None]).sum(axis=1)
    return np.minimum(idx, len(probs) - 1).astype(np.int64)
