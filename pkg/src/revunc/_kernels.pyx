# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled numerical kernels.

Mirrors ``_pykernels`` function for function; see that module for the
storage conventions.
"""

import numpy as np

from libc.math cimport sqrt, log, exp, isnan

from .errors import DecompositionError

cdef double PSD_ZERO_TOL = 1e-10
cdef double PSD_NEG_TOL = 1e-6
cdef double PSD_REF_TOL = 1e-6
cdef double LOG_2PI = 1.8378770664093453


def band_cholesky(ab_in):
    cdef double[:, ::1] ab = np.ascontiguousarray(ab_in, dtype=np.float64)
    cdef Py_ssize_t bw = ab.shape[0] - 1
    cdef Py_ssize_t n = ab.shape[1]
    L_arr = np.zeros((bw + 1, n))
    cdef double[:, ::1] L = L_arr
    cdef Py_ssize_t i, j, k, k0, iend
    cdef double s, d
    for j in range(n):
        s = ab[0, j]
        k0 = j - bw if j > bw else 0
        for k in range(k0, j):
            s -= L[j - k, k] * L[j - k, k]
        if not s > 0.0:
            raise DecompositionError("band matrix is not positive definite", j)
        d = sqrt(s)
        L[0, j] = d
        iend = j + bw + 1 if j + bw + 1 < n else n
        for i in range(j + 1, iend):
            s = ab[i - j, j]
            k0 = i - bw if i > bw else 0
            for k in range(k0, j):
                s -= L[i - k, k] * L[j - k, k]
            L[i - j, j] = s / d
    return L_arr


def band_solve_lower(L_in, b_in):
    cdef double[:, ::1] L = np.ascontiguousarray(L_in, dtype=np.float64)
    b = np.array(b_in, dtype=np.float64, copy=True)
    shape = b.shape
    x_arr = np.ascontiguousarray(b.reshape(shape[0], -1))
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t bw = L.shape[0] - 1
    cdef Py_ssize_t n = L.shape[1]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, k, k0, r
    cdef double lik, d
    for i in range(n):
        k0 = i - bw if i > bw else 0
        for k in range(k0, i):
            lik = L[i - k, k]
            for r in range(m):
                x[i, r] -= lik * x[k, r]
        d = L[0, i]
        for r in range(m):
            x[i, r] /= d
    return x_arr.reshape(shape)


def band_solve_upper(L_in, b_in):
    cdef double[:, ::1] L = np.ascontiguousarray(L_in, dtype=np.float64)
    b = np.array(b_in, dtype=np.float64, copy=True)
    shape = b.shape
    x_arr = np.ascontiguousarray(b.reshape(shape[0], -1))
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t bw = L.shape[0] - 1
    cdef Py_ssize_t n = L.shape[1]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t i, k, kend, r
    cdef double lki, d
    for i in range(n - 1, -1, -1):
        kend = i + bw + 1 if i + bw + 1 < n else n
        for k in range(i + 1, kend):
            lki = L[k - i, i]
            for r in range(m):
                x[i, r] -= lki * x[k, r]
        d = L[0, i]
        for r in range(m):
            x[i, r] /= d
    return x_arr.reshape(shape)


cdef int _psd_chol(double[:, ::1] A, double[:, ::1] L, double ref=0.0) except -1:
    cdef Py_ssize_t m = A.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s, scale, d
    for i in range(m):
        for j in range(m):
            L[i, j] = 0.0
    for j in range(m):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        scale = A[j, j] if A[j, j] >= 0.0 else -A[j, j]
        if ref > scale:
            scale = ref
        if s <= PSD_ZERO_TOL * scale or scale == 0.0:
            if s < -PSD_NEG_TOL * scale:
                raise DecompositionError("matrix is not positive semi-definite", j)
            continue
        d = sqrt(s)
        L[j, j] = d
        for i in range(j + 1, m):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d
    return 0


cdef void _psd_solve(double[:, ::1] L, double[:, ::1] X) noexcept:
    # in place: X <- (L L')^+ X, column by column
    cdef Py_ssize_t m = L.shape[0]
    cdef Py_ssize_t ncol = X.shape[1]
    cdef Py_ssize_t i, k, r
    cdef double s
    for r in range(ncol):
        for i in range(m):
            if L[i, i] == 0.0:
                X[i, r] = 0.0
            else:
                s = X[i, r]
                for k in range(i):
                    s -= L[i, k] * X[k, r]
                X[i, r] = s / L[i, i]
        for i in range(m - 1, -1, -1):
            if L[i, i] == 0.0:
                X[i, r] = 0.0
            else:
                s = X[i, r]
                for k in range(i + 1, m):
                    s -= L[k, i] * X[k, r]
                X[i, r] = s / L[i, i]


def psd_cholesky(A_in, double ref=0.0):
    cdef double[:, ::1] A = np.ascontiguousarray(A_in, dtype=np.float64)
    L_arr = np.zeros((A.shape[0], A.shape[0]))
    _psd_chol(A, L_arr, ref)
    return L_arr


def psd_solve(L_in, B_in):
    cdef double[:, ::1] L = np.ascontiguousarray(L_in, dtype=np.float64)
    B = np.array(B_in, dtype=np.float64, copy=True)
    shape = B.shape
    X_arr = np.ascontiguousarray(B.reshape(shape[0], -1))
    _psd_solve(L, X_arr)
    return X_arr.reshape(shape)


def kalman_filter(Z_in, d_in, H_in, T_in, c_in, Q_in, a1_in, P1_in, y_in):
    cdef double[:, :, ::1] Z = np.ascontiguousarray(Z_in, dtype=np.float64)
    cdef double[:, ::1] dd = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef double[:, :, ::1] H = np.ascontiguousarray(H_in, dtype=np.float64)
    cdef double[:, :, ::1] TT = np.ascontiguousarray(T_in, dtype=np.float64)
    cdef double[:, ::1] cc = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef double[:, :, ::1] Q = np.ascontiguousarray(Q_in, dtype=np.float64)
    cdef double[::1] a1 = np.ascontiguousarray(a1_in, dtype=np.float64)
    cdef double[:, ::1] P1 = np.ascontiguousarray(P1_in, dtype=np.float64)
    cdef double[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)

    cdef Py_ssize_t n = Z.shape[0]
    cdef Py_ssize_t p = Z.shape[1]
    cdef Py_ssize_t m = Z.shape[2]

    a_pred_arr = np.empty((n, m))
    P_pred_arr = np.empty((n, m, m))
    a_filt_arr = np.empty((n, m))
    P_filt_arr = np.empty((n, m, m))
    loglik_arr = np.zeros(n)
    cdef double[:, ::1] a_pred = a_pred_arr
    cdef double[:, :, ::1] P_pred = P_pred_arr
    cdef double[:, ::1] a_filt = a_filt_arr
    cdef double[:, :, ::1] P_filt = P_filt_arr
    cdef double[::1] loglik = loglik_arr

    cdef double[::1] a = np.empty(m)
    cdef double[:, ::1] P = np.empty((m, m))
    cdef double[:, ::1] W = np.empty((m, m))
    cdef double[:, ::1] IKZ = np.empty((m, m))
    cdef Py_ssize_t[::1] idx = np.empty(p, dtype=np.intp)
    cdef double[:, ::1] Zs = np.empty((p, m))
    cdef double[:, ::1] Hs = np.empty((p, p))
    cdef double[::1] v = np.empty(p)
    cdef double[::1] w = np.empty(p)
    cdef double[:, ::1] F = np.empty((p, p))
    cdef double[:, ::1] Fc = np.empty((p, p))
    cdef double[:, ::1] PZt = np.empty((m, p))
    cdef double[:, ::1] K = np.empty((m, p))
    cdef double[:, ::1] KH = np.empty((m, p))

    cdef Py_ssize_t t, i, j, k, l, q, nobs
    cdef double s, logdet

    for t in range(n):
        if t == 0:
            for i in range(m):
                a[i] = a1[i]
                for j in range(m):
                    P[i, j] = P1[i, j]
        else:
            for i in range(m):
                s = cc[t, i]
                for k in range(m):
                    s += TT[t, i, k] * a_filt[t - 1, k]
                a[i] = s
            # W = T P_filt
            for i in range(m):
                for j in range(m):
                    s = 0.0
                    for k in range(m):
                        s += TT[t, i, k] * P_filt[t - 1, k, j]
                    W[i, j] = s
            for i in range(m):
                for j in range(m):
                    s = Q[t, i, j]
                    for k in range(m):
                        s += W[i, k] * TT[t, j, k]
                    P[i, j] = s
            for i in range(m):
                for j in range(i + 1, m):
                    s = 0.5 * (P[i, j] + P[j, i])
                    P[i, j] = s
                    P[j, i] = s
        for i in range(m):
            a_pred[t, i] = a[i]
            for j in range(m):
                P_pred[t, i, j] = P[i, j]

        nobs = 0
        for i in range(p):
            if not isnan(y[t, i]):
                idx[nobs] = i
                nobs += 1
        if nobs == 0:
            for i in range(m):
                a_filt[t, i] = a[i]
                for j in range(m):
                    P_filt[t, i, j] = P[i, j]
            continue

        for q in range(nobs):
            i = idx[q]
            s = y[t, i] - dd[t, i]
            for k in range(m):
                Zs[q, k] = Z[t, i, k]
                s -= Z[t, i, k] * a[k]
            v[q] = s
            for l in range(nobs):
                Hs[q, l] = H[t, i, idx[l]]
        # PZt = P Zs'
        for i in range(m):
            for q in range(nobs):
                s = 0.0
                for k in range(m):
                    s += P[i, k] * Zs[q, k]
                PZt[i, q] = s
        # F = Zs P Zs' + Hs
        for q in range(nobs):
            for l in range(q + 1):
                s = 0.0
                for k in range(m):
                    s += Zs[q, k] * PZt[k, l]
                s += 0.5 * (Hs[q, l] + Hs[l, q])
                F[q, l] = s
                F[l, q] = s
        # strict Cholesky of F
        for j in range(nobs):
            for i in range(nobs):
                Fc[i, j] = 0.0
        for j in range(nobs):
            s = F[j, j]
            for k in range(j):
                s -= Fc[j, k] * Fc[j, k]
            if not s > 0.0:
                raise DecompositionError("innovation covariance is singular", t)
            Fc[j, j] = sqrt(s)
            for i in range(j + 1, nobs):
                s = F[i, j]
                for k in range(j):
                    s -= Fc[i, k] * Fc[j, k]
                Fc[i, j] = s / Fc[j, j]
        # K = PZt F^{-1}: solve F K' = PZt' row by row of PZt
        for i in range(m):
            for q in range(nobs):
                s = PZt[i, q]
                for k in range(q):
                    s -= Fc[q, k] * K[i, k]
                K[i, q] = s / Fc[q, q]
            for q in range(nobs - 1, -1, -1):
                s = K[i, q]
                for k in range(q + 1, nobs):
                    s -= Fc[k, q] * K[i, k]
                K[i, q] = s / Fc[q, q]
        for i in range(m):
            s = a[i]
            for q in range(nobs):
                s += K[i, q] * v[q]
            a_filt[t, i] = s
        # Joseph form
        for i in range(m):
            for j in range(m):
                s = 1.0 if i == j else 0.0
                for q in range(nobs):
                    s -= K[i, q] * Zs[q, j]
                IKZ[i, j] = s
        for i in range(m):
            for j in range(m):
                s = 0.0
                for k in range(m):
                    s += IKZ[i, k] * P[k, j]
                W[i, j] = s
        for i in range(m):
            for q in range(nobs):
                s = 0.0
                for l in range(nobs):
                    s += K[i, l] * Hs[l, q]
                KH[i, q] = s
        for i in range(m):
            for j in range(i + 1):
                s = 0.0
                for k in range(m):
                    s += W[i, k] * IKZ[j, k]
                for q in range(nobs):
                    s += KH[i, q] * K[j, q]
                P_filt[t, i, j] = s
        for i in range(m):
            for j in range(i):
                P_filt[t, j, i] = P_filt[t, i, j]
        # log-likelihood
        logdet = 0.0
        s = 0.0
        for q in range(nobs):
            w[q] = v[q]
            for k in range(q):
                w[q] -= Fc[q, k] * w[k]
            w[q] /= Fc[q, q]
            s += w[q] * w[q]
            logdet += log(Fc[q, q])
        loglik[t] = -0.5 * (nobs * LOG_2PI + 2.0 * logdet + s)

    return a_pred_arr, P_pred_arr, a_filt_arr, P_filt_arr, loglik_arr


cdef double _ref_scale(double[:, :, ::1] P, Py_ssize_t t) noexcept:
    cdef Py_ssize_t i
    cdef double d, best = 0.0
    for i in range(P.shape[1]):
        d = P[t, i, i] if P[t, i, i] >= 0.0 else -P[t, i, i]
        if d > best:
            best = d
    return PSD_REF_TOL * best


def backward_sample(a_filt_in, P_filt_in, P_pred_in, T_in, c_in, z_in):
    cdef double[:, ::1] a_filt = np.ascontiguousarray(a_filt_in, dtype=np.float64)
    cdef double[:, :, ::1] P_filt = np.ascontiguousarray(P_filt_in, dtype=np.float64)
    cdef double[:, :, ::1] P_pred = np.ascontiguousarray(P_pred_in, dtype=np.float64)
    cdef double[:, :, ::1] TT = np.ascontiguousarray(T_in, dtype=np.float64)
    cdef double[:, ::1] cc = np.ascontiguousarray(c_in, dtype=np.float64)
    cdef double[:, :, ::1] z = np.ascontiguousarray(z_in, dtype=np.float64)

    cdef Py_ssize_t n = a_filt.shape[0]
    cdef Py_ssize_t m = a_filt.shape[1]
    cdef Py_ssize_t nd = z.shape[0]
    draws_arr = np.empty((nd, n, m))
    cdef double[:, :, ::1] draws = draws_arr

    cdef double[:, ::1] S = np.empty((m, m))
    cdef double[:, ::1] Lm = np.empty((m, m))
    cdef double[:, ::1] G = np.empty((m, m))
    cdef double[:, ::1] X = np.empty((m, m))
    cdef double[:, ::1] cov = np.empty((m, m))
    cdef double[:, ::1] Pt = np.empty((m, m))
    cdef double[::1] pred = np.empty(m)
    cdef double[::1] r = np.empty(m)

    cdef Py_ssize_t t, i, j, k, dr
    cdef double s

    for i in range(m):
        for j in range(m):
            Pt[i, j] = P_filt[n - 1, i, j]
    _psd_chol(Pt, S, _ref_scale(P_pred, n - 1))
    for dr in range(nd):
        for i in range(m):
            s = a_filt[n - 1, i]
            for k in range(i + 1):
                s += S[i, k] * z[dr, n - 1, k]
            draws[dr, n - 1, i] = s

    for t in range(n - 2, -1, -1):
        for i in range(m):
            for j in range(m):
                Pt[i, j] = P_pred[t + 1, i, j]
        _psd_chol(Pt, Lm)
        # G = T[t+1] P_filt[t]
        for i in range(m):
            for j in range(m):
                s = 0.0
                for k in range(m):
                    s += TT[t + 1, i, k] * P_filt[t, k, j]
                G[i, j] = s
                X[i, j] = s
        _psd_solve(Lm, X)
        # J = X'; cov = P_filt - J G
        for i in range(m):
            for j in range(m):
                s = P_filt[t, i, j]
                for k in range(m):
                    s -= X[k, i] * G[k, j]
                cov[i, j] = s
        for i in range(m):
            for j in range(i + 1, m):
                s = 0.5 * (cov[i, j] + cov[j, i])
                cov[i, j] = s
                cov[j, i] = s
        _psd_chol(cov, S, max(_ref_scale(P_pred, t), _ref_scale(P_pred, t + 1)))
        for i in range(m):
            s = cc[t + 1, i]
            for k in range(m):
                s += TT[t + 1, i, k] * a_filt[t, k]
            pred[i] = s
        for dr in range(nd):
            for i in range(m):
                r[i] = draws[dr, t + 1, i] - pred[i]
            for i in range(m):
                s = a_filt[t, i]
                for k in range(m):
                    s += X[k, i] * r[k]
                for k in range(i + 1):
                    s += S[i, k] * z[dr, t, k]
                draws[dr, t, i] = s
    return draws_arr


def draw_mixture_indicators(ystar_in, h_in, u_in, probs_in, means_in, variances_in):
    cdef double[::1] ystar = np.ascontiguousarray(ystar_in, dtype=np.float64)
    cdef double[::1] h = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef double[::1] probs = np.ascontiguousarray(probs_in, dtype=np.float64)
    cdef double[::1] means = np.ascontiguousarray(means_in, dtype=np.float64)
    cdef double[::1] variances = np.ascontiguousarray(variances_in, dtype=np.float64)
    cdef Py_ssize_t n = ystar.shape[0]
    cdef Py_ssize_t nc = probs.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef double[::1] logc = np.empty(nc)
    cdef double[::1] lw = np.empty(nc)
    cdef Py_ssize_t t, j
    cdef double e, mx, total, target, acc
    for j in range(nc):
        logc[j] = log(probs[j]) - 0.5 * log(variances[j])
    for t in range(n):
        mx = -1e300
        for j in range(nc):
            e = ystar[t] - h[t] - means[j]
            lw[j] = logc[j] - 0.5 * e * e / variances[j]
            if lw[j] > mx:
                mx = lw[j]
        total = 0.0
        for j in range(nc):
            lw[j] = exp(lw[j] - mx)
            total += lw[j]
        target = u[t] * total
        acc = 0.0
        out[t] = nc - 1
        for j in range(nc):
            acc += lw[j]
            if not acc < target:
                out[t] = j
                break
    return out_arr
