"""Stochastic volatility sampler.

Latent log-variance ``h_t = mu + phi (h_{t-1} - mu) + tau eps_t`` observed
through ``log(e_t^2) = h_t + log(eta_t^2)``. The log chi-square(1) error is
replaced by a 10-component normal mixture (Omori, Chib, Shephard and Nakajima,
2007), making the model conditionally Gaussian given the component indicators.
Parameters are updated with ancillarity-sufficiency interweaving: a centered
update, a move to the non-centered path ``(h - mu) / tau``, a non-centered
update, and the move back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError
from .ssm import BandSystem, precision_draw

MIXTURE_PROBS = np.array(
    [0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
)
MIXTURE_MEANS = np.array(
    [1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
)
MIXTURE_VARIANCES = np.array(
    [0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
)

DEFAULT_OFFSET = 1e-6


def mixture_table() -> list[tuple[float, float, float]]:
    """(probability, mean, variance) of each component approximating log chi-square(1)."""
    return [
        (float(p), float(m), float(v))
        for p, m, v in zip(MIXTURE_PROBS, MIXTURE_MEANS, MIXTURE_VARIANCES)
    ]


def sample_mixture(size: int, rng: np.random.Generator) -> np.ndarray:
    comp = rng.choice(len(MIXTURE_PROBS), size=size, p=MIXTURE_PROBS)
    return MIXTURE_MEANS[comp] + np.sqrt(MIXTURE_VARIANCES[comp]) * rng.standard_normal(size)


@dataclass(frozen=True)
class SvParams:
    mu: float
    phi: float
    tau: float

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ValidationError(f"phi must lie in (-1, 1), got {self.phi}")
        if not self.tau > 0.0:
            raise ValidationError(f"tau must be positive, got {self.tau}")

    @property
    def stationary_var(self) -> float:
        return self.tau**2 / (1.0 - self.phi**2)


@dataclass(frozen=True)
class SvPriors:
    """mu ~ N(b_mu, B_mu); (phi + 1)/2 ~ Beta(a0, b0); tau^2 ~ B_sigma * chi2(1)."""

    b_mu: float = 0.0
    B_mu: float = 100.0
    a0: float = 5.0
    b0: float = 1.5
    B_sigma: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.B_mu > 0:
            problems.append("B_mu must be positive")
        if not (self.a0 > 0 and self.b0 > 0):
            problems.append("a0 and b0 must be positive")
        if not self.B_sigma > 0:
            problems.append("B_sigma must be positive")
        if problems:
            raise ValidationError("invalid stochastic-volatility priors", problems)

    def sample(self, rng: np.random.Generator) -> SvParams:
        mu = self.b_mu + math.sqrt(self.B_mu) * rng.standard_normal()
        phi = 2.0 * rng.beta(self.a0, self.b0) - 1.0
        tau = math.sqrt(self.B_sigma) * abs(rng.standard_normal())
        return SvParams(mu, phi, tau)

    def log_mu(self, mu: float) -> float:
        return -0.5 * (mu - self.b_mu) ** 2 / self.B_mu

    def log_phi(self, phi: float) -> float:
        return (self.a0 - 1.0) * math.log1p(phi) + (self.b0 - 1.0) * math.log1p(-phi)

    def log_sigma2(self, sigma2: float) -> float:
        return -0.5 * math.log(sigma2) - 0.5 * sigma2 / self.B_sigma


@dataclass
class SvState:
    h: np.ndarray
    h0: float
    params: SvParams
    indicators: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.indicators = np.asarray(self.indicators, dtype=np.int64)
        if self.indicators.shape != self.h.shape:
            raise ValidationError("indicators and h must have the same length")
        if self.indicators.size and (
            self.indicators.min() < 0 or self.indicators.max() >= len(MIXTURE_PROBS)
        ):
            raise ValidationError("mixture indicators out of range")

    @property
    def h_path(self) -> np.ndarray:
        """``h_0, h_1, ..., h_T``."""
        return np.concatenate(([self.h0], self.h))

    @property
    def h_tilde(self) -> np.ndarray:
        return to_noncentered(self.h, self.params)

    @property
    def volatility(self) -> np.ndarray:
        return np.exp(0.5 * self.h)

    def copy(self) -> "SvState":
        return SvState(self.h.copy(), self.h0, self.params, self.indicators.copy())


def initial_state(n: int, rng: np.random.Generator, params: SvParams | None = None) -> SvState:
    """h at zero with indicators drawn from the mixture weights."""
    params = params or SvParams(mu=0.0, phi=0.9, tau=0.3)
    ind = rng.choice(len(MIXTURE_PROBS), size=n, p=MIXTURE_PROBS)
    return SvState(np.zeros(n), 0.0, params, ind)


def log_sq_residuals(e, offset: float = DEFAULT_OFFSET) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    return np.log(e * e + offset)


def to_noncentered(h, params: SvParams) -> np.ndarray:
    return (np.asarray(h, dtype=float) - params.mu) / params.tau


def to_centered(h_tilde, params: SvParams) -> np.ndarray:
    return params.mu + params.tau * np.asarray(h_tilde, dtype=float)


def indicator_probabilities(log_sq_resid, h) -> np.ndarray:
    """Exact posterior component probabilities, shape ``(T, 10)``."""
    resid = np.asarray(log_sq_resid)[:, None] - np.asarray(h)[:, None] - MIXTURE_MEANS
    logw = np.log(MIXTURE_PROBS) - 0.5 * np.log(MIXTURE_VARIANCES) - 0.5 * resid**2 / MIXTURE_VARIANCES
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    return w / w.sum(axis=1, keepdims=True)


def draw_indicators(log_sq_resid, h, rng: np.random.Generator) -> np.ndarray:
    """Inverse-transform draw of each mixture indicator from its discrete posterior."""
    y = np.asarray(log_sq_resid, dtype=float)
    u = rng.random(y.shape[0])
    return kernels.draw_mixture_indicators(
        y, h, u, MIXTURE_PROBS, MIXTURE_MEANS, MIXTURE_VARIANCES
    )


def ar1_prior_band(n: int, params: SvParams) -> tuple[np.ndarray, np.ndarray]:
    """Band precision and covector of the stationary AR(1) prior on ``h_1..h_n``."""
    phi, s2, mu = params.phi, params.tau**2, params.mu
    ab = np.zeros((2, n))
    ab[0] = 1.0 + phi * phi
    ab[0, 0] = 1.0
    ab[0, -1] = 1.0
    if n == 1:
        ab[0, 0] = 1.0 - phi * phi
    ab[1, : n - 1] = -phi
    ab /= s2
    rowsum = ab[0].copy()
    rowsum[:-1] += ab[1, : n - 1]
    rowsum[1:] += ab[1, : n - 1]
    return ab, mu * rowsum


def awol_system(log_sq_resid, indicators, params: SvParams) -> BandSystem:
    y = np.asarray(log_sq_resid, dtype=float)
    ind = np.asarray(indicators)
    ab, cov = ar1_prior_band(y.shape[0], params)
    v = MIXTURE_VARIANCES[ind]
    ab[0] += 1.0 / v
    cov = cov + (y - MIXTURE_MEANS[ind]) / v
    return BandSystem(ab, cov, 1)


def draw_h_awol(log_sq_resid, indicators, params: SvParams, rng: np.random.Generator) -> tuple[float, np.ndarray]:
    """Joint draw of ``h_1..h_T`` from one banded system, then ``h_0 | h_1``.

    Returns ``(h0, h)``.
    """
    system = awol_system(log_sq_resid, indicators, params)
    h = precision_draw(system, rng)
    h0 = params.mu + params.phi * (h[0] - params.mu) + params.tau * rng.standard_normal()
    return float(h0), h


# -- centered parameter updates -------------------------------------------------


def _ar1_sum_squares(h_path: np.ndarray, mu: float, phi: float) -> float:
    x = h_path - mu
    s = (1.0 - phi * phi) * x[0] ** 2
    if x.shape[0] > 1:
        r = x[1:] - phi * x[:-1]
        s += float(r @ r)
    return s


def log_target_mu_phi(mu: float, phi: float, sigma2: float, h_path: np.ndarray, priors: SvPriors) -> float:
    """log p(mu, phi | h, sigma2) up to a constant."""
    if not abs(phi) < 1.0:
        return -math.inf
    return (
        priors.log_mu(mu)
        + priors.log_phi(phi)
        + 0.5 * math.log1p(-phi * phi)
        - 0.5 * _ar1_sum_squares(h_path, mu, phi) / sigma2
    )


def mh_log_accept_mu_phi(
    current: tuple[float, float], proposal: tuple[float, float], sigma2: float, h_path, priors: SvPriors
) -> float:
    """Log acceptance probability of the regression-proposal update of ``(mu, phi)``.

    The proposal is the flat-prior posterior of ``(mu (1 - phi), phi)`` from the
    transitions ``h_1..h_T``, so only the priors, the stationary density of
    ``h_0`` and the Jacobian ``1 - phi`` remain in the ratio.
    """
    h_path = np.asarray(h_path, dtype=float)

    def part(mu, phi):
        if not abs(phi) < 1.0:
            return -math.inf
        var0 = sigma2 / (1.0 - phi * phi)
        return (
            priors.log_mu(mu)
            + priors.log_phi(phi)
            - 0.5 * math.log(var0)
            - 0.5 * (h_path[0] - mu) ** 2 / var0
            - math.log1p(-phi)
        )

    return min(0.0, part(*proposal) - part(*current))


def _draw_sigma2_centered(h_path, mu, phi, sigma2, priors, rng) -> float:
    n_trans = h_path.shape[0] - 1
    S = _ar1_sum_squares(h_path, mu, phi)
    # proposal IG(n_trans / 2, S / 2) carries the likelihood and the sigma^-1 prior factor
    prop = 0.5 * S / rng.gamma(0.5 * n_trans)
    log_acc = -0.5 * (prop - sigma2) / priors.B_sigma
    if math.log(rng.random()) < log_acc:
        return prop
    return sigma2


def _draw_mu_phi_centered(h_path, mu, phi, sigma2, priors, rng) -> tuple[float, float]:
    x, z = h_path[:-1], h_path[1:]
    X = np.column_stack([np.ones_like(x), x])
    XtX = X.T @ X
    XtX_inv = np.linalg.inv(XtX)
    beta = XtX_inv @ (X.T @ z)
    chol = np.linalg.cholesky(sigma2 * XtX_inv)
    gamma_p, phi_p = beta + chol @ rng.standard_normal(2)
    u = rng.random()
    if not abs(phi_p) < 1.0:
        return mu, phi
    mu_p = gamma_p / (1.0 - phi_p)
    if math.log(u) < mh_log_accept_mu_phi((mu, phi), (mu_p, phi_p), sigma2, h_path, priors):
        return mu_p, phi_p
    return mu, phi


def _draw_from_prior_mh(h_path, current: SvParams, priors: SvPriors, rng) -> SvParams:
    # independence sampler with the prior as proposal, for paths too short to regress on
    def loglik(p: SvParams) -> float:
        s2 = p.tau**2
        n = h_path.shape[0]
        return 0.5 * n * -math.log(s2) + 0.5 * math.log1p(-p.phi**2) - 0.5 * _ar1_sum_squares(h_path, p.mu, p.phi) / s2

    prop = priors.sample(rng)
    if math.log(rng.random()) < loglik(prop) - loglik(current):
        return prop
    return current


def draw_params_centered(h_path, priors: SvPriors, current: SvParams, rng: np.random.Generator) -> SvParams:
    """Centered update given ``h_0..h_T``: tau^2 | h, mu, phi, then (mu, phi) | h, tau^2.

    Both steps are Metropolis-Hastings with data-driven proposals; rejected
    proposals keep the current values. An empty path returns a prior draw.
    """
    h_path = np.asarray(h_path, dtype=float)
    if h_path.size == 0:
        return priors.sample(rng)
    if h_path.size < 3:
        return _draw_from_prior_mh(h_path, current, priors, rng)
    sigma2 = _draw_sigma2_centered(h_path, current.mu, current.phi, current.tau**2, priors, rng)
    mu, phi = _draw_mu_phi_centered(h_path, current.mu, current.phi, sigma2, priors, rng)
    return SvParams(mu, phi, math.sqrt(sigma2))


# -- non-centered parameter updates ---------------------------------------------


def _draw_phi_noncentered(ht_path, phi, priors, rng) -> float:
    x, z = ht_path[:-1], ht_path[1:]
    sxx = float(x @ x)
    if sxx <= 0.0:
        return phi
    phi_p = float(x @ z) / sxx + rng.standard_normal() / math.sqrt(sxx)
    u = rng.random()
    if not abs(phi_p) < 1.0:
        return phi

    def part(f):
        return priors.log_phi(f) + 0.5 * math.log1p(-f * f) - 0.5 * (1.0 - f * f) * ht_path[0] ** 2

    if math.log(u) < part(phi_p) - part(phi):
        return phi_p
    return phi


def _draw_mu_sigma_noncentered(log_sq_resid, ht, indicators, priors, rng) -> tuple[float, float]:
    w = 1.0 / MIXTURE_VARIANCES[indicators]
    z = log_sq_resid - MIXTURE_MEANS[indicators]
    X = np.column_stack([np.ones_like(ht), ht])
    prec = (X.T * w) @ X + np.diag([1.0 / priors.B_mu, 1.0 / priors.B_sigma])
    rhs = (X.T * w) @ z + np.array([priors.b_mu / priors.B_mu, 0.0])
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    draw = mean + np.linalg.solve(chol.T, rng.standard_normal(2))
    return float(draw[0]), float(draw[1])


def asis_sweep(
    log_sq_resid,
    state: SvState,
    priors: SvPriors,
    rng: np.random.Generator,
    strategy: str = "asis",
) -> SvState:
    """One sweep of the interweaving sampler.

    1. ``h`` jointly via the banded precision sampler, ``h_0 | h_1``;
    2. centered ``tau^2``, then ``(mu, phi)``;
    3. ``h_tilde = (h - mu) / tau``;
    4. non-centered ``phi | h_tilde`` (MH) and ``(mu, tau) | y, h_tilde`` (Gibbs);
    5. ``h = mu + tau h_tilde``;
    6. mixture indicators.

    The indicators in ``state`` must belong to ``log_sq_resid``. When the
    residuals have changed since the last sweep, refresh them first with
    :func:`draw_indicators`.
    ``strategy="centered"`` skips steps 3-5.
    """
    if strategy not in ("asis", "centered"):
        raise ValueError(f"unknown strategy {strategy!r}")
    y = np.asarray(log_sq_resid, dtype=float)
    h0, h = draw_h_awol(y, state.indicators, state.params, rng)
    h_path = np.concatenate(([h0], h))
    params = draw_params_centered(h_path, priors, state.params, rng)
    if strategy == "asis" and h.size:
        ht_path = (h_path - params.mu) / params.tau
        phi = _draw_phi_noncentered(ht_path, params.phi, priors, rng)
        mu, sigma = _draw_mu_sigma_noncentered(y, ht_path[1:], state.indicators, priors, rng)
        h_path = mu + sigma * ht_path
        params = SvParams(mu, phi, abs(sigma))
    h0, h = float(h_path[0]), h_path[1:]
    ind = draw_indicators(y, h, rng)
    return SvState(h, h0, params, ind)


def simulate_sv(n: int, params: SvParams, rng: np.random.Generator, h0: float | None = None) -> tuple[float, np.ndarray]:
    """Simulate ``h_0..h_n`` from the AR(1); ``h_0`` stationary unless given."""
    if h0 is None:
        h0 = params.mu + math.sqrt(params.stationary_var) * rng.standard_normal()
    h = np.empty(n)
    prev = h0
    eps = rng.standard_normal(n)
    for t in range(n):
        prev = params.mu + params.phi * (prev - params.mu) + params.tau * eps[t]
        h[t] = prev
    return float(h0), h


__all__ = [
    "DEFAULT_OFFSET",
    "MIXTURE_MEANS",
    "MIXTURE_PROBS",
    "MIXTURE_VARIANCES",
    "SvParams",
    "SvPriors",
    "SvState",
    "asis_sweep",
    "awol_system",
    "draw_h_awol",
    "draw_indicators",
    "draw_params_centered",
    "indicator_probabilities",
    "initial_state",
    "log_sq_residuals",
    "mh_log_accept_mu_phi",
    "mixture_table",
    "sample_mixture",
    "simulate_sv",
    "to_centered",
    "to_noncentered",
]
