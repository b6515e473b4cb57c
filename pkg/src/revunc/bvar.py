"""Bayesian VARs with a diffuse prior, recursive identification and impulse responses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats

from .errors import ConfigurationError, DecompositionError, ValidationError

DEFAULT_VARIABLES = (
    "stock_market",
    "policy_rate",
    "cpi",
    "employment",
    "investment",
    "consumption",
    "gdp",
    "uncertainty",
)
DEFAULT_TRANSFORMS = {
    "stock_market": "log100",
    "policy_rate": "level",
    "cpi": "log100",
    "employment": "log100",
    "investment": "log100",
    "consumption": "log100",
    "gdp": "log100",
    "uncertainty": "standardize",
}
TRANSFORMS = ("level", "log100", "standardize")
DEFAULT_LAGS = 2
DEFAULT_BAND = 0.68
EXPLOSIVE_RADIUS = 1.2


@dataclass(frozen=True)
class VarSpec:
    """Variables in causal order, lag length, band coverage and per-variable transforms.

    The last variable is the uncertainty measure. ``sample`` optionally trims
    the data to an inclusive ``(start, end)`` range of index labels.
    """

    variables: tuple = DEFAULT_VARIABLES
    p: int = DEFAULT_LAGS
    band: float = DEFAULT_BAND
    transforms: dict = field(default_factory=lambda: dict(DEFAULT_TRANSFORMS))
    sample: tuple | None = None
    uncertainty: str = "uncertainty"

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        problems = []
        if len(set(self.variables)) != len(self.variables):
            problems.append("variable names repeat")
        if not self.variables or self.variables[-1] != self.uncertainty:
            problems.append(f"the uncertainty variable {self.uncertainty!r} must be ordered last")
        if int(self.p) != self.p or self.p < 1:
            problems.append(f"lag order must be a positive integer, got {self.p}")
        if not 0.0 < self.band < 1.0:
            problems.append(f"band coverage must lie in (0, 1), got {self.band}")
        for name, tag in self.transforms.items():
            if tag not in TRANSFORMS:
                problems.append(f"unknown transform {tag!r} for {name}")
        if problems:
            raise ValidationError("invalid VAR specification", problems)

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def quantiles(self) -> tuple[float, float]:
        return (0.5 - self.band / 2.0, 0.5 + self.band / 2.0)

    def transform(self, name: str) -> str:
        return self.transforms.get(name, "level")

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "p": self.p,
            "band": self.band,
            "transforms": {v: self.transform(v) for v in self.variables},
            "sample": list(self.sample) if self.sample else None,
            "uncertainty": self.uncertainty,
        }


def apply_transform(x, tag: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if tag == "level":
        return x.copy()
    if tag == "log100":
        if np.any(x[np.isfinite(x)] <= 0):
            raise ValidationError("log transform needs positive values")
        return 100.0 * np.log(x)
    if tag == "standardize":
        sd = np.nanstd(x, ddof=1)
        if not sd > 0:
            raise ValidationError("cannot standardize a constant series")
        return (x - np.nanmean(x)) / sd
    raise ValidationError(f"unknown transform {tag!r}")


def prepare_var_data(data, spec: VarSpec) -> np.ndarray:
    """Select, trim and transform the VAR columns; returns a ``(T, n)`` array with no gaps."""
    if isinstance(data, pd.DataFrame):
        missing = [v for v in spec.variables if v not in data.columns]
        if missing:
            raise ValidationError("data lacks VAR variables", missing)
        frame = data[list(spec.variables)]
        if spec.sample:
            frame = frame.loc[spec.sample[0] : spec.sample[1]]
        arr = np.column_stack([apply_transform(frame[v], spec.transform(v)) for v in spec.variables])
    else:
        raw = np.asarray(data, dtype=float)
        if raw.ndim == 1:
            raw = raw[:, None]
        if raw.shape[1] != spec.n:
            raise ValidationError(f"data has {raw.shape[1]} columns, the specification names {spec.n}")
        arr = np.column_stack([apply_transform(raw[:, j], spec.transform(v)) for j, v in enumerate(spec.variables)])
    if not np.isfinite(arr).all():
        raise ValidationError("VAR data contain missing or non-finite values")
    return arr


def lag_matrices(Y: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Regressand ``Y[p:]`` and regressors ``[1, y_{t-1}, ..., y_{t-p}]``."""
    T, n = Y.shape
    X = np.ones((T - p, 1 + n * p))
    for i in range(1, p + 1):
        X[:, 1 + (i - 1) * n : 1 + i * n] = Y[p - i : T - i]
    return Y[p:], X


def ols(Y: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equation-by-equation least squares: ``(B_hat, S, (X'X)^{-1})`` with ``S`` the residual cross-product."""
    Yt, X = lag_matrices(Y, p)
    q, r = np.linalg.qr(X)
    Bhat = np.linalg.solve(r, q.T @ Yt)
    E = Yt - X @ Bhat
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    return Bhat, E.T @ E, rinv @ rinv.T


@dataclass
class BvarPosterior:
    """Draws of the coefficient matrix ``B`` (rows: constant then lags) and ``Sigma``."""

    spec: VarSpec
    coef: np.ndarray  # (draws, 1 + n p, n)
    sigma: np.ndarray  # (draws, n, n)
    ols_coef: np.ndarray
    n_obs: int

    @property
    def n_draws(self) -> int:
        return self.coef.shape[0]

    def lag_matrices(self) -> np.ndarray:
        """``B_1..B_p`` per draw, shape ``(draws, p, n, n)``, acting as ``y_t = c + sum_i B_i y_{t-i}``."""
        n, p = self.spec.n, self.spec.p
        lags = self.coef[:, 1:, :].reshape(self.n_draws, p, n, n)
        return np.swapaxes(lags, -1, -2)


def _check_sample(T: int, spec: VarSpec) -> None:
    # the covariance posterior is proper only when T - p - k > n - 1
    need = spec.n * spec.p + 1 + spec.n - 1
    if T - spec.p <= need:
        raise ConfigurationError(
            f"VAR needs more than {need} usable observations for {spec.n} variables and {spec.p} lags; got {T - spec.p}"
        )


def _niw_draw(Bhat, S, XtX_inv, dof, rng) -> tuple[np.ndarray, np.ndarray]:
    sigma = stats.invwishart.rvs(df=dof, scale=S, random_state=rng)
    sigma = np.atleast_2d(sigma)
    sigma = 0.5 * (sigma + sigma.T)
    P = np.linalg.cholesky(XtX_inv)
    L = np.linalg.cholesky(sigma)
    Zn = rng.standard_normal(Bhat.shape)
    return Bhat + P @ Zn @ L.T, sigma


def fit_bvar(data, spec: VarSpec = VarSpec(), n_draws: int = 2000, rng=None) -> BvarPosterior:
    """Exact draws from the posterior under the Jeffreys prior ``|Sigma|^{-(n+1)/2}``.

    Conditional on the first ``p`` observations, ``Sigma ~ IW(S, T - k)`` and
    ``vec(B) | Sigma ~ N(vec(B_hat), Sigma kron (X'X)^{-1})``.
    """
    rng = np.random.default_rng(rng)
    Y = prepare_var_data(data, spec)
    _check_sample(Y.shape[0], spec)
    Bhat, S, XtX_inv = ols(Y, spec.p)
    T_eff, k = Y.shape[0] - spec.p, Bhat.shape[0]
    coef = np.empty((n_draws,) + Bhat.shape)
    sigma = np.empty((n_draws, spec.n, spec.n))
    for i in range(n_draws):
        coef[i], sigma[i] = _niw_draw(Bhat, S, XtX_inv, T_eff - k, rng)
    return BvarPosterior(spec, coef, sigma, Bhat, T_eff)


def fit_bvar_with_uncertainty_draws(
    data_ex_uncertainty,
    uncertainty_draws,
    spec: VarSpec = VarSpec(),
    n_draws: int = 2000,
    rng=None,
) -> BvarPosterior:
    """Posterior that integrates over the uncertainty index.

    Each VAR draw conditions on one index draw, picked at random, placed in
    the last column before the conjugate update.
    """
    rng = np.random.default_rng(rng)
    U = np.asarray(uncertainty_draws, dtype=float)
    if U.ndim != 2:
        raise ValidationError("uncertainty draws must be a (draws, T) array")
    if U.shape[0] < 100:
        raise ValidationError(f"need at least 100 uncertainty draws, got {U.shape[0]}")
    inner = replace(spec, sample=None)
    if isinstance(data_ex_uncertainty, pd.DataFrame):
        frame = data_ex_uncertainty
        if spec.sample:
            frame = frame.loc[spec.sample[0] : spec.sample[1]]
        base = frame[list(spec.variables[:-1])].to_numpy(float)
    else:
        base = np.asarray(data_ex_uncertainty, dtype=float)
        if base.ndim == 1:
            base = base[:, None]
    if base.shape[1] != spec.n - 1:
        raise ValidationError(f"expected {spec.n - 1} non-uncertainty columns, got {base.shape[1]}")
    if U.shape[1] != base.shape[0]:
        raise ValidationError(f"uncertainty draws cover {U.shape[1]} periods, the data {base.shape[0]}")
    _check_sample(base.shape[0], spec)
    picks = rng.integers(U.shape[0], size=n_draws)
    k = 1 + spec.n * spec.p
    coef = np.empty((n_draws, k, spec.n))
    sigma = np.empty((n_draws, spec.n, spec.n))
    cache: dict[int, tuple] = {}
    for i, j in enumerate(picks):
        if j not in cache:
            Y = prepare_var_data(np.column_stack([base, U[j]]), inner)
            cache[j] = ols(Y, spec.p)
        Bhat, S, XtX_inv = cache[j]
        coef[i], sigma[i] = _niw_draw(Bhat, S, XtX_inv, base.shape[0] - spec.p - k, rng)
    Y_mean = prepare_var_data(np.column_stack([base, U.mean(axis=0)]), inner)
    return BvarPosterior(spec, coef, sigma, ols(Y_mean, spec.p)[0], base.shape[0] - spec.p)


def identify_recursive(sigma) -> np.ndarray:
    """Lower-triangular impact matrix ``A`` with positive diagonal and ``A A' = Sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
        raise DecompositionError("covariance draw is not positive definite", int(np.argmin(w))) from None


def companion(lags: np.ndarray) -> np.ndarray:
    """Companion matrix of ``B_1..B_p`` (shape ``(p, n, n)``, or batched with a leading axis)."""
    lags = np.asarray(lags, dtype=float)
    *batch, p, n, _ = lags.shape
    F = np.zeros(tuple(batch) + (n * p, n * p))
    F[..., :n, :] = np.concatenate([lags[..., i, :, :] for i in range(p)], axis=-1)
    if p > 1:
        F[..., n:, :-n] = np.eye(n * (p - 1))
    return F


@dataclass
class IrfSet:
    """Responses ``[variable, horizon, draw]`` to a one-standard-deviation shock."""

    variables: tuple
    shock: str
    responses: np.ndarray
    band: float = DEFAULT_BAND
    explosive: np.ndarray | None = None

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.responses = np.asarray(self.responses, dtype=float)
        if self.responses.ndim != 3 or self.responses.shape[0] != len(self.variables):
            raise ValidationError("responses must have shape (variables, horizons, draws)")
        if self.explosive is None:
            self.explosive = np.zeros(self.responses.shape[2], dtype=bool)

    @property
    def horizons(self) -> int:
        return self.responses.shape[1] - 1

    @property
    def n_draws(self) -> int:
        return self.responses.shape[2]

    @property
    def mean(self) -> np.ndarray:
        return self.responses.mean(axis=2)

    def quantile(self, q: float) -> np.ndarray:
        return np.quantile(self.responses, q, axis=2)

    @property
    def lower(self) -> np.ndarray:
        return self.quantile(0.5 - self.band / 2.0)

    @property
    def upper(self) -> np.ndarray:
        return self.quantile(0.5 + self.band / 2.0)

    @property
    def explosive_share(self) -> float:
        return float(np.mean(self.explosive)) if self.n_draws else 0.0

    def to_frame(self) -> pd.DataFrame:
        lo, hi = self.lower, self.upper
        m = self.mean
        lo_name, hi_name = _band_names(self.band)
        rows = []
        for i, v in enumerate(self.variables):
            for h in range(self.horizons + 1):
                rows.append((v, h, m[i, h], lo[i, h], hi[i, h]))
        return pd.DataFrame(rows, columns=["variable", "horizon", "mean", lo_name, hi_name])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _band_names(band: float) -> tuple[str, str]:
    lo = round(100 * (0.5 - band / 2.0), 6)
    hi = round(100 * (0.5 + band / 2.0), 6)
    fmt = lambda x: f"q{int(x)}" if float(x).is_integer() else f"q{x:g}"
    return fmt(lo), fmt(hi)


def read_irf_summary(path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    if not {"variable", "horizon", "mean"} <= set(df.columns) or df.shape[1] != 5:
        raise ValidationError(f"{path} is not an impulse-response summary")
    return df


def impulse_responses(lags: np.ndarray, impact: np.ndarray, horizons: int) -> np.ndarray:
    """Propagate impulse vectors through the companion form.

    ``lags`` has shape ``(draws, p, n, n)``, ``impact`` ``(draws, n)``; the
    result is ``(n, horizons + 1, draws)``.
    """
    d, p, n, _ = lags.shape
    F = companion(lags)
    state = np.zeros((d, n * p))
    state[:, :n] = impact
    out = np.empty((n, horizons + 1, d))
    out[:, 0] = impact.T
    for h in range(1, horizons + 1):
        state = np.einsum("dij,dj->di", F, state)
        out[:, h] = state[:, :n].T
    return out


def spectral_radius(lags: np.ndarray) -> np.ndarray:
    return np.abs(np.linalg.eigvals(companion(lags))).max(axis=-1)


def irf(posterior: BvarPosterior, shock: str | None = None, horizons: int = 20, scale: float = 1.0) -> IrfSet:
    """Responses of every variable to a structural shock (the uncertainty shock by default).

    Draws whose companion matrix has spectral radius above 1.2 are kept and
    flagged in ``IrfSet.explosive``.
    """
    spec = posterior.spec
    shock = spec.uncertainty if shock is None else shock
    if shock not in spec.variables:
        raise ValidationError(f"unknown shock variable {shock!r}")
    j = spec.variables.index(shock)
    A = np.stack([identify_recursive(s) for s in posterior.sigma])
    lags = posterior.lag_matrices()
    resp = impulse_responses(lags, scale * A[:, :, j], horizons)
    explosive = spectral_radius(lags) > EXPLOSIVE_RADIUS
    return IrfSet(spec.variables, shock, resp, spec.band, explosive)


def panel_average_irf(per_country, weights=None) -> IrfSet:
    """Average responses across countries draw by draw; equal weights unless ``weights`` is given."""
    sets = list(per_country.values()) if isinstance(per_country, dict) else list(per_country)
    if not sets:
        raise ValidationError("no impulse-response sets to average")
    first = sets[0]
    problems = []
    for i, s in enumerate(sets[1:], start=1):
        if s.variables != first.variables:
            problems.append(f"set {i}: variables differ")
        if s.shock != first.shock:
            problems.append(f"set {i}: shock {s.shock!r} differs from {first.shock!r}")
        if s.responses.shape != first.responses.shape:
            problems.append(f"set {i}: shape {s.responses.shape} differs from {first.responses.shape}")
        if not math.isclose(s.band, first.band):
            problems.append(f"set {i}: band differs")
    if problems:
        raise ValidationError("impulse-response sets cannot be averaged", problems)
    if weights is None:
        w = np.full(len(sets), 1.0 / len(sets))
    else:
        if isinstance(per_country, dict) and isinstance(weights, dict):
            weights = [weights[k] for k in per_country]
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(sets),) or (w < 0).any() or w.sum() <= 0:
            raise ValidationError("weights must be nonnegative, one per country, not all zero")
        w = w / w.sum()
    resp = np.tensordot(w, np.stack([s.responses for s in sets]), axes=1)
    explosive = np.any(np.stack([s.explosive for s in sets]), axis=0)
    return IrfSet(first.variables, first.shock, resp, first.band, explosive)


__all__ = [
    "BvarPosterior",
    "DEFAULT_BAND",
    "DEFAULT_LAGS",
    "DEFAULT_TRANSFORMS",
    "DEFAULT_VARIABLES",
    "EXPLOSIVE_RADIUS",
    "IrfSet",
    "VarSpec",
    "apply_transform",
    "companion",
    "fit_bvar",
    "fit_bvar_with_uncertainty_draws",
    "identify_recursive",
    "impulse_responses",
    "irf",
    "lag_matrices",
    "ols",
    "panel_average_irf",
    "prepare_var_data",
    "read_irf_summary",
    "spectral_radius",
]
