"""News/noise revision model with stochastic volatility and drifting coefficients.

For quarter ``t`` the first release ``y1_t`` and the final release ``yL_t``
load on a five-dimensional state ``alpha_t = (ytrue, news1, newsL, noise1, noiseL)``::

    y1_t = ytrue_t + news1_t + noise1_t
    yL_t = ytrue_t + newsL_t + noiseL_t

    ytrue_t  = c_t + rho_t ytrue_{t-1} + s1_t eta1_t + sL_t eta2_t
    news1_t  = -sL_t eta2_t            (default form)
    newsL_t  = 0
    noise1_t = z1_t eta3_t
    noiseL_t = zL_t eta4_t

The four scales are ``exp(h/2)`` with each ``h`` an AR(1) (see :mod:`revunc.svol`);
``(c_t, rho_t)`` follow a random walk with innovation covariance ``V``. News
that arrives after the first release is subtracted from it, so it is
negatively correlated with the first release and part of the truth. The
uncertainty index is ``U_t = s1_t + sL_t``.

The model conditions on ``ytrue_0`` equal to the first final release and runs
on the remaining quarters.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy import stats

from . import __version__, kernels
from .errors import ChainAbortedError, ConfigurationError, GibbsBlockError, ValidationError
from .ssm import LinearGaussianSSM, build_tvp_precision_system, ffbs_draw, precision_draw
from .svol import (
    MIXTURE_PROBS,
    SvParams,
    SvPriors,
    SvState,
    asis_sweep,
    draw_indicators,
    log_sq_residuals,
    simulate_sv,
)
from .vintages import ReleasePanel, format_quarter

log = logging.getLogger(__name__)

STATE_NAMES = ("ytrue", "news1", "newsL", "noise1", "noiseL")
SV_NAMES = ("news1", "newsL", "noise1", "noiseL")
Z = np.array([[1.0, 1.0, 0.0, 1.0, 0.0], [1.0, 0.0, 1.0, 0.0, 1.0]])
R_FORMS = ("convention", "literal")
MAX_RETRIES = 5


@dataclass(frozen=True)
class ModelOptions:
    """``r_form="literal"`` scales the first-release news by ``s1`` instead of ``sL``."""

    r_form: str = "convention"
    drop_edge: bool = False
    min_length: int = 40
    offset: float = 1e-6

    def __post_init__(self):
        if self.r_form not in R_FORMS:
            raise ConfigurationError(f"r_form must be one of {R_FORMS}, got {self.r_form!r}")
        if self.min_length < 2:
            raise ConfigurationError("min_length must be at least 2")


@dataclass(frozen=True, eq=False)
class ModelPriors:
    """Inverse-Wishart prior on ``V``, normal prior on ``(c_1, rho_1)``, SV priors per component."""

    V_shape: float
    V_scale: np.ndarray
    beta_mean: np.ndarray
    beta_cov: np.ndarray
    sv: tuple = (SvPriors(), SvPriors(), SvPriors(), SvPriors())

    def __post_init__(self):
        object.__setattr__(self, "V_scale", np.asarray(self.V_scale, dtype=float))
        object.__setattr__(self, "beta_mean", np.asarray(self.beta_mean, dtype=float).reshape(2))
        object.__setattr__(self, "beta_cov", np.asarray(self.beta_cov, dtype=float))
        object.__setattr__(self, "sv", tuple(self.sv))
        problems = []
        if not self.V_shape > 1.0:
            problems.append(f"V_shape must exceed 1 (dimension - 1), got {self.V_shape}")
        for name in ("V_scale", "beta_cov"):
            m = getattr(self, name)
            if m.shape != (2, 2) or not np.allclose(m, m.T) or np.linalg.eigvalsh(m).min() <= 0:
                problems.append(f"{name} must be a symmetric positive definite 2x2 matrix")
        if len(self.sv) != 4 or not all(isinstance(p, SvPriors) for p in self.sv):
            problems.append("sv must hold four SvPriors")
        if problems:
            raise ValidationError("invalid model priors", problems)

    def to_dict(self) -> dict:
        return {
            "V_shape": float(self.V_shape),
            "V_scale": self.V_scale.tolist(),
            "beta_mean": self.beta_mean.tolist(),
            "beta_cov": self.beta_cov.tolist(),
            "sv": [
                {"b_mu": p.b_mu, "B_mu": p.B_mu, "a0": p.a0, "b0": p.b0, "B_sigma": p.B_sigma}
                for p in self.sv
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelPriors":
        return cls(
            d["V_shape"], np.array(d["V_scale"]), np.array(d["beta_mean"]),
            np.array(d["beta_cov"]), tuple(SvPriors(**p) for p in d["sv"]),
        )

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def V_prior_mean(self) -> np.ndarray:
        # the mean does not exist for shape <= 3; fall back to the scale itself
        return self.V_scale / max(self.V_shape - 3.0, 1.0)


def ar1_ols(x) -> tuple[float, float, float]:
    """OLS of ``x_t`` on ``(1, x_{t-1})`` over consecutive finite pairs: (intercept, slope, resid var)."""
    x = np.asarray(x, dtype=float)
    prev, cur = x[:-1], x[1:]
    ok = np.isfinite(prev) & np.isfinite(cur)
    if ok.sum() < 3:
        raise ConfigurationError("need at least three consecutive observations for an AR(1) fit")
    X = np.column_stack([np.ones(ok.sum()), prev[ok]])
    coef, *_ = np.linalg.lstsq(X, cur[ok], rcond=None)
    resid = cur[ok] - X @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid / max(ok.sum() - 2, 1))


def default_priors(panel: ReleasePanel, V_shape: float = 3.0, sv: SvPriors | None = None) -> ModelPriors:
    """Length-aware IW scale: ``max(shape - 3, 1) diag(s_c^2, s_rho^2) (40 / T)``."""
    final = np.asarray(panel.final_release, dtype=float)
    n = int(np.isfinite(final).sum())
    s_c = 0.1 * float(np.nanstd(final))
    s_rho = 0.05
    s_c = s_c if s_c > 0 else 0.01
    scale = max(V_shape - 3.0, 1.0) * np.diag([s_c**2, s_rho**2]) * (40.0 / max(n, 1))
    c0, rho0, _ = ar1_ols(final)
    sd = float(np.nanstd(final)) or 1.0
    beta_cov = np.diag([(2.0 * sd) ** 2, 0.5**2])
    sv = sv or SvPriors()
    return ModelPriors(V_shape, scale, np.array([c0, rho0]), beta_cov, (sv, sv, sv, sv))


@dataclass
class ModelData:
    """Observations for quarters ``1..n`` (NaN = missing) and the conditioning value ``ytrue_0``."""

    y: np.ndarray
    y0: float
    quarters: list

    @property
    def n(self) -> int:
        return self.y.shape[0]


def prepare_data(panel: ReleasePanel | ModelData, options: ModelOptions = ModelOptions()) -> ModelData:
    if isinstance(panel, ModelData):
        return panel
    if len(panel) < options.min_length:
        raise ConfigurationError(
            f"{panel.country_code}: panel has {len(panel)} quarters, at least {options.min_length} required"
        )
    first = np.asarray(panel.first_release, dtype=float).copy()
    final = np.asarray(panel.final_release, dtype=float).copy()
    if options.drop_edge:
        final[panel.edge_flag] = np.nan
    y0 = final[0] if np.isfinite(final[0]) else first[0]
    if not np.isfinite(y0):
        raise ConfigurationError(f"{panel.country_code}: the first quarter of the panel has no release")
    y = np.column_stack([first[1:], final[1:]])
    quarters = [format_quarter(q) for q in panel.quarters[1:]]
    return ModelData(y, float(y0), quarters)


@dataclass
class NewsNoiseState:
    alpha: np.ndarray
    sv: list
    beta: np.ndarray
    V: np.ndarray

    def copy(self) -> "NewsNoiseState":
        return NewsNoiseState(self.alpha.copy(), [s.copy() for s in self.sv], self.beta.copy(), self.V.copy())

    @property
    def scales(self) -> np.ndarray:
        """``exp(h/2)`` for the four components, shape ``(n, 4)``."""
        return np.exp(0.5 * np.stack([s.h for s in self.sv], axis=1))

    @property
    def uncertainty(self) -> np.ndarray:
        s = self.scales
        return s[:, 0] + s[:, 1]


def loading_matrices(scales: np.ndarray, r_form: str = "convention") -> np.ndarray:
    """``R_t`` of shape ``(n, 5, 4)`` from per-period scales ``(s1, sL, z1, zL)``."""
    n = scales.shape[0]
    s1, sL, z1, zL = scales.T
    R = np.zeros((n, 5, 4))
    R[:, 0, 0] = s1
    R[:, 0, 1] = sL
    R[:, 1, 1] = -(sL if r_form == "convention" else s1)
    R[:, 3, 2] = z1
    R[:, 4, 3] = zL
    return R


def simulate_states(beta, h, y0: float, rng: np.random.Generator, r_form: str = "convention"):
    """Draw ``alpha_{1..n}`` given coefficient and log-variance paths; returns ``(alpha, y)``."""
    beta = np.asarray(beta, dtype=float)
    h = np.asarray(h, dtype=float)
    n = beta.shape[0]
    R = loading_matrices(np.exp(0.5 * h.T), r_form)
    eta = rng.standard_normal((n, 4))
    shocks = np.einsum("tij,tj->ti", R, eta)
    alpha = np.empty((n, 5))
    prev = y0
    for t in range(n):
        alpha[t] = shocks[t]
        alpha[t, 0] += beta[t, 0] + beta[t, 1] * prev
        prev = alpha[t, 0]
    return alpha, alpha @ Z.T


def _observation_fit(alpha, y):
    """Re-impose the measurement identities on observed entries."""
    alpha[:, 2] = 0.0
    o1 = np.isfinite(y[:, 0])
    oL = np.isfinite(y[:, 1])
    alpha[o1, 3] = y[o1, 0] - alpha[o1, 0] - alpha[o1, 1]
    alpha[oL, 4] = y[oL, 1] - alpha[oL, 0]
    return alpha


def init_model(
    panel: ReleasePanel | ModelData,
    priors: ModelPriors,
    seed=None,
    options: ModelOptions = ModelOptions(),
) -> NewsNoiseState:
    """Starting values: truth at the final release, revision split evenly between news and noise."""
    data = prepare_data(panel, options)
    rng = np.random.default_rng(seed)
    y = data.y
    ytrue = np.where(np.isfinite(y[:, 1]), y[:, 1], y[:, 0])
    ytrue = pd.Series(ytrue).ffill().bfill().fillna(data.y0).to_numpy()
    rev = np.where(np.isfinite(y[:, 0]), y[:, 0] - ytrue, 0.0)
    alpha = np.column_stack([ytrue, 0.5 * rev, np.zeros(data.n), 0.5 * rev, np.zeros(data.n)])
    alpha = _observation_fit(alpha, y)
    c0, rho0, _ = ar1_ols(np.concatenate(([data.y0], ytrue)))
    beta = np.tile([c0, rho0], (data.n, 1))
    start = SvParams(mu=0.0, phi=0.9, tau=0.3)
    sv = [
        SvState(np.zeros(data.n), 0.0, start, rng.choice(len(MIXTURE_PROBS), size=data.n, p=MIXTURE_PROBS))
        for _ in SV_NAMES
    ]
    return NewsNoiseState(alpha, sv, beta, priors.V_prior_mean().copy())


# -- Gibbs blocks ----------------------------------------------------------------


def state_space(state: NewsNoiseState, data: ModelData, r_form: str) -> LinearGaussianSSM:
    n = data.n
    R = loading_matrices(state.scales, r_form)
    Q = np.einsum("tij,tkj->tik", R, R)
    T = np.zeros((n, 5, 5))
    T[:, 0, 0] = state.beta[:, 1]
    c = np.zeros((n, 5))
    c[:, 0] = state.beta[:, 0]
    a1 = np.zeros(5)
    a1[0] = state.beta[0, 0] + state.beta[0, 1] * data.y0
    return LinearGaussianSSM(Z=Z, T=T, Q=Q, a1=a1, P1=Q[0], H=np.zeros((2, 2)), c=c, n=n)


def draw_states(state: NewsNoiseState, data: ModelData, rng, r_form: str = "convention") -> np.ndarray:
    """Block 1: FFBS for ``alpha`` given coefficients and volatilities."""
    model = state_space(state, data, r_form)
    alpha = ffbs_draw(model, data.y, rng)
    return _observation_fit(alpha, data.y)


def sv_residuals(alpha, beta, y0: float, scales, r_form: str = "convention") -> np.ndarray:
    """The four structural shocks ``(s1 eta1, sL eta2, z1 eta3, zL eta4)`` implied by a state path."""
    prev = np.concatenate(([y0], alpha[:-1, 0]))
    w = alpha[:, 0] - beta[:, 0] - beta[:, 1] * prev
    if r_form == "convention":
        eL = -alpha[:, 1]
    else:
        # news1 = -s1 eta2, so sL eta2 = -(sL / s1) news1 at the current scales
        eL = -alpha[:, 1] * scales[:, 1] / scales[:, 0]
    return np.column_stack([w - eL, eL, alpha[:, 3], alpha[:, 4]])


def draw_sv(state: NewsNoiseState, data: ModelData, priors: ModelPriors, rng, options: ModelOptions) -> list:
    """Block 2: one interweaving sweep per volatility component.

    The residuals move with every new state draw, so the mixture indicators
    are refreshed against them before each sweep.
    """
    e = sv_residuals(state.alpha, state.beta, data.y0, state.scales, options.r_form)
    ystar = log_sq_residuals(e, options.offset)
    out = []
    for j in range(4):
        sv = replace(state.sv[j], indicators=draw_indicators(ystar[:, j], state.sv[j].h, rng))
        out.append(asis_sweep(ystar[:, j], sv, priors.sv[j], rng))
    return out


def tvp_observation(alpha, scales, r_form: str = "convention") -> tuple[np.ndarray, np.ndarray]:
    """Regression target for ``(c_t, rho_t)``: truth purged of its covariance with news1, and its precision."""
    s1, sL = scales[:, 0], scales[:, 1]
    var_w = s1**2 + sL**2
    if r_form == "convention":
        cov_wn, var_n = -(sL**2), sL**2
    else:
        cov_wn, var_n = -(sL * s1), s1**2
    k = cov_wn / var_n
    obs = alpha[:, 0] - k * alpha[:, 1]
    return obs, 1.0 / (var_w - cov_wn * k)


def draw_tvp(state: NewsNoiseState, data: ModelData, priors: ModelPriors, rng, r_form: str = "convention") -> np.ndarray:
    """Block 3: all ``(c_t, rho_t)`` jointly from one banded system."""
    obs, prec = tvp_observation(state.alpha, state.scales, r_form)
    prev = np.concatenate(([data.y0], state.alpha[:-1, 0]))
    loadings = np.column_stack([np.ones(data.n), prev])
    system = build_tvp_precision_system(
        obs, loadings, prec, np.linalg.inv(state.V), priors.beta_mean, priors.beta_cov
    )
    return precision_draw(system, rng).reshape(data.n, 2)


def draw_V(beta, priors: ModelPriors, rng) -> np.ndarray:
    """Block 4: ``V | beta ~ IW(shape + n - 1, scale + sum of outer increments)``."""
    d = np.diff(beta, axis=0)
    df = priors.V_shape + d.shape[0]
    scale = priors.V_scale + d.T @ d
    V = stats.invwishart.rvs(df=df, scale=scale, random_state=rng)
    return 0.5 * (V + V.T)


_NUMERIC = (np.linalg.LinAlgError, FloatingPointError, ValueError, ZeroDivisionError, OverflowError)


def _guard(block: int, fn, *args):
    try:
        out = fn(*args)
    except _NUMERIC as exc:
        raise GibbsBlockError(block, exc) from exc
    arrays = out if isinstance(out, list) else [out]
    for a in arrays:
        x = a.h if isinstance(a, SvState) else a
        if not np.all(np.isfinite(x)):
            raise GibbsBlockError(block, FloatingPointError("non-finite draw"))
    return out


def gibbs_step(
    state: NewsNoiseState,
    panel: ReleasePanel | ModelData,
    priors: ModelPriors,
    rng: np.random.Generator,
    options: ModelOptions = ModelOptions(),
) -> NewsNoiseState:
    """One iteration of the four-block sampler. Raises GibbsBlockError with the failing block."""
    data = prepare_data(panel, options)
    new = state.copy()
    new.alpha = _guard(1, draw_states, new, data, rng, options.r_form)
    new.sv = _guard(2, draw_sv, new, data, priors, rng, options)
    new.beta = _guard(3, draw_tvp, new, data, priors, rng, options.r_form)
    new.V = _guard(4, draw_V, new.beta, priors, rng)
    return new


# -- chains and stored draws -----------------------------------------------------


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 30_000
    burn_in: int = 10_000
    thin: int = 4
    seed: int = 0
    max_retries: int = MAX_RETRIES
    store_alpha: bool = True
    progress_every: int = 1000

    def __post_init__(self):
        if not self.iterations > self.burn_in >= 0:
            raise ConfigurationError("iterations must exceed burn_in, which must be non-negative")
        if self.thin < 1:
            raise ConfigurationError("thin must be at least 1")

    @property
    def retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


ARRAY_FIELDS = ("h", "h0", "sv_params", "beta", "V", "alpha")


@dataclass
class PosteriorDraws:
    """Retained draws. ``h``: (k, 4, n); ``sv_params``: (k, 4, 3) as (mu, phi, tau)."""

    quarters: list
    y: np.ndarray
    y0: float
    h: np.ndarray
    h0: np.ndarray
    sv_params: np.ndarray
    beta: np.ndarray
    V: np.ndarray
    alpha: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.h.shape[0]

    @property
    def uncertainty(self) -> np.ndarray:
        """``U_t`` per draw, shape ``(k, n)``."""
        return np.exp(0.5 * self.h[:, 0]) + np.exp(0.5 * self.h[:, 1])

    def save(self, path) -> Path:
        """Write ``manifest.json`` plus one ``.npy`` per block, replacing ``path`` atomically."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
        try:
            files = {}
            arrays = {"y": self.y, **{k: getattr(self, k) for k in ARRAY_FIELDS}}
            for name, arr in arrays.items():
                if arr is None:
                    continue
                np.save(tmp / f"{name}.npy", np.ascontiguousarray(arr), allow_pickle=False)
                files[name] = hashlib.sha256((tmp / f"{name}.npy").read_bytes()).hexdigest()
            manifest = {"quarters": list(self.quarters), "y0": self.y0, "meta": self.meta, "files": files}
            (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
            if path.exists():
                old = path.with_name(path.name + ".old")
                os.replace(path, old)
                os.replace(tmp, path)
                shutil.rmtree(old, ignore_errors=True)
            else:
                os.replace(tmp, path)
        finally:
            if tmp.exists():
                shutil.rmtree(tmp, ignore_errors=True)
        return path

    @classmethod
    def load(cls, path) -> "PosteriorDraws":
        path = Path(path)
        manifest = json.loads((path / "manifest.json").read_text())
        arrays = {
            k: np.load(path / f"{k}.npy", allow_pickle=False) for k in manifest["files"]
        }
        return cls(
            manifest["quarters"], arrays.pop("y"), manifest["y0"],
            meta=manifest["meta"], **{k: arrays.get(k) for k in ARRAY_FIELDS},
        )


def run_chain(
    panel: ReleasePanel | ModelData,
    priors: ModelPriors,
    config: ChainConfig = ChainConfig(),
    options: ModelOptions = ModelOptions(),
    progress: Callable[[int, int], None] | None = None,
    init: NewsNoiseState | None = None,
) -> PosteriorDraws:
    """Run one chain; identical seeds give bit-identical draws.

    A failed iteration is retried from the same state with fresh randomness;
    more than ``config.max_retries`` consecutive failures abort the chain.
    """
    data = prepare_data(panel, options)
    seeds = np.random.SeedSequence(config.seed)
    init_seq, chain_seq = seeds.spawn(2)
    state = init if init is not None else init_model(data, priors, init_seq, options)
    rng = np.random.default_rng(chain_seq)
    k, n = config.retained, data.n
    h = np.empty((k, 4, n))
    h0 = np.empty((k, 4))
    svp = np.empty((k, 4, 3))
    beta = np.empty((k, n, 2))
    V = np.empty((k, 2, 2))
    alpha = np.empty((k, n, 5)) if config.store_alpha else None
    failures: list[GibbsBlockError] = []
    retried = 0
    j = 0
    it = 0
    while it < config.iterations:
        try:
            state = gibbs_step(state, data, priors, rng, options)
        except GibbsBlockError as exc:
            failures.append(exc)
            retried += 1
            log.warning("iteration %d: %s (retry %d)", it, exc, len(failures))
            if len(failures) > config.max_retries:
                raise ChainAbortedError(it, failures) from exc
            continue
        failures = []
        if it >= config.burn_in and (it - config.burn_in + 1) % config.thin == 0 and j < k:
            h[j] = [s.h for s in state.sv]
            h0[j] = [s.h0 for s in state.sv]
            svp[j] = [(s.params.mu, s.params.phi, s.params.tau) for s in state.sv]
            beta[j] = state.beta
            V[j] = state.V
            if alpha is not None:
                alpha[j] = state.alpha
            j += 1
        it += 1
        if progress is not None:
            progress(it, config.iterations)
        if config.progress_every and it % config.progress_every == 0:
            log.info("iteration %d / %d", it, config.iterations)
    meta = {
        "seed": int(config.seed),
        "iterations": config.iterations,
        "burn_in": config.burn_in,
        "thin": config.thin,
        "retained": k,
        "retried_iterations": retried,
        "r_form": options.r_form,
        "drop_edge": options.drop_edge,
        "offset": options.offset,
        "priors": priors.to_dict(),
        "prior_hash": priors.fingerprint(),
        "kernel_backend": kernels.BACKEND,
        "version": __version__,
    }
    return PosteriorDraws(list(data.quarters), data.y, data.y0, h, h0, svp, beta, V, alpha, meta)


def split_rhat(x: np.ndarray) -> np.ndarray:
    """Split-chain potential scale reduction along axis 0 (one chain split in half)."""
    x = np.asarray(x, dtype=float)
    m = x.shape[0] // 2
    if m < 2:
        return np.full(x.shape[1:], np.nan)
    chains = np.stack([x[:m], x[m : 2 * m]])
    w = chains.var(axis=1, ddof=1).mean(axis=0)
    b = m * chains.mean(axis=1).var(axis=0, ddof=1)
    var = (m - 1) / m * w + b / m
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sqrt(var / w)


def diagnostics(draws: PosteriorDraws) -> dict:
    rho = draws.beta[:, :, 1]
    rhat = split_rhat(draws.uncertainty)
    return {
        "retained": draws.n_draws,
        "explosive_rho_share": float(np.mean(np.abs(rho) > 1.0)),
        "max_split_rhat_U": float(np.nanmax(rhat)) if rhat.size else math.nan,
        "retried_iterations": int(draws.meta.get("retried_iterations", 0)),
    }


# -- uncertainty index -----------------------------------------------------------


INDEX_COLUMNS = ("mean", "median", "q16", "q84", "q05", "q95")


@dataclass
class UncertaintyIndex:
    quarters: list
    mean: np.ndarray
    median: np.ndarray
    q16: np.ndarray
    q84: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    standardized: bool = False

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({"quarter": list(self.quarters)})
        for c in INDEX_COLUMNS:
            df[c] = getattr(self, c)
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path, standardized: bool = False) -> "UncertaintyIndex":
        df = pd.read_csv(path, dtype={"quarter": str}, float_precision="round_trip")
        return cls(df["quarter"].tolist(), *(df[c].to_numpy(float) for c in INDEX_COLUMNS), standardized)

    def standardize(self) -> "UncertaintyIndex":
        """Affine map taking the posterior-mean series to zero mean and unit sample variance."""
        from .aggregate import standardization_constants

        loc, scale = standardization_constants(self.mean)
        return UncertaintyIndex(
            self.quarters, *((getattr(self, c) - loc) / scale for c in INDEX_COLUMNS), standardized=True
        )


def summarize_uncertainty(U, quarters, standardize: bool = False) -> UncertaintyIndex:
    """Per-period summaries of a ``(draws, n)`` array of ``U_t`` draws."""
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] == 0:
        raise ValidationError("no retained draws")
    q = np.quantile(U, [0.5, 0.16, 0.84, 0.05, 0.95], axis=0)
    idx = UncertaintyIndex(list(quarters), U.mean(axis=0), q[0], q[1], q[2], q[3], q[4])
    return idx.standardize() if standardize else idx


def uncertainty_index(draws: PosteriorDraws, standardize: bool = False) -> UncertaintyIndex:
    """Posterior summaries of ``U_t``; quantiles are computed per period across draws."""
    return summarize_uncertainty(draws.uncertainty, draws.quarters, standardize)


# -- simulation from the model ---------------------------------------------------


def prior_draw(
    priors: ModelPriors, n: int, y0: float, rng: np.random.Generator, options: ModelOptions = ModelOptions()
) -> tuple[NewsNoiseState, np.ndarray]:
    """Draw every unknown from the prior, then the observations. Returns ``(state, y)``."""
    V = stats.invwishart.rvs(df=priors.V_shape, scale=priors.V_scale, random_state=rng)
    V = 0.5 * (V + V.T)
    beta = np.empty((n, 2))
    beta[0] = rng.multivariate_normal(priors.beta_mean, priors.beta_cov)
    if n > 1:
        steps = rng.multivariate_normal(np.zeros(2), V, size=n - 1)
        beta[1:] = beta[0] + np.cumsum(steps, axis=0)
    sv = []
    for p in priors.sv:
        params = p.sample(rng)
        h0, h = simulate_sv(n, params, rng)
        sv.append(SvState(h, h0, params, np.zeros(n, dtype=np.int64)))
    state = NewsNoiseState(np.zeros((n, 5)), sv, beta, V)
    alpha, y = simulate_states(beta, np.stack([s.h for s in sv]), y0, rng, options.r_form)
    state.alpha = alpha
    e = sv_residuals(alpha, beta, y0, state.scales, options.r_form)
    ystar = log_sq_residuals(e, options.offset)
    for j, s in enumerate(sv):
        s.indicators = draw_indicators(ystar[:, j], s.h, rng)
    return state, y


__all__ = [
    "ChainConfig",
    "ModelData",
    "ModelOptions",
    "ModelPriors",
    "NewsNoiseState",
    "PosteriorDraws",
    "STATE_NAMES",
    "SV_NAMES",
    "UncertaintyIndex",
    "Z",
    "ar1_ols",
    "default_priors",
    "diagnostics",
    "draw_V",
    "draw_states",
    "draw_sv",
    "draw_tvp",
    "gibbs_step",
    "init_model",
    "loading_matrices",
    "prepare_data",
    "prior_draw",
    "run_chain",
    "simulate_states",
    "split_rhat",
    "state_space",
    "summarize_uncertainty",
    "sv_residuals",
    "tvp_observation",
    "uncertainty_index",
]
