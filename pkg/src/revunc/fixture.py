"""Small synthetic multi-country dataset simulated from the news/noise model.

Used by the pipeline tests and as a worked example of the input formats.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .vintages import VintageTriangle, format_quarter, write_vintage_csv

FIXTURE_COUNTRIES = ("USA", "DEU", "ITA")
MACRO_VARIABLES = ("stock_market", "policy_rate", "cpi", "employment", "investment", "consumption", "gdp")
_GDP_BASE = {"USA": 15000.0, "DEU": 3200.0, "ITA": 2100.0}


@dataclass
class SyntheticCountry:
    code: str
    quarters: pd.PeriodIndex
    h: np.ndarray  # (4, n) log-variances of (news1, newsL, noise1, noiseL)
    alpha: np.ndarray  # (n, 5)
    first: np.ndarray
    final: np.ndarray
    triangle: VintageTriangle
    macro: pd.DataFrame

    @property
    def uncertainty(self) -> np.ndarray:
        return np.exp(0.5 * self.h[0]) + np.exp(0.5 * self.h[1])


def volatility_paths(n: int, phase: float = 0.0, period: float = 60.0) -> np.ndarray:
    """Sinusoidal first-release news, a step in later news, flat noise."""
    t = np.arange(n)
    h = np.empty((4, n))
    h[0] = -1.0 + 1.2 * np.sin(2 * np.pi * t / period + phase)
    h[1] = np.where(t < n // 2, -1.5, 0.0)
    h[2] = -3.0
    h[3] = -3.5
    return h


def simulate_releases(n: int, h: np.ndarray, rng, beta=(0.5, 0.8), y0: float = 2.5):
    """Truth and the two releases. Returns ``(alpha, first, final)``."""
    s = np.exp(0.5 * h)
    eta = rng.standard_normal((4, n))
    alpha = np.zeros((n, 5))
    prev = y0
    for t in range(n):
        alpha[t, 0] = beta[0] + beta[1] * prev + s[0, t] * eta[0, t] + s[1, t] * eta[1, t]
        alpha[t, 1] = -s[1, t] * eta[1, t]
        alpha[t, 3] = s[2, t] * eta[2, t]
        alpha[t, 4] = s[3, t] * eta[3, t]
        prev = alpha[t, 0]
    first = alpha[:, 0] + alpha[:, 1] + alpha[:, 3]
    final = alpha[:, 0] + alpha[:, 4]
    return alpha, first, final


def triangle_from_releases(code: str, quarters: pd.PeriodIndex, first, final, L: int = 12) -> VintageTriangle:
    """Level triangle whose within-vintage growth gives ``first`` at release 1 and ``final`` from release ``L`` on.

    Releases in between move linearly. Four base quarters precede ``quarters``
    so every growth rate has its year-ago level in the same vintage.
    """
    n = len(quarters)
    base_q = pd.period_range(end=quarters[0] - 1, periods=4, freq="Q")
    ref = base_q.append(quarters)
    vint = pd.period_range(start=ref[0] + 1, end=ref[-1] + 1, freq="Q")
    levels = np.full((n + 4, len(vint)), np.nan)
    base = 100.0 * (1.0 + 0.005 * np.arange(4))
    for j in range(len(vint)):
        # vintage j publishes reference quarters 0..j
        for i in range(min(j + 1, n + 4)):
            if i < 4:
                levels[i, j] = base[i]
                continue
            w = min(j - i, L - 1) / max(L - 1, 1)
            g = first[i - 4] + w * (final[i - 4] - first[i - 4])
            levels[i, j] = levels[i - 4, j] * (1.0 + g / 100.0)
    return VintageTriangle(code, ref, vint, levels)


def simulate_macro(quarters: pd.PeriodIndex, uncertainty: np.ndarray, rng) -> pd.DataFrame:
    """Macro levels that dip after uncertainty rises; the policy rate is in percent."""
    n = len(quarters)
    u = (uncertainty - uncertainty.mean()) / uncertainty.std()
    out = {}
    drift = {"stock_market": 1.5, "cpi": 0.5, "employment": 0.2, "investment": 0.6, "consumption": 0.5, "gdp": 0.5}
    load = {"stock_market": -2.0, "cpi": -0.1, "employment": -0.3, "investment": -1.0, "consumption": -0.3, "gdp": -0.4}
    for v in MACRO_VARIABLES:
        if v == "policy_rate":
            r = np.empty(n)
            prev = 4.0
            for t in range(n):
                prev = 0.5 + 0.88 * prev - 0.3 * u[t] + 0.3 * rng.standard_normal()
                r[t] = prev
            out[v] = r
            continue
        sd = 3.0 if v == "stock_market" else 0.5
        x = np.cumsum(drift[v] + load[v] * u + sd * rng.standard_normal(n))
        out[v] = 100.0 * np.exp(x / 100.0)
    df = pd.DataFrame(out)
    df.insert(0, "quarter", [format_quarter(q) for q in quarters])
    return df


def simulate_country(code: str, n: int, rng, start: str = "1985Q1", L: int = 12, phase: float = 0.0) -> SyntheticCountry:
    quarters = pd.period_range(start=start, periods=n, freq="Q")
    h = volatility_paths(n, phase)
    alpha, first, final = simulate_releases(n, h, rng)
    tri = triangle_from_releases(code, quarters, first, final, L)
    macro = simulate_macro(quarters, np.exp(0.5 * h[0]) + np.exp(0.5 * h[1]), rng)
    return SyntheticCountry(code, quarters, h, alpha, first, final, tri, macro)


def annual_weights(codes, years, rng) -> pd.DataFrame:
    rows = []
    for c in codes:
        base = _GDP_BASE.get(c, 1000.0)
        for k, y in enumerate(years):
            rows.append((c, int(y), base * 1.02**k * (1.0 + 0.01 * rng.standard_normal())))
    return pd.DataFrame(rows, columns=["country", "year", "gdp"])


CONFIG_TEMPLATE = """\
# Synthetic fixture. Paths are relative to this file.
[run]
countries = {countries}
output = out
seed = {seed}
jobs = 1

[data]
vintage_dir = vintages
macro_dir = macro
weights = weights.csv
benchmark_dates =

[model]
L = 12
r_form = convention
drop_edge = false
min_length = 40
V_shape = 3

[chain]
iterations = {iterations}
burn_in = {burn_in}
thin = {thin}
chains = 1

[var]
p = 2
band = 0.68
horizons = 12
draws = 300
weighting = equal

[global]
standardize = true

[epl]
exclusions =
"""


def write_fixture(
    directory,
    seed: int = 0,
    countries=FIXTURE_COUNTRIES,
    n: int = 100,
    iterations: int = 600,
    burn_in: int = 200,
    thin: int = 2,
) -> Path:
    """Write vintages, macro series, weights and a config to ``directory``; returns the config path."""
    root = Path(directory)
    (root / "vintages").mkdir(parents=True, exist_ok=True)
    (root / "macro").mkdir(exist_ok=True)
    rng = np.random.default_rng(seed)
    years = None
    for k, code in enumerate(countries):
        c = simulate_country(code, n, rng, phase=1.3 * k)
        write_vintage_csv(c.triangle, root / "vintages" / f"{code}.csv")
        c.macro.to_csv(root / "macro" / f"{code}.csv", index=False, float_format="%.17g")
        years = sorted({q.year for q in c.triangle.ref_quarters})
    annual_weights(countries, years, rng).to_csv(root / "weights.csv", index=False, float_format="%.17g")
    cfg = root / "revunc.ini"
    cfg.write_text(
        CONFIG_TEMPLATE.format(
            countries=", ".join(countries), seed=seed, iterations=iterations, burn_in=burn_in, thin=thin
        )
    )
    return cfg


__all__ = [
    "FIXTURE_COUNTRIES",
    "MACRO_VARIABLES",
    "SyntheticCountry",
    "annual_weights",
    "simulate_country",
    "simulate_macro",
    "simulate_releases",
    "triangle_from_releases",
    "volatility_paths",
    "write_fixture",
]
