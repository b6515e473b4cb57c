"""Cross-country post-processing of uncertainty indices."""

from __future__ import annotations

from importlib.resources import files

import numpy as np
import pandas as pd

from .errors import ConfigurationError, ValidationError

# placement of the countries sitting at the reported median
DEFAULT_PLACEMENT = {"JPN": "high", "CHE": "low"}


def standardization_constants(x) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof=1), ignoring NaN."""
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < 2:
        raise ValidationError("standardization needs at least two observations")
    sd = float(x.std(ddof=1))
    if not sd > 0.0:
        raise ValidationError("cannot standardize a series with zero variance")
    return float(x.mean()), sd


def standardize_index(index):
    """Demean and scale to unit sample variance. Keeps a pandas index if given one."""
    loc, scale = standardization_constants(index)
    if isinstance(index, pd.Series):
        return (index - loc) / scale
    return (np.asarray(index, dtype=float) - loc) / scale


def _as_series(x, name) -> pd.Series:
    if not isinstance(x, pd.Series):
        raise ValidationError(f"{name} must be a pandas Series indexed by quarter")
    return x.astype(float)


def quarterly_weights_from_annual(annual: pd.DataFrame) -> pd.DataFrame:
    """Hold annual GDP constant over the four quarters of each year.

    ``annual`` has columns ``country, year, gdp``; the result has ``country,
    quarter, gdp`` with quarterly periods.
    """
    rows = []
    for r in annual.itertuples(index=False):
        for q in range(1, 5):
            rows.append((r.country, pd.Period(year=int(r.year), quarter=q, freq="Q"), float(r.gdp)))
    return pd.DataFrame(rows, columns=["country", "quarter", "gdp"])


def weight_table(weights) -> pd.DataFrame:
    """Quarter x country weight matrix from a long table or a dict of series."""
    if isinstance(weights, pd.DataFrame) and {"country", "quarter", "gdp"} <= set(weights.columns):
        w = weights.copy()
        w["quarter"] = pd.PeriodIndex(w["quarter"].astype(str), freq="Q")
        wide = w.pivot_table(index="quarter", columns="country", values="gdp", aggfunc="last")
    elif isinstance(weights, dict):
        wide = pd.DataFrame({k: _as_series(v, f"weights[{k}]") for k, v in weights.items()})
    else:
        raise ValidationError("weights must be a long table (country, quarter, gdp) or a dict of series")
    if (wide.fillna(0.0) < 0).to_numpy().any():
        raise ValidationError("weights must be nonnegative")
    return wide


def global_index(indices: dict, weights) -> pd.Series:
    """Weighted mean over the countries available each quarter, weights renormalized per quarter.

    Quarters where no country has both an index value and a positive weight are
    left out of the result.
    """
    if not indices:
        raise ValidationError("no country indices supplied")
    vals = pd.DataFrame({k: _as_series(v, f"indices[{k}]") for k, v in indices.items()})
    w = weight_table(weights).reindex(index=vals.index, columns=vals.columns)
    missing = [c for c in vals.columns if w[c].isna().all()]
    if missing:
        raise ValidationError("no weights for " + ", ".join(map(str, missing)))
    avail = vals.notna() & w.notna() & (w > 0)
    wv = w.where(avail, 0.0)
    tot = wv.sum(axis=1)
    num = (vals.where(avail, 0.0) * wv).sum(axis=1)
    out = (num / tot)[tot > 0]
    out.name = "global"
    return out


def global_coverage(indices: dict, weights, world: pd.Series | None = None) -> pd.Series:
    """Share of ``world`` GDP covered per quarter (or of the supplied total when ``world`` is None)."""
    vals = pd.DataFrame({k: _as_series(v, k) for k, v in indices.items()})
    w = weight_table(weights)
    covered = w.reindex(index=vals.index, columns=vals.columns).where(vals.notna(), 0.0).sum(axis=1)
    denom = world.reindex(vals.index) if world is not None else w.reindex(vals.index).sum(axis=1)
    return covered / denom


def load_epl_table(path=None) -> pd.Series:
    """Country code -> average EPL score. Defaults to the bundled nine-country table."""
    if path is None:
        with (files("revunc") / "data" / "epl.csv").open() as fh:
            df = pd.read_csv(fh)
    else:
        df = pd.read_csv(path)
    if not {"country", "score"} <= set(df.columns):
        raise ValidationError("EPL table needs columns country, score")
    s = df.set_index("country")["score"].astype(float)
    if (s < 0).any():
        raise ValidationError("EPL scores must be nonnegative")
    return s


def epl_median(table: pd.Series) -> float:
    return float(np.median(table.to_numpy(float)))


def epl_split(table: pd.Series, exclusions=(), placement: dict | None = None) -> tuple[list, list]:
    """(high, low) groups around the median of the full table.

    Strictly above the median is high, otherwise low; ``placement`` overrides
    named countries. Exclusions are removed after grouping, so excluding a
    country does not move the threshold.
    """
    placement = DEFAULT_PLACEMENT if placement is None else placement
    med = epl_median(table)
    high, low = [], []
    excl = set(exclusions)
    unknown = excl - set(table.index)
    if unknown:
        raise ConfigurationError("excluded countries not in the EPL table: " + ", ".join(sorted(unknown)))
    for country, score in table.sort_values(kind="stable").items():
        group = placement.get(country, "high" if score > med else "low")
        if country in excl:
            continue
        (high if group == "high" else low).append(country)
    if len(high) + len(low) < 2:
        raise ConfigurationError("EPL split needs at least two countries after exclusions")
    if not high or not low:
        raise ConfigurationError("EPL split produced an empty group")
    return high, low


def rmse_horse_race(final, forecasts: dict, reference: str | None = None) -> pd.DataFrame:
    """RMSE of each forecast of ``final`` and its ratio to the reference (first) forecast."""
    if not forecasts:
        raise ValidationError("no forecasts supplied")
    y = np.asarray(final, dtype=float)
    reference = reference or next(iter(forecasts))
    problems = []
    rmse = {}
    for name, f in forecasts.items():
        f = np.asarray(f, dtype=float)
        if f.shape != y.shape:
            problems.append(f"{name}: {f.shape[0] if f.ndim else 0} observations, final has {y.shape[0]}")
            continue
        if not np.array_equal(np.isnan(f), np.isnan(y)):
            problems.append(f"{name}: missing values do not line up with the final series")
            continue
        ok = ~np.isnan(y)
        rmse[name] = float(np.sqrt(np.mean((f[ok] - y[ok]) ** 2)))
    if problems:
        raise ValidationError("misaligned forecast samples", problems)
    table = pd.DataFrame({"rmse": pd.Series(rmse)})
    table["ratio"] = table["rmse"] / table.loc[reference, "rmse"]
    return table


def load_horse_race_table() -> pd.DataFrame:
    """Published U.S. RMSEs of the first release and two factor-model forecasts."""
    with (files("revunc") / "data" / "horse_race_usa.csv").open() as fh:
        return pd.read_csv(fh).set_index("forecast")


def ratios_from_rmse(rmse: pd.Series, reference: str | None = None) -> pd.Series:
    reference = reference or rmse.index[0]
    return rmse / rmse[reference]


__all__ = [
    "DEFAULT_PLACEMENT",
    "epl_median",
    "epl_split",
    "global_coverage",
    "global_index",
    "load_epl_table",
    "load_horse_race_table",
    "quarterly_weights_from_annual",
    "ratios_from_rmse",
    "rmse_horse_race",
    "standardization_constants",
    "standardize_index",
    "weight_table",
]
