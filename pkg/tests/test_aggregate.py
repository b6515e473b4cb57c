import numpy as np
import pandas as pd
import pytest

from revunc import aggregate as ag
from revunc.errors import ConfigurationError, ValidationError


def q(start, n):
    return pd.period_range(start, periods=n, freq="Q")


def test_standardize_index():
    s = pd.Series([1.0, 2.0, 3.0, np.nan], index=q("2000Q1", 4))
    z = ag.standardize_index(s)
    assert z.iloc[:3].tolist() == [-1.0, 0.0, 1.0]
    assert np.isnan(z.iloc[3])
    with pytest.raises(ValidationError):
        ag.standardize_index([1.0, 1.0])


def test_quarterly_weights_hold_annual_value():
    annual = pd.DataFrame({"country": ["A", "A"], "year": [2000, 2001], "gdp": [10.0, 12.0]})
    w = ag.quarterly_weights_from_annual(annual)
    assert len(w) == 8 and w["gdp"].iloc[3] == 10.0 and w["gdp"].iloc[4] == 12.0


def test_global_index_renormalizes_over_available_countries():
    a = pd.Series([1.0, 1.0, np.nan], index=q("2000Q1", 3))
    b = pd.Series([3.0, 3.0, 3.0], index=q("2000Q1", 3))
    w = {"A": pd.Series(1.0, index=q("2000Q1", 3)), "B": pd.Series(3.0, index=q("2000Q1", 3))}
    g = ag.global_index({"A": a, "B": b}, w)
    np.testing.assert_allclose(g.to_numpy(), [2.5, 2.5, 3.0])
    cov = ag.global_coverage({"A": a, "B": b}, w)
    np.testing.assert_allclose(cov.to_numpy(), [1.0, 1.0, 0.75])


def test_global_index_equal_weights_is_plain_mean():
    idx = {c: pd.Series(np.arange(4.0) * k, index=q("2000Q1", 4)) for k, c in enumerate("ABC", 1)}
    w = {c: pd.Series(1.0, index=q("2000Q1", 4)) for c in "ABC"}
    g = ag.global_index(idx, w)
    np.testing.assert_allclose(g.to_numpy(), pd.DataFrame(idx).mean(axis=1).to_numpy())


def test_global_index_rejects_missing_weights():
    idx = {"A": pd.Series([1.0], index=q("2000Q1", 1))}
    with pytest.raises(ValidationError, match="no weights for A"):
        ag.global_index(idx, {"B": pd.Series([1.0], index=q("2000Q1", 1))})
    with pytest.raises(ValidationError):
        ag.global_index({}, {})


def test_epl_split_bundled_table():
    t = ag.load_epl_table()
    high, low = ag.epl_split(t)
    assert ag.epl_median(t) == pytest.approx(1.62)
    assert "ITA" in high and "USA" in low
    assert "JPN" in high and "CHE" in low
    assert sorted(high + low) == sorted(t.index)


def test_epl_split_exclusions_keep_threshold():
    t = ag.load_epl_table()
    high, low = ag.epl_split(t, exclusions=["ITA", "USA"])
    assert "ITA" not in high and "USA" not in low
    assert "FRA" in high
    with pytest.raises(ConfigurationError):
        ag.epl_split(t, exclusions=["XXX"])


def test_horse_race_reference_ratio_is_one():
    rng = np.random.default_rng(0)
    y = rng.standard_normal(50)
    tab = ag.rmse_horse_race(y, {"first": y + 0.1 * rng.standard_normal(50), "other": y + 0.2})
    assert tab.loc["first", "ratio"] == 1.0
    assert tab.loc["other", "rmse"] == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        ag.rmse_horse_race(y, {"short": y[:10]})


def test_bundled_horse_race_ratios_are_consistent():
    t = ag.load_horse_race_table()
    r = ag.ratios_from_rmse(t["rmse"])
    # RMSEs are printed to five decimals, ratios to three: the bound covers both roundings
    rmse_err = 0.5e-5 * (1 / t["rmse"] + t["rmse"] / t["rmse"].iloc[0] ** 2)
    assert np.all(np.abs(r - t["ratio"]) <= rmse_err + 0.5e-3)
