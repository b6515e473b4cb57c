import warnings

import numpy as np
import pandas as pd
import pytest

from revunc.errors import ParseError, ValidationError
from revunc.fixture import simulate_releases, triangle_from_releases, volatility_paths
from revunc.vintages import (
    PublicationGapWarning,
    ReleasePanel,
    VintageTriangle,
    extract_release_pair,
    format_quarter,
    kth_revisions,
    parse_quarter,
    parse_vintage_csv,
    read_benchmark_dates,
    revision_stats,
    write_vintage_csv,
    yoy_growth,
)


def write(tmp_path, text, name="x.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


SMALL = """quarter,2000Q2,2000Q3,2000Q4
2000Q1,100,101,
2000Q2,,102,103
2000Q3,,,104
"""


def test_quarter_labels():
    assert format_quarter(parse_quarter(" 1999Q4 ")) == "1999Q4"
    with pytest.raises(ValueError):
        parse_quarter("1999-4")


def test_parse_and_write_roundtrip(tmp_path):
    tri = parse_vintage_csv(write(tmp_path, SMALL), "USA")
    assert tri.shape == (3, 3)
    assert tri.values[1, 2] == 103
    out = tmp_path / "y.csv"
    write_vintage_csv(tri, out)
    assert parse_vintage_csv(out, "USA").equals(tri)


@pytest.mark.parametrize(
    "text, where",
    [
        ("quarter,2000Q2,20003\n2000Q1,1,2\n", "row 1, column 3"),
        ("quarter,2000Q2\n2000-1,1\n", "row 2, column 1"),
        ("quarter,2000Q2\n2000Q1,abc\n", "row 2, column 2"),
    ],
)
def test_parse_errors_name_the_cell(tmp_path, text, where):
    with pytest.raises(ParseError, match=where):
        parse_vintage_csv(write(tmp_path, text), "USA")


def test_nonpositive_levels_are_listed(tmp_path):
    with pytest.raises(ValidationError) as err:
        parse_vintage_csv(write(tmp_path, "quarter,2000Q2,2000Q3\n2000Q1,0,-1\n"), "USA")
    assert len(err.value.problems) == 2


def test_release_before_reference_quarter_rejected(tmp_path):
    with pytest.raises(ValidationError, match="before it could be published"):
        parse_vintage_csv(write(tmp_path, "quarter,2000Q1\n2000Q1,1\n"), "USA")


def test_publication_gap_policy(tmp_path):
    text = "quarter,2000Q2,2000Q3,2000Q4\n2000Q1,1,,1\n"
    with pytest.warns(PublicationGapWarning):
        tri = parse_vintage_csv(write(tmp_path, text), "USA")
    assert tri.invalid.tolist() == [True]
    with pytest.raises(ValidationError):
        parse_vintage_csv(write(tmp_path, text), "USA", gap_policy="raise")


def test_yoy_growth():
    q = pd.period_range("2000Q1", periods=5, freq="Q")
    v = pd.period_range("2001Q2", periods=1, freq="Q")
    tri = VintageTriangle("X", q, v, np.array([[100.0], [100], [100], [100], [110]]))
    g = yoy_growth(tri)
    assert g.kind == "growth"
    assert np.isnan(g.values[:4]).all()
    assert g.values[4, 0] == pytest.approx(10.0)


def synthetic(rng, n=40, L=6):
    q = pd.period_range("1990Q1", periods=n, freq="Q")
    _, first, final = simulate_releases(n, volatility_paths(n), rng)
    return q, first, final, triangle_from_releases("SYN", q, first, final, L)


def test_release_pair_recovers_first_and_lth(rng):
    L = 6
    q, first, final, tri = synthetic(rng, L=L)
    panel = extract_release_pair(yoy_growth(tri), L)
    panel = panel.slice(q[0], q[-1])
    np.testing.assert_allclose(panel.first_release, first, atol=1e-9)
    done = ~panel.edge_flag
    np.testing.assert_allclose(panel.final_release[done], final[done], atol=1e-9)
    # the last L-1 quarters have fewer than L releases
    assert panel.edge_flag.sum() == L - 1
    assert panel.edge_flag[-(L - 1):].all()


def test_release_pair_requires_growth(rng):
    *_, tri = synthetic(rng)
    with pytest.raises(ValidationError):
        extract_release_pair(tri)


def test_revision_stats(rng):
    L = 6
    q, first, final, tri = synthetic(rng, L=L)
    g = yoy_growth(tri)
    st = revision_stats(g, L)
    quarters, rev = kth_revisions(g, L)
    assert st.n == rev.size == len(q) - (L - 1)
    assert st.mean == pytest.approx(rev.mean())
    np.testing.assert_allclose(rev, (final - first)[: rev.size], atol=1e-9)
    assert set(st.as_row()) == {"country", "k", "n", "mean", "std", "q25", "median", "q75"}
    with pytest.raises(ValidationError):
        revision_stats(g, 10_000)


def test_panel_csv_roundtrip(tmp_path, rng):
    q, first, final, tri = synthetic(rng)
    panel = extract_release_pair(yoy_growth(tri), 6)
    panel.to_csv(tmp_path / "p.csv")
    back = ReleasePanel.read_csv(tmp_path / "p.csv", "SYN", 6)
    np.testing.assert_array_equal(back.first_release, panel.first_release)
    np.testing.assert_array_equal(back.edge_flag, panel.edge_flag)
    assert back.quarters.equals(panel.quarters)


def test_bundled_benchmark_dates():
    dates = read_benchmark_dates()
    assert dates[0] == parse_quarter("1947Q3")
    assert all(a < b for a, b in zip(dates, dates[1:]))
