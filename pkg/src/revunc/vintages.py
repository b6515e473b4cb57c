"""Real-time vintage triangles and first/final release pairs.

A triangle holds one column per publication vintage and one row per reference
quarter. Cell ``(t, v)`` is the value of quarter ``t`` as published in vintage
``v``; it is empty until ``t`` is first published.
"""

from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ParseError, ValidationError

QUARTER_RE = re.compile(r"^\s*(\d{4})\s*Q([1-4])\s*$")
DEFAULT_L = 12


def parse_quarter(label: str) -> pd.Period:
    m = QUARTER_RE.match(str(label))
    if m is None:
        raise ValueError(f"malformed quarter label {label!r} (expected YYYYQn)")
    return pd.Period(year=int(m.group(1)), quarter=int(m.group(2)), freq="Q")


def format_quarter(q: pd.Period) -> str:
    return f"{q.year}Q{q.quarter}"


def quarter_index(labels) -> pd.PeriodIndex:
    return pd.PeriodIndex([parse_quarter(x) if not isinstance(x, pd.Period) else x for x in labels], freq="Q")


class PublicationGapWarning(UserWarning):
    """A quarter vanishes from a vintage and later reappears."""


@dataclass
class VintageTriangle:
    """Releases of one series, ``values[i, j]`` = quarter ``ref_quarters[i]`` in vintage ``vintages[j]``.

    ``kind`` is ``"level"`` for raw levels (strictly positive) or ``"growth"``.
    ``invalid`` marks quarters with publication gaps.
    """

    country_code: str
    ref_quarters: pd.PeriodIndex
    vintages: pd.PeriodIndex
    values: np.ndarray
    kind: str = "level"
    invalid: np.ndarray | None = None

    def __post_init__(self):
        self.ref_quarters = quarter_index(self.ref_quarters)
        self.vintages = quarter_index(self.vintages)
        self.values = np.asarray(self.values, dtype=float)
        nq, nv = len(self.ref_quarters), len(self.vintages)
        if self.invalid is None:
            self.invalid = np.zeros(nq, dtype=bool)
        self.invalid = np.asarray(self.invalid, dtype=bool)
        problems = []
        if self.values.shape != (nq, nv):
            problems.append(f"values shape {self.values.shape} != ({nq}, {nv})")
        for name, idx in (("ref_quarters", self.ref_quarters), ("vintages", self.vintages)):
            ords = idx.asi8
            if len(ords) and np.any(np.diff(ords) <= 0):
                problems.append(f"{name} must be strictly increasing without duplicates")
        if self.kind not in ("level", "growth"):
            problems.append(f"unknown kind {self.kind!r}")
        if problems:
            raise ValidationError(f"invalid vintage triangle for {self.country_code}", problems)
        present = ~np.isnan(self.values)
        early = present & (self.vintages.asi8[None, :] <= self.ref_quarters.asi8[:, None])
        if early.any():
            i, j = np.argwhere(early)[0]
            problems.append(
                f"{format_quarter(self.ref_quarters[i])} appears in vintage "
                f"{format_quarter(self.vintages[j])}, before it could be published"
            )
        if self.kind == "level" and np.any(self.values[present] <= 0):
            i, j = np.argwhere(present & ~(self.values > 0))[0]
            problems.append(
                f"non-positive level {self.values[i, j]} at {format_quarter(self.ref_quarters[i])}, "
                f"vintage {format_quarter(self.vintages[j])}"
            )
        if problems:
            raise ValidationError(f"invalid vintage triangle for {self.country_code}", problems)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def publication_gaps(self) -> list[tuple[str, str]]:
        """(quarter, vintage) cells empty between two published cells of the same quarter."""
        p = self.present()
        first = np.where(p.any(1), p.argmax(1), p.shape[1])
        last = p.shape[1] - 1 - p[:, ::-1].argmax(1)
        cols = np.arange(p.shape[1])
        gap = ~p & (cols[None, :] > first[:, None]) & (cols[None, :] < last[:, None])
        return [
            (format_quarter(self.ref_quarters[i]), format_quarter(self.vintages[j]))
            for i, j in np.argwhere(gap)
        ]

    def check_gaps(self, policy: str = "warn") -> "VintageTriangle":
        """Apply the gap policy: ``"warn"`` marks affected quarters invalid, ``"raise"`` rejects."""
        gaps = self.publication_gaps()
        if not gaps:
            return self
        listing = [f"{q} missing from vintage {v}" for q, v in gaps]
        if policy == "raise":
            raise ValidationError(f"publication gaps in {self.country_code}", listing)
        if policy != "warn":
            raise ValueError(f"unknown gap policy {policy!r}")
        bad = {q for q, _ in gaps}
        warnings.warn(
            f"{self.country_code}: {len(bad)} quarter(s) with publication gaps are invalidated: "
            + ", ".join(sorted(bad)),
            PublicationGapWarning,
            stacklevel=2,
        )
        invalid = self.invalid | np.array([format_quarter(q) in bad for q in self.ref_quarters])
        return VintageTriangle(
            self.country_code, self.ref_quarters, self.vintages, self.values, self.kind, invalid
        )

    def equals(self, other: "VintageTriangle") -> bool:
        return (
            self.country_code == other.country_code
            and self.kind == other.kind
            and self.ref_quarters.equals(other.ref_quarters)
            and self.vintages.equals(other.vintages)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


def parse_vintage_csv(path, country: str, gap_policy: str = "warn") -> VintageTriangle:
    """Read a triangle: first column reference quarters, header row vintage labels."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    if len(header) < 2:
        raise ParseError(f"{path}: header needs a quarter column and at least one vintage")
    try:
        vintages = [parse_quarter(x) for x in header[1:]]
    except ValueError:
        bad = next(i for i, x in enumerate(header[1:], start=2) if not QUARTER_RE.match(x))
        raise ParseError(f"{path}: row 1, column {bad}: malformed vintage label {header[bad - 1]!r}") from None
    quarters = []
    values = np.full((len(rows) - 1, len(vintages)), np.nan)
    problems = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) > len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        try:
            quarters.append(parse_quarter(row[0]))
        except ValueError:
            raise ParseError(f"{path}: row {r}, column 1: malformed quarter label {row[0]!r}") from None
        for c, cell in enumerate(row[1:], start=2):
            cell = cell.strip()
            if not cell:
                continue
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {c}: not a number {cell!r}") from None
            if not x > 0:
                problems.append(f"row {r}, column {c}: non-positive level {cell}")
            values[r - 2, c - 2] = x
    if problems:
        raise ValidationError(f"{path}: invalid levels", problems)
    tri = VintageTriangle(country, quarters, vintages, values)
    return tri.check_gaps(gap_policy)


def write_vintage_csv(tri: VintageTriangle, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quarter"] + [format_quarter(v) for v in tri.vintages])
        for q, row in zip(tri.ref_quarters, tri.values):
            w.writerow([format_quarter(q)] + ["" if np.isnan(x) else repr(float(x)) for x in row])


def yoy_growth(tri: VintageTriangle) -> VintageTriangle:
    """``100 (level(t, v) / level(t-4, v) - 1)`` within each vintage."""
    if tri.kind != "level":
        raise ValidationError("yoy_growth expects a level triangle")
    ords = tri.ref_quarters.asi8
    pos = {o: i for i, o in enumerate(ords)}
    lag = np.array([pos.get(o - 4, -1) for o in ords])
    out = np.full(tri.values.shape, np.nan)
    ok = lag >= 0
    out[ok] = 100.0 * (tri.values[ok] / tri.values[lag[ok]] - 1.0)
    return VintageTriangle(tri.country_code, tri.ref_quarters, tri.vintages, out, "growth", tri.invalid.copy())


@dataclass
class ReleasePanel:
    country_code: str
    quarters: pd.PeriodIndex
    first_release: np.ndarray
    final_release: np.ndarray
    edge_flag: np.ndarray
    L: int = DEFAULT_L
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        self.quarters = quarter_index(self.quarters)
        self.first_release = np.asarray(self.first_release, dtype=float)
        self.final_release = np.asarray(self.final_release, dtype=float)
        self.edge_flag = np.asarray(self.edge_flag, dtype=bool)
        n = len(self.quarters)
        for name in ("first_release", "final_release", "edge_flag"):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"{name} must have one entry per quarter ({n})")

    def __len__(self) -> int:
        return len(self.quarters)

    def revisions(self) -> np.ndarray:
        return self.final_release - self.first_release

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "quarter": [format_quarter(q) for q in self.quarters],
                "first": self.first_release,
                "final": self.final_release,
                "edge_flag": self.edge_flag,
            }
        )

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path, country_code: str, L: int = DEFAULT_L) -> "ReleasePanel":
        df = pd.read_csv(path, dtype={"quarter": str}, float_precision="round_trip")
        missing = {"quarter", "first", "final", "edge_flag"} - set(df.columns)
        if missing:
            raise ParseError(f"{path}: missing columns {sorted(missing)}")
        flags = df["edge_flag"].astype(str).str.lower().map({"true": True, "false": False, "1": True, "0": False})
        if flags.isna().any():
            raise ParseError(f"{path}: edge_flag must be true/false")
        return cls(country_code, df["quarter"].tolist(), df["first"].to_numpy(float), df["final"].to_numpy(float), flags.to_numpy(bool), L)

    def slice(self, start=None, end=None) -> "ReleasePanel":
        q = self.quarters
        mask = np.ones(len(q), dtype=bool)
        if start is not None:
            mask &= q >= parse_quarter(start) if isinstance(start, str) else q >= start
        if end is not None:
            mask &= q <= parse_quarter(end) if isinstance(end, str) else q <= end
        return ReleasePanel(
            self.country_code, q[mask], self.first_release[mask], self.final_release[mask],
            self.edge_flag[mask], self.L, dict(self.attrs),
        )


def _kth_present(present: np.ndarray, k: int) -> np.ndarray:
    """Column of the k-th present cell per row (1-based k), -1 where fewer exist."""
    counts = np.cumsum(present, axis=1)
    hit = present & (counts == k)
    return np.where(hit.any(1), hit.argmax(1), -1)


def extract_release_pair(growth: VintageTriangle, L: int = DEFAULT_L) -> ReleasePanel:
    """First release and the L-th release of each quarter.

    Where fewer than ``L`` releases exist the latest one is used and the
    quarter is edge-flagged. Quarters with no growth in any vintage are
    dropped at either end of the sample; quarters invalidated by publication
    gaps stay in the panel as missing values so the quarterly grid is regular.
    """
    if growth.kind != "growth":
        raise ValidationError("extract_release_pair expects a growth triangle")
    if int(L) < 1:
        raise ValidationError(f"L must be at least 1, got {L}")
    L = int(L)
    vals = growth.values
    present = ~np.isnan(vals)
    rows = np.nonzero(present.any(1))[0]
    if rows.size == 0:
        raise ValidationError(f"{growth.country_code}: no quarter has a growth rate")
    rows = np.arange(rows[0], rows[-1] + 1)
    present = present[rows]
    vals = vals[rows]
    first_col = np.where(present.any(1), present.argmax(1), -1)
    last_col = present.shape[1] - 1 - present[:, ::-1].argmax(1)
    kth = _kth_present(present, L)
    edge = kth < 0
    final_col = np.where(edge, last_col, kth)
    idx = np.arange(len(rows))
    has = first_col >= 0
    first = np.where(has, vals[idx, np.maximum(first_col, 0)], np.nan)
    final = np.where(has, vals[idx, np.maximum(final_col, 0)], np.nan)
    bad = growth.invalid[rows] | ~has
    first[bad] = np.nan
    final[bad] = np.nan
    edge = edge & has & ~growth.invalid[rows]
    return ReleasePanel(growth.country_code, growth.ref_quarters[rows], first, final, edge, L)


@dataclass(frozen=True)
class RevisionStats:
    country_code: str
    k: int
    n: int
    mean: float
    std: float
    q25: float
    median: float
    q75: float
    values: tuple = ()

    def as_row(self) -> dict:
        return {
            "country": self.country_code, "k": self.k, "n": self.n, "mean": self.mean,
            "std": self.std, "q25": self.q25, "median": self.median, "q75": self.q75,
        }


def kth_revisions(growth: VintageTriangle, k: int, start=None) -> tuple[pd.PeriodIndex, np.ndarray]:
    """``growth(t, k-th vintage containing t) - growth(t, first vintage)`` where the k-th release exists."""
    if growth.kind != "growth":
        raise ValidationError("revision statistics need a growth triangle")
    present = ~np.isnan(growth.values)
    kth = _kth_present(present, int(k))
    first = np.where(present.any(1), present.argmax(1), -1)
    ok = (kth >= 0) & ~growth.invalid
    if start is not None:
        start = parse_quarter(start) if isinstance(start, str) else start
        ok &= np.asarray(growth.ref_quarters >= start)
    rows = np.nonzero(ok)[0]
    rev = growth.values[rows, kth[rows]] - growth.values[rows, first[rows]]
    return growth.ref_quarters[rows], rev


def revision_stats(growth: VintageTriangle, k: int, start=None) -> RevisionStats:
    """Summary of k-th revisions over quarters that have a k-th release."""
    _, rev = kth_revisions(growth, k, start)
    if rev.size == 0:
        raise ValidationError(f"{growth.country_code}: no quarter has a release number {k}")
    q25, med, q75 = np.quantile(rev, [0.25, 0.5, 0.75])
    std = float(rev.std(ddof=1)) if rev.size > 1 else 0.0
    return RevisionStats(
        growth.country_code, int(k), int(rev.size), float(rev.mean()), std,
        float(q25), float(med), float(q75), tuple(rev.tolist()),
    )


def read_benchmark_dates(path=None) -> list[pd.Period]:
    """Benchmark revision months as quarterly periods. Defaults to the bundled U.S. list."""
    if path is None:
        from importlib.resources import files

        path = files("revunc") / "data" / "benchmark_revisions_usa.csv"
        with path.open() as fh:
            df = pd.read_csv(fh, dtype=str)
    else:
        df = pd.read_csv(path, dtype=str)
    col = "date" if "date" in df.columns else df.columns[-1]
    out = []
    for x in df[col]:
        x = x.strip()
        out.append(parse_quarter(x) if QUARTER_RE.match(x) else pd.Period(x, freq="M").asfreq("Q"))
    return out


__all__ = [
    "DEFAULT_L",
    "PublicationGapWarning",
    "ReleasePanel",
    "RevisionStats",
    "VintageTriangle",
    "extract_release_pair",
    "format_quarter",
    "kth_revisions",
    "parse_quarter",
    "parse_vintage_csv",
    "quarter_index",
    "read_benchmark_dates",
    "revision_stats",
    "write_vintage_csv",
    "yoy_growth",
]
