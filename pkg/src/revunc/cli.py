"""Batch pipeline: ingest -> estimate -> index -> var -> global -> report.

Each stage reads the outputs of earlier stages from the output directory and
records what it wrote in ``manifest.json`` together with a key derived from
the relevant settings and the hashes of its inputs. Re-running a stage whose
key and outputs are unchanged does nothing.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
import tempfile
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, aggregate, bvar, newsnoise, plots, vintages
from .errors import (
    ChainAbortedError,
    ConfigurationError,
    DecompositionError,
    GibbsBlockError,
    MissingArtifactError,
    ValidationError,
)
from .svol import SvPriors

log = logging.getLogger("revunc")

STAGES = ("ingest", "estimate", "index", "var", "global", "report")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_MISSING = 0, 2, 3, 4
OUTPUT_ENV = "REVUNC_OUTPUT"
MANIFEST = "manifest.json"
REVISION_ORDER = 10


# -- configuration ---------------------------------------------------------------

# section -> key -> (type, default); a default of ... marks a required key
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {"countries": ("list", ...), "output": ("path", "out"), "seed": ("int", None), "jobs": ("int", 1)},
    "data": {
        "vintage_dir": ("path", ...),
        "vintage_pattern": ("str", "{country}.csv"),
        "gap_policy": ("str", "warn"),
        "macro_dir": ("path", None),
        "weights": ("path", None),
        "epl": ("path", None),
        "benchmark_dates": ("path", None),
    },
    "model": {
        "L": ("int", 12),
        "r_form": ("str", "convention"),
        "drop_edge": ("bool", False),
        "min_length": ("int", 40),
        "offset": ("float", 1e-6),
        "V_shape": ("float", 3.0),
        "sv_b_mu": ("float", 0.0),
        "sv_B_mu": ("float", 100.0),
        "sv_a0": ("float", 5.0),
        "sv_b0": ("float", 1.5),
        "sv_B_sigma": ("float", 1.0),
    },
    "chain": {
        "iterations": ("int", 30000),
        "burn_in": ("int", 10000),
        "thin": ("int", 4),
        "chains": ("int", 1),
        "max_retries": ("int", 5),
    },
    "var": {
        "variables": ("list", list(bvar.DEFAULT_VARIABLES)),
        "transforms": ("map", dict(bvar.DEFAULT_TRANSFORMS)),
        "p": ("int", bvar.DEFAULT_LAGS),
        "band": ("float", bvar.DEFAULT_BAND),
        "horizons": ("int", 20),
        "draws": ("int", 1000),
        "weighting": ("str", "equal"),
        "uncertainty_draws": ("bool", False),
    },
    "global": {"standardize": ("bool", True)},
    "epl": {"exclusions": ("list", []), "placement": ("map", dict(aggregate.DEFAULT_PLACEMENT))},
}


def _convert(kind: str, raw: str, base: Path):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "list":
        return [x.strip() for x in raw.replace("\n", ",").split(",") if x.strip()]
    if kind == "map":
        out = {}
        for item in [x.strip() for x in raw.replace("\n", ",").split(",") if x.strip()]:
            k, sep, v = item.partition(":")
            if not sep:
                raise ValueError(f"expected key:value, got {item!r}")
            out[k.strip()] = v.strip()
        return out
    if kind == "path":
        if not raw:
            return None
        p = Path(raw).expanduser()
        return p if p.is_absolute() else (base / p)
    raise AssertionError(kind)


@dataclass
class RunConfig:
    """Validated settings of one pipeline run. ``values[section][key]`` holds every setting."""

    source: Path
    values: dict
    seed_recorded: bool = True
    problems: list = field(default_factory=list)

    def get(self, section: str, key: str):
        return self.values[section][key]

    @property
    def base(self) -> Path:
        return self.source.parent

    @property
    def output(self) -> Path:
        return self.values["run"]["output"]

    @property
    def countries(self) -> list:
        return list(self.values["run"]["countries"])

    def canonical(self) -> dict:
        """Every setting with paths relative to the config file, so runs are self-describing."""
        out = {}
        for sec, keys in self.values.items():
            out[sec] = {}
            for k, v in keys.items():
                if isinstance(v, Path):
                    v = os.path.relpath(v, self.base)
                out[sec][k] = v
        out["run"].pop("output", None)
        out["run"].pop("jobs", None)
        return out

    def hash(self) -> str:
        return _hash_obj(self.canonical())


def load_config(path, countries=None, seed=None, jobs=None) -> RunConfig:
    """Parse and validate; every problem found is reported in one :class:`ValidationError`."""
    path = Path(path).resolve()
    if not path.is_file():
        raise ValidationError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ValidationError(f"cannot parse {path}", [str(exc)]) from None
    problems = []
    values: dict = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            problems.append(f"[{sec}]: unknown section")
    for sec, keys in SCHEMA.items():
        values[sec] = {}
        have = parser[sec] if parser.has_section(sec) else {}
        for k in have:
            if k not in keys:
                problems.append(f"[{sec}] {k}: unknown setting")
        for k, (kind, default) in keys.items():
            raw = have.get(k) if have else None
            if raw is None or (raw.strip() == "" and default is not ...):
                if default is ...:
                    problems.append(f"[{sec}] {k}: required")
                    values[sec][k] = None
                else:
                    values[sec][k] = _convert(kind, default or "", path.parent) if kind == "path" else default
                continue
            try:
                values[sec][k] = _convert(kind, raw, path.parent)
            except ValueError as exc:
                problems.append(f"[{sec}] {k}: {exc}")
                values[sec][k] = None
    if countries:
        subset = [c.strip() for c in countries.split(",") if c.strip()]
        unknown = [c for c in subset if c not in (values["run"]["countries"] or [])]
        if unknown:
            problems.append(f"--countries: {', '.join(unknown)} not among the configured countries")
        values["run"]["countries"] = subset
    if seed is not None:
        values["run"]["seed"] = int(seed)
    if jobs is not None:
        values["run"]["jobs"] = int(jobs)
    env_out = os.environ.get(OUTPUT_ENV)
    if env_out:
        values["run"]["output"] = Path(env_out).expanduser().resolve()
    cfg = RunConfig(path, values)
    problems += _validate(cfg)
    if problems:
        raise ValidationError(f"invalid configuration {path}", problems)
    if values["run"]["seed"] is None:
        cfg.seed_recorded = False
        recorded = _read_manifest(cfg.output).get("config", {}).get("run", {}).get("seed")
        values["run"]["seed"] = int(recorded) if recorded is not None else int(np.random.SeedSequence().entropy % 2**63)
    return cfg


def _validate(cfg: RunConfig) -> list:
    v = cfg.values
    problems = []

    def need(cond, msg):
        if not cond:
            problems.append(msg)

    countries = v["run"]["countries"] or []
    if v["run"]["countries"] is not None:
        need(len(countries) > 0, "[run] countries: at least one country is needed")
    for c in countries:
        need(len(c) == 3 and c.isalpha() and c.isupper(), f"[run] countries: {c!r} is not a 3-letter code")
    need(len(set(countries)) == len(countries), "[run] countries: repeated code")
    if v["run"]["jobs"] is not None:
        need(v["run"]["jobs"] >= 1, "[run] jobs: must be at least 1")
    vd = v["data"]["vintage_dir"]
    if vd is not None:
        need(vd.is_dir(), f"[data] vintage_dir: {vd} is not a directory")
        if vd.is_dir():
            for c in countries:
                f = vd / v["data"]["vintage_pattern"].format(country=c)
                need(f.is_file(), f"[data] vintage_dir: no vintage file {f.name} for {c}")
    need(v["data"]["gap_policy"] in ("warn", "raise"), "[data] gap_policy: must be warn or raise")
    for k in ("macro_dir",):
        p = v["data"][k]
        if p is not None:
            need(p.is_dir(), f"[data] {k}: {p} is not a directory")
    for k in ("weights", "epl", "benchmark_dates"):
        p = v["data"][k]
        if p is not None:
            need(p.is_file(), f"[data] {k}: {p} does not exist")
    m = v["model"]
    if m["L"] is not None:
        need(m["L"] >= 2, "[model] L: must be at least 2")
    need(m["r_form"] in newsnoise.R_FORMS, f"[model] r_form: must be one of {newsnoise.R_FORMS}")
    if m["V_shape"] is not None:
        need(m["V_shape"] > 1, "[model] V_shape: must exceed 1 (dimension - 1)")
    for k in ("sv_B_mu", "sv_a0", "sv_b0", "sv_B_sigma", "offset"):
        if m[k] is not None:
            need(m[k] > 0, f"[model] {k}: must be positive")
    ch = v["chain"]
    if None not in (ch["iterations"], ch["burn_in"]):
        need(ch["iterations"] > ch["burn_in"] >= 0, "[chain] iterations: must exceed burn_in >= 0")
    for k in ("thin", "chains"):
        if ch[k] is not None:
            need(ch[k] >= 1, f"[chain] {k}: must be at least 1")
    va = v["var"]
    try:
        bvar.VarSpec(tuple(va["variables"] or ()), va["p"] or 1, va["band"] or 0.68, va["transforms"] or {})
    except ValidationError as exc:
        problems += [f"[var] {p}" for p in exc.problems]
    need(va["weighting"] in ("equal", "gdp"), "[var] weighting: must be equal or gdp")
    if va["weighting"] == "gdp":
        need(v["data"]["weights"] is not None, "[var] weighting: gdp weighting needs [data] weights")
    if va["draws"] is not None:
        need(va["draws"] >= 1, "[var] draws: must be positive")
    for c, g in (v["epl"]["placement"] or {}).items():
        need(g in ("high", "low"), f"[epl] placement: {c} must be placed high or low")
    return problems


# -- files, hashes and the manifest ------------------------------------------------


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path, data) -> Path:
    """Write text or bytes to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_csv(df: pd.DataFrame, path) -> Path:
    return write_atomic(path, df.to_csv(index=False, float_format="%.17g", lineterminator="\n"))


def write_json(obj, path) -> Path:
    return write_atomic(path, json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def _read_manifest(out: Path) -> dict:
    p = Path(out) / MANIFEST
    if not p.is_file():
        return {}
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError:
        log.warning("ignoring unreadable manifest %s", p)
        return {}


def _require(path: Path, what: str, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"{what} not found at {path}; run the '{stage}' stage first")
    return path


class Context:
    def __init__(self, cfg: RunConfig, force: bool = False):
        self.cfg = cfg
        self.out = cfg.output
        self.force = force

    def rel(self, p: Path) -> str:
        return Path(os.path.relpath(p, self.out)).as_posix()

    def input_hashes(self, paths) -> dict:
        out = {}
        for p in paths:
            p = Path(p)
            key = self.rel(p) if str(p.resolve()).startswith(str(self.out.resolve())) else os.path.relpath(p, self.cfg.base)
            out[Path(key).as_posix()] = file_hash(p)
        return out

    def outputs_hashes(self, paths) -> dict:
        return {self.rel(Path(p)): file_hash(p) for p in sorted(map(Path, paths))}

    def up_to_date(self, stage: str, key: str) -> bool:
        if self.force:
            return False
        entry = _read_manifest(self.out).get("stages", {}).get(stage)
        if not entry or entry.get("key") != key:
            return False
        for rel, h in entry.get("outputs", {}).items():
            p = self.out / rel
            if not p.is_file() or file_hash(p) != h:
                return False
        return True

    def record(self, stage: str, key: str, settings: dict, inputs: dict, outputs: dict) -> None:
        man = _read_manifest(self.out)
        man["version"] = __version__
        man["config_hash"] = self.cfg.hash()
        man["config"] = self.cfg.canonical()
        man.setdefault("stages", {})[stage] = {
            "key": key,
            "config_hash": self.cfg.hash(),
            "settings": settings,
            "inputs": inputs,
            "outputs": outputs,
        }
        write_json(man, self.out / MANIFEST)


def _stage(ctx: Context, name: str, settings: dict, inputs: dict, body) -> str:
    key = _hash_obj({"stage": name, "settings": settings, "inputs": inputs, "version": __version__})
    if ctx.up_to_date(name, key):
        log.info("%s: up to date", name)
        return "skipped"
    outputs = body()
    ctx.record(name, key, settings, inputs, ctx.outputs_hashes(outputs))
    log.info("%s: wrote %d files", name, len(outputs))
    return "ran"


def country_seed(seed: int, code: str, *extra: int) -> int:
    """Stable per-country seed so subsets of countries reproduce the full run."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(code.encode()), *map(int, extra)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# -- stages ----------------------------------------------------------------------


def stage_ingest(ctx: Context) -> str:
    cfg = ctx.cfg
    files = {
        c: cfg.get("data", "vintage_dir") / cfg.get("data", "vintage_pattern").format(country=c)
        for c in cfg.countries
    }
    settings = {"countries": cfg.countries, "L": cfg.get("model", "L"), "gap_policy": cfg.get("data", "gap_policy")}
    inputs = ctx.input_hashes(files.values())

    def body():
        written = []
        for c, f in files.items():
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", vintages.PublicationGapWarning)
                tri = vintages.parse_vintage_csv(f, c, gap_policy=cfg.get("data", "gap_policy"))
            for w in caught:
                log.warning("%s: %s", c, w.message)
            growth = vintages.yoy_growth(tri)
            panel = vintages.extract_release_pair(growth, cfg.get("model", "L"))
            written.append(write_csv(panel.to_frame(), ctx.out / "ingest" / f"{c}_panel.csv"))
            try:
                st = vintages.revision_stats(growth, REVISION_ORDER)
                stats = st.as_row()
            except ValidationError as exc:
                stats = {"error": str(exc)}
            written.append(write_json(stats, ctx.out / "ingest" / f"{c}_revisions.json"))
        return written

    return _stage(ctx, "ingest", settings, inputs, body)


def _model_settings(cfg: RunConfig) -> dict:
    m = dict(cfg.values["model"])
    return {"model": m, "chain": dict(cfg.values["chain"]), "seed": cfg.get("run", "seed")}


def _priors_for(panel, cfg: RunConfig):
    m = cfg.values["model"]
    sv = SvPriors(m["sv_b_mu"], m["sv_B_mu"], m["sv_a0"], m["sv_b0"], m["sv_B_sigma"])
    return newsnoise.default_priors(panel, V_shape=m["V_shape"], sv=sv)


def _estimate_one(panel_csv: str, code: str, chain_dir: str, model: dict, chain: dict, seed: int) -> str:
    """Run one chain and save it; top level so it can run in a worker process."""
    options = newsnoise.ModelOptions(model["r_form"], model["drop_edge"], model["min_length"], model["offset"])
    panel = vintages.ReleasePanel.read_csv(panel_csv, code, model["L"])
    sv = SvPriors(model["sv_b_mu"], model["sv_B_mu"], model["sv_a0"], model["sv_b0"], model["sv_B_sigma"])
    priors = newsnoise.default_priors(panel, V_shape=model["V_shape"], sv=sv)
    cc = newsnoise.ChainConfig(
        iterations=chain["iterations"], burn_in=chain["burn_in"], thin=chain["thin"], seed=seed,
        max_retries=chain["max_retries"],
    )
    draws = newsnoise.run_chain(panel, priors, cc, options)
    draws.meta["country"] = code
    draws.save(chain_dir)
    return chain_dir


def stage_estimate(ctx: Context) -> str:
    cfg = ctx.cfg
    panels = {c: _require(ctx.out / "ingest" / f"{c}_panel.csv", f"release panel for {c}", "ingest") for c in cfg.countries}
    settings = {"countries": cfg.countries, **_model_settings(cfg)}
    inputs = ctx.input_hashes(panels.values())

    def body():
        tasks = []
        for c, p in panels.items():
            for k in range(cfg.get("chain", "chains")):
                seed = country_seed(cfg.get("run", "seed"), c, k)
                d = ctx.out / "estimate" / c / f"chain{k}"
                tasks.append((str(p), c, str(d), cfg.values["model"], cfg.values["chain"], seed))
        jobs = cfg.get("run", "jobs")
        if jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                done = list(ex.map(_estimate_one, *zip(*tasks)))
        else:
            done = [_estimate_one(*t) for t in tasks]
        return [f for d in done for f in sorted(Path(d).iterdir())]

    return _stage(ctx, "estimate", settings, inputs, body)


def _chain_dirs(ctx: Context, code: str) -> list[Path]:
    dirs = [ctx.out / "estimate" / code / f"chain{k}" for k in range(ctx.cfg.get("chain", "chains"))]
    for d in dirs:
        _require(d / "manifest.json", f"posterior draws for {code}", "estimate")
    return dirs


def load_pooled_draws(ctx: Context, code: str) -> tuple[list, np.ndarray, list]:
    """``(quarters, U draws pooled over chains, per-chain draws)``."""
    chains = [newsnoise.PosteriorDraws.load(d) for d in _chain_dirs(ctx, code)]
    U = np.concatenate([c.uncertainty for c in chains])
    return chains[0].quarters, U, chains


def stage_index(ctx: Context) -> str:
    cfg = ctx.cfg
    manifests = [d / "manifest.json" for c in cfg.countries for d in _chain_dirs(ctx, c)]
    settings = {"countries": cfg.countries}
    inputs = ctx.input_hashes(manifests)

    def body():
        written = []
        for c in cfg.countries:
            quarters, U, chains = load_pooled_draws(ctx, c)
            idx = newsnoise.summarize_uncertainty(U, quarters)
            written.append(write_csv(idx.to_frame(), ctx.out / "index" / f"{c}_index.csv"))
            written.append(write_csv(idx.standardize().to_frame(), ctx.out / "index" / f"{c}_index_std.csv"))
            diag = [newsnoise.diagnostics(ch) for ch in chains]
            written.append(write_json({"chains": diag}, ctx.out / "index" / f"{c}_diagnostics.json"))
        return written

    return _stage(ctx, "index", settings, inputs, body)


def _read_index(ctx: Context, code: str, standardized: bool) -> pd.Series:
    name = f"{code}_index_std.csv" if standardized else f"{code}_index.csv"
    p = _require(ctx.out / "index" / name, f"uncertainty index for {code}", "index")
    df = pd.read_csv(p, dtype={"quarter": str}, float_precision="round_trip")
    return pd.Series(df["mean"].to_numpy(float), index=pd.PeriodIndex(df["quarter"], freq="Q"), name=code)


def _gdp_weights(cfg: RunConfig) -> pd.DataFrame:
    w = pd.read_csv(cfg.get("data", "weights"), float_precision="round_trip")
    if {"country", "year", "gdp"} <= set(w.columns):
        return aggregate.quarterly_weights_from_annual(w)
    if {"country", "quarter", "gdp"} <= set(w.columns):
        return w
    raise ValidationError(f"{cfg.get('data', 'weights')}: needs columns country, gdp and year or quarter")


def _var_spec(cfg: RunConfig) -> bvar.VarSpec:
    va = cfg.values["var"]
    return bvar.VarSpec(tuple(va["variables"]), va["p"], va["band"], dict(va["transforms"]))


def stage_var(ctx: Context) -> str:
    cfg = ctx.cfg
    va = cfg.values["var"]
    if cfg.get("data", "macro_dir") is None:
        raise ValidationError("invalid configuration", ["[data] macro_dir: required by the var stage"])
    spec = _var_spec(cfg)
    macro = {c: cfg.get("data", "macro_dir") / f"{c}.csv" for c in cfg.countries}
    for c, p in macro.items():
        if not p.is_file():
            raise ValidationError("missing macro data", [f"{c}: {p} does not exist"])
    idx_files = {c: _require(ctx.out / "index" / f"{c}_index.csv", f"uncertainty index for {c}", "index") for c in cfg.countries}
    extra = [d / "manifest.json" for c in cfg.countries for d in _chain_dirs(ctx, c)] if va["uncertainty_draws"] else []
    epl_path = cfg.get("data", "epl")
    weight_path = cfg.get("data", "weights") if va["weighting"] == "gdp" else None
    in_paths = list(macro.values()) + list(idx_files.values()) + extra + [p for p in (epl_path, weight_path) if p]
    settings = {"countries": cfg.countries, "var": dict(va), "epl": dict(cfg.values["epl"]), "seed": cfg.get("run", "seed")}
    inputs = ctx.input_hashes(in_paths)

    def body():
        written = []
        sets = {}
        shares = {}
        for c in cfg.countries:
            m = pd.read_csv(macro[c], dtype={"quarter": str}, float_precision="round_trip")
            m.index = pd.PeriodIndex(m["quarter"], freq="Q")
            u = _read_index(ctx, c, standardized=False)
            common = m.index.intersection(u.index)
            if len(common) == 0:
                raise ValidationError(f"{c}: macro data and uncertainty index share no quarters")
            rng = np.random.default_rng(country_seed(cfg.get("run", "seed"), c, 101))
            if va["uncertainty_draws"]:
                quarters, U, _ = load_pooled_draws(ctx, c)
                pos = pd.PeriodIndex(quarters, freq="Q").get_indexer(common)
                post = bvar.fit_bvar_with_uncertainty_draws(
                    m.loc[common, list(spec.variables[:-1])], U[:, pos], spec, va["draws"], rng
                )
            else:
                data = m.loc[common, list(spec.variables[:-1])].copy()
                data[spec.uncertainty] = u.loc[common].to_numpy()
                post = bvar.fit_bvar(data, spec, va["draws"], rng)
            s = bvar.irf(post, spec.uncertainty, va["horizons"])
            sets[c] = s
            shares[c] = s.explosive_share
            written.append(write_csv(s.to_frame(), ctx.out / "var" / f"{c}_irf.csv"))
            written.append(_save_npy(s.responses, ctx.out / "var" / f"{c}_irf_draws.npy"))

        table = aggregate.load_epl_table(epl_path)
        known = [c for c in cfg.countries if c in table.index]
        for c in cfg.countries:
            if c not in table.index:
                log.warning("%s has no EPL score; left out of the group averages", c)
        high, low = aggregate.epl_split(table, cfg.get("epl", "exclusions"), cfg.get("epl", "placement"))
        weights = None
        if va["weighting"] == "gdp":
            w = _gdp_weights(cfg)
            weights = w.groupby("country")["gdp"].mean().to_dict()
        groups = {}
        for name, members in (("high", high), ("low", low)):
            members = [c for c in known if c in members]
            if not members:
                log.warning("EPL group %s has no estimated country; skipped", name)
                continue
            w = [weights[c] for c in members] if weights else None
            avg = bvar.panel_average_irf([sets[c] for c in members], w)
            groups[name] = members
            written.append(write_csv(avg.to_frame(), ctx.out / "var" / f"group_{name}_irf.csv"))
        run_manifest = {
            "spec": spec.to_dict(),
            "horizons": va["horizons"],
            "draws": va["draws"],
            "uncertainty_draws": va["uncertainty_draws"],
            "weighting": va["weighting"],
            "groups": groups,
            "explosive_share": shares,
            "seed": cfg.get("run", "seed"),
            "version": __version__,
        }
        written.append(write_json(run_manifest, ctx.out / "var" / "irf_manifest.json"))
        return written

    return _stage(ctx, "var", settings, inputs, body)


def _save_npy(arr: np.ndarray, path: Path) -> Path:
    import io

    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return write_atomic(path, buf.getvalue())


def stage_global(ctx: Context) -> str:
    cfg = ctx.cfg
    std = cfg.get("global", "standardize")
    if cfg.get("data", "weights") is None:
        raise ValidationError("invalid configuration", ["[data] weights: required by the global stage"])
    name = "{c}_index_std.csv" if std else "{c}_index.csv"
    files = [_require(ctx.out / "index" / name.format(c=c), f"uncertainty index for {c}", "index") for c in cfg.countries]
    settings = {"countries": cfg.countries, "standardize": std}
    inputs = ctx.input_hashes(files + [cfg.get("data", "weights")])

    def body():
        series = {c: _read_index(ctx, c, std) for c in cfg.countries}
        w = _gdp_weights(cfg)
        g = aggregate.global_index(series, w)
        cov = aggregate.global_coverage(series, w)
        out = pd.DataFrame({"quarter": [vintages.format_quarter(q) for q in g.index], "value": g.to_numpy()})
        cv = pd.DataFrame({"quarter": [vintages.format_quarter(q) for q in cov.index], "share": cov.to_numpy()})
        return [
            write_csv(out, ctx.out / "global" / "global_index.csv"),
            write_csv(cv, ctx.out / "global" / "coverage.csv"),
        ]

    return _stage(ctx, "global", settings, inputs, body)


def stage_report(ctx: Context) -> str:
    cfg = ctx.cfg
    idx = sorted((ctx.out / "index").glob("*_index.csv")) if (ctx.out / "index").is_dir() else []
    glob = ctx.out / "global" / "global_index.csv"
    irfs = sorted((ctx.out / "var").glob("*_irf.csv")) if (ctx.out / "var").is_dir() else []
    panels = sorted((ctx.out / "ingest").glob("*_panel.csv")) if (ctx.out / "ingest").is_dir() else []
    rev_stats = sorted((ctx.out / "ingest").glob("*_revisions.json")) if (ctx.out / "ingest").is_dir() else []
    bench = cfg.get("data", "benchmark_dates")
    in_paths = idx + irfs + panels + rev_stats + ([glob] if glob.exists() else []) + ([bench] if bench else [])
    if not in_paths:
        raise MissingArtifactError(f"nothing to report under {ctx.out}; run the earlier stages first")
    settings = {"countries": cfg.countries}
    inputs = ctx.input_hashes(in_paths)

    def body():
        dates = vintages.read_benchmark_dates(bench) if bench else None
        figs = plots.emit_plots(ctx.out, ctx.out / "report" / "figures", dates)
        group_sets = [p.name[: -len("_irf.csv")] for p in irfs if p.name.startswith("group_")]
        report = {
            "indices": [p.name[: -len("_index.csv")] for p in idx],
            "global": ["global"] if glob.exists() else [],
            "irf_sets": group_sets,
            "country_irfs": [p.name[: -len("_irf.csv")] for p in irfs if not p.name.startswith("group_")],
            "figures": [ctx.rel(f) for f in figs],
            "revision_stats": {
                p.name[: -len("_revisions.json")]: json.loads(p.read_text()) for p in rev_stats
            },
        }
        lines = ["# Uncertainty report", ""]
        lines += [f"- country indices: {', '.join(report['indices']) or 'none'}"]
        lines += [f"- global series: {len(report['global'])}"]
        lines += [f"- impulse-response sets: {', '.join(group_sets) or 'none'}"]
        lines += ["", "## Figures", ""] + [f"- {f}" for f in report["figures"]]
        return [
            write_json(report, ctx.out / "report" / "report.json"),
            write_atomic(ctx.out / "report" / "report.md", "\n".join(lines) + "\n"),
            *figs,
        ]

    return _stage(ctx, "report", settings, inputs, body)


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "estimate": stage_estimate,
    "index": stage_index,
    "var": stage_var,
    "global": stage_global,
    "report": stage_report,
}


def run_pipeline(cfg: RunConfig, stage: str = "all", force: bool = False) -> dict:
    """Run one stage, or every stage in order for ``"all"``. Returns ``{stage: "ran" | "skipped"}``."""
    names = STAGES if stage == "all" else (stage,)
    for n in names:
        if n not in STAGE_FUNCS:
            raise ValidationError(f"unknown stage {n!r}; choose from {', '.join(STAGES)} or all")
    cfg.output.mkdir(parents=True, exist_ok=True)
    ctx = Context(cfg, force)
    return {n: STAGE_FUNCS[n](ctx) for n in names}


# -- command line ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="revunc", description="Uncertainty indices from GDP revision news.")
    p.add_argument("command", nargs="?", choices=STAGES + ("run", "fixture"), help="stage to run, 'run' for --stage, or 'fixture'")
    p.add_argument("--config", help="run configuration (INI)")
    p.add_argument("--stage", default=None, help="stage for 'run' (default: all)")
    p.add_argument("--countries", help="comma-separated subset of the configured countries")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--jobs", type=int, help="worker processes for estimation")
    p.add_argument("--force", action="store_true", help="rerun stages even when up to date")
    p.add_argument("--dir", help="target directory for 'fixture'")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    command = args.command or ("run" if args.stage else None)
    try:
        if command is None:
            raise ValidationError("nothing to do: give a stage, 'run --stage NAME' or 'fixture --dir PATH'")
        if command == "fixture":
            from .fixture import write_fixture

            if not args.dir:
                raise ValidationError("fixture needs --dir")
            print(write_fixture(args.dir, seed=args.seed or 0))
            return EXIT_OK
        if not args.config:
            raise ValidationError("--config is required")
        cfg = load_config(args.config, args.countries, args.seed, args.jobs)
        stage = command if command != "run" else (args.stage or "all")
        result = run_pipeline(cfg, stage, args.force)
        for n, status in result.items():
            print(f"{n}: {status}")
        return EXIT_OK
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ChainAbortedError, GibbsBlockError, DecompositionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
