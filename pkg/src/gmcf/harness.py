"""Monte Carlo experiments on Fourier coefficients of the chaos measure.

Every replica draws from its own ``(seed, replica)`` streams, so rows do
not depend on the number of workers or on scheduling. Rows are sorted by
``(n, replica)`` before anything is summarised or written.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np
from scipy import stats

from .exceptions import ConfigError
from .field import StarScaleField
from .fourier import autocorrelation, coefficients
from .gmc import GmcParams, GoodEventParams, gmc_weights, good_set_mask
from .kernels import get_kernel
from .twopoint import branching_time
from .validation import SQRT2, check_power_of_two, required_points

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "run_tightness_experiment",
    "run_conjecture_experiment",
    "run_scale_decomposition",
    "fit_log_slope",
    "summarize",
    "conjecture_scaling",
    "write_rows_csv",
    "rows_to_csv",
    "write_summary_json",
    "atomic_write",
    "CSV_HEADER",
    "SCHEMA",
]

SCHEMA = "gmcf-1"
CSV_HEADER = ("n", "replica", "re_c", "im_c", "good", "total_mass",
              "re_cI", "im_cI", "re_cII", "im_cII", "seed")
QUANTILES = (0.5, 0.9, 0.99)
TAIL_LEVELS = (1.0, 2.0, 4.0, 8.0)
DEFAULT_N_LIST = (8, 16, 32, 64, 128, 256, 512)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines an experiment's rows."""

    kernel: str = "triangle"
    gamma: float = SQRT2
    delta: float = 0.2
    A: float = 8.0
    t: float = 9.0
    layer_width: float = 0.25
    N: int = 1 << 16
    n_list: tuple = DEFAULT_N_LIST
    replicas: int = 2000
    seed: int = 0
    output: Optional[str] = None
    workers: int = 1
    geometry: str = "arc"

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        self.validate()

    def validate(self):
        try:
            get_kernel(self.kernel)
        except ValueError:
            raise ConfigError("kernel", "one of 'triangle', 'bspline3'") from None
        if not 0 < self.gamma <= SQRT2 + 1e-12:
            raise ConfigError("gamma", "0 < gamma <= sqrt(2)")
        if not self.delta < 0.25:
            raise ConfigError("delta", "delta < 0.25")
        if not self.delta > 0:
            raise ConfigError("delta", "delta > 0")
        if not self.A > 0:
            raise ConfigError("A", "A > 0")
        if not self.t > 0:
            raise ConfigError("t", "t > 0")
        if not self.layer_width > 0:
            raise ConfigError("layer_width", "layer_width > 0")
        try:
            check_power_of_two(self.N)
        except ValueError:
            raise ConfigError("N", "N must be a power of two") from None
        need = required_points(self.t)
        if self.N < need:
            raise ConfigError("N", f"1/N <= exp(-t) requires N >= {need}")
        if not self.n_list:
            raise ConfigError("n_list", "at least one frequency")
        if min(self.n_list) < 2:
            raise ConfigError("n_list", "every n >= 2")
        if max(self.n_list) >= self.N // 2:
            raise ConfigError("n_list", f"every n < N/2 = {self.N // 2}")
        for n in self.n_list:
            if self.delta * math.log(n) > self.t:
                raise ConfigError("n_list", f"delta*log(n) <= t fails for n={n}")
        if self.replicas < 1:
            raise ConfigError("replicas", "replicas >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "seed >= 0")
        if self.workers < 1:
            raise ConfigError("workers", "workers >= 1")
        if self.geometry not in ("arc", "periodized"):
            raise ConfigError("geometry", "one of 'arc', 'periodized'")

    @property
    def critical(self):
        return abs(self.gamma - SQRT2) <= 1e-12

    def to_dict(self):
        d = asdict(self)
        d["n_list"] = list(self.n_list)
        return d

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class ExperimentResult:
    """Row-level data plus per-``n`` summaries and run metadata."""

    config: ExperimentConfig
    rows: dict
    summary: list
    metadata: dict = field(default_factory=dict)

    @property
    def n_rows(self):
        return len(self.rows["n"])


# --- per-replica work -----------------------------------------------------


class _Context:
    """Replica-independent tables shared by all rows of one experiment."""

    def __init__(self, config: ExperimentConfig, want_split=True, bands=None):
        self.config = config
        self.field = StarScaleField(config.kernel, config.t, config.layer_width, config.N,
                                    geometry=config.geometry).fit()
        self.params = GmcParams(config.gamma, self.field.time_grid_.horizon)
        N = config.N
        lag = np.arange(N)
        self.gap = np.minimum(lag, N - lag) / N
        self.gps = [GoodEventParams(config.A, config.delta, n) for n in config.n_list]
        self.want_split = want_split
        self.phases = {}
        self.far = {}
        if want_split:
            for n, gp in zip(config.n_list, self.gps):
                self.phases[n] = np.exp(2j * math.pi * n * lag / N)
                self.far[n] = self.gap >= math.e * n ** (-gp.delta)
        self.bands = bands


def _replica(ctx: _Context, replica):
    cfg = ctx.config
    sample = ctx.field.sample(cfg.seed, replica)
    w = gmc_weights(sample, ctx.params)
    m = w.masses
    total = float(m.sum())
    c = coefficients(m, max(cfg.n_list))
    corr = {}
    out = []
    band_rows = []
    for n, gp in zip(cfg.n_list, ctx.gps):
        mask = good_set_mask(sample, gp)
        key = mask.tobytes() if not mask.all() else b"all"
        good = key == b"all"
        cI = cII = 0j
        if ctx.want_split:
            if key not in corr:
                corr[key] = autocorrelation(m if good else np.where(mask, m, 0.0))
            terms = ctx.phases[n] * corr[key]
            far = ctx.far[n]
            cI = complex(terms[far].sum())
            cII = complex(terms[~far].sum())
            if ctx.bands is not None:
                band_rows.append(_band_sums(ctx, n, gp, terms))
        out.append((n, replica, c[n], good, total, cI, cII))
    return out, band_rows


def _band_sums(ctx, n, gp, terms):
    """Pair energy of each ``r_gap`` band (in units of ``log n``)."""
    idx = ctx.bands["index"][n]
    k = len(ctx.bands["edges"][n]) - 1
    re = np.bincount(idx, weights=terms.real, minlength=k)
    im = np.bincount(idx, weights=terms.imag, minlength=k)
    return re + 1j * im


_WORKER_CTX = {}


def _work(args):
    config, want_split, bands, lo, hi = args
    key = (config, want_split, bands is not None)
    ctx = _WORKER_CTX.get(key)
    if ctx is None:
        ctx = _Context(config, want_split, _make_bands(config) if bands else None)
        _WORKER_CTX.clear()
        _WORKER_CTX[key] = ctx
    rows, band = [], []
    for r in range(lo, hi):
        a, b = _replica(ctx, r)
        rows.extend(a)
        band.append(b)
    return lo, rows, band


def _blocks(replicas, workers):
    size = max(1, math.ceil(replicas / (4 * workers)))
    return [(lo, min(replicas, lo + size)) for lo in range(0, replicas, size)]


def _collect(config: ExperimentConfig, want_split=True, bands=False):
    jobs = [(config, want_split, bands, lo, hi) for lo, hi in _blocks(config.replicas,
                                                                      config.workers)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            parts = list(ex.map(_work, jobs))
    else:
        parts = [_work(j) for j in jobs]
    _WORKER_CTX.clear()
    parts.sort(key=lambda p: p[0])
    rows = [r for p in parts for r in p[1]]
    band = [b for p in parts for b in p[2]]
    return _table(rows, config.seed), band


def _table(rows, seed):
    rows = sorted(rows, key=lambda r: (r[0], r[1]))
    return {
        "n": np.array([r[0] for r in rows], dtype=np.int64),
        "replica": np.array([r[1] for r in rows], dtype=np.int64),
        "c": np.array([r[2] for r in rows], dtype=complex),
        "good": np.array([r[3] for r in rows], dtype=bool),
        "total_mass": np.array([r[4] for r in rows], dtype=float),
        "c_I": np.array([r[5] for r in rows], dtype=complex),
        "c_II": np.array([r[6] for r in rows], dtype=complex),
        "seed": np.full(len(rows), seed, dtype=np.int64),
    }


# --- summaries -----------------------------------------------------------


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else math.nan
    return float(x.mean()), float(se)


def summarize(rows, stat=None):
    """Per-``n`` summary recomputable from the rows alone.

    ``stat(n, abs_c)`` gives the statistic whose quantiles are reported;
    the default is ``log(n) |c_n|``.
    """
    stat = stat or (lambda n, a: math.log(n) * a)
    order = np.lexsort((rows["replica"], rows["n"]))
    out = []
    for n in np.unique(rows["n"]):
        sel = order[rows["n"][order] == n]
        a = np.abs(rows["c"][sel])
        good = rows["good"][sel]
        s_all = stat(int(n), a)
        s_good = s_all[good]
        sq = a**2
        entry = {
            "n": int(n),
            "replicas": int(sel.size),
            "good_frequency": float(good.mean()),
            "mean_sq": _mean_se(sq),
            "mean_sq_on_good": _mean_se(sq * good),
            "conditional_mean_sq": _mean_se(sq[good]),
            "quantiles_good": {str(q): _quantile(s_good, q) for q in QUANTILES},
            "quantiles_all": {str(q): _quantile(s_all, q) for q in QUANTILES},
            "tail_good": {str(k): (float(np.mean(s_good > k)) if s_good.size else math.nan)
                          for k in TAIL_LEVELS},
            "mean_total_mass": _mean_se(rows["total_mass"][sel]),
        }
        out.append(entry)
    return out


def _quantile(x, q):
    # numpy's default 'linear' method is the type-7 estimator
    return float(np.quantile(x, q)) if len(x) else math.nan


# --- experiments ---------------------------------------------------------


def run_tightness_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Critical measure: coefficients, good event and region split per replica."""
    config.validate()
    if not config.critical:
        raise ConfigError("gamma", "tightness runs use the critical gamma = sqrt(2)")
    rows, _ = _collect(config)
    meta = {"kind": "tightness", "seed": config.seed, "tail_levels": list(TAIL_LEVELS)}
    return ExperimentResult(config, rows, summarize(rows), meta)


def conjecture_scaling(gamma, n):
    """Normalising factor of ``|c_n|`` for subcritical ``gamma >= 1/sqrt2``."""
    if abs(gamma - 1 / SQRT2) <= 1e-12:
        return (math.log(n) * n) ** 0.25
    if not 1 / SQRT2 < gamma < SQRT2:
        raise ValueError(f"gamma={gamma} outside [1/sqrt2, sqrt2)")
    return math.log(n) ** (3 * gamma / (2 * SQRT2)) * n ** ((SQRT2 - gamma) ** 2 / 2)


def run_conjecture_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Subcritical measure; quantiles of the conjectured scaled statistic."""
    config.validate()
    g = config.gamma
    if not (abs(g - 1 / SQRT2) <= 1e-12 or 1 / SQRT2 < g < SQRT2 - 1e-12):
        raise ConfigError("gamma", "1/sqrt(2) <= gamma < sqrt(2)")
    rows, _ = _collect(config, want_split=False)
    summ = summarize(rows, stat=lambda n, a: conjecture_scaling(g, n) * a)
    for s in summ:
        s["median_scaled"] = s["quantiles_all"]["0.5"]
    on_line = abs(g - 1 / SQRT2) <= 1e-12
    meta = {
        "kind": "conjecture",
        "seed": config.seed,
        "n_exponent": 0.25 if on_line else (SQRT2 - g) ** 2 / 2,
        "log_exponent": 0.25 if on_line else 3 * g / (2 * SQRT2),
    }
    return ExperimentResult(config, rows, summ, meta)


BAND_WIDTH = 0.2


def _make_bands(config):
    """Band edges (units of ``log n``) and the band index of every lag."""
    N = config.N
    lag = np.arange(N)
    gap = np.minimum(lag, N - lag) / N
    edges, index = {}, {}
    for n in config.n_list:
        ln = math.log(n)
        r = np.array([config.t if d == 0 else branching_time(config.t, n, config.delta, d)
                      for d in np.unique(gap)])
        r_of = dict(zip(np.unique(gap), r))
        a = np.array([r_of[d] for d in gap]) / ln
        hi = config.t / ln
        e = np.arange(config.delta, hi, BAND_WIDTH)
        e = np.append(e, hi) if hi - e[-1] > 1e-12 else e
        if e.size < 2:
            e = np.array([config.delta, hi])
        idx = np.clip(np.searchsorted(e, a, side="right") - 1, 0, e.size - 2)
        edges[n], index[n] = e, idx
    return {"edges": edges, "index": index}


def run_scale_decomposition(config: ExperimentConfig):
    """Restricted pair energy binned by branching time.

    Returns ``(table, result)``: one table row per ``(n, band)`` with the
    replica mean of the band's share of ``C_I + C_II`` and its stderr.
    """
    config.validate()
    if not config.critical:
        raise ConfigError("gamma", "scale decomposition uses gamma = sqrt(2)")
    bands = _make_bands(config)
    rows, band = _collect(config, want_split=True, bands=True)
    table = []
    for i, n in enumerate(config.n_list):
        per = np.array([b[i] for b in band])  # (replicas, n_bands)
        e = bands["edges"][n]
        total = per.sum(axis=1).real
        for k in range(e.size - 1):
            mean, se = _mean_se(per[:, k].real)
            table.append({
                "n": n, "band_lo": float(e[k]), "band_hi": float(e[k + 1]),
                "mean": mean, "stderr": se,
                "fraction": mean / total.mean() if total.mean() != 0 else math.nan,
            })
    meta = {"kind": "scale-decomp", "seed": config.seed, "band_width": BAND_WIDTH}
    return table, ExperimentResult(config, rows, summarize(rows), meta)


def fit_log_slope(xs, ys):
    """Least-squares slope of ``ys`` on ``xs`` with its standard error."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D of equal length")
    if x.size < 3:
        raise ValueError(f"need at least 3 points, got {x.size}")
    if np.unique(x).size < x.size:
        raise ValueError("xs must be distinct")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite coordinates")
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


# --- output --------------------------------------------------------------


def atomic_write(path, data, mode="w"):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for i in range(len(rows["n"])):
        c, cI, cII = rows["c"][i], rows["c_I"][i], rows["c_II"][i]
        w.writerow([int(rows["n"][i]), int(rows["replica"][i]), repr(float(c.real)),
                    repr(float(c.imag)), int(rows["good"][i]), repr(float(rows["total_mass"][i])),
                    repr(float(cI.real)), repr(float(cI.imag)), repr(float(cII.real)),
                    repr(float(cII.imag)), int(rows["seed"][i])])
    return buf.getvalue()


def write_rows_csv(result: ExperimentResult, path):
    atomic_write(path, rows_to_csv(result.rows))


def read_rows_csv(path):
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        recs = list(rd)
    return {
        "n": np.array([int(r["n"]) for r in recs], dtype=np.int64),
        "replica": np.array([int(r["replica"]) for r in recs], dtype=np.int64),
        "c": np.array([complex(float(r["re_c"]), float(r["im_c"])) for r in recs]),
        "good": np.array([r["good"] == "1" for r in recs]),
        "total_mass": np.array([float(r["total_mass"]) for r in recs]),
        "c_I": np.array([complex(float(r["re_cI"]), float(r["im_cI"])) for r in recs]),
        "c_II": np.array([complex(float(r["re_cII"]), float(r["im_cII"])) for r in recs]),
        "seed": np.array([int(r["seed"]) for r in recs], dtype=np.int64),
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def summary_document(result: ExperimentResult, extra=None):
    doc = {"schema": SCHEMA, "config": result.config.to_dict(), "metadata": result.metadata,
           "summary": result.summary}
    if extra:
        doc.update(extra)
    return _jsonable(doc)


def write_summary_json(result: ExperimentResult, path, extra=None):
    atomic_write(path, json.dumps(summary_document(result, extra), indent=2, sort_keys=True))


def with_overrides(config: ExperimentConfig, **kw):
    return replace(config, **kw)
