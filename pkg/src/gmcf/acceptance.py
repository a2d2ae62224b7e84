"""Verification routines behind the CLI ``verify-*`` commands and the acceptance tests.

Each routine returns a :class:`CheckResult` carrying a pass flag, the
measured numbers and the wall time, so callers can print one line per check.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import brownian as bm
from .field import StarScaleField
from .fourier import autocorrelation, coefficients, exact_second_moment
from .gmc import GmcParams, GoodEventParams, log_masses
from .harness import (
    ExperimentConfig,
    fit_log_slope,
    rows_to_csv,
    run_conjecture_experiment,
    run_tightness_experiment,
)
from .kernels import BSPLINE3, TRIANGLE, ScaleCovariance, verify_estimates
from .rng import mc_rng
from .twopoint import (
    BranchingContext,
    FBoundCalibrator,
    UnstableEstimateWarning,
    estimate_F,
)
from .validation import SQRT2

__all__ = [
    "CheckResult",
    "covariance_fidelity",
    "kernel_estimates",
    "brownian_suite",
    "martingale_normalization",
    "second_moment_oracle",
    "decay_and_tightness",
    "two_point_bound",
    "conjecture_smoke",
    "determinism",
    "log_lags",
]

Z = 4.0  # standard errors allowed in every Monte Carlo comparison


@dataclass
class CheckResult:
    name: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = math.inf

    @property
    def in_budget(self):
        return self.seconds <= self.budget

    @property
    def ok(self):
        return self.passed and self.in_budget

    def line(self):
        flag = "PASS" if self.ok else "FAIL"
        slow = "" if self.in_budget else f" [over budget {self.budget:.0f}s]"
        return f"{flag} {self.name}: {self.summary} ({self.seconds:.1f}s){slow}"


class _timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def log_lags(N, count=20):
    """``count`` distinct integer lags, roughly log-spaced in ``[1, N/2]``."""
    raw = np.geomspace(1, N // 2, count)
    lags = []
    for x in raw:
        k = int(round(x))
        if lags and k <= lags[-1]:
            k = lags[-1] + 1
        lags.append(k)
    if lags[-1] > N // 2:
        raise ValueError(f"cannot fit {count} distinct lags below N/2={N // 2}")
    return np.array(lags)


# --- 1 -------------------------------------------------------------------


def covariance_fidelity(kernel="triangle", N=4096, t=6.0, layer_width=0.25, replicas=20000,
                        n_lags=20, seed=0, budget=300.0):
    """Empirical ``Cov(X_t(0), X_t(D))`` of the layered sampler against ``K_t(D)``.

    Each replica contributes its spatial average of ``X(theta) X(theta + D)``;
    replicas are independent, so the stderr is the plain one across them.
    """
    with _timer() as tm:
        f = StarScaleField(kernel, t, layer_width, N).fit()
        lags = log_lags(N, n_lags)
        acc = np.empty((replicas, lags.size))
        for r in range(replicas):
            x = f.sample(seed, r).terminal()
            acc[r] = autocorrelation(x)[lags] / N
        emp = acc.mean(axis=0)
        se = acc.std(axis=0, ddof=1) / math.sqrt(replicas)
        exact = np.asarray(f.cov_.K(f.time_grid_.horizon, lags / N))
        z = (emp - exact) / se
    ok = bool(np.all(np.abs(z) <= Z))
    return CheckResult(
        "covariance fidelity", ok,
        f"{f.time_grid_.n_layers} layers, max |z| = {np.max(np.abs(z)):.2f} over {lags.size} lags",
        {"lags": lags.tolist(), "empirical": emp.tolist(), "exact": exact.tolist(),
         "stderr": se.tolist()}, tm.seconds, budget)


# --- 2 -------------------------------------------------------------------


def kernel_estimates(r_list=range(1, 13), budget=60.0):
    with _timer() as tm:
        reps = [verify_estimates(ScaleCovariance(k), list(r_list)) for k in (TRIANGLE, BSPLINE3)]
    ok = all(r.passed for r in reps)
    desc = ", ".join(f"{r.kernel} max dev {r.max_deviation():.3f} <= {r.bound:.3f}" for r in reps)
    return CheckResult("kernel estimates", ok, desc,
                       {r.kernel: r.rows for r in reps}, tm.seconds, budget)


# --- 3 -------------------------------------------------------------------


BIAS_ALLOWANCE = 0.01


def brownian_suite(dt=1e-3, paths=10**6, seed=0, budget=300.0):
    """Closed forms against the random walk, then the two constant-3 sweeps."""
    cases = [
        ("max_cdf(1, 1)", bm.max_cdf(1.0, 1.0), bm.BarrierQuery(1.0, 1.0), "max"),
        ("barrier_from_e(2, 10)", bm.barrier_from_e(2.0, 10.0), bm.BarrierQuery(2.0, 10.0),
         "from_e"),
        ("bridge_ballot(1, 1, 2)", bm.bridge_ballot(1.0, 1.0, 2.0),
         bm.BarrierQuery(1.0, 2.0, 1.0), "bridge"),
    ]
    rows = []
    with _timer() as tm:
        for i, (label, exact, q, kind) in enumerate(cases):
            est, se = bm.mc_barrier(q, dt, paths, mc_rng(seed, 3, i), kind)
            allow = Z * se + BIAS_ALLOWANCE
            rows.append({"case": label, "exact": exact, "mc": est, "stderr": se,
                         "diff": est - exact, "allowed": allow, "passed": abs(est - exact) <= allow})
        sweeps = {"barrier": bm.sweep_barrier_bound(), "ballot": bm.sweep_ballot_bound()}
    ok = all(r["passed"] for r in rows) and all(s.passed for s in sweeps.values())
    parts = [f"{r['case']} diff {r['diff']:+.4f} (allow {r['allowed']:.4f})" for r in rows]
    parts += [f"{k} sweep max {s.worst:.3f} <= 3" for k, s in sweeps.items()]
    details = {"pairs": rows,
               "sweeps": {k: {"worst": s.worst, "where": s.where} for k, s in sweeps.items()}}
    return CheckResult("brownian suite", ok, "; ".join(parts), details, tm.seconds, budget)


# --- 4, 5 ----------------------------------------------------------------


def _terminal_draws(f, seed, replicas):
    for r in range(replicas):
        yield f.sample_terminal(seed, r)


def martingale_normalization(t=2.0, N=1024, replicas=100_000, seed=0, budget=120.0):
    """Mean total mass at ``gamma = 1`` (target 1) and critical (target ``sqrt t``)."""
    rows = []
    with _timer() as tm:
        f = StarScaleField("triangle", t, 0.25, N).fit()
        specs = [(1.0, 1.0), (SQRT2, math.sqrt(t))]
        tot = np.empty((len(specs), replicas))
        for r, x in enumerate(_terminal_draws(f, seed, replicas)):
            for i, (g, _) in enumerate(specs):
                tot[i, r] = np.exp(log_masses(x, GmcParams(g, t))).sum()
        for i, (g, target) in enumerate(specs):
            mean = tot[i].mean()
            se = tot[i].std(ddof=1) / math.sqrt(replicas)
            rows.append({"gamma": g, "target": target, "mean": mean, "stderr": se,
                         "z": (mean - target) / se})
    ok = all(abs(r["z"]) <= Z for r in rows)
    desc = "; ".join(f"gamma={r['gamma']:.4f}: {r['mean']:.4f} vs {r['target']:.4f} "
                     f"(z={r['z']:+.2f})" for r in rows)
    return CheckResult("martingale normalizations", ok, desc, {"rows": rows}, tm.seconds, budget)


def second_moment_oracle(t=2.0, N=4096, n_list=(1, 4, 16, 64), replicas=100_000, seed=0,
                         gamma=SQRT2, kernel="triangle", budget=300.0):
    """MC ``E|c_n|^2`` against the quadrature second moment."""
    with _timer() as tm:
        f = StarScaleField(kernel, t, 0.25, N).fit()
        p = GmcParams(gamma, t)
        nmax = max(n_list)
        sq = np.empty((replicas, len(n_list)))
        idx = list(n_list)
        for r, x in enumerate(_terminal_draws(f, seed, replicas)):
            c = coefficients(np.exp(log_masses(x, p)), nmax)
            sq[r] = np.abs(c[idx]) ** 2
        mean = sq.mean(axis=0)
        se = sq.std(axis=0, ddof=1) / math.sqrt(replicas)
        exact = np.array([exact_second_moment(f.cov_, p, n) for n in n_list])
        grid = np.array([exact_second_moment(f.cov_, p, n, N=N) for n in n_list])
    z = (mean - exact) / se
    rows = [{"n": n, "mc": m, "stderr": s, "exact": e, "grid_exact": g, "z": zz}
            for n, m, s, e, g, zz in zip(n_list, mean, se, exact, grid, z)]
    ok = bool(np.all(np.abs(z) <= Z))
    desc = "; ".join(f"n={r['n']}: {r['mc']:.4g} vs {r['exact']:.4g} (z={r['z']:+.2f})"
                     for r in rows)
    return CheckResult("second-moment oracle", ok, desc, {"rows": rows}, tm.seconds, budget)


# --- 6, 7 ----------------------------------------------------------------


def decay_and_tightness(config: ExperimentConfig = None, budget=1800.0):
    """One critical run feeding the decay trend and the tightness diagnostic."""
    config = config or ExperimentConfig()
    with _timer() as tm:
        res = run_tightness_experiment(config)
    ns = np.array([s["n"] for s in res.summary])
    ln = np.log(ns)
    good_sq = np.array([s["mean_sq_on_good"][0] for s in res.summary])
    slope, slope_se = fit_log_slope(np.log(ln), np.log(good_sq))
    scaled = ln**2 * good_sq
    spread = float(scaled.max() / scaled.min())
    ok6 = -3.0 <= slope <= -1.0 and spread < 5.0
    c6 = CheckResult(
        "good-event decay", ok6,
        f"slope {slope:.3f} +- {slope_se:.3f} in [-3, -1]; (log n)^2 E spread x{spread:.2f} < 5",
        {"n": ns.tolist(), "mean_sq_on_good": good_sq.tolist(), "slope": slope,
         "slope_stderr": slope_se, "spread": spread,
         "good_frequency": [s["good_frequency"] for s in res.summary]},
        tm.seconds, budget)
    q90 = np.array([s["quantiles_good"]["0.9"] for s in res.summary])
    ratio = float(q90.max() / q90.min())
    rho = float(stats.spearmanr(ns, q90)[0])
    ok7 = ratio < 3.0 and abs(rho) < 0.8
    c7 = CheckResult(
        "tightness diagnostic", ok7,
        f"0.9-quantile spread x{ratio:.2f} < 3; Spearman rho {rho:+.2f}, |rho| < 0.8",
        {"n": ns.tolist(), "q90": q90.tolist(), "spearman": rho},
        0.0, math.inf)
    return c6, c7, res


# --- 8 -------------------------------------------------------------------


def two_point_bound(t=12.0, delta=0.2, n=256, A=8.0, n_gaps=20, paths=100_000,
                    pilot_paths=20_000, dt=0.01, seed=0, C=None, kernel="triangle",
                    budget=1200.0):
    """Calibrate ``C`` on every other gap, then check ``F <= bound + 4 se`` everywhere.

    Also fits the slope of ``log(D F)`` on ``log(r_D - r_n)`` over the gaps
    with ``r_D - r_n`` in ``[e^2, t/2]``; with fewer than three such gaps
    the slope check fails. A diagnostic slope over ``r_D - r_n >= e`` is
    reported alongside.
    """
    cov = ScaleCovariance(TRIANGLE if kernel == "triangle" else BSPLINE3)
    gp = GoodEventParams(A, delta, n)
    gaps = np.geomspace(math.exp(-t), math.e * n ** (-delta), n_gaps)
    cal = FBoundCalibrator(n, t, delta)
    with _timer() as tm, warnings.catch_warnings():
        warnings.simplefilter("ignore", UnstableEstimateWarning)
        if C is None:
            pilot_gaps = gaps[::2]
            pilot = [estimate_F(cov, gp, t, g, dt, pilot_paths, mc_rng(seed, 8, 0, i)).estimate
                     for i, g in enumerate(pilot_gaps)]
            cal.fit(pilot_gaps, pilot)
        else:
            cal.C_ = float(C)
        est = [estimate_F(cov, gp, t, g, dt, paths, mc_rng(seed, 8, 1, i))
               for i, g in enumerate(gaps)]
    F = np.array([e.estimate for e in est])
    se = np.array([e.stderr for e in est])
    bound = cal.predict(gaps)
    cover = F <= bound + Z * se
    w = np.array([BranchingContext(n, t, delta, g).r_gap for g in gaps]) - gp.r_n
    window = (w >= math.e**2) & (w <= t / 2)
    slope = None
    if window.sum() >= 3:
        slope = fit_log_slope(np.log(w[window]), np.log(gaps[window] * F[window]))[0]
    diag = (w >= math.e) & (F > 0)
    diag_slope = (fit_log_slope(np.log(w[diag]), np.log(gaps[diag] * F[diag]))[0]
                  if diag.sum() >= 3 else None)
    slope_ok = slope is not None and -2.6 <= slope <= -1.6
    ok = bool(cover.all()) and slope_ok
    slope_txt = (f"slope {slope:.3f} in [-2.6, -1.6]" if slope is not None else
                 f"slope window r_D - r_n in [e^2, {t / 2:g}] holds {int(window.sum())} gaps (< 3)")
    desc = (f"C = {cal.C_:.4g}; coverage {int(cover.sum())}/{gaps.size}; {slope_txt}; "
            f"diagnostic slope over r_D - r_n >= e: "
            + (f"{diag_slope:.3f}" if diag_slope is not None else "n/a"))
    details = {"C": cal.C_, "gaps": gaps.tolist(), "F": F.tolist(), "stderr": se.tolist(),
               "bound": bound.tolist(), "covered": cover.tolist(), "r_gap_minus_r_n": w.tolist(),
               "slope": slope, "diagnostic_slope": diag_slope,
               "ess": [e.ess for e in est]}
    return CheckResult("two-point bound", ok, desc, details, tm.seconds, budget)


# --- 9 -------------------------------------------------------------------


def conjecture_smoke(config: ExperimentConfig = None, gammas=(1 / SQRT2, 1.0), budget=1800.0):
    """Median of the scaled statistic varies by less than x10 across ``n``."""
    config = config or ExperimentConfig()
    rows, ok = [], True
    with _timer() as tm:
        for g in gammas:
            res = run_conjecture_experiment(replace(config, gamma=g))
            med = np.array([s["median_scaled"] for s in res.summary])
            ratio = float(med.max() / med.min())
            ok &= ratio < 10.0
            rows.append({"gamma": g, "medians": med.tolist(), "ratio": ratio,
                         "n_exponent": res.metadata["n_exponent"]})
    desc = "; ".join(f"gamma={r['gamma']:.4f}: median spread x{r['ratio']:.2f} < 10" for r in rows)
    return CheckResult("conjecture smoke", bool(ok), desc, {"rows": rows}, tm.seconds, budget)


# --- 10 ------------------------------------------------------------------


def determinism(config: ExperimentConfig = None, budget=math.inf):
    """Two runs with the same seed (serial and pooled) give identical CSV bytes."""
    config = config or ExperimentConfig(t=5.0, N=256, n_list=(2, 4, 8, 16), replicas=40,
                                        A=1.0, seed=7)
    with _timer() as tm:
        a = rows_to_csv(run_tightness_experiment(replace(config, workers=1)).rows)
        b = rows_to_csv(run_tightness_experiment(replace(config, workers=2)).rows)
    same = a == b
    return CheckResult("determinism", same,
                       f"{a.count(chr(10)) - 1} rows, serial and 2-worker CSVs "
                       + ("identical" if same else "differ"),
                       {}, tm.seconds, budget)
