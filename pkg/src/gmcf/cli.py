"""Command-line entry point ``gmcf``.

Configuration is an INI document with an ``[experiment]`` section (the
experiment parameters) and an optional ``[verify]`` section (Monte Carlo
sizes for the verification commands). Keys outside those sets are
rejected. Every run writes the full effective configuration next to its
results.

Exit status: 0 on success, 1 when a verification fails, 2 on usage,
configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from typing import Optional

from . import acceptance as acc
from .exceptions import ConfigError
from .harness import (
    ExperimentConfig,
    atomic_write,
    rows_to_csv,
    run_conjecture_experiment,
    run_scale_decomposition,
    run_tightness_experiment,
    summary_document,
)
from .rng import resolve_seed
from .validation import SQRT2

__all__ = ["VerifyConfig", "parse_config", "parse_document", "echo", "dispatch", "main",
           "COMMANDS"]

COMMANDS = ("verify-kernel", "verify-brownian", "verify-covariance", "second-moment",
            "tightness", "conjecture", "scale-decomp", "fbound-sweep")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass(frozen=True)
class VerifyConfig:
    """Monte Carlo sizes used by the verification commands."""

    brownian_dt: float = 1e-3
    brownian_paths: int = 10**6
    cov_replicas: int = 20000
    n_lags: int = 20
    moment_replicas: int = 100_000
    fbound_t: float = 12.0
    fbound_n: int = 256
    fbound_gaps: int = 20
    fbound_paths: int = 100_000
    fbound_pilot_paths: int = 20_000
    fbound_dt: float = 0.01
    C: Optional[float] = None

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not v > 0:
                raise ConfigError(f.name, f"{f.name} > 0")
        if self.brownian_dt > 1e-2:
            raise ConfigError("brownian_dt", "brownian_dt <= 0.01")
        if self.fbound_dt > 1e-2:
            raise ConfigError("fbound_dt", "fbound_dt <= 0.01")


_SPECIAL = {"sqrt(2)": SQRT2, "sqrt2": SQRT2, "1/sqrt(2)": 1 / SQRT2, "1/sqrt2": 1 / SQRT2}


def _float(key, text):
    t = text.strip().lower()
    if t in _SPECIAL:
        return _SPECIAL[t]
    try:
        return float(t)
    except ValueError:
        raise ConfigError(key, f"{key} must be a number, got {text!r}") from None


def _int(key, text):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(key, f"{key} must be an integer, got {text!r}") from None


def _none(text):
    return text.strip().lower() in ("", "none")


_EXPERIMENT_PARSERS = {
    "kernel": lambda k, v: v.strip(),
    "gamma": _float,
    "delta": _float,
    "A": _float,
    "t": _float,
    "layer_width": _float,
    "N": _int,
    "n_list": lambda k, v: tuple(_int(k, x) for x in v.replace(",", " ").split()),
    "replicas": _int,
    "seed": _int,
    "output": lambda k, v: None if _none(v) else v.strip(),
    "workers": _int,
    "geometry": lambda k, v: v.strip(),
}


def _verify_parser(f):
    if f.name == "C":
        return lambda k, v: None if _none(v) else _float(k, v)
    return _int if f.type in ("int", int) else _float


def _read(text):
    body = text
    first = next((ln.strip() for ln in text.splitlines()
                  if ln.strip() and not ln.strip().startswith(("#", ";"))), "")
    if not first.startswith("["):
        body = "[experiment]\n" + text
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case sensitive (A vs a)
    try:
        cp.read_string(body)
    except configparser.Error as exc:
        raise ConfigError("config", f"unreadable config: {exc}") from None
    for sec in cp.sections():
        if sec not in ("experiment", "verify"):
            raise ConfigError(sec, "unknown section (allowed: experiment, verify)")
    return cp


def parse_document(text, seed_override=None):
    """Parse both sections; returns ``(ExperimentConfig, VerifyConfig)``.

    The seed comes from ``seed_override``, else the ``seed`` key, else the
    ``GMCF_SEED`` environment variable, else 0.
    """
    cp = _read(text)
    exp_kw = {}
    if cp.has_section("experiment"):
        for key, val in cp.items("experiment"):
            if key not in _EXPERIMENT_PARSERS:
                raise ConfigError(key, f"unknown key (allowed: {', '.join(_EXPERIMENT_PARSERS)})")
            exp_kw[key] = _EXPERIMENT_PARSERS[key](key, val)
    if seed_override is not None:
        exp_kw["seed"] = int(seed_override)
    elif "seed" not in exp_kw:
        exp_kw["seed"] = resolve_seed(None)
    exp_kw.setdefault("workers", os.cpu_count() or 1)
    ver_kw = {}
    vfields = {f.name: f for f in fields(VerifyConfig)}
    if cp.has_section("verify"):
        for key, val in cp.items("verify"):
            if key not in vfields:
                raise ConfigError(key, f"unknown key (allowed: {', '.join(vfields)})")
            ver_kw[key] = _verify_parser(vfields[key])(key, val)
    return ExperimentConfig(**exp_kw), VerifyConfig(**ver_kw)


def parse_config(text, seed_override=None) -> ExperimentConfig:
    """Validated :class:`ExperimentConfig` from INI text, defaults filled in."""
    return parse_document(text, seed_override)[0]


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(str(x) for x in v)
    return str(v)


def echo(config: ExperimentConfig, verify: Optional[VerifyConfig] = None) -> str:
    """INI text listing every effective value; ``parse_config(echo(c)) == c``."""
    lines = ["[experiment]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in _items(config)]
    if verify is not None:
        lines += ["", "[verify]"]
        lines += [f"{k} = {_fmt(v)}" for k, v in _items(verify)]
    return "\n".join(lines) + "\n"


def _items(dc):
    return [(f.name, getattr(dc, f.name)) for f in fields(dc)]


# --- dispatch ------------------------------------------------------------


@dataclass
class CliCommand:
    subcommand: str
    config_text: str = ""
    seed: Optional[int] = None
    out_dir: str = "."


def _write_report(out_dir, name, checks, config_text, extra=None):
    lines = [c.line() for c in checks]
    atomic_write(os.path.join(out_dir, f"{name}.txt"), "\n".join(lines) + "\n")
    doc = {"schema": "gmcf-1", "command": name, "config": config_text,
           "checks": [{"name": c.name, "passed": c.passed, "summary": c.summary,
                       "seconds": c.seconds, "details": c.details} for c in checks]}
    if extra:
        doc.update(extra)
    atomic_write(os.path.join(out_dir, f"{name}.json"),
                 json.dumps(_clean(doc), indent=2, sort_keys=True))
    for ln in lines:
        print(ln)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def _clean(x):
    from .harness import _jsonable
    return _jsonable(x)


def _experiment_outputs(out_dir, name, cfg, result, config_text, extra=None):
    csv_path = cfg.output or os.path.join(out_dir, f"{name}.csv")
    json_path = os.path.splitext(csv_path)[0] + ".json"
    atomic_write(csv_path, rows_to_csv(result.rows))
    doc = summary_document(result, {"effective_config": config_text, **(extra or {})})
    atomic_write(json_path, json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {csv_path} and {json_path} (seed {cfg.seed})")
    return EXIT_OK


def dispatch(cmd: CliCommand) -> int:
    cfg, ver = parse_document(cmd.config_text, cmd.seed)
    text = echo(cfg, ver)
    out = cmd.out_dir
    os.makedirs(out, exist_ok=True)
    name = cmd.subcommand
    if name == "verify-kernel":
        return _write_report(out, name, [acc.kernel_estimates()], text)
    if name == "verify-brownian":
        return _write_report(out, name, [acc.brownian_suite(ver.brownian_dt, ver.brownian_paths,
                                                            cfg.seed)], text)
    if name == "verify-covariance":
        chk = acc.covariance_fidelity(cfg.kernel, cfg.N, cfg.t, cfg.layer_width,
                                      ver.cov_replicas, ver.n_lags, cfg.seed)
        return _write_report(out, name, [chk], text)
    if name == "second-moment":
        chk = acc.second_moment_oracle(cfg.t, cfg.N, cfg.n_list, ver.moment_replicas, cfg.seed,
                                       cfg.gamma, cfg.kernel)
        return _write_report(out, name, [chk], text)
    if name == "tightness":
        return _experiment_outputs(out, name, cfg, run_tightness_experiment(cfg), text)
    if name == "conjecture":
        return _experiment_outputs(out, name, cfg, run_conjecture_experiment(cfg), text)
    if name == "scale-decomp":
        table, res = run_scale_decomposition(cfg)
        return _experiment_outputs(out, name, cfg, res, text, {"bands": table})
    if name == "fbound-sweep":
        chk = acc.two_point_bound(ver.fbound_t, cfg.delta, ver.fbound_n, cfg.A, ver.fbound_gaps,
                                  ver.fbound_paths, ver.fbound_pilot_paths, ver.fbound_dt,
                                  cfg.seed, ver.C, cfg.kernel)
        ver = replace(ver, C=chk.details["C"])
        return _write_report(out, name, [chk], echo(cfg, ver))
    raise ValueError(f"unknown subcommand {name!r}")


def build_parser():
    p = argparse.ArgumentParser(
        prog="gmcf",
        description="Fourier coefficients of critical multiplicative chaos on the circle. "
                    "Coefficients use c_n = sum_j exp(+2 pi i n j / N) m_j.",
    )
    p.add_argument("subcommand", choices=COMMANDS)
    p.add_argument("-c", "--config", help="INI config file ([experiment], [verify])")
    p.add_argument("-s", "--seed", type=int, help="override the seed (else config, else GMCF_SEED)")
    p.add_argument("-o", "--out", default=".", help="output directory (default: .)")
    p.add_argument("--echo", action="store_true", help="print the effective config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        if args.echo:
            cfg, ver = parse_document(text, args.seed)
            sys.stdout.write(echo(cfg, ver))
            return EXIT_OK
        return dispatch(CliCommand(args.subcommand, text, args.seed, args.out))
    except ConfigError as exc:
        print(f"gmcf: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gmcf: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
