"""Command-line front end.

Every subcommand writes into ``--out``. Outputs are staged in a temporary
directory inside ``--out`` and moved into place only when the run succeeds,
next to a ``manifest.txt`` that records the full configuration, seed, input
digests and library versions.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

Options may also come from ``--config FILE`` with one ``key = value`` per
line; command-line flags win over the file, which wins over defaults.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import platform
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .errors import DataError, NumericError

DEFAULT_SEED = 20180101
LOCK_NAME = ".climfront.lock"


class UsageError(Exception):
    """Bad command line or configuration (exit code 1)."""


class UnknownFlag(UsageError):
    pass


class MissingInput(UsageError):
    pass


# option tables: name -> (type, default, help); ``None`` default with
# ``required`` in REQUIRED means the run cannot start without it
_COMMON = {
    "out": (str, None, "output directory"),
    "seed": (int, DEFAULT_SEED, "random seed"),
}

_OPTIONS = {
    "ingest": {
        "grid": (str, None, "gridded monthly weather CSV (lat,lon,year,month,temperature_c,precipitation_cm)"),
        "weights": (str, None, "population weights CSV (lat,lon,country,weight)"),
        "econ": (str, None, "economic CSV (country,year,output,capital,labor[,population])"),
        "high_income": (str, None, "file listing high-income country codes, one per line"),
        "window": (int, 30, "length of the trailing climate window in years"),
        "poor_method": (str, "worldbank-list", "worldbank-list or percentile25-1990"),
    },
    "describe": {
        "panel": (str, None, "panel CSV written by ingest"),
    },
    "fit": {
        "panel": (str, None, "panel CSV"),
        "preset": (str, None, "named specification, e.g. t2c6"),
        "spec_file": (str, None, "plain-text specification file"),
        "distribution": (str, None, "override the inefficiency distribution"),
        "max_iter": (int, 500, "quasi-Newton iteration cap"),
        "gtol": (float, 1e-6, "gradient tolerance"),
        "multistart": (int, 3, "number of starting points"),
    },
    "ecm": {
        "panel": (str, None, "panel CSV"),
        "long_run": (str, "lnk,T,T^2,R,R^2,T*R,P*R,P*R^2,P*T*R", "comma-separated long-run terms"),
        "short_run": (str, "zT,zR", "comma-separated short-run anomaly terms"),
        "form": (str, "z", "z (signed anomalies) or abs"),
    },
    "ips": {
        "series": (str, None, "CSV with country,year and a value column"),
        "value": (str, None, "value column (default: the single non-key column)"),
        "lags": (int, 0, "lagged differences in each regression"),
        "min_length": (int, 10, "shortest usable series"),
    },
    "project": {
        "fit": (str, None, "fit.json written by fit"),
        "baseline": (str, None, "baseline CSV (country,y,workers,population,Tbar,Rbar,tau,rho,P,H,...)"),
        "dT": (float, 3.0, "warming over the horizon, degrees C"),
        "dR_pct": (float, 20.0, "precipitation change over the horizon, percent"),
        "horizon": (float, 100.0, "horizon in years"),
        "mode": (str, "both", "average, equity or both"),
        "channel": (str, "log", "inefficiency channel: log or level"),
        "window": (int, 30, "climate window used to scale anomaly shifts"),
        "curve_grid": (str, "default", "curve grid: default (1..6 C, -30..30 %) or single"),
    },
    "simulate": {
        "replications": (int, 100, "number of synthetic panels"),
        "n_countries": (int, 50, "countries per panel"),
        "n_years": (int, 60, "years per panel"),
        "jobs": (int, None, "worker processes (default: $CLIMFRONT_THREADS or 1)"),
    },
}

_REQUIRED = {
    "ingest": ("grid", "weights", "econ"),
    "describe": ("panel",),
    "fit": ("panel",),
    "ecm": ("panel",),
    "ips": ("series",),
    "project": ("fit", "baseline"),
    "simulate": (),
}

_INPUTS = ("grid", "weights", "econ", "high_income", "panel", "spec_file", "series", "fit", "baseline")


@dataclass
class RunConfig:
    """Resolved configuration of one run."""

    command: str
    options: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.options["seed"]

    @property
    def out(self):
        return Path(self.options["out"])

    def inputs(self):
        return {k: self.options[k] for k in _INPUTS if self.options.get(k) is not None}

    def __getattr__(self, name):
        try:
            return self.__dict__["options"][name]
        except KeyError:
            raise AttributeError(name) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UnknownFlag(f"{self.prog}: {message}")


def _flag(name):
    return "--" + name.replace("_", "-") if name not in ("dT", "dR_pct") else "--" + name


def build_parser():
    parser = _Parser(prog="climfront", description="Climate and production-frontier estimation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for cmd, table in _OPTIONS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=argparse.SUPPRESS, help="key = value configuration file")
        for name, (typ, _, text) in {**_COMMON, **table}.items():
            flags = [_flag(name)]
            if name == "dR_pct":
                flags.append("--dR-pct")
            p.add_argument(*flags, dest=name, type=typ, default=argparse.SUPPRESS, help=text)
    return parser


def read_config_file(path, command):
    """``key = value`` lines; ``#`` starts a comment; keys use underscores or dashes."""
    table = {**_COMMON, **_OPTIONS[command]}
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MissingInput(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in table:
            raise UnknownFlag(f"{path}:{lineno}: unknown key {key!r} for {command}")
        try:
            out[key] = table[key][0](value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def parse_config(argv, config_file=None):
    """Resolve defaults, config-file values and flags into a RunConfig."""
    parser = build_parser()
    argv = list(argv)
    if not argv:
        raise UsageError(parser.format_usage().strip())
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command", None)
    if command is None:
        raise UsageError(parser.format_usage().strip())
    table = {**_COMMON, **_OPTIONS[command]}
    options = {k: v[1] for k, v in table.items()}
    path = ns.pop("config", None) or config_file
    if path is not None:
        options.update(read_config_file(path, command))
    options.update(ns)

    if command == "fit":
        if options["preset"] is not None and options["spec_file"] is not None:
            raise UnknownFlag("--preset and --spec-file are mutually exclusive")
        if options["preset"] is None and options["spec_file"] is None:
            options["preset"] = "t2c6"
    if options["out"] is None:
        raise MissingInput("--out is required")
    for name in _REQUIRED[command]:
        if options[name] is None:
            raise MissingInput(f"{_flag(name)} is required for {command}")
    for name in _INPUTS:
        if options.get(name) is not None and not Path(options[name]).is_file():
            raise MissingInput(f"{_flag(name)}: no such file {options[name]}")
    return RunConfig(command, options)


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _versions():
    import scipy
    import threadpoolctl

    return {"climfront": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__,
            "threadpoolctl": threadpoolctl.__version__}


def write_manifest(config, path, outputs):
    lines = [f"command = {config.command}"]
    rerun = ["climfront", config.command]
    for k in sorted(config.options):
        v = config.options[k]
        lines.append(f"config.{k} = {'' if v is None else v}")
        if v is not None:
            rerun += [_flag(k), str(v)]
    lines.append(f"seed = {config.seed}")
    for k, p in sorted(config.inputs().items()):
        lines.append(f"input.{k} = {os.path.abspath(p)}")
        lines.append(f"input.{k}.sha256 = {_sha256(p)}")
    for k, v in _versions().items():
        lines.append(f"version.{k} = {v}")
    for name in sorted(outputs):
        lines.append(f"output = {name}")
    lines.append("rerun = " + " ".join(rerun))
    Path(path).write_text("\n".join(lines) + "\n")


def _csv(df, path, index=False):
    df.to_csv(path, index=index, lineterminator="\n")


def _run_ingest(c, stage, log):
    from . import dataio
    from .scenario import baseline_frame

    grid = dataio.read_grid(c.grid)
    weights = dataio.read_weights(c.weights)
    econ = dataio.read_econ(c.econ)
    high = dataio.read_high_income(c.high_income) if c.high_income else None
    panel, dropped = dataio.build_panel(grid, weights, econ, high, window=c.window,
                                        poor_method=c.poor_method)
    dataio.write_panel(panel, stage / "panel.csv")
    if "population" in econ.columns:
        _csv(baseline_frame(panel, econ), stage / "baseline.csv")
    log(f"panel: {len(panel)} rows, {panel['country'].nunique()} countries, {dropped} economic rows dropped")


def _run_describe(c, stage, log):
    from . import dataio

    table = dataio.describe(dataio.read_panel(c.panel))
    _csv(table, stage / "describe.csv", index=True)
    log(table.to_string())


def _run_fit(c, stage, log):
    from . import dataio
    from .modelspec import build_design, first_difference, preset, read_spec
    from .sfa import fit

    spec = preset(c.preset) if c.preset else read_spec(c.spec_file)
    if c.distribution:
        spec = dataclasses.replace(spec, distribution=c.distribution)
    panel = dataio.read_panel(c.panel)
    design = first_difference(panel, spec) if spec.first_difference else build_design(panel, spec)
    res = fit(design, max_iter=c.max_iter, gtol=c.gtol, multistart=c.multistart, seed=c.seed)
    res.save(stage / "fit.json")
    report = pd.concat([res.table(), pd.DataFrame({"coef": [res.loglik, float(res.n_obs)]},
                                                  index=pd.Index(["LpL", "N"], name="parameter"))])
    _csv(report, stage / "coefficients.csv", index=True)
    obs = res.observations()
    _csv(obs, stage / "efficiency.csv")
    _csv(obs[["country", "year"]].assign(value=obs["eps"]), stage / "residuals.csv")
    log(res.table().to_string())
    log(f"log-likelihood {res.loglik:.4f}  status {res.status}  n {res.n_obs}")


def _terms(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _run_ecm(c, stage, log):
    from . import dataio
    from .ecm import fit_cointegrating_vector, fit_short_run

    panel = dataio.read_panel(c.panel)
    if c.form not in ("z", "abs"):
        raise UsageError("--form must be z or abs")
    lr = fit_cointegrating_vector(panel, _terms(c.long_run))
    sr = fit_short_run(panel, lr, _terms(c.short_run), form=c.form)
    _csv(lr.table(), stage / "long_run.csv", index=True)
    table = sr.table()
    _csv(table, stage / "short_run.csv", index=True)
    _csv(lr.V, stage / "gap.csv")
    log(lr.table().to_string())
    log(table.to_string())
    log(f"adjustment speed {sr.adjustment_speed:.4f}  half-life {sr.half_life():.2f} years")


def _run_ips(c, stage, log):
    from .urtests import ips_test

    df = pd.read_csv(c.series)
    value = c.value
    if value is None:
        rest = [k for k in df.columns if k not in ("country", "year")]
        if len(rest) != 1:
            raise DataError("pass --value to choose the series column")
        value = rest[0]
    res = ips_test(df, lags=c.lags, min_length=c.min_length, value=value)
    summary = pd.DataFrame([res.summary()])
    _csv(summary, stage / "ips.csv")
    detail = res.detail()
    detail.index.name = "country"
    _csv(detail, stage / "ips_detail.csv", index=True)
    skipped = pd.DataFrame(sorted(res.skipped.items()), columns=["country", "reason"])
    _csv(skipped, stage / "ips_skipped.csv")
    log(f"IPS (null: unit root in every series) Z = {res.statistic:.4f}  p = {res.p_value:.4f}  "
        f"used {len(res.used)}  skipped {len(res.skipped)}")


def _run_project(c, stage, log):
    from .scenario import ClimateScenario, baselines_from_frame, default_grid, emit_projection
    from .sfa import FitResult

    res = FitResult.load(c.fit)
    baselines = baselines_from_frame(pd.read_csv(c.baseline))
    modes = ("average", "equity") if c.mode == "both" else (c.mode,)
    scenario = ClimateScenario(c.dT, c.dR_pct, c.horizon)
    if c.curve_grid == "default":
        grid = default_grid(c.horizon) + [scenario]
    elif c.curve_grid == "single":
        grid = [scenario]
    else:
        raise UsageError("--curve-grid must be default or single")
    curves, scatter = emit_projection(baselines, res, grid, scenario, modes=modes,
                                      window=c.window, dist=res.distribution, channel=c.channel)
    _csv(curves, stage / "curves.csv")
    _csv(scatter, stage / "scatter.csv")
    log(curves[(curves.dT == c.dT) & (curves.dR_pct == c.dR_pct)].to_string(index=False))


def _run_simulate(c, stage, log):
    from .recovery import RecoveryConfig, run_recovery, summarize

    cfg = RecoveryConfig(n_countries=c.n_countries, n_years=c.n_years)
    draws = run_recovery(cfg, n_reps=c.replications, seed=c.seed, n_jobs=c.jobs)
    _csv(draws, stage / "draws.csv")
    summary = summarize(draws)
    _csv(summary, stage / "summary.csv", index=True)
    log(summary.to_string())


_RUNNERS = {"ingest": _run_ingest, "describe": _run_describe, "fit": _run_fit, "ecm": _run_ecm,
            "ips": _run_ips, "project": _run_project, "simulate": _run_simulate}


def run(config, log=print):
    """Execute a resolved configuration; outputs appear in ``config.out`` only on success."""
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise UsageError(f"{out} is locked by another run (remove {lock} if stale)") from None
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    stage = Path(tempfile.mkdtemp(prefix=".staging-", dir=out))
    try:
        _RUNNERS[config.command](config, stage, log)
        outputs = sorted(p.name for p in stage.iterdir())
        write_manifest(config, stage / "manifest.txt", outputs)
        for p in sorted(stage.iterdir()):
            os.replace(p, out / p.name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
        lock.unlink(missing_ok=True)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse_config(argv)
        return run(config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        if not argv or str(exc).startswith("usage:"):
            build_parser().print_help(sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
