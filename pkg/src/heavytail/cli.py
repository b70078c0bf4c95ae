"""Command-line driver.

Values come from built-in defaults, then the ``[subcommand]`` section of
``--config``, then explicit flags.  ``HEAVYTAIL_SEED`` beats ``--seed``.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .coverings import count_grid_operators
from .distributions import parse_distribution
from .errors import ConfigError, HeavyTailError, InvariantViolation, NumericalError
from .geometry import LcdParams, lcd
from .invertibility import (
    EXPERIMENTS,
    ExperimentConfig,
    default_jobs,
    run_experiment,
    run_small_ball_profile,
    run_tensorization_check,
)
from .regularizer import RegularizerParams, regularize_to_grid
from .textio import csv_text, read_csv, read_matrix, read_vectors, record_text

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
DEFAULT_EPS = "0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5"


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optfloat(text) -> Optional[float]:
    if text is None or str(text).strip() in ("", "auto", "none"):
        return None
    return float(text)


def _floats(text) -> tuple:
    if isinstance(text, tuple):
        return text
    return tuple(float(t) for t in str(text).replace(" ", "").split(",") if t)


@dataclass(frozen=True)
class Opt:
    name: str
    conv: Callable
    default: Any
    help: str

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


def _show(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


COMMON = [
    Opt("seed", int, 0, "master seed (HEAVYTAIL_SEED overrides)"),
    Opt("jobs", int, None, "worker processes (default: logical cores)"),
    Opt("out", str, "", "output prefix for CSV, summary and manifest"),
]
DIST = Opt("dist", str, "gaussian", "entry law, family[:param[,param]]")
SMOOTH = Opt("smoothing", float, 1e-6, "uniform smoothing width for atomic laws")
TRIALS = lambda d: Opt("trials", int, d, "number of seeded trials")  # noqa: E731
N = lambda d: Opt("n", int, d, "dimension")  # noqa: E731
DELTA = lambda d: Opt("delta", float, d, "determinant budget")  # noqa: E731
THETA = Opt("theta", float, 0.3, "sparsity fraction")
RHO = Opt("rho", float, 0.3, "compressibility radius")

OPTIONS = {
    "regularize": [
        DIST, SMOOTH, N(128), DELTA(0.25), TRIALS(500),
        Opt("L", float, 2.0 * math.e, "budget constant (>= 2e)"),
        Opt("c_ref", _optfloat, None, "success constant (empty: frozen or calibrated)"),
        Opt("calibration_trials", int, 200, "trials for on-the-fly calibration"),
        Opt("matrix_file", str, "", "regularize one matrix instead of running trials"),
    ],
    "cover": [
        DIST, SMOOTH, N(32), DELTA(0.25), TRIALS(200),
        Opt("L", float, 2.0 * math.e, "budget constant (>= 2e)"),
        Opt("points", int, 100, "located points per trial"),
        Opt("exact_cap", int, 12, "size of the exact corner-enumeration sub-check"),
    ],
    "smin": [
        DIST, SMOOTH, N(100), TRIALS(2000),
        Opt("eps", _floats, _floats(DEFAULT_EPS), "comma-separated eps grid"),
        Opt("mode", str, "smin", "smin | distance"),
        THETA, RHO,
    ],
    "lcd": [
        Opt("vector_file", str, "", "unit vector, one row of decimals"),
        Opt("r", float, 0.1, "relative tolerance r in (0,1)"),
        Opt("h", float, 10.0, "absolute tolerance h"),
        Opt("t_max", _optfloat, None, "scan limit (empty: 100 sqrt(n))"),
        Opt("step", _optfloat, None, "coarse step (empty: min(r,1)/8)"),
        Opt("tol", float, 1e-9, "refinement tolerance"),
    ],
    "normal-lcd": [
        DIST, SMOOTH, N(32), TRIALS(200), THETA, RHO,
        Opt("r", _optfloat, None, "LCD r (empty: rho^2 sqrt(theta) / 2)"),
        Opt("h", _optfloat, None, "LCD h (empty: s sqrt(n))"),
        Opt("s", float, 0.05, "h = s sqrt(n)"),
        Opt("t_max_factor", float, 1000.0, "t_max = factor * sqrt(n)"),
        Opt("planted", _bool, False, "use a planted flat normal"),
    ],
    "smallball": [
        DIST, SMOOTH, N(32), TRIALS(10000),
        Opt("mode", str, "profile", "profile | tensorization"),
        Opt("vector_file", str, "", "unit vector (empty: flat vector of length n)"),
        Opt("eps", _floats, _floats(DEFAULT_EPS), "comma-separated eps grid"),
        Opt("r", float, 0.1, "LCD r"),
        Opt("h", float, 1.0, "LCD h"),
        Opt("t_max", _optfloat, None, "LCD scan limit (empty: 100 sqrt(n))"),
        Opt("v", _optfloat, None, "tensorization threshold (empty: derived)"),
        Opt("rogozin_c", float, 1.0, "constant in the derived tensorization threshold"),
    ],
    "symmetrize": [
        DIST, SMOOTH, N(12), TRIALS(500),
        Opt("restarts", int, 8, "sign-ascent restarts"),
        Opt("exact_cap", int, 12, "largest n with exact enumeration"),
        Opt("c", _optfloat, None, "threshold c in ||B~|| <= c n (empty: calibrated)"),
        Opt("calibration_trials", int, 200, "trials for calibrating c"),
    ],
    "grid-count": [N(None), DELTA(None)],
}
for _cmd in OPTIONS:
    OPTIONS[_cmd] = COMMON + OPTIONS[_cmd]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heavytail", description="Smallest singular value experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", default=None, help="INI file; the [%s] section is read" % cmd)
        sp.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        for o in opts:
            default = "cores" if o.name == "jobs" else _show(o.default)
            sp.add_argument(o.flag, dest=o.name, default=None, help=f"{o.help} [default: {default}]")
    rp = sub.add_parser("report")
    rp.add_argument("paths", nargs="*", help="run CSV files")
    rp.add_argument("--out", default="", help="write the merged summary here")
    return p


def resolve(cmd: str, args: argparse.Namespace) -> dict:
    """Defaults < config file section < flags < HEAVYTAIL_SEED."""
    file_vals = {}
    if getattr(args, "config", None):
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise ConfigError(f"cannot read config file {args.config}")
        if cp.has_section(cmd):
            file_vals = dict(cp.items(cmd))
    known = {o.name.lower(): o for o in OPTIONS[cmd]}
    unknown = set(file_vals) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in [{cmd}]: {sorted(unknown)}")
    out = {}
    for o in OPTIONS[cmd]:
        raw = getattr(args, o.name)
        if raw is None:
            raw = file_vals.get(o.name.lower())
        try:
            out[o.name] = o.default if raw is None else o.conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {o.name}: {raw!r}") from exc
    env = os.environ.get("HEAVYTAIL_SEED")
    if env is not None and env.strip():
        try:
            out["seed"] = int(env)
        except ValueError as exc:
            raise ConfigError(f"HEAVYTAIL_SEED is not an integer: {env!r}") from exc
    if out.get("jobs") is None:
        out["jobs"] = default_jobs()
    missing = [k for k, v in out.items() if v is None and k in ("n", "delta") and cmd == "grid-count"]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + m for m in missing)}")
    return out


def config_text(cmd: str, values: dict) -> str:
    lines = [f"[{cmd}]"] + [f"{k} = {_show(v)}" for k, v in values.items()]
    return "\n".join(lines) + "\n"


# -- outputs -----------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_outputs(cmd: str, values: dict, csv: Optional[str], summary: str,
                  started: float, extra: Optional[dict] = None) -> None:
    """CSV + summary + manifest under ``--out``; summary to stdout otherwise."""
    prefix = values.get("out") or ""
    if not prefix:
        sys.stdout.write(summary)
        return
    base = Path(prefix)
    base.parent.mkdir(parents=True, exist_ok=True)
    written = []
    if csv is not None:
        p = base.with_name(base.name + ".csv")
        with open(p, "w", newline="") as fh:
            fh.write(csv)
        written.append(p)
    s = base.with_name(base.name + ".summary.txt")
    s.write_text(summary)
    written.append(s)
    end = time.time()
    manifest = {
        "command": cmd,
        "config": {k: _show(v) for k, v in values.items()},
        "seed": values.get("seed"),
        "version": __version__,
        "start": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "end": datetime.fromtimestamp(end, timezone.utc).isoformat(),
        "wall_time_s": round(end - started, 3),
        "digests": {p.name: _sha256(p) for p in written},
    }
    if extra:
        manifest.update(extra)
    base.with_name(base.name + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    sys.stdout.write(summary)


def _experiment_config(values: dict, **over) -> ExperimentConfig:
    names = {f.name for f in fields(ExperimentConfig)}
    kw = {k: v for k, v in values.items() if k in names}
    kw.update(over)
    return ExperimentConfig(**kw)


def _run(cmd: str, name: str, values: dict, started: float, **over) -> int:
    cfg = _experiment_config(values, **over)
    res = run_experiment(name, cfg, values["jobs"])
    write_outputs(cmd, values, res.csv, record_text(res.summary), started,
                  {"experiment": name, "resolved_constants": {"c_ref": _show(res.config.c_ref)}})
    return EXIT_OK


# -- subcommands -----------------------------------------------------------------------------


def cmd_regularize(values: dict, started: float) -> int:
    if values["matrix_file"]:
        A = read_matrix(values["matrix_file"])
        dist = parse_distribution(values["dist"], values["smoothing"])
        params = RegularizerParams(L=values["L"], delta=values["delta"])
        G, cert, _ = regularize_to_grid(A, values["delta"], dist, params)
        text = cert.to_text() + f"grid={G.to_text()}\n"
        write_outputs("regularize", values, None, text, started)
        return EXIT_OK
    return _run("regularize", "regularize", values, started)


def cmd_lcd(values: dict, started: float) -> int:
    if not values["vector_file"]:
        raise ConfigError("lcd needs --vector-file")
    X = read_vectors(values["vector_file"])
    rows = []
    for x in X:
        t_max = values["t_max"] if values["t_max"] is not None else 100.0 * math.sqrt(x.size)
        res = lcd(x, LcdParams(values["h"], values["r"], t_max, values["step"], values["tol"]))
        rows.append(res)
    if len(rows) == 1:
        summary = rows[0].to_text()
    else:
        summary = "".join(f"[{i}]\n" + r.to_text() for i, r in enumerate(rows))
    csv = csv_text(["index", "t_star", "censored", "dist", "lower_bound"],
                   [(i, r.t_star, r.censored, r.dist, r.lower_bound) for i, r in enumerate(rows)])
    write_outputs("lcd", values, csv, summary, started)
    return EXIT_OK


def cmd_smallball(values: dict, started: float) -> int:
    dist = parse_distribution(values["dist"], values["smoothing"])
    if values["vector_file"]:
        x = read_vectors(values["vector_file"])[0]
    else:
        x = np.full(values["n"], 1.0 / math.sqrt(values["n"]))
    n = x.size
    if values["mode"] == "tensorization":
        rep = run_tensorization_check(dist, n, x, values["trials"], values["seed"],
                                      values["v"], values["rogozin_c"])
        items = [("experiment", "tensorization")] + [(f.name, getattr(rep, f.name)) for f in fields(rep)]
        csv = csv_text([k for k, _ in items], [[v for _, v in items]])
        write_outputs("smallball", values, csv, record_text(items), started)
        return EXIT_OK
    if values["mode"] != "profile":
        raise ConfigError(f"unknown smallball mode {values['mode']!r}")
    t_max = values["t_max"] if values["t_max"] is not None else 100.0 * math.sqrt(n)
    prof = run_small_ball_profile(x, dist, LcdParams(values["h"], values["r"], t_max),
                                  values["trials"], values["eps"], values["seed"])
    csv = csv_text(["eps", "concentration", "shape", "in_range"],
                   zip(prof.eps, prof.concentration, prof.shape, prof.in_range))
    items = [("experiment", "smallball"), ("dist", values["dist"]), ("n", n),
             ("trials", values["trials"]), ("v", prof.v), ("u", prof.u),
             ("lcd_lower", prof.lcd_lower), ("lcd_upper", prof.lcd_upper), ("C", prof.C)]
    write_outputs("smallball", values, csv, record_text(items), started)
    return EXIT_OK


def cmd_grid_count(values: dict, started: float) -> int:
    count = count_grid_operators(values["n"], values["delta"])
    if values["out"]:
        write_outputs("grid-count", values, None, f"{count}\n", started)
    else:
        print(count)
    return EXIT_OK


def dispatch_command(cmd: str, values: dict, started: float) -> int:
    if cmd == "regularize":
        return cmd_regularize(values, started)
    if cmd == "cover":
        return _run(cmd, "cover", values, started)
    if cmd == "smin":
        mode = values["mode"]
        if mode not in ("smin", "distance"):
            raise ConfigError(f"unknown smin mode {mode!r}")
        return _run(cmd, mode, values, started)
    if cmd == "lcd":
        return cmd_lcd(values, started)
    if cmd == "normal-lcd":
        return _run(cmd, "normal-lcd", values, started)
    if cmd == "smallball":
        return cmd_smallball(values, started)
    if cmd == "symmetrize":
        return _run(cmd, "symmetrize", values, started, c_ref=values["c"])
    if cmd == "grid-count":
        return cmd_grid_count(values, started)
    raise ConfigError(f"unknown subcommand {cmd!r}")


# -- report --------------------------------------------------------------------------------


def _convert(kind: str, value: str):
    if kind == "int":
        return int(value)
    if kind == "float":
        return float(value) if value != "" else math.nan
    if kind == "bool":
        return value == "1"
    return value


def merge_reports(paths: list) -> str:
    """Summary text for one or more run CSVs (single input: its own summary)."""
    if not paths:
        raise ConfigError("report needs at least one CSV path")
    paths = [Path(p) for p in paths]
    siblings = [p.with_name(p.name[: -len(".csv")] if p.name.endswith(".csv") else p.name) for p in paths]
    if len(paths) == 1:
        s = siblings[0].with_name(siblings[0].name + ".summary.txt")
        if not s.exists():
            raise ConfigError(f"no summary next to {paths[0]}")
        return s.read_text()
    headers = []
    rows = []
    for p in paths:
        if not p.exists():
            raise ConfigError(f"no such file: {p}")
        h, r = read_csv(p)
        headers.append(h)
        rows.extend(r)
    bad = [str(p) for p, h in zip(paths, headers) if h != headers[0]]
    if bad:
        raise ConfigError(f"header mismatch: {paths[0]} vs {', '.join(bad)}")
    manifests = []
    for b in siblings:
        m = b.with_name(b.name + ".manifest.json")
        if not m.exists():
            raise ConfigError(f"no manifest next to {b}.csv")
        manifests.append(json.loads(m.read_text()))
    name = manifests[0].get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"{paths[0]} is not a mergeable trial CSV")
    if any(m.get("experiment") != name for m in manifests):
        raise ConfigError("inputs come from different experiments")
    exp = EXPERIMENTS[name]
    kinds = {f.name: str(f.type) for f in fields(exp.record)}
    header = headers[0]
    cols = {k: np.array([_convert(kinds[k], row[j]) for row in rows]) for j, k in enumerate(header)}
    cmd = manifests[0]["command"]
    values = {}
    for o in OPTIONS[cmd]:
        raw = manifests[0]["config"].get(o.name, "")
        values[o.name] = o.default if raw == "" and o.default is None else o.conv(raw) if raw != "" else o.default
    consts = manifests[0].get("resolved_constants", {})
    over = {}
    if consts.get("c_ref"):
        over["c_ref"] = float(consts["c_ref"])
    cfg = _experiment_config(values, **over)
    summary = exp.summarize(cols, cfg)
    seeds = ",".join(str(m.get("seed")) for m in manifests)
    return record_text([("inputs", len(paths)), ("seeds", seeds)] + summary)


def dispatch(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    started = time.time()
    try:
        if args.command == "report":
            if not args.paths:
                sys.stderr.write("usage: heavytail report PATH [PATH ...]\n")
                return EXIT_CONFIG
            text = merge_reports(args.paths)
            if args.out:
                Path(args.out).write_text(text)
            sys.stdout.write(text)
            return EXIT_OK
        values = resolve(args.command, args)
        if args.print_config:
            sys.stdout.write(config_text(args.command, values))
            return EXIT_OK
        return dispatch_command(args.command, values, started)
    except (NumericalError, InvariantViolation) as exc:
        sys.stderr.write(f"heavytail: numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (HeavyTailError, ValueError, OSError) as exc:
        sys.stderr.write(f"heavytail: {exc}\n")
        return EXIT_CONFIG


def main() -> None:
    sys.exit(dispatch())
