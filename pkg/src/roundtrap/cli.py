"""Command-line front end.

Three subcommands drive the experiments and diagnostics and emit plot-ready
CSV files plus a manifest.json recording the fully resolved configuration:

    roundtrap sweep    [flags]          -> sweep.csv, manifest.json
    roundtrap longrun  [flags]          -> timeseries.csv, manifest.json
    roundtrap diagnose MODE [flags]     -> diagnostics.csv, manifest.json

Flag values override a --config JSON file, which overrides built-in defaults
(the headline sweep: a=0.1, b=0.2, midpoint scheme, desk-scale step list).
Numeric flags are parsed as exact decimals, so "0.1" means 1/10, not the
nearest double.  Error norms are printed with 25 significant digits, enough
to round-trip the wide-precision value.  Replaying a manifest's resolved
configuration reproduces every data column bit for bit (wall_time_s and the
manifest timestamp are excluded from that guarantee).

Exit codes: 0 success, 2 usage error, 3 step-count guard, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import decimal
import json
import os
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .analysis import (
    BoundMode,
    ErrorBoundModel,
    consistency_residual,
    conservation_drift,
    effective_computation_time,
    optimal_step_size,
    predict_error_bound,
    spectral_analysis,
)
from .fpcore import PrecisionConfig
from .oscillator import OscillatorParams
from .schemes import SamplingPlan, Scheme, StepLimitError, integrate, num_steps, update_matrix
from .experiments import (
    STATUS_OK,
    SweepConfig,
    SweepRecord,
    longtime_run,
    stepsize_sweep,
)

SCHEMA_VERSION = 1
OUT_DIR_ENV = "ROUNDTRAP_OUT_DIR"

SWEEP_CSV = "sweep.csv"
TIMESERIES_CSV = "timeseries.csv"
DIAGNOSTICS_CSV = "diagnostics.csv"
MANIFEST_JSON = "manifest.json"

_DESK_DT_LIST_STR = "1e-1,3e-2,1e-2,3e-3,1e-3,3e-4,1e-4,3e-5,1e-5"

DEFAULTS = {
    "sweep": {
        "scheme": "midpoint",
        "a": "0.1",
        "b": "0.2",
        "t_end": "100",
        "dt_list": _DESK_DT_LIST_STR,
        "p_run": "24",
        "p_ref": "113",
        "max_steps": "20000000",
        "jobs": None,
        "out_dir": None,
    },
    "longrun": {
        "scheme": "midpoint",
        "a": "0.1",
        "b": "0.2",
        "t_end": "1000",
        "dt": "1e-3",
        "samples": "100",
        "spacing": "log",
        "p_run": "24",
        "p_ref": "113",
        "max_steps": "20000000",
        "out_dir": None,
    },
    "diagnose": {
        "scheme": "midpoint",
        "a": "0.1",
        "b": "0.2",
        "dt": "1e-2",
        "t_end": "10",
        "p_run": "24",
        "series": "E_r",
        "threshold": None,
        "input": None,
        "mode": None,
        "bound_model": "worst",
        "out_dir": None,
    },
}


class UsageError(Exception):
    pass


def _parse_fraction(text: str, flag: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{flag}: cannot parse {text!r} as a number") from None


def _parse_int(text: str, flag: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r} as an integer") from None


def _parse_precision(text: str, flag: str) -> PrecisionConfig:
    try:
        return PrecisionConfig(_parse_int(text, flag))
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from None


def format_wide(x: Optional[Fraction], digits: int = 25) -> str:
    """Deterministic decimal rendering with enough digits to round-trip the
    wide value; 'nan' for missing values."""
    if x is None:
        return "nan"
    if x == 0:
        return "0"
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        d = decimal.Decimal(x.numerator) / decimal.Decimal(x.denominator)
    return str(d)


def parse_wide(text: str) -> Optional[Fraction]:
    if text == "nan":
        return None
    return Fraction(text)


# ---------------------------------------------------------------------------
# Argument parsing and config-file precedence
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roundtrap",
        description="Round-off vs. truncation error experiments for difference schemes.",
    )
    parser.add_argument("--version", action="version", version=f"roundtrap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--scheme", choices=[s.value for s in Scheme])
        p.add_argument("--a", dest="a")
        p.add_argument("--b", dest="b")
        p.add_argument("--config", help="JSON file with flag defaults")
        p.add_argument("--out-dir", dest="out_dir", help=f"output directory (or ${OUT_DIR_ENV})")

    p = sub.add_parser("sweep", help="error vs. step size at fixed final time")
    common(p)
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--dt-list", dest="dt_list", help="comma-separated step sizes")
    p.add_argument("--p-run", dest="p_run", help="run significand bits")
    p.add_argument("--p-ref", dest="p_ref", help="reference significand bits")
    p.add_argument("--max-steps", dest="max_steps")
    p.add_argument("--jobs", help="worker processes for sweep legs")

    p = sub.add_parser("longrun", help="error vs. time at fixed step size")
    common(p)
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--dt", dest="dt")
    p.add_argument("--samples", help="number of sample times (>= 2)")
    p.add_argument("--spacing", choices=["log", "linear"])
    p.add_argument("--p-run", dest="p_run")
    p.add_argument("--p-ref", dest="p_ref")
    p.add_argument("--max-steps", dest="max_steps")

    p = sub.add_parser("diagnose", help="diagnostics over stored results or short runs")
    p.add_argument(
        "mode",
        choices=["ect", "os", "spectral", "drift", "residual", "bound"],
        help="which diagnostic to run",
    )
    common(p)
    p.add_argument("--input", help="input CSV (ect: timeseries.csv, os: sweep.csv)")
    p.add_argument("--threshold", help="error threshold for ect")
    p.add_argument("--series", choices=["E_r", "E_t"], help="which series ect scans")
    p.add_argument("--dt", dest="dt")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--p-run", dest="p_run")
    p.add_argument("--bound-model", dest="bound_model", choices=["worst", "random"])
    return parser


def _resolve(args: argparse.Namespace) -> dict:
    """flags > config file > defaults; returns a plain string-keyed dict."""
    defaults = dict(DEFAULTS[args.subcommand])
    from_file = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {path}: expected a JSON object")
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise UsageError(f"config file {path}: unknown keys {sorted(unknown)}")
        from_file = {k: (None if v is None else str(v)) for k, v in loaded.items()}
    resolved = {}
    for key, default in defaults.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            resolved[key] = str(flag_value)
        elif key in from_file and from_file[key] is not None:
            resolved[key] = from_file[key]
        else:
            resolved[key] = default
    if args.subcommand == "diagnose":
        resolved["mode"] = args.mode
    return resolved


def _out_dir(resolved: dict) -> Path:
    target = resolved.get("out_dir") or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(target)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _write_manifest(out: Path, subcommand: str, resolved: dict, argv: list[str]) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "subcommand": subcommand,
        "command": ["roundtrap", *argv],
        "resolved": resolved,
    }
    (out / MANIFEST_JSON).write_text(json.dumps(manifest, indent=2) + "\n")


def manifest_argv(manifest: dict, out_dir: Optional[str] = None) -> list[str]:
    """Reconstruct the CLI argument list from a manifest's resolved config;
    replaying it reproduces the data columns bit for bit."""
    resolved = dict(manifest["resolved"])
    sub = manifest["subcommand"]
    argv = [sub]
    if sub == "diagnose":
        argv.append(resolved.pop("mode"))
    if out_dir is not None:
        resolved["out_dir"] = out_dir
    for key, value in resolved.items():
        if value is None:
            continue
        argv.extend([f"--{key.replace('_', '-')}", str(value)])
    return argv


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _params(resolved: dict) -> OscillatorParams:
    a = _parse_fraction(resolved["a"], "--a")
    b = _parse_fraction(resolved["b"], "--b")
    if a <= 0 or b <= 0:
        raise UsageError("--a and --b must be positive")
    return OscillatorParams(a, b)


def cmd_sweep(resolved: dict, argv: list[str]) -> int:
    dt_list = tuple(
        _parse_fraction(part.strip(), "--dt-list")
        for part in resolved["dt_list"].split(",")
        if part.strip()
    )
    if not dt_list:
        raise UsageError("--dt-list: no step sizes given")
    try:
        cfg = SweepConfig(
            scheme=Scheme.from_name(resolved["scheme"]),
            params=_params(resolved),
            t_end=_parse_fraction(resolved["t_end"], "--t-end"),
            dt_list=dt_list,
            run_precision=_parse_precision(resolved["p_run"], "--p-run"),
            ref_precision=_parse_precision(resolved["p_ref"], "--p-ref"),
            max_steps=_parse_int(resolved["max_steps"], "--max-steps"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    jobs = _parse_int(resolved["jobs"], "--jobs") if resolved["jobs"] else os.cpu_count() or 1
    records = stepsize_sweep(cfg, jobs=jobs)
    out = _out_dir(resolved)
    rows = [
        [
            format_wide(r.dt),
            str(r.n_steps),
            format_wide(r.e_total),
            format_wide(r.e_trunc),
            format_wide(r.e_round),
            r.status,
            f"{r.wall_time_s:.6f}",
        ]
        for r in records
    ]
    _write_csv(out / SWEEP_CSV, ["dt", "n_steps", "E", "E_t", "E_r", "status", "wall_time_s"], rows)
    _write_manifest(out, "sweep", resolved, argv)
    print(f"wrote {out / SWEEP_CSV} ({len(rows)} rows)")
    return 0


def cmd_longrun(resolved: dict, argv: list[str]) -> int:
    samples = _parse_int(resolved["samples"], "--samples")
    if samples < 2:
        raise UsageError("--samples must be >= 2")
    p_run = _parse_precision(resolved["p_run"], "--p-run")
    p_ref = _parse_precision(resolved["p_ref"], "--p-ref")
    if p_ref.significand_bits <= p_run.significand_bits:
        raise UsageError("--p-ref must be strictly wider than --p-run")
    records = longtime_run(
        Scheme.from_name(resolved["scheme"]),
        _params(resolved),
        _parse_fraction(resolved["dt"], "--dt"),
        _parse_fraction(resolved["t_end"], "--t-end"),
        p_run,
        p_ref,
        samples,
        spacing=resolved["spacing"],
        max_steps=_parse_int(resolved["max_steps"], "--max-steps"),
    )
    out = _out_dir(resolved)
    rows = [[format_wide(r.t), format_wide(r.e_round), format_wide(r.e_trunc)] for r in records]
    _write_csv(out / TIMESERIES_CSV, ["t", "E_r", "E_t"], rows)
    _write_manifest(out, "longrun", resolved, argv)
    print(f"wrote {out / TIMESERIES_CSV} ({len(rows)} rows)")
    return 0


def _read_csv(path_str: Optional[str], what: str) -> list[dict]:
    if not path_str:
        raise UsageError(f"--input is required for {what}")
    path = Path(path_str)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _diagnose_rows(resolved: dict) -> list[tuple[str, str, str]]:
    mode = resolved["mode"]
    if mode == "ect":
        if not resolved["threshold"]:
            raise UsageError("--threshold is required for ect")
        threshold = _parse_fraction(resolved["threshold"], "--threshold")
        series_name = resolved["series"]
        rows = _read_csv(resolved["input"], "ect")
        try:
            series = [(Fraction(r["t"]), Fraction(r[series_name])) for r in rows]
        except (KeyError, ValueError) as exc:
            raise UsageError(f"--input: not a timeseries.csv with a {series_name} column ({exc})") from None
        ect = effective_computation_time(series, threshold)
        return [
            ("ect", "series", series_name),
            ("ect", "threshold", format_wide(threshold)),
            ("ect", "t", "none" if ect is None else format_wide(ect)),
        ]
    if mode == "os":
        rows = _read_csv(resolved["input"], "os")
        try:
            records = [
                SweepRecord(
                    dt=Fraction(r["dt"]),
                    n_steps=int(r["n_steps"]),
                    e_total=parse_wide(r["E"]),
                    e_trunc=parse_wide(r["E_t"]),
                    e_round=parse_wide(r["E_r"]),
                    wall_time_s=0.0,
                    status=r.get("status", STATUS_OK),
                )
                for r in rows
            ]
        except (KeyError, ValueError) as exc:
            raise UsageError(f"--input: not a sweep.csv ({exc})") from None
        best = optimal_step_size(records)
        return [
            ("os", "dt", format_wide(best.dt)),
            ("os", "E", format_wide(best.e_total)),
            ("os", "n_steps", str(best.n_steps)),
        ]

    scheme = Scheme.from_name(resolved["scheme"])
    params = _params(resolved)
    dt = _parse_fraction(resolved["dt"], "--dt")
    if mode == "spectral":
        info = spectral_analysis(update_matrix(scheme, params, dt))
        return [
            ("spectral", "det", format_wide(info.det)),
            ("spectral", "eigenvalue_modulus_1", format_wide(info.eigenvalue_moduli[0])),
            ("spectral", "eigenvalue_modulus_2", format_wide(info.eigenvalue_moduli[1])),
        ]

    t_end = _parse_fraction(resolved["t_end"], "--t-end")
    p_run = _parse_precision(resolved["p_run"], "--p-run")
    if mode == "drift":
        n = num_steps(t_end, dt)
        stride = max(1, n // 16)
        traj = integrate(scheme, params, dt, t_end, p_run, SamplingPlan.every(stride))
        drift = conservation_drift(traj, params)
        out = [("drift", format_wide(t), format_wide(d)) for t, d in drift]
        out.append(("drift", "max", format_wide(max(d for _, d in drift))))
        return out
    if mode == "residual":
        if num_steps(t_end, dt) > 200_000:
            raise UsageError("residual diagnostics sample every step; keep t-end/dt <= 200000")
        traj = integrate(scheme, params, dt, t_end, p_run, SamplingPlan.every(1))
        norms = sorted(r for _, r in consistency_residual(traj, params))
        median = norms[len(norms) // 2]
        return [
            ("residual", "count", str(len(norms))),
            ("residual", "median", format_wide(median)),
            ("residual", "max", format_wide(norms[-1])),
        ]
    if mode == "bound":
        n = num_steps(t_end, dt)
        bound_mode = BoundMode.RANDOM_WALK if resolved["bound_model"] == "random" else BoundMode.WORST_CASE
        model = ErrorBoundModel.for_precision(p_run, params, bound_mode)
        value = predict_error_bound(params, scheme, dt, n, model)
        return [
            ("bound", "model", bound_mode.value),
            ("bound", "n_steps", str(n)),
            ("bound", "value", format_wide(Fraction(value))),
        ]
    raise UsageError(f"unknown diagnose mode {mode!r}")


def cmd_diagnose(resolved: dict, argv: list[str]) -> int:
    rows = _diagnose_rows(resolved)
    out = _out_dir(resolved)
    _write_csv(out / DIAGNOSTICS_CSV, ["kind", "key", "value"], [list(r) for r in rows])
    _write_manifest(out, "diagnose", resolved, argv)
    for kind, key, value in rows:
        print(f"{kind} {key} = {value}")
    return 0


DISPATCH = {"sweep": cmd_sweep, "longrun": cmd_longrun, "diagnose": cmd_diagnose}


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        resolved = _resolve(args)
        return DISPATCH[args.subcommand](resolved, list(argv))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StepLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
