"""Command line surface: simulate scans, fit fringes, check the oracle.

Subcommands
-----------
simulate          run a scenario scan and write a CSV/JSON scan table
fit               sinusoid-fit one column of a scan table
visibility-curve  tabulate signal-fringe visibility against idler delay
oracle-check      compare first-order rates against the exact simulation

Configuration is a flat ``key = value`` mapping resolved as defaults < config
file < flags; every resolved value is echoed into the output metadata and the
canonical reconstruction command is embedded so any output file reproduces
itself byte for byte.  The ``ERASER_SIM_SEED`` environment variable replaces
the default noise seed (file and flags still win).

Exit codes: 0 success, 1 usage/validation, 2 I/O, 3 numerical.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import (
    ContractViolationError,
    InvalidParameterError,
    TruncationError,
    UndefinedVisibilityError,
)
from .fringes import FringeSamples, fit_sinusoid
from .oracle import oracle_compare
from .optics import BALANCED_T, PortSign, default_setup
from .scans import (
    NoiseParams,
    ScanAxis,
    ScanSpec,
    Scenario,
    ScenarioName,
    ScanTable,
    resolve_scenario,
    run_scan,
    visibility_curve,
)

PROG = "eraser-sim"
SEED_ENV = "ERASER_SIM_SEED"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Config keys: parsing, formatting, defaults
# ---------------------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError("expected a boolean (true/false)")


def _parse_optional_float(text: str):
    low = text.strip().lower()
    if low in ("none", ""):
        return None
    return float(text)


def _parse_complex(text: str) -> complex:
    return complex(text.strip().replace(" ", ""))


def _parse_unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise ValueError("valid range [0,1]")
    return v


def _parse_port_sign(text: str) -> PortSign:
    return PortSign(text.strip())


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (ScenarioName, ScanAxis, PortSign)):
        return value.value
    return str(value)


@dataclass(frozen=True)
class _Key:
    name: str
    parse: object
    default: object


_DEF = default_setup()

_KEYS = [
    _Key("scenario", lambda s: ScenarioName(s.strip()), ScenarioName.ERASER),
    _Key("axis", lambda s: ScanAxis(s.strip()), ScanAxis.SIGNAL_PATH),
    _Key("start", float, 0.0),
    _Key("stop", float, 3232.0),
    _Key("step", float, 20.0),
    _Key("speed", float, 20.0),
    _Key("fixed_dphi_i", _parse_optional_float, None),
    _Key("fixed_dphi_s", _parse_optional_float, None),
    _Key("offset_signal_nm", float, 0.0),
    _Key("offset_idler_nm", float, 0.0),
    _Key("bs1.t", _parse_unit_interval, _DEF.bs1.t),
    _Key("bs1.port_sign", _parse_port_sign, _DEF.bs1.port_sign),
    _Key("bs2.t", _parse_unit_interval, _DEF.bs2.t),
    _Key("bs2.port_sign", _parse_port_sign, _DEF.bs2.port_sign),
    _Key("bs3.t", _parse_unit_interval, _DEF.bs3.t),
    _Key("bs3.port_sign", _parse_port_sign, _DEF.bs3.port_sign),
    _Key("src1.c", _parse_complex, complex(_DEF.src1.c)),
    _Key("src2.c", _parse_complex, complex(_DEF.src2.c)),
    _Key("dphi_s", float, 0.0),
    _Key("dphi_i", float, 0.0),
    _Key("block_reflected_idler", _parse_bool, False),
    _Key("block_signal_s1", _parse_bool, False),
    _Key("lambda_s", float, _DEF.lambda_s),
    _Key("lambda_i", float, _DEF.lambda_i),
    _Key("noise.enabled", _parse_bool, False),
    _Key("noise.seed", int, 0),
    _Key("noise.exposure_s", float, 1.0),
    _Key("noise.ref_counts_a", float, 22000.0),
    _Key("noise.ref_counts_b", float, 14000.0),
    _Key("noise.accidental_window_s", float, 0.0),
    _Key("curve.start", float, 0.0),
    _Key("curve.stop", float, 2.0 * math.pi),
    _Key("curve.step", float, math.pi / 50.0),
    _Key("oracle.gain", float, 0.01),
    _Key("oracle.nmax", int, 3),
    _Key("oracle.phase_points", int, 16),
    _Key("oracle.dphi_s_points", int, 1),
    _Key("output.format", lambda s: s.strip(), "csv"),
]

_KEY_MAP = {k.name: k for k in _KEYS}

_SETUP_KEYS = (
    "bs1.t", "bs1.port_sign", "bs2.t", "bs2.port_sign", "bs3.t", "bs3.port_sign",
    "src1.c", "src2.c", "dphi_s", "dphi_i",
    "block_reflected_idler", "block_signal_s1", "lambda_s", "lambda_i",
)


@dataclass
class RunConfig:
    """Fully resolved configuration: typed values per canonical key, plus output path."""

    values: dict
    out_path: str | None = None

    def __getitem__(self, key: str):
        return self.values[key]

    def scenario(self) -> Scenario:
        overrides = {
            key: self.values[key]
            for key in _SETUP_KEYS
            if self.values[key] != _KEY_MAP[key].default
        }
        return Scenario(name=self.values["scenario"], overrides=overrides)

    def scan_spec(self) -> ScanSpec:
        return ScanSpec(
            axis=self.values["axis"],
            start=self.values["start"],
            stop=self.values["stop"],
            step=self.values["step"],
            speed=self.values["speed"],
            fixed_dphi_i=self.values["fixed_dphi_i"],
            fixed_dphi_s=self.values["fixed_dphi_s"],
            offset_signal_nm=self.values["offset_signal_nm"],
            offset_idler_nm=self.values["offset_idler_nm"],
        )

    def noise(self) -> NoiseParams:
        return NoiseParams(
            enabled=self.values["noise.enabled"],
            seed=self.values["noise.seed"],
            exposure_s=self.values["noise.exposure_s"],
            ref_counts_a=self.values["noise.ref_counts_a"],
            ref_counts_b=self.values["noise.ref_counts_b"],
            accidental_window_s=self.values["noise.accidental_window_s"],
        )


def _default_values() -> dict:
    values = {k.name: k.default for k in _KEYS}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            values["noise.seed"] = int(env_seed)
        except ValueError:
            raise CliError(f"{SEED_ENV}: expected an integer, got {env_seed!r}")
    return values


def _assign(values: dict, key: str, raw: str, origin: str) -> None:
    spec = _KEY_MAP.get(key)
    if spec is None:
        raise CliError(f"unknown configuration key {key!r} ({origin})")
    try:
        values[key] = spec.parse(raw)
    except (ValueError, InvalidParameterError) as exc:
        raise CliError(f"{key}: cannot parse {raw!r} ({origin}): {exc}")


def parse_config(path: str | None, assignments: list[str]) -> RunConfig:
    """Resolve defaults, an optional ``key = value`` file, then flag assignments."""
    values = _default_values()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.readlines()
        except OSError as exc:
            raise CliError(f"cannot read config {path!r}: {exc}", EXIT_IO)
        for lineno, line in enumerate(lines, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise CliError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
            key, _, raw = text.partition("=")
            _assign(values, key.strip(), raw.strip(), f"{path}:{lineno}")
    for item in assignments:
        if "=" not in item:
            raise CliError(f"--set needs key=value, got {item!r}")
        key, _, raw = item.partition("=")
        _assign(values, key.strip(), raw.strip(), "--set flag")
    return RunConfig(values=values)


def _canonical_command(subcommand: str, cfg: RunConfig) -> str:
    """The self-reproducing invocation embedded in output metadata.

    Lists every key whose value differs from the packaged default, plus the
    seed (which may come from the environment) so reruns never depend on it.
    The output path is deliberately absent: the table's bytes do not depend
    on where it is written, and rerunning the command prints the identical
    table to stdout.
    """
    parts = [PROG, subcommand]
    for key in _KEY_MAP:
        value = cfg.values[key]
        if key == "noise.seed" or value != _KEY_MAP[key].default:
            parts.append(f"--set {key}={_fmt(value)}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Output writing
# ---------------------------------------------------------------------------

def _write_atomic(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".eraser-sim-")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise CliError(f"cannot write {path!r}: {exc}", EXIT_IO)


def _metadata_lines(subcommand: str, cfg: RunConfig) -> list[str]:
    lines = [f"# {PROG} v{__version__}"]
    lines.append(f"# command = {_canonical_command(subcommand, cfg)}")
    for key in _KEY_MAP:
        lines.append(f"# {key} = {_fmt(cfg.values[key])}")
    return lines


def _table_text(table: ScanTable, cfg: RunConfig) -> str:
    out = io.StringIO()
    for line in _metadata_lines("simulate", cfg):
        out.write(line + "\n")
    with_counts = table.counts_a is not None
    columns = ["x", "r_a", "r_b", "r_ab"]
    if with_counts:
        columns += ["counts_a", "counts_b", "counts_ab"]
    out.write(",".join(columns) + "\n")
    for k in range(len(table)):
        row = [
            f"{table.x[k]:.12g}",
            f"{table.r_a[k]:.12g}",
            f"{table.r_b[k]:.12g}",
            f"{table.r_ab[k]:.12g}",
        ]
        if with_counts:
            row += [
                str(int(table.counts_a[k])),
                str(int(table.counts_b[k])),
                str(int(table.counts_ab[k])),
            ]
        out.write(",".join(row) + "\n")
    return out.getvalue()


def _table_json(table: ScanTable, cfg: RunConfig) -> str:
    with_counts = table.counts_a is not None
    columns = ["x", "r_a", "r_b", "r_ab"]
    if with_counts:
        columns += ["counts_a", "counts_b", "counts_ab"]
    rows = []
    for k in range(len(table)):
        row = [
            float(f"{table.x[k]:.12g}"),
            float(f"{table.r_a[k]:.12g}"),
            float(f"{table.r_b[k]:.12g}"),
            float(f"{table.r_ab[k]:.12g}"),
        ]
        if with_counts:
            row += [int(table.counts_a[k]), int(table.counts_b[k]), int(table.counts_ab[k])]
        rows.append(row)
    doc = {
        "version": __version__,
        "command": _canonical_command("simulate", cfg),
        "config": {key: _fmt(cfg.values[key]) for key in _KEY_MAP},
        "columns": columns,
        "rows": rows,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    table = run_scan(cfg.scenario(), cfg.scan_spec(), cfg.noise())
    if cfg.values["output.format"] == "json":
        text = _table_json(table, cfg)
    elif cfg.values["output.format"] == "csv":
        text = _table_text(table, cfg)
    else:
        raise CliError(f"output.format must be csv or json, got {cfg.values['output.format']!r}")
    _write_atomic(cfg.out_path, text)
    return EXIT_OK


def _read_table_csv(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read {path!r}: {exc}", EXIT_IO)
    metadata: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in lines:
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, raw = body.partition("=")
                metadata[key.strip()] = raw.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
            continue
        rows.append([float(v) for v in line.split(",")])
    if header is None or not rows:
        raise CliError(f"{path!r} holds no scan table")
    return metadata, header, np.asarray(rows)


def cmd_fit(path: str, column: str, period_hint: float | None, out_path: str | None) -> int:
    metadata, header, data = _read_table_csv(path)
    if column not in header:
        raise CliError(f"column {column!r} not in {path!r} (columns: {', '.join(header)})")
    x = data[:, header.index("x")] if "x" in header else data[:, 0]
    y = data[:, header.index(column)]
    y_kind = "poisson-counts" if column.startswith("counts") else "analytic-rate"
    exposure = float(metadata.get("noise.exposure_s", 1.0)) if y_kind == "poisson-counts" else None
    fit = fit_sinusoid(FringeSamples(x=x, y=y, y_kind=y_kind, exposure=exposure), period_hint)
    report = {
        "input": path,
        "column": column,
        "offset": fit.offset,
        "amplitude": fit.amplitude,
        "period": fit.period,
        "phase": fit.phase,
        "visibility": fit.visibility,
        "residual_rms": fit.residual_rms,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if out_path:
        _write_atomic(out_path, text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_visibility_curve(cfg: RunConfig) -> int:
    # The closed-form visibility law holds for balanced splitters; unless the
    # user pins bs1.t, this command uses the balanced value instead of the
    # simulate default.
    if cfg.values["bs1.t"] == _KEY_MAP["bs1.t"].default:
        cfg.values["bs1.t"] = BALANCED_T
    scenario = cfg.scenario()
    if scenario.name not in (ScenarioName.ERASER, ScenarioName.VISIBILITY_CURVE):
        raise CliError("visibility-curve needs scenario = eraser or visibility-curve")
    start, stop, step = (cfg.values[k] for k in ("curve.start", "curve.stop", "curve.step"))
    if step <= 0 or not start < stop:
        raise CliError("curve grid needs step > 0 and start < stop")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    grid = start + step * np.arange(n)
    curve = visibility_curve(scenario, grid)
    out = io.StringIO()
    for line in _metadata_lines("visibility-curve", cfg):
        out.write(line + "\n")
    out.write("dphi_i,visibility\n")
    for dphi_i, vis in curve:
        out.write(f"{dphi_i:.12g},{vis:.12g}\n")
    _write_atomic(cfg.out_path, out.getvalue())
    return EXIT_OK


def cmd_oracle_check(cfg: RunConfig, threshold: float | None) -> int:
    gain = cfg.values["oracle.gain"]
    n_max = cfg.values["oracle.nmax"]
    if threshold is None:
        threshold = 5e-4  # calibrated for gain 0.01; deviations scale as gain^2
    setup = resolve_scenario(cfg.scenario())
    if gain == 0.0:
        print("gain 0: both sources off, all rates vanish identically; nothing to compare")
        return EXIT_OK
    phase_grid = np.linspace(0.0, 2.0 * math.pi, cfg.values["oracle.phase_points"], endpoint=False)
    s_points = cfg.values["oracle.dphi_s_points"]
    dphi_s_grid = None
    if s_points > 1:
        dphi_s_grid = np.linspace(0.0, 2.0 * math.pi, s_points, endpoint=False)
    reports = oracle_compare(setup, gain=gain, n_max=n_max, phase_grid=phase_grid, dphi_s_grid=dphi_s_grid)
    worst = 0.0
    print(f"# oracle check: gain={gain:g} n_max={n_max} threshold={threshold:g}")
    print("dphi_i,dphi_s,dev_r_a,dev_r_b,dev_r_ab,leakage")
    for rep in reports:
        d = rep.relative_deviations
        worst = max(worst, rep.max_deviation())
        print(
            f"{rep.dphi_i:.6g},{rep.dphi_s:.6g},{d.r_a:.6g},{d.r_b:.6g},{d.r_ab:.6g},"
            f"{rep.truncation_leakage:.3g}"
        )
    verdict = "PASS" if worst <= threshold else "FAIL"
    print(f"# max deviation {worst:.6g} vs threshold {threshold:g}: {verdict}")
    return EXIT_OK if worst <= threshold else EXIT_USAGE


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_config_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value configuration file")
    sub.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="set any configuration key (repeatable; overrides the file)",
    )
    sub.add_argument("--out", help="output path (default: stdout)")


_SIMULATE_FLAGS = {
    "scenario": "scenario",
    "axis": "axis",
    "start": "start",
    "stop": "stop",
    "step": "step",
    "speed": "speed",
    "fixed_dphi_i": "fixed_dphi_i",
    "fixed_dphi_s": "fixed_dphi_s",
    "seed": "noise.seed",
    "exposure": "noise.exposure_s",
    "format": "output.format",
}

_CURVE_FLAGS = {
    "scenario": "scenario",
    "start": "curve.start",
    "stop": "curve.stop",
    "step": "curve.step",
    "format": "output.format",
}

_ORACLE_FLAGS = {
    "scenario": "scenario",
    "gain": "oracle.gain",
    "nmax": "oracle.nmax",
    "phase_points": "oracle.phase_points",
    "dphi_s_points": "oracle.dphi_s_points",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Coupled-interferometer photon-pair simulator and fringe toolkit",
    )
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sim = subs.add_parser("simulate", help="run a scenario scan, write a scan table")
    _add_config_options(sim)
    sim.add_argument("--scenario", help="scenario name (default eraser)")
    sim.add_argument("--axis", help="signal-path | idler-path | time-joint")
    sim.add_argument("--start", help="scan start (nm, or s for time-joint)")
    sim.add_argument("--stop", help="scan stop")
    sim.add_argument("--step", help="scan step (default 20)")
    sim.add_argument("--speed", help="trombone speed for time-joint (nm/s, default 20)")
    sim.add_argument("--fixed-dphi-i", dest="fixed_dphi_i", help="idler delay held fixed (rad)")
    sim.add_argument("--fixed-dphi-s", dest="fixed_dphi_s", help="signal delay held fixed (rad)")
    sim.add_argument("--noise", action="store_true", help="synthesize Poisson counts")
    sim.add_argument("--seed", help="noise seed (also via ERASER_SIM_SEED)")
    sim.add_argument("--exposure", help="integration time per point (s)")
    sim.add_argument("--format", help="csv | json (default csv)")

    fit = subs.add_parser("fit", help="sinusoid-fit one column of a scan table")
    fit.add_argument("input", help="CSV produced by simulate (or same schema)")
    fit.add_argument("--column", default="r_ab", help="column to fit (default r_ab)")
    fit.add_argument("--period-hint", type=float, default=None, help="optional period guess")
    fit.add_argument("--out", help="also write the JSON report here")

    curve = subs.add_parser(
        "visibility-curve",
        help="signal-fringe visibility vs idler delay (balanced bs1 unless overridden)",
    )
    _add_config_options(curve)
    curve.add_argument("--scenario", help="eraser or visibility-curve")
    curve.add_argument("--start", help="first idler delay (rad, default 0)")
    curve.add_argument("--stop", help="last idler delay (rad, default 2*pi)")
    curve.add_argument("--step", help="idler delay step (rad, default pi/50)")
    curve.add_argument("--format", help="csv only")

    oracle = subs.add_parser("oracle-check", help="exact vs first-order rate comparison")
    _add_config_options(oracle)
    oracle.add_argument("--scenario", help="scenario to compare (default eraser)")
    oracle.add_argument("--gain", help="squeezer strength (<= 0.05, default 0.01)")
    oracle.add_argument("--nmax", help="photon-number cutoff (default 3)")
    oracle.add_argument("--phase-points", dest="phase_points", help="idler-delay grid size (default 16)")
    oracle.add_argument("--dphi-s-points", dest="dphi_s_points", help="signal-delay grid size (default 1: hold dphi_s)")
    oracle.add_argument("--threshold", type=float, default=None, help="pass threshold (default 5e-4, calibrated for gain 0.01)")

    return parser


def _config_from_args(args, flag_map: dict[str, str], noise_flag: bool = False) -> RunConfig:
    assignments = list(args.assignments)
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            assignments.append(f"{key}={value}")
    if noise_flag and getattr(args, "noise", False):
        assignments.append("noise.enabled=true")
    cfg = parse_config(args.config, assignments)
    cfg.out_path = args.out
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "simulate":
            return cmd_simulate(_config_from_args(args, _SIMULATE_FLAGS, noise_flag=True))
        if args.subcommand == "fit":
            return cmd_fit(args.input, args.column, args.period_hint, args.out)
        if args.subcommand == "visibility-curve":
            return cmd_visibility_curve(_config_from_args(args, _CURVE_FLAGS))
        if args.subcommand == "oracle-check":
            return cmd_oracle_check(_config_from_args(args, _ORACLE_FLAGS), args.threshold)
        raise CliError(f"unknown subcommand {args.subcommand!r}")
    except CliError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return exc.code
    except TruncationError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidParameterError, ContractViolationError, UndefinedVisibilityError) as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
