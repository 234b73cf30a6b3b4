"""Command-line front end.

Subcommands:

  run CONFIG          -- execute one configured simulation
  verify              -- structure-verification battery, pass/fail table
  convergence CONFIG  -- resolution sweep with observed orders
  compare CONFIG      -- box vs spectral-midpoint vs reference from one state

Configuration is a flat text file of ``key = value`` lines with dotted
sections (``scenario.a = 0.2``).  Unknown keys are rejected so a typo cannot
silently fall back to a default.  Every output directory receives the fully
resolved configuration plus version identifiers in metadata.json, and CSV
numbers are written with 17 significant digits so reruns are byte-identical.

Exit codes: 0 success, 1 run failure, 2 configuration failure.  Failures
print a single JSON object describing the error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, plots
from .core import DiffOperator, Grid1D, Params
from .errors import ConfigError, SgnError
from .integrators import BoxSchemeConfig, run_simulation
from .reference import m_from_u, rk4_run, to_physical
from .scenarios import from_name
from .structure import COMPONENT_NAMES, lift, project
from .verification import format_battery, run_battery

SCHEMES = ("box", "spectral-midpoint", "reference-rk4")
OPERATORS = ("fd2", "fd4", "fourier")
SCENARIOS = ("still-water", "uniform-stream", "gaussian-hump", "solitary-wave")

# key -> (parser, default); required keys carry the REQUIRED sentinel
_REQUIRED = object()


def _boolean(text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONFIG_SCHEMA = {
    "scheme": (str, _REQUIRED),
    "grid.L": (float, _REQUIRED),
    "grid.n": (int, _REQUIRED),
    "dt": (float, _REQUIRED),
    "t_end": (float, _REQUIRED),
    "g": (float, 1.0),
    "scenario.name": (str, _REQUIRED),
    "scenario.h0": (float, 1.0),
    "scenario.a": (float, 0.2),
    "scenario.width": (float, 1.0),
    "scenario.U": (float, 0.0),
    "diff_operator": (str, "fourier"),
    "newton_tol": (float, 1e-11),
    "newton_max_iter": (int, 25),
    "highband_filter": (float, 0.15),
    "output_dir": (str, "sgnms-out"),
    "snapshot_stride": (int, 0),
    "diagnostics_stride": (int, 1),
    "seed": (int, 0),
    "snapshots_z": (_boolean, False),
    "plots": (_boolean, True),
    "resolutions": (str, "65,129,257"),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]


def parse_config(path) -> RunConfig:
    """Read and validate a key = value config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        parser, _default = CONFIG_SCHEMA[key]
        try:
            raw[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
    missing = [k for k, (_p, d) in CONFIG_SCHEMA.items() if d is _REQUIRED and k not in raw]
    if missing:
        raise ConfigError(f"{path}: missing required keys: {', '.join(sorted(missing))}")
    for key, (_p, default) in CONFIG_SCHEMA.items():
        raw.setdefault(key, default)
    _validate(raw)
    return RunConfig(raw)


def _validate(cfg: dict):
    def bad(msg):
        raise ConfigError(msg)

    if cfg["scheme"] not in SCHEMES:
        bad(f"scheme must be one of {SCHEMES}, got {cfg['scheme']!r}")
    if cfg["diff_operator"] not in OPERATORS:
        bad(f"diff_operator must be one of {OPERATORS}, got {cfg['diff_operator']!r}")
    if cfg["scenario.name"] not in SCENARIOS:
        bad(f"scenario.name must be one of {SCENARIOS}, got {cfg['scenario.name']!r}")
    if not cfg["grid.L"] > 0:
        bad(f"grid.L must be positive, got {cfg['grid.L']}")
    if cfg["grid.n"] < 8:
        bad(f"grid.n must be at least 8, got {cfg['grid.n']}")
    if not cfg["dt"] > 0:
        bad(f"dt must be positive, got {cfg['dt']}")
    if not cfg["t_end"] > 0:
        bad(f"t_end must be positive, got {cfg['t_end']}")
    if not cfg["g"] > 0:
        bad(f"g must be positive, got {cfg['g']}")
    if not cfg["newton_tol"] > 0:
        bad(f"newton_tol must be positive, got {cfg['newton_tol']}")
    if cfg["newton_max_iter"] < 1:
        bad(f"newton_max_iter must be at least 1, got {cfg['newton_max_iter']}")
    if not 0 <= cfg["highband_filter"] < 1:
        bad(f"highband_filter must lie in [0, 1), got {cfg['highband_filter']}")
    if not cfg["scenario.h0"] > 0:
        bad(f"scenario.h0 must be positive, got {cfg['scenario.h0']}")
    if cfg["snapshot_stride"] < 0 or cfg["diagnostics_stride"] < 1:
        bad("snapshot_stride must be >= 0 and diagnostics_stride >= 1")
    steps = cfg["t_end"] / cfg["dt"]
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
        bad(f"t_end = {cfg['t_end']} is not a positive integer multiple of dt = {cfg['dt']}")
    try:
        [int(tok) for tok in str(cfg["resolutions"]).split(",") if tok.strip()]
    except ValueError:
        bad(f"resolutions must be comma-separated integers, got {cfg['resolutions']!r}")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return format(float(value), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def write_metadata(outdir: Path, cfg: RunConfig, extra=None):
    import scipy

    grid_n = cfg["grid.n"]
    meta = {
        "config": {k: cfg.values[k] for k in sorted(cfg.values)},
        "package": "sgnms",
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "grid_n_odd": grid_n % 2 == 1,
    }
    if extra:
        meta.update(extra)
    (outdir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _scenario_kwargs(cfg: RunConfig) -> dict:
    return {
        "h0": cfg["scenario.h0"],
        "a": cfg["scenario.a"],
        "width": cfg["scenario.width"],
        "U": cfg["scenario.U"],
    }


def _records_to_rows(records):
    return [
        [r.t, r.mass, r.momentum, r.energy, r.tangential, r.E_int, r.I_int,
         r.ms_law_max, r.newton_iters]
        for r in records
    ]


def _snapshot_rows(zs, with_z):
    grid = zs.grid
    cols = [grid.x, zs.z[0], zs.z[2]]
    if with_z:
        cols.extend(zs.z[c] for c in range(8))
    return list(zip(*cols))


def _snapshot_header(with_z):
    header = ["x", "h", "u"]
    if with_z:
        header.extend(f"z_{name}" for name in COMPONENT_NAMES)
    return header


def _run_one_scheme(scheme, cfg: RunConfig, outdir: Path | None, params, grid, op,
                    scenario, suffix=""):
    """Execute one scheme; returns (records, final PhysicalState)."""
    t_end = cfg["t_end"]
    diag_stride = cfg["diagnostics_stride"]
    snap_stride = cfg["snapshot_stride"]
    with_z = cfg["snapshots_z"]
    records = []
    snap_count = [0]

    def snap_name():
        name = f"snap{suffix}_{snap_count[0]:06d}.csv"
        snap_count[0] += 1
        return name

    def emit_snapshot(zs):
        if outdir is not None:
            write_csv(outdir / snap_name(), _snapshot_header(with_z),
                      _snapshot_rows(zs, with_z))

    initial_state = scenario.build(grid)
    if scheme == "reference-rk4":
        hm0 = m_from_u(initial_state, op)
        zs0 = lift(initial_state, op)
        records.append(diagnostics.make_record(zs0, op, params))
        emit_snapshot(zs0)
        n_steps = round(t_end / cfg["dt"])

        def on_step(k, state):
            if k % diag_stride == 0 or k == n_steps:
                zsk = lift(to_physical(state, op), op)
                records.append(diagnostics.make_record(zsk, op, params))
            if snap_stride and (k % snap_stride == 0 or k == n_steps):
                emit_snapshot(lift(to_physical(state, op), op))

        traj = rk4_run(hm0, cfg["dt"], t_end, op, params, callbacks=[on_step],
                       store_stride=max(n_steps, 1))
        final = to_physical(traj.states[-1], op)
        if not snap_stride:
            emit_snapshot(lift(final, op))
        return records, final

    zs0 = lift(initial_state, op)
    scheme_cfg = BoxSchemeConfig(
        dt=cfg["dt"],
        newton_tol=cfg["newton_tol"],
        newton_max_iter=cfg["newton_max_iter"],
        highband_filter=cfg["highband_filter"],
    )
    records.append(diagnostics.make_record(zs0, op, params))
    emit_snapshot(zs0)
    n_steps = round(t_end / cfg["dt"])

    def on_step(k, state, report):
        if k % diag_stride == 0 or k == n_steps:
            records.append(diagnostics.make_record(
                state, op, params, ms_law_max=report.residual,
                newton_iters=report.iterations))
        if snap_stride and (k % snap_stride == 0 or k == n_steps):
            emit_snapshot(state)

    traj = run_simulation(zs0, scheme, scheme_cfg, params, t_end,
                          callbacks=[on_step], store_stride=max(n_steps, 1))
    if not snap_stride:
        emit_snapshot(traj.final)
    return records, project(traj.final)


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    params = Params(g=cfg["g"])
    grid = Grid1D(cfg["grid.L"], cfg["grid.n"])
    op = DiffOperator(grid, cfg["diff_operator"])
    scenario = from_name(cfg["scenario.name"], params, **_scenario_kwargs(cfg))
    if cfg["scheme"] == "box" and not grid.n_is_odd:
        print(f"note: grid.n = {grid.n} is even; the box scheme prefers odd n "
              "(checkerboard mode makes the Jacobian singular)", file=sys.stderr)
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    records, final = _run_one_scheme(cfg["scheme"], cfg, outdir, params, grid, op, scenario)
    write_csv(outdir / "diagnostics.csv", diagnostics.DiagnosticsRecord.CSV_FIELDS,
              _records_to_rows(records))
    write_metadata(outdir, cfg)
    if cfg["plots"]:
        plots.plot_diagnostics(records, outdir / "diagnostics.png")
        profiles = [("initial", scenario.build(grid).h), (f"t = {cfg['t_end']:g}", final.h)]
        if scenario.has_exact:
            profiles.append(("exact", scenario.exact(grid, cfg["t_end"]).h))
        plots.plot_profiles(grid, profiles, outdir / "profiles.png")
    print(f"run complete: {len(records)} diagnostics records -> {outdir}")
    return 0


def cmd_verify(args) -> int:
    params = Params(g=args.g)
    results = run_battery(params, seed=args.seed)
    print(format_battery(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_convergence(args) -> int:
    cfg = parse_config(args.config)
    resolutions = [int(tok) for tok in
                   (args.resolutions or cfg["resolutions"]).split(",") if tok.strip()]
    if not resolutions:
        raise ConfigError("no resolutions given")
    params = Params(g=cfg["g"])
    scenario = from_name(cfg["scenario.name"], params, **_scenario_kwargs(cfg))
    if not scenario.has_exact:
        raise ConfigError(
            f"scenario {cfg['scenario.name']!r} has no exact solution for a convergence study")
    table = diagnostics.convergence_study(
        scenario, cfg["scheme"], resolutions, params,
        length=cfg["grid.L"], t_end=cfg["t_end"],
        dt_ref=cfg["dt"], n_ref=cfg["grid.n"],
        op_kind=cfg["diff_operator"], newton_tol=cfg["newton_tol"],
    )
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    rows = [[r.n, r.dx, r.dt,
             r.err_l2, r.err_linf,
             math.nan if r.observed_order is None else r.observed_order]
            for r in table.rows]
    write_csv(outdir / "convergence.csv",
              ["n", "dx", "dt", "err_l2_h", "err_linf_h", "observed_order"], rows)
    write_metadata(outdir, cfg, extra={"resolutions": resolutions})
    if cfg["plots"]:
        plots.plot_convergence(table, outdir / "convergence.png")
    print(table.format())
    failed = [r for r in table.rows if r.error is not None]
    return 1 if failed else 0


def cmd_compare(args) -> int:
    cfg = parse_config(args.config)
    params = Params(g=cfg["g"])
    grid = Grid1D(cfg["grid.L"], cfg["grid.n"])
    op = DiffOperator(grid, cfg["diff_operator"])
    scenario = from_name(cfg["scenario.name"], params, **_scenario_kwargs(cfg))
    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    all_records = {}
    finals = {}
    for scheme in SCHEMES:
        records, final = _run_one_scheme(scheme, cfg, outdir, params, grid, op,
                                         scenario, suffix=f"_{scheme}")
        all_records[scheme] = records
        finals[scheme] = final
        write_csv(outdir / f"diagnostics_{scheme}.csv",
                  diagnostics.DiagnosticsRecord.CSV_FIELDS, _records_to_rows(records))
    pair_rows = []
    names = list(SCHEMES)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            norms = diagnostics.error_norms(finals[a], finals[b])
            pair_rows.append([f"{a}/{b}", norms["l2_h"], norms["linf_h"],
                              norms["l2_u"], norms["linf_u"]])
    with open(outdir / "compare_summary.csv", "w", encoding="utf-8", newline="\n") as f:
        f.write("pair,l2_h,linf_h,l2_u,linf_u\n")
        for row in pair_rows:
            f.write(row[0] + "," + ",".join(_fmt(v) for v in row[1:]) + "\n")
    write_metadata(outdir, cfg)
    if cfg["plots"]:
        series = {}
        for scheme, records in all_records.items():
            t = np.array([r.t for r in records])
            e = np.array([r.energy for r in records])
            series[scheme] = (t, e - e[0])
        plots.plot_compare(series, outdir / "compare.png")
    print(f"compared {len(SCHEMES)} schemes -> {outdir}")
    for row in pair_rows:
        print(f"  {row[0]}: L2(h) = {row[1]:.6e}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sgnms",
        description="Multi-symplectic Serre-Green-Naghdi solvers and verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured simulation")
    p_run.add_argument("config", help="path to the run configuration file")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run the structure-verification battery")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--g", type=float, default=1.0)
    p_verify.set_defaults(func=cmd_verify)

    p_conv = sub.add_parser("convergence", help="resolution sweep with observed orders")
    p_conv.add_argument("config")
    p_conv.add_argument("--resolutions", help="comma-separated grid sizes (overrides config)")
    p_conv.set_defaults(func=cmd_convergence)

    p_cmp = sub.add_parser("compare", help="run all schemes from identical initial data")
    p_cmp.add_argument("config")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "ConfigError", "message": str(exc)}))
        return 2
    except SgnError as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("step_index", "time"):
            if hasattr(exc, attr):
                payload[attr] = getattr(exc, attr)
        print(json.dumps(payload))
        return 1


if __name__ == "__main__":
    sys.exit(main())
