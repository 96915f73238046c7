"""Command-line front end.

    fbpde simulate --phi cubic --N 64 --initial riemann:0.3,1.8,32 --out run/
    fbpde steady   --phi cubic --N 6 --mean 1.0 --out atlas/
    fbpde riemann  --N 64 --initial riemann:0.58,2.0,32 --out rp/
    fbpde sweep    --phi perona-malik --initial random:2,1 --grid seed=0,1,2 --out sw/
    fbpde measure  --from run/trajectory.csv --phi cubic --out run/

Settings are resolved as defaults < ``--config`` TOML file < command-line
flags. Exit codes: 0 success, 1 configuration error, 2 blow-up, 3 at least
one sweep cell failed. Failures print one line ``fbpde-error {json}`` on
standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import lyapunov_series
from .dynamics import BlowUpError, SolverConfig, Trajectory, integrate
from .grid import GridDomain, GridFunction
from .measures import (
    coarsening_indicator,
    coarsening_report,
    decompose,
    default_cutoff,
    default_window,
    two_phase_check,
    young_histogram,
)
from .nonlinearity import Nonlinearity, get_nonlinearity
from .riemann import (
    RiemannData,
    TransitionMonitor,
    interface_counts,
    make_riemann,
    no_transition_predicate,
)
from .steady_states import (
    check_bound,
    enumerate_steady_states,
    stability_eigen_oracle,
    stability_recursion,
    steady_residual,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_SWEEP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    phi: str = "cubic"
    N: int = 64
    initial: str = "constant:1.0"
    t_end: float = 1.0
    dt_policy: str = "cfl"
    safety: float = 0.9
    record_every: float | None = None
    seed: int = 0
    cutoff: float | None = None
    mean: float | None = None
    out: str = "fbpde-out"
    workers: int = 1
    bins: int = 32
    window: int | None = None
    grid: dict[str, list] = field(default_factory=dict)

    # fields that do not change any result and stay out of metadata
    _PLUMBING = ("out", "workers", "grid")

    def validate(self) -> None:
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not self.t_end >= 0:
            raise ConfigError("t_end must be >= 0")
        if self.dt_policy not in ("cfl", "derivation"):
            raise ConfigError(f"dt_policy must be 'cfl' or 'derivation', got {self.dt_policy!r}")
        if self.cutoff is not None and not self.cutoff > 0:
            raise ConfigError("cutoff must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.phi.startswith("custom:") and not Path(self.phi[7:]).is_file():
            raise ConfigError(f"phi table not found: {self.phi[7:]}")
        if self.initial.startswith("csv:") and not Path(self.initial[4:]).is_file():
            raise ConfigError(f"initial-data file not found: {self.initial[4:]}")

    def metadata(self) -> dict:
        d = asdict(self)
        for k in self._PLUMBING:
            d.pop(k, None)
        return d

    def solver(self) -> SolverConfig:
        record = self.record_every if self.record_every is not None else self.t_end / 100 or None
        try:
            return SolverConfig(
                t_end=self.t_end,
                dt_policy=self.dt_policy,
                safety=self.safety,
                record_every=record,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_FIELD_TYPES = {
    "phi": str,
    "N": int,
    "initial": str,
    "t_end": float,
    "dt_policy": str,
    "safety": float,
    "record_every": float,
    "seed": int,
    "cutoff": float,
    "mean": float,
    "out": str,
    "workers": int,
    "bins": int,
    "window": int,
}


def _coerce(key: str, value):
    kind = _FIELD_TYPES[key]
    try:
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {kind.__name__}") from None


def load_config_file(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out: dict = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key in ("grid", "sweep"):
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: [{key}] must be a table")
            out["grid"] = {k: list(v) if isinstance(v, list) else [v] for k, v in value.items()}
        elif key in _FIELD_TYPES:
            out[key] = _coerce(key, value)
        else:
            raise ConfigError(f"{path}: unknown key {key!r}")
    return out


def _parse_grid(items: list[str] | None) -> dict[str, list]:
    grid: dict[str, list] = {}
    for item in items or []:
        key, sep, values = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _FIELD_TYPES:
            raise ConfigError(f"bad --grid entry {item!r}; expected KEY=v1,v2 with a config key")
        # initial-data specs contain commas, so they are separated by '|'
        parts = values.split("|") if key == "initial" else values.split(",")
        grid[key] = [p.strip() for p in parts if p.strip()]
    return grid


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    cli_grid = _parse_grid(getattr(args, "grid", None))
    if cli_grid:
        values["grid"] = {**values.get("grid", {}), **cli_grid}
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


# Initial data


def _floats(text: str, count: int | tuple[int, ...], what: str) -> list[float]:
    counts = (count,) if isinstance(count, int) else count
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError:
        raise ConfigError(f"{what}: expected numbers, got {text!r}") from None
    if len(vals) not in counts:
        raise ConfigError(f"{what}: expected {' or '.join(map(str, counts))} values, got {len(vals)}")
    return vals


def build_initial(cfg: ExperimentConfig, n: Nonlinearity) -> GridFunction:
    kind, _, arg = cfg.initial.partition(":")
    dom = GridDomain(cfg.N)
    if kind == "constant":
        (c,) = _floats(arg, 1, "constant")
        if c < 0:
            raise ConfigError("constant initial value must be >= 0")
        return dom.constant(c)
    if kind == "riemann":
        w1, w3, split = _floats(arg, 3, "riemann")
        if not float(split).is_integer():
            raise ConfigError("riemann split index must be an integer")
        try:
            return make_riemann(n, RiemannData(w1, w3, int(split)), cfg.N)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if kind == "random":
        vals = _floats(arg, (2, 3), "random")
        mean, amp = vals[:2]
        seed = int(vals[2]) if len(vals) == 3 else cfg.seed
        if amp < 0:
            raise ConfigError("random amplitude must be >= 0")
        rng = np.random.Generator(np.random.PCG64(seed))
        u = rng.uniform(mean - amp, mean + amp, size=cfg.N + 1)
        return dom.function(np.clip(u, 0.0, None))
    if kind == "csv":
        try:
            data = np.atleast_2d(np.genfromtxt(arg, delimiter=",", comments="#"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read initial data {arg}: {exc}") from None
        if data.size and np.isnan(data[0]).all():
            data = data[1:]  # header row
        u = data[:, -1]
        if len(u) != cfg.N + 1:
            raise ConfigError(f"{arg}: {len(u)} values for N={cfg.N} (need N+1)")
        if np.any(u < 0) or not np.all(np.isfinite(u)):
            raise ConfigError(f"{arg}: values must be finite and nonnegative")
        return dom.function(u)
    raise ConfigError(f"unknown initial-data kind {kind!r}")


def load_nonlinearity(cfg: ExperimentConfig) -> Nonlinearity:
    try:
        return get_nonlinearity(cfg.phi)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"phi {cfg.phi!r}: {exc}") from None


# Output


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _num(x):
    """Plain Python scalars so csv/json print the shortest round-trip form."""
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def _cutoff(cfg: ExperimentConfig, n: Nonlinearity) -> float:
    return cfg.cutoff if cfg.cutoff is not None else default_cutoff(cfg.N, n.u_minus)


def _spinodal_counts(n: Nonlinearity, traj: Trajectory):
    if n.has_third_branch:
        return interface_counts(n, traj)
    return np.count_nonzero(traj.states > n.u_minus, axis=1)


@dataclass
class RunResult:
    cfg: ExperimentConfig
    n: Nonlinearity
    u0: GridFunction
    traj: Trajectory
    events: list
    cutoff: float


def run_simulation(cfg: ExperimentConfig, track_events: bool = True) -> RunResult:
    n = load_nonlinearity(cfg)
    u0 = build_initial(cfg, n)
    mon = TransitionMonitor(n) if (track_events and n.has_third_branch) else None
    traj = integrate(n, u0, cfg.solver(), monitor=mon)
    return RunResult(cfg, n, u0, traj, list(mon.events) if mon else [], _cutoff(cfg, n))


def write_run(res: RunResult, out: Path) -> dict:
    """Write the standard per-run files; returns the summary numbers."""
    traj, n = res.traj, res.n
    x = traj.domain.nodes
    rows = (
        (_num(t), _num(xi), _num(ui)) for t, s in zip(traj.times, traj.states) for xi, ui in zip(x, s)
    )
    _atomic_write(out / "trajectory.csv", _csv_text(["t", "x", "u"], rows))

    u0_mass = float(traj.masses[0])
    L = lyapunov_series(n, traj)
    sing = coarsening_indicator(traj, u0_mass, res.cutoff) if u0_mass > 0 else np.zeros(len(traj))
    spin = _spinodal_counts(n, traj)
    diag_rows = [
        tuple(_num(v) for v in row)
        for row in zip(traj.times, traj.masses, L, traj.minima, traj.maxima, spin, sing)
    ]
    header = ["t", "mass", "lyapunov", "min_u", "max_u", "interface_count", "singular_fraction"]
    _atomic_write(out / "diagnostics.csv", _csv_text(header, diag_rows))
    _atomic_write(out / "events.jsonl", "".join(e.to_json() + "\n" for e in res.events))
    dec = decompose(traj.final, u0_mass, res.cutoff)
    _atomic_write(out / "decomposition.json", _json_text({"t": float(traj.times[-1]), **dec.to_json()}))
    meta = {
        "config": res.cfg.metadata(),
        "version": __version__,
        "rng": {"generator": "PCG64", "seed": res.cfg.seed},
        "nonlinearity": {"name": n.name, "u_minus": n.u_minus, "u_plus": n.u_plus},
        "cutoff": res.cutoff,
        "dt": traj.dt,
        "n_steps": traj.n_steps,
        "converged": traj.converged,
        "final_residual": traj.final_residual,
    }
    _atomic_write(out / "metadata.json", _json_text(meta))
    up = sum(1 for e in res.events if e.direction == "up")
    return {
        "final_lyapunov": float(L[-1]),
        "singular_fraction_initial": float(sing[0]),
        "singular_fraction_final": float(sing[-1]),
        "n_up": up,
        "n_down": len(res.events) - up,
        "max_interface": int(spin.max()),
        "converged": bool(traj.converged),
    }


# Subcommands


def cmd_simulate(cfg: ExperimentConfig) -> int:
    res = run_simulation(cfg)
    write_run(res, Path(cfg.out))
    return EXIT_OK


def cmd_riemann(cfg: ExperimentConfig) -> int:
    if not cfg.initial.startswith("riemann:"):
        raise ConfigError("riemann needs --initial riemann:omega1,omega3,split")
    n = load_nonlinearity(cfg)
    if not n.has_third_branch:
        raise ConfigError("riemann runs need a nonlinearity with finite u_plus")
    w1, w3, split = _floats(cfg.initial.partition(":")[2], 3, "riemann")
    data = RiemannData(w1, w3, int(split))
    res = run_simulation(cfg)
    summary = write_run(res, Path(cfg.out))
    final = res.traj.final
    report = {
        "omega1": w1,
        "omega3": w3,
        "split": int(split),
        "no_transition_predicate": no_transition_predicate(n, data),
        "interface_width": summary["max_interface"],
        "n_up": summary["n_up"],
        "n_down": summary["n_down"],
        "triggers_hold": all(e.trigger_holds for e in res.events),
        "converged": summary["converged"],
        "final_two_phase": two_phase_check(n, final),
    }
    _atomic_write(Path(cfg.out) / "riemann.json", _json_text(report))
    return EXIT_OK


def cmd_steady(cfg: ExperimentConfig) -> int:
    if cfg.mean is None:
        raise ConfigError("steady needs --mean")
    if not cfg.mean > 0:
        raise ConfigError("mean must be positive")
    n = load_nonlinearity(cfg)
    rows = []
    for s in enumerate_steady_states(n, cfg.N, cfg.mean):
        rec = stability_recursion(n, s).verdict
        ora = stability_eigen_oracle(n, s).verdict
        bound = "" if s.is_homogeneous else check_bound(n, s)
        w = ["" if o is None else _num(o) for o in s.omegas]
        rows.append(
            (*s.counts, _num(s.level), *w, rec.value, ora.value, bound, _num(steady_residual(n, s)))
        )
    header = [
        "n1", "n2", "n3", "c", "omega1", "omega2", "omega3",
        "verdict_recursion", "verdict_oracle", "bound_holds", "rhs_inf",
    ]  # fmt: skip
    out = Path(cfg.out)
    _atomic_write(out / "atlas.csv", _csv_text(header, rows))
    _atomic_write(out / "metadata.json", _json_text({"config": cfg.metadata(), "version": __version__}))
    return EXIT_OK


def _sweep_cells(cfg: ExperimentConfig) -> list[dict]:
    if not cfg.grid:
        raise ConfigError("sweep needs a non-empty parameter grid (--grid KEY=v1,v2)")
    keys = sorted(cfg.grid)
    for k in keys:
        if k not in _FIELD_TYPES or k in ExperimentConfig._PLUMBING:
            raise ConfigError(f"cannot sweep over {k!r}")
        if not cfg.grid[k]:
            raise ConfigError(f"grid entry {k!r} is empty")
    cells = [{}]
    for k in keys:
        cells = [{**c, k: _coerce(k, v)} for c in cells for v in cfg.grid[k]]
    return cells


def _run_cell(job: tuple[int, dict, dict, str]) -> dict:
    index, base, params, out = job
    row = {"cell": index, **params}
    try:
        cfg = ExperimentConfig(**{**base, **params, "out": out, "grid": {}, "workers": 1})
        cfg.validate()
        res = run_simulation(cfg)
        row.update(write_run(res, Path(out)))
        if not res.n.has_third_branch:
            rep = coarsening_report(res.n, res.traj, float(res.traj.masses[0]), res.cutoff)
            row["coarsening"] = rep.label
        row["status"] = "ok"
    except BlowUpError as exc:
        row["status"] = f"blow-up: {exc}"
    except Exception as exc:  # recorded per cell, reported through the exit code
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(cfg: ExperimentConfig) -> int:
    cells = _sweep_cells(cfg)
    base = {k: v for k, v in asdict(cfg).items() if k not in ExperimentConfig._PLUMBING}
    out = Path(cfg.out)
    jobs = [(i, base, p, str(out / "cells" / f"{i:04d}")) for i, p in enumerate(cells)]
    if cfg.workers == 1 or len(jobs) == 1:
        rows = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    keys = sorted(cfg.grid)
    stats = [
        "final_lyapunov", "singular_fraction_initial", "singular_fraction_final",
        "n_up", "n_down", "max_interface", "converged", "coarsening", "status",
    ]  # fmt: skip
    table = [[_num(r.get(k, "")) for k in ["cell", *keys, *stats]] for r in rows]
    _atomic_write(out / "summary.csv", _csv_text(["cell", *keys, *stats], table))
    _atomic_write(
        out / "metadata.json",
        _json_text({"config": cfg.metadata(), "grid": cfg.grid, "version": __version__}),
    )
    failed = [r for r in rows if r["status"] != "ok"]
    if failed:
        _report_error(EXIT_SWEEP, "sweep", f"{len(failed)} of {len(rows)} cells failed")
        return EXIT_SWEEP
    return EXIT_OK


def _read_trajectory_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from None
    times, inverse = np.unique(data[:, 0], return_inverse=True)
    per = np.bincount(inverse)
    if data.shape[1] != 3 or len(set(per.tolist())) != 1:
        raise ConfigError(f"{path}: not a long-format t,x,u trajectory")
    return times, data[:, 2].reshape(len(times), per[0])


def cmd_measure(cfg: ExperimentConfig, source: str | None, at_time: float | None) -> int:
    n = load_nonlinearity(cfg)
    if source:
        times, states = _read_trajectory_csv(Path(source))
        j = len(times) - 1 if at_time is None else int(np.argmin(np.abs(times - at_time)))
        u = GridFunction(GridDomain(states.shape[1] - 1), states[j])
        t, u0_mass = float(times[j]), float(u.spacing * states[0].sum())
    else:
        res = run_simulation(cfg, track_events=False)
        u, t, u0_mass = res.traj.final, float(res.traj.times[-1]), float(res.traj.masses[0])
    N = u.domain.n_intervals
    cutoff = cfg.cutoff if cfg.cutoff is not None else default_cutoff(N, n.u_minus)
    window = cfg.window if cfg.window is not None else default_window(N)
    try:
        hist = young_histogram(u, window, cfg.bins, cutoff)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(cfg.out)
    payload = {"t": t, "cutoff": cutoff, "window": window, "histograms": [h.to_json() for h in hist]}
    _atomic_write(out / "histogram.json", _json_text(payload))
    dec = decompose(u, u0_mass, cutoff)
    _atomic_write(out / "decomposition.json", _json_text({"t": t, **dec.to_json()}))
    return EXIT_OK


# Entry point


def _report_error(code: int, kind: str, message: str) -> None:
    line = json.dumps({"code": code, "kind": kind, "message": " ".join(str(message).split())})
    print(f"fbpde-error {line}", file=sys.stderr)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of printing usage, so errors stay on one stderr line."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--config", metavar="PATH", help="TOML file; flags override its values")
    g.add_argument("--phi", help="cubic, perona-malik or custom:PATH")
    g.add_argument("--N", type=int, help="number of grid intervals")
    g.add_argument(
        "--initial",
        help="constant:C | riemann:W1,W3,SPLIT | random:MEAN,AMP[,SEED] | csv:PATH",
    )
    g.add_argument("--t-end", dest="t_end", type=float)
    g.add_argument("--dt-policy", dest="dt_policy", choices=["cfl", "derivation"])
    g.add_argument("--safety", type=float, help="CFL safety factor in (0, 1]")
    g.add_argument("--record-every", dest="record_every", type=float)
    g.add_argument("--seed", type=int, help="PCG64 seed for random initial data")
    g.add_argument("--out", metavar="DIR")
    g.add_argument("--cutoff", type=float, help="singular cutoff (default sqrt(N)*max(1,u_minus))")

    p = _Parser(prog="fbpde", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate and write trajectory files")
    sub.add_parser("riemann", parents=[common], help="Riemann run with transition report")
    st = sub.add_parser("steady", parents=[common], help="steady-state atlas at a given mean")
    st.add_argument("--mean", type=float)
    sw = sub.add_parser("sweep", parents=[common], help="parameter sweep")
    sw.add_argument("--grid", action="append", metavar="KEY=V1,V2", help="repeatable")
    sw.add_argument("--workers", type=int)
    me = sub.add_parser("measure", parents=[common], help="value histograms and singular part")
    me.add_argument("--from", dest="source", metavar="TRAJECTORY_CSV")
    me.add_argument("--time", type=float, help="snapshot time (default: last)")
    me.add_argument("--bins", type=int)
    me.add_argument("--window", type=int, help="odd window size in nodes")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _report_error(EXIT_CONFIG, "usage", str(exc))
        return EXIT_CONFIG
    except SystemExit as exc:  # --help and --version
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "riemann":
            return cmd_riemann(cfg)
        if args.command == "steady":
            return cmd_steady(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        return cmd_measure(cfg, args.source, args.time)
    except ConfigError as exc:
        _report_error(EXIT_CONFIG, "config", str(exc))
        return EXIT_CONFIG
    except BlowUpError as exc:
        _report_error(EXIT_BLOWUP, "blow-up", f"node={exc.node} t={exc.time!r}")
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
