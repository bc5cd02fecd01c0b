"""Configuration parsing, experiment presets, CSV/SVG output, and the
command-line entry point.

Subcommands: run, static, decay-fit, sweep, lambda1.  Exit codes: 0 on
success, 1 on configuration/validation errors, 2 on runtime or solver
errors.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .decaylaw import fit_decay, fit_report_row
from .energy import EnergyRecord, lambda1_estimate
from .errors import (BergerdeckError, ConfigError, ConvergenceError,
                     NonFiniteError, PlotError, SolveError)
from .grid import build_grid
from .integrator import RunResult, build_operators, dump_snapshot, run
from .model import (FeedbackKind, Linear, feedback_from_name, feedback_name,
                    make_model)
from .staticsolve import sin_load, solve_static

THREADS_ENV = "BERGERDECK_THREADS"


@dataclass(frozen=True)
class RunConfig:
    """One experiment: grid, physics, damping, time windows, and outputs."""

    J: int = 149
    K: int = 99
    l: float = math.pi / 4
    sigma: float = 0.2
    P: float = 1e-3
    S: float = 1e-5
    width: int = 5
    feedback: FeedbackKind = field(default_factory=Linear)
    dt: float = 0.01
    T: float = 30.0
    record_stride: int = 10
    csv: str = "energy.csv"
    svg: str | None = None
    snapshots: tuple[float, ...] = ()


PRESET_NAMES = ("fig6", "fig7", "fig8", "static", "undamped")


def preset(name: str) -> RunConfig:
    """Named experiment presets.

    fig6/fig7/fig8 share the default plate and differ in the feedback
    (sqrt / linear / piecewise); "static" is the bending problem alone;
    "undamped" switches the collar and both nonlocal constants off.
    """
    base = RunConfig()
    if name == "fig6":
        return replace(base, feedback=feedback_from_name("sqrt"))
    if name == "fig7":
        return base
    if name == "fig8":
        return replace(base, feedback=feedback_from_name("piecewise"))
    if name == "static":
        return replace(base, T=0.0)
    if name == "undamped":
        return replace(base, width=0, P=0.0, S=0.0)
    raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


# ---------------------------------------------------------------------------
# config documents

_SCHEMA = {
    "grid": ("J", "K", "l"),
    "physics": ("sigma", "P", "S"),
    "damping": ("width", "feedback"),
    "time": ("dt", "T", "record_stride"),
    "output": ("csv", "svg", "snapshots"),
}
_INT_KEYS = {"J", "K", "width", "record_stride"}
_FLOAT_KEYS = {"l", "sigma", "P", "S", "dt", "T"}


def _validate(cfg: RunConfig, where: str = "config") -> RunConfig:
    def fail(message: str):
        raise ConfigError(f"{where}: {message}")

    if cfg.J < 5:
        fail(f"J must be at least 5, got {cfg.J}")
    if (cfg.J + 1) % 2 != 0:
        fail(f"J must be odd so Simpson weights exist, got {cfg.J}")
    if cfg.K < 3:
        fail(f"K must be at least 3, got {cfg.K}")
    if not cfg.l > 0:
        fail(f"l must be positive, got {cfg.l}")
    if not 0.0 < cfg.sigma < 0.5:
        fail(f"sigma must lie in (0, 1/2), got {cfg.sigma}")
    if cfg.S < 0:
        fail(f"S must be nonnegative, got {cfg.S}")
    if cfg.width < 0:
        fail(f"damping width must be nonnegative, got {cfg.width}")
    if not cfg.dt > 0:
        fail(f"dt must be positive, got {cfg.dt}")
    if cfg.T < 0:
        fail(f"T must be nonnegative, got {cfg.T}")
    if cfg.record_stride < 1:
        fail(f"record_stride must be >= 1, got {cfg.record_stride}")
    if not cfg.csv:
        fail("csv path must be nonempty")
    if cfg.svg is not None and not cfg.svg:
        fail("svg path must be nonempty when given")
    for value in (cfg.l, cfg.sigma, cfg.P, cfg.S, cfg.dt, cfg.T, *cfg.snapshots):
        if not math.isfinite(value):
            fail(f"non-finite numeric value {value}")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse a line-oriented config document.

    ``[section]`` headers, ``key = value`` pairs, ``#`` comments.  Unknown
    sections or keys are errors; missing keys keep the fig7 defaults.
    """
    values: dict[str, object] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        try:
            if key in _INT_KEYS:
                values[key] = int(rhs)
            elif key in _FLOAT_KEYS:
                values[key] = float(rhs)
            elif key == "feedback":
                values[key] = feedback_from_name(rhs)
            elif key == "snapshots":
                values[key] = tuple(float(part) for part in rhs.split(",") if part.strip())
            else:  # csv / svg paths
                values[key] = rhs
        except (ValueError, BergerdeckError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    cfg = replace(RunConfig(), **values)
    return _validate(cfg)


def render_config(cfg: RunConfig) -> str:
    """Config document that parses back to an equal RunConfig."""
    lines = [
        "[grid]",
        f"J = {cfg.J}",
        f"K = {cfg.K}",
        f"l = {cfg.l!r}",
        "",
        "[physics]",
        f"sigma = {cfg.sigma!r}",
        f"P = {cfg.P!r}",
        f"S = {cfg.S!r}",
        "",
        "[damping]",
        f"width = {cfg.width}",
        f"feedback = {feedback_name(cfg.feedback)}",
        "",
        "[time]",
        f"dt = {cfg.dt!r}",
        f"T = {cfg.T!r}",
        f"record_stride = {cfg.record_stride}",
        "",
        "[output]",
        f"csv = {cfg.csv}",
    ]
    if cfg.svg is not None:
        lines.append(f"svg = {cfg.svg}")
    if cfg.snapshots:
        lines.append("snapshots = " + ",".join(repr(t) for t in cfg.snapshots))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# outputs

CSV_HEADER = "step,t,E_total,E_kinetic,E_hstar,E_px,E_sx,dissipated_cum"


def write_energy_csv(records: list[EnergyRecord], path: str) -> None:
    """Deterministic CSV dump: 17 significant digits, LF newlines."""
    lines = [CSV_HEADER]
    for rec in records:
        lines.append(
            f"{rec.step},{rec.t:.17g},{rec.total:.17g},{rec.kinetic:.17g},"
            f"{rec.hstar:.17g},{rec.px:.17g},{rec.sx:.17g},{rec.dissipated_cum:.17g}")
    try:
        with open(path, "w", newline="") as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write energy CSV {path!r}: {exc}") from exc


def read_energy_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """(t, E_total) columns of an energy CSV."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=True)
    except OSError as exc:
        raise ConfigError(f"cannot read energy CSV {path!r}: {exc}") from exc
    return np.atleast_1d(data["t"]), np.atleast_1d(data["E_total"])


_SVG_W, _SVG_H = 800, 500
_MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 45}


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi == lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def emit_svg_plot(records: list[EnergyRecord], path: str,
                  scale: str = "linear", title: str = "energy") -> None:
    """Standalone SVG line chart of total energy against time.

    ``scale`` is "linear" or "logy"; on the log scale, nonpositive energies
    are dropped and the drop count is annotated on the chart.
    """
    if scale not in ("linear", "logy"):
        raise PlotError(f"scale must be 'linear' or 'logy', got {scale!r}")
    ts = np.array([rec.t for rec in records])
    es = np.array([rec.total for rec in records])
    dropped = 0
    if scale == "logy":
        keep = es > 0.0
        dropped = int((~keep).sum())
        ts, es = ts[keep], np.log10(es[keep])
    if len(ts) < 2:
        raise PlotError(f"need at least 2 plottable points, got {len(ts)}")

    x0, x1 = float(ts.min()), float(ts.max())
    y0, y1 = float(es.min()), float(es.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    plot_w = _SVG_W - _MARGIN["left"] - _MARGIN["right"]
    plot_h = _SVG_H - _MARGIN["top"] - _MARGIN["bottom"]

    def sx(t):
        return _MARGIN["left"] + (t - x0) / (x1 - x0) * plot_w

    def sy(v):
        return _MARGIN["top"] + (1.0 - (v - y0) / (y1 - y0)) * plot_h

    points = " ".join(f"{sx(t):.2f},{sy(v):.2f}" for t, v in zip(ts, es))
    left, top = _MARGIN["left"], _MARGIN["top"]
    bottom = _SVG_H - _MARGIN["bottom"]
    right = _SVG_W - _MARGIN["right"]

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" '
        f'height="{_SVG_H}" viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<text x="{_SVG_W // 2}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
        f'stroke="black" stroke-width="1"/>',
    ]
    for tick in _ticks(x0, x1):
        px = sx(tick)
        parts.append(f'<line x1="{px:.2f}" y1="{bottom}" x2="{px:.2f}" '
                     f'y2="{bottom + 5}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{px:.2f}" y="{bottom + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{tick:.4g}</text>')
    for tick in _ticks(y0, y1):
        py = sy(tick)
        label = 10.0 ** tick if scale == "logy" else tick
        parts.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" '
                     f'y2="{py:.2f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{label:.3g}</text>')
    if dropped:
        parts.append(f'<text x="{right - 6}" y="{top + 14}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">dropped={dropped}</text>')
    parts.append(f'<polyline fill="none" stroke="#1f6fb4" stroke-width="1.5" '
                 f'points="{points}"/>')
    parts.append("</svg>")
    try:
        with open(path, "w", newline="") as handle:
            handle.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise PlotError(f"cannot write SVG {path!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# pipeline

def run_config(cfg: RunConfig) -> RunResult:
    """Resolve a RunConfig and execute it.

    The initial field is the static solution under the 50 sin(2x) load with
    zero initial velocity, matching the figure experiments.
    """
    grid = build_grid(cfg.J, cfg.K, cfg.l)
    ops = build_operators(grid, cfg.sigma)
    model = make_model(grid, sigma=cfg.sigma, P=cfg.P, S=cfg.S,
                       feedback=cfg.feedback, damping_width=cfg.width)
    u0 = solve_static(sin_load(grid, 50.0, 2), grid, cfg.sigma,
                      operator=ops.bilaplacian)
    v0 = np.zeros(grid.n_dof)
    return run(model, ops, u0, v0, cfg.dt, cfg.T,
               record_stride=cfg.record_stride, snapshot_times=cfg.snapshots)


def _load_config(args) -> RunConfig:
    if getattr(args, "config", None):
        try:
            with open(args.config) as handle:
                text = handle.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        cfg = parse_config(text)
    else:
        cfg = preset(args.preset or "fig7")
    overrides = {}
    if getattr(args, "dt", None) is not None:
        overrides["dt"] = args.dt
    if getattr(args, "T", None) is not None:
        overrides["T"] = args.T
    if getattr(args, "out", None) is not None:
        overrides["csv"] = args.out
    if getattr(args, "svg", None) is not None:
        overrides["svg"] = args.svg
    if overrides:
        cfg = _validate(replace(cfg, **overrides), where="overrides")
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    result = run_config(cfg)
    write_energy_csv(result.records, cfg.csv)
    for t_req, (t_actual, field_vec) in result.snapshots.items():
        stem, _, _ = cfg.csv.rpartition(".")
        dump_snapshot(field_vec, build_grid(cfg.J, cfg.K, cfg.l),
                      f"{stem or cfg.csv}_snapshot_t{t_req:g}.csv")
    if cfg.svg:
        emit_svg_plot(result.records, cfg.svg,
                      title=f"energy, feedback {feedback_name(cfg.feedback)}")
    print(f"wrote {cfg.csv} ({len(result.records)} records, "
          f"final E = {result.records[-1].total:.6g})")
    return 0


def _cmd_static(args) -> int:
    cfg = _load_config(args)
    grid = build_grid(cfg.J, cfg.K, cfg.l)
    u = solve_static(sin_load(grid, 50.0, 2), grid, cfg.sigma)
    out = args.out or "static_solution.csv"
    dump_snapshot(u, grid, out)
    print(f"wrote {out} (max |u| = {float(np.max(np.abs(u))):.6g})")
    return 0


def _cmd_decay_fit(args) -> int:
    ts, es = read_energy_csv(args.csv)
    fit = fit_decay(ts, es, tail_fraction=args.tail_fraction)
    print("label,best_model,rate_or_exponent,r2_exp,r2_alg")
    print(fit_report_row(args.label, fit))
    return 0


def _sweep_worker(name: str, out_dir: str) -> tuple[str, str]:
    cfg = preset(name)
    result = run_config(cfg)
    csv_path = os.path.join(out_dir, f"{name}_energy.csv")
    write_energy_csv(result.records, csv_path)
    ts = np.array([rec.t for rec in result.records])
    es = np.array([rec.total for rec in result.records])
    fit = fit_decay(ts, es)
    svg_path = os.path.join(out_dir, f"{name}_energy.svg")
    emit_svg_plot(result.records, svg_path,
                  title=f"{name}: feedback {feedback_name(cfg.feedback)}")
    return name, fit_report_row(name, fit)


def _cmd_sweep(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    names = ("fig6", "fig7", "fig8")
    env_cap = os.environ.get(THREADS_ENV)
    workers = max(1, int(env_cap)) if env_cap else min(len(names), os.cpu_count() or 1)
    rows = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for name, row in pool.map(lambda n: _sweep_worker(n, args.out_dir), names):
            rows[name] = row
    report = os.path.join(args.out_dir, "decay_fits.csv")
    with open(report, "w", newline="") as handle:
        handle.write("preset,best_model,rate_or_exponent,r2_exp,r2_alg\n")
        for name in names:
            handle.write(rows[name] + "\n")
    print(f"wrote {report}")
    return 0


def _cmd_lambda1(args) -> int:
    cfg = _load_config(args)
    grid = build_grid(cfg.J, cfg.K, cfg.l)
    value = lambda1_estimate(grid, cfg.sigma)
    verdict = "holds" if cfg.P <= value else "FAILS"
    print(f"lambda1 = {value:.10g}; energy positivity P <= lambda1 {verdict} "
          f"(P = {cfg.P:g})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bergerdeck", exit_on_error=False)
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", help="config document path")
        p.add_argument("--preset", choices=PRESET_NAMES, help="named preset")
        p.add_argument("--dt", type=float, help="time step override")
        p.add_argument("--T", type=float, help="final time override")

    p_run = sub.add_parser("run", exit_on_error=False,
                           help="time-march an experiment and write energy CSV")
    add_common(p_run)
    p_run.add_argument("--out", help="energy CSV path override")
    p_run.add_argument("--svg", help="also render an SVG energy chart")
    p_run.set_defaults(func=_cmd_run)

    p_static = sub.add_parser("static", exit_on_error=False,
                              help="solve the static bending problem")
    add_common(p_static)
    p_static.add_argument("--out", help="snapshot CSV path")
    p_static.set_defaults(func=_cmd_static)

    p_fit = sub.add_parser("decay-fit", exit_on_error=False,
                           help="classify the decay of an energy CSV")
    p_fit.add_argument("--csv", required=True, help="energy CSV to fit")
    p_fit.add_argument("--tail-fraction", type=float, default=0.5,
                       dest="tail_fraction")
    p_fit.add_argument("--label", default="series")
    p_fit.set_defaults(func=_cmd_decay_fit)

    p_sweep = sub.add_parser("sweep", exit_on_error=False,
                             help="run fig6/fig7/fig8 and write the fit report")
    p_sweep.add_argument("--out-dir", default="sweep", dest="out_dir")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_l1 = sub.add_parser("lambda1", exit_on_error=False,
                          help="estimate the embedding constant of the grid")
    add_common(p_l1)
    p_l1.set_defaults(func=_cmd_lambda1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except argparse.ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (SolveError, ConvergenceError, NonFiniteError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    except BergerdeckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
