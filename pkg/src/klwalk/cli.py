"""Command-line front end: ``solve``, ``track`` and ``plot``.

``solve`` runs the eigenproblem on a kernel/cost pair given as dense CSV
and prints the certified results. ``track`` replicates the graph
target-tracking experiment from a JSON config (every field has a default
and can be overridden with a ``KLWALK_``-prefixed environment variable)
and writes per-run trace CSVs plus a regret summary. ``plot`` renders the
summary as a self-contained SVG, no plotting stack required.

Exit codes: 0 success, 2 parse/config errors, 3 assumption violations,
4 convergence failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .chains import CostFunction, StochasticMatrix, span_seminorm
from .errors import (
    ConvergenceError,
    NotErgodicError,
    NotUnichainError,
    ParseError,
)
from .evaluate import ExperimentSpec, run_experiment, summarize
from .policy import twisted_kernel
from .spectral import SolverSettings, acoe_residual, solve_mpe
from .world import Graph, grid_graph, load_graph

ENV_PREFIX = "KLWALK_"
_FLOAT_FMT = "{:.17g}"  # round-trippable float64 text


# ---------------------------------------------------------------------------
# experiment configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """The JSON-facing experiment knobs, fully defaulted.

    ``grid`` and ``edge_list`` are mutually exclusive graph sources;
    defaults reproduce the desk-scale experiment (10x10 grid, T=1000,
    100 runs, pool of 1000).
    """

    grid: Optional[tuple[int, int]] = (10, 10)
    edge_list: Optional[str] = None
    horizon: int = 1000
    epsilon: float = 0.05
    stay_prob: float = 0.01
    delta: float = 0.01
    home: int = 0
    start: int = 0
    runs: int = 100
    pool_size: int = 1000
    base_seed: int = 12345
    dirichlet_alpha: float = 1.0
    output_dir: str = "out"

    def load_world(self) -> Graph:
        if self.edge_list is not None:
            try:
                text = Path(self.edge_list).read_text()
            except OSError as exc:
                raise ParseError(f"config.edge_list: cannot read {self.edge_list!r}: {exc}")
            return load_graph(text)
        return grid_graph(*self.grid)

    def experiment_spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            graph=self.load_world(),
            horizon=self.horizon,
            epsilon=self.epsilon,
            stay_prob=self.stay_prob,
            delta=self.delta,
            home=self.home,
            start=self.start,
            dirichlet_alpha=self.dirichlet_alpha,
        )


def _want(raw, path: str, kind, check=None, what: str = ""):
    if kind is str and not isinstance(raw, str):
        raise ParseError(f"config.{path}: expected a string, got {raw!r}")
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise ParseError(f"config.{path}: expected {kind.__name__}, got {raw!r}")
    if isinstance(raw, bool) or (kind is int and isinstance(raw, float) and raw != int(raw)):
        raise ParseError(f"config.{path}: expected {kind.__name__}, got {raw!r}")
    if check is not None and not check(value):
        raise ParseError(f"config.{path}: {what}, got {raw!r}")
    return value


_SCALAR_FIELDS = {
    # name -> (type, predicate, message)
    "horizon": (int, lambda v: v >= 1, "must be a positive integer"),
    "epsilon": (float, lambda v: 0 < v < 1 / 3, "must lie in (0, 1/3)"),
    "stay_prob": (float, lambda v: 0 < v < 1, "must lie in (0, 1)"),
    "delta": (float, lambda v: 0 <= v < 1, "must lie in [0, 1)"),
    "home": (int, lambda v: v >= 0, "must be a vertex index"),
    "start": (int, lambda v: v >= 0, "must be a vertex index"),
    "runs": (int, lambda v: v >= 1, "must be a positive integer"),
    "pool_size": (int, lambda v: v >= 0, "must be a nonnegative integer"),
    "base_seed": (int, lambda v: v >= 0, "must be a nonnegative integer"),
    "dirichlet_alpha": (float, lambda v: v > 0, "must be positive"),
    "output_dir": (str, None, ""),
}


def _parse_grid(raw, path: str) -> tuple[int, int]:
    if isinstance(raw, str):
        parts = raw.lower().replace("x", " ").split()
        if len(parts) != 2:
            raise ParseError(f"config.{path}: expected 'ROWSxCOLS', got {raw!r}")
        raw = parts
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ParseError(f"config.{path}: expected two integers, got {raw!r}")
    r = _want(raw[0], f"{path}[0]", int, lambda v: v >= 1, "must be >= 1")
    c = _want(raw[1], f"{path}[1]", int, lambda v: v >= 1, "must be >= 1")
    return (r, c)


def load_config(path: Optional[str], environ=os.environ) -> ExperimentConfig:
    """Build the experiment config from an optional JSON file plus
    environment overrides; an empty (or missing) object yields the full
    default experiment."""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"config: cannot read {path!r}: {exc}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"config: invalid JSON in {path!r}: {exc}")
        if not isinstance(data, dict):
            raise ParseError(f"config: top level must be an object, got {type(data).__name__}")

    fields: dict = {}
    known = set(_SCALAR_FIELDS) | {"graph"}
    for key in data:
        if key not in known:
            raise ParseError(f"config.{key}: unknown field")

    graph_spec = data.get("graph", {})
    if graph_spec:
        if not isinstance(graph_spec, dict) or not set(graph_spec) <= {"grid", "edge_list"}:
            raise ParseError("config.graph: expected an object with 'grid' or 'edge_list'")
        if "grid" in graph_spec and "edge_list" in graph_spec:
            raise ParseError("config.graph: 'grid' and 'edge_list' are mutually exclusive")
        if "grid" in graph_spec:
            fields["grid"] = _parse_grid(graph_spec["grid"], "graph.grid")
            fields["edge_list"] = None
        else:
            fields["edge_list"] = _want(graph_spec["edge_list"], "graph.edge_list", str)
            fields["grid"] = None

    for name, (kind, check, msg) in _SCALAR_FIELDS.items():
        if name in data:
            fields[name] = _want(data[name], name, kind, check, msg)

    # environment overrides win over the file
    env_grid = environ.get(ENV_PREFIX + "GRID")
    env_edges = environ.get(ENV_PREFIX + "EDGE_LIST")
    if env_grid is not None and env_edges is not None:
        raise ParseError("config.graph: KLWALK_GRID and KLWALK_EDGE_LIST are mutually exclusive")
    if env_grid is not None:
        fields["grid"] = _parse_grid(env_grid, "graph.grid")
        fields["edge_list"] = None
    elif env_edges is not None:
        fields["edge_list"] = env_edges
        fields["grid"] = None
    for name, (kind, check, msg) in _SCALAR_FIELDS.items():
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            fields[name] = _want(raw, name, kind, check, msg)

    return ExperimentConfig(**fields)


# ---------------------------------------------------------------------------
# CSV formats


def _parse_cells(path: str) -> list[list[float]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}")
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        cells = []
        for cell in line.split(","):
            try:
                cells.append(float(cell))
            except ValueError:
                raise ParseError(f"{path} line {lineno}: not a number: {cell.strip()!r}")
        rows.append(cells)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def read_matrix_csv(path: str) -> StochasticMatrix:
    """Dense CSV, one row per line; rows must already be stochastic."""
    cells = _parse_cells(path)
    n = len(cells)
    for lineno_offset, row in enumerate(cells):
        if len(row) != n:
            raise ParseError(
                f"{path} line {lineno_offset + 1}: expected {n} columns, got {len(row)}"
            )
    rows = np.array(cells)
    if np.any(rows < 0):
        bad = int(np.argwhere(rows < 0)[0][0])
        raise ParseError(f"{path} line {bad + 1}: negative entry")
    sums = rows.sum(axis=1)
    off = np.where(np.abs(sums - 1.0) > 1e-9)[0]
    if off.size:
        x = int(off[0])
        raise ParseError(f"{path} line {x + 1}: row sums to {sums[x]!r}, expected 1")
    return StochasticMatrix(rows)


def read_vector_csv(path: str, expected_n: Optional[int] = None) -> np.ndarray:
    """A vector as either one CSV row or one value per line."""
    cells = _parse_cells(path)
    if len(cells) == 1:
        vec = np.array(cells[0])
    elif all(len(row) == 1 for row in cells):
        vec = np.array([row[0] for row in cells])
    else:
        raise ParseError(f"{path}: expected a single row or a single column of numbers")
    if expected_n is not None and vec.shape[0] != expected_n:
        raise ParseError(f"{path}: expected {expected_n} values, got {vec.shape[0]}")
    return vec


def _fmt(value: float) -> str:
    return _FLOAT_FMT.format(value)


def write_matrix_csv(path: Path, rows: np.ndarray):
    with open(path, "w", newline="\n") as fh:
        for row in np.atleast_2d(rows):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_vector_csv(path: Path, vec: np.ndarray):
    with open(path, "w", newline="\n") as fh:
        for v in vec:
            fh.write(_fmt(v) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args) -> int:
    passive = read_matrix_csv(args.passive_csv)
    raw_cost = read_vector_csv(args.cost_csv, expected_n=passive.n)
    try:
        cost = CostFunction(raw_cost)
    except ValueError as exc:
        raise ParseError(f"{args.cost_csv}: {exc}")
    settings = SolverSettings(
        tolerance=args.tolerance, max_iterations=args.max_iterations, pin_index=args.pin
    )
    sol = solve_mpe(passive, cost, settings)
    phi = sol.h if span_seminorm(cost.values) > 0 else np.zeros(passive.n)
    pol = twisted_kernel(passive, phi)
    residual = acoe_residual(passive, cost, sol)
    print(f"lambda = {sol.lam:.12f}")
    print(f"bracket = [{_fmt(sol.bracket[0])}, {_fmt(sol.bracket[1])}]"
          f" (width {sol.bracket[1] - sol.bracket[0]:.3e})")
    print(f"span_h = {span_seminorm(sol.h):.12f}")
    print(f"acoe_residual = {residual:.3e}")
    print(f"iterations = {sol.iterations}")
    if args.out_h:
        write_vector_csv(Path(args.out_h), sol.h)
        print(f"wrote h to {args.out_h}")
    if args.out_kernel:
        write_matrix_csv(Path(args.out_kernel), pol.kernel.rows)
        print(f"wrote twisted kernel to {args.out_kernel}")
    return 0


def _write_trace_csv(path: Path, trace):
    with open(path, "w", newline="\n") as fh:
        fh.write("t,state,state_cost,control_cost,cum_cost,phase\n")
        for t in range(trace.horizon):
            fh.write(
                f"{t + 1},{int(trace.states[t])},{_fmt(trace.state_costs[t])},"
                f"{_fmt(trace.control_costs[t])},{_fmt(trace.cumulative[t])},"
                f"{trace.phase_of_step(t)}\n"
            )


def _write_summary_csv(path: Path, horizon: int, hindsight, pool):
    with open(path, "w", newline="\n") as fh:
        fh.write("t,mean_regret_hindsight,std_regret_hindsight,"
                 "mean_regret_pool,std_regret_pool\n")
        for t in range(horizon):
            pm = _fmt(pool.mean[t]) if pool is not None else "nan"
            ps = _fmt(pool.stddev[t]) if pool is not None else "nan"
            fh.write(
                f"{t + 1},{_fmt(hindsight.mean[t])},{_fmt(hindsight.stddev[t])},{pm},{ps}\n"
            )


def cmd_track(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    if args.output_dir is not None:
        config = dataclasses.replace(config, output_dir=args.output_dir)
    spec = config.experiment_spec()
    if not config.start < spec.graph.n:
        raise ParseError(f"config.start: vertex {config.start} out of range")
    if not config.home < spec.graph.n:
        raise ParseError(f"config.home: vertex {config.home} out of range")
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)

    result = run_experiment(
        spec,
        runs=config.runs,
        base_seed=config.base_seed,
        pool_size=config.pool_size,
        workers=workers,
    )

    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, trace in enumerate(result.traces):
        _write_trace_csv(out_dir / f"trace_run{i:03d}.csv", trace)

    if config.runs >= 2:
        hindsight = summarize(result.hindsight_regret, result.seeds)
        pool = summarize(result.pool_regret, result.seeds) if result.pool_regret is not None else None
    else:
        # single run: the mean is the run itself, the spread is undefined
        nan = np.full(config.horizon, math.nan)
        hindsight = _DegenerateSummary(result.hindsight_regret[0], nan)
        pool = (
            _DegenerateSummary(result.pool_regret[0], nan)
            if result.pool_regret is not None
            else None
        )
    _write_summary_csv(out_dir / "summary.csv", config.horizon, hindsight, pool)
    print(f"wrote {config.runs} trace file(s) and summary.csv to {out_dir}")
    return 0


class _DegenerateSummary:
    def __init__(self, mean, stddev):
        self.mean = mean
        self.stddev = stddev


# ---------------------------------------------------------------------------
# SVG rendering (self-contained, no plotting stack)


def render_regret_svg(
    t: np.ndarray, mean: np.ndarray, std: np.ndarray, title: str = "regret vs time"
) -> str:
    width, height = 800, 500
    ml, mr, mt, mb = 70, 20, 40, 55
    lo = float(np.min(mean - std))
    hi = float(np.max(mean + std))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    x0, x1 = float(t[0]), float(t[-1])
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * (width - ml - mr)

    def sy(y):
        return height - mb - (y - lo) / (hi - lo) * (height - mt - mb)

    def pts(xs, ys):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))

    band = pts(t, mean + std) + " " + pts(t[::-1], (mean - std)[::-1])
    line = pts(t, mean)
    xticks = np.linspace(x0, x1, 5)
    yticks = np.linspace(lo, hi, 5)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<polygon points="{band}" fill="#c8c8c8" stroke="none" opacity="0.8"/>',
        f'<polyline points="{line}" fill="none" stroke="#cc2222" stroke-width="1.5"/>',
        f'<line x1="{ml}" y1="{height - mb}" x2="{width - mr}" y2="{height - mb}" '
        f'stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height - mb}" stroke="black"/>',
    ]
    for xv in xticks:
        parts.append(
            f'<line x1="{sx(xv):.2f}" y1="{height - mb}" x2="{sx(xv):.2f}" '
            f'y2="{height - mb + 5}" stroke="black"/>'
            f'<text x="{sx(xv):.2f}" y="{height - mb + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{xv:g}</text>'
        )
    for yv in yticks:
        parts.append(
            f'<line x1="{ml - 5}" y1="{sy(yv):.2f}" x2="{ml}" y2="{sy(yv):.2f}" '
            f'stroke="black"/>'
            f'<text x="{ml - 8}" y="{sy(yv):.2f}" text-anchor="end" dominant-baseline="middle" '
            f'font-family="sans-serif" font-size="12">{yv:.4g}</text>'
        )
    parts.append(
        f'<text x="{(ml + width - mr) / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">t</text>'
    )
    parts.append(
        f'<text x="18" y="{(mt + height - mb) / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14" '
        f'transform="rotate(-90 18 {(mt + height - mb) / 2:.0f})">regret</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def _read_summary(path: str, want_pool: bool):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}")
    if not lines:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["t", "mean_regret_hindsight", "std_regret_hindsight",
                "mean_regret_pool", "std_regret_pool"]
    if header != expected:
        raise ParseError(f"{path}: unexpected header {header!r}, expected {expected!r}")
    mean_col, std_col = (3, 4) if want_pool else (1, 2)
    t, mean, std = [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cells = raw.split(",")
        if len(cells) != 5:
            raise ParseError(f"{path} line {lineno}: expected 5 columns, got {len(cells)}")
        try:
            t.append(float(cells[0]))
            mean.append(float(cells[mean_col]))
            std.append(float(cells[std_col]))
        except ValueError:
            raise ParseError(f"{path} line {lineno}: not a number")
    if not t:
        raise ParseError(f"{path}: no data rows")
    mean = np.array(mean)
    std = np.array(std)
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std))):
        raise ParseError(f"{path}: selected columns contain non-finite values")
    return np.array(t), mean, std


def cmd_plot(args) -> int:
    which = "pool" if args.pool else "best-in-hindsight"
    t, mean, std = _read_summary(args.summary_csv, want_pool=args.pool)
    svg = render_regret_svg(t, mean, std, title=f"mean regret vs {which} (±1 stddev)")
    with open(args.out_svg, "w", newline="\n") as fh:
        fh.write(svg + "\n")
    print(f"wrote {args.out_svg}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="klwalk",
        description="Controlled random walks with KL control cost: "
        "offline solver and online tracking experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve the eigenproblem for a kernel/cost CSV pair")
    p_solve.add_argument("passive_csv", help="dense CSV of the passive kernel")
    p_solve.add_argument("cost_csv", help="CSV of the state cost (row or column)")
    p_solve.add_argument("--tolerance", type=float, default=1e-12)
    p_solve.add_argument("--max-iterations", type=int, default=100_000)
    p_solve.add_argument("--pin", type=int, default=0, help="state pinned to h=0")
    p_solve.add_argument("--out-h", help="write the relative value function here")
    p_solve.add_argument("--out-kernel", help="write the optimal twisted kernel here")
    p_solve.set_defaults(func=cmd_solve)

    p_track = sub.add_parser("track", help="run the tracking experiment from a JSON config")
    p_track.add_argument("--config", help="JSON config path (defaults apply when omitted)")
    p_track.add_argument("--seed", type=int, help="override base_seed")
    p_track.add_argument("--workers", type=int, help="parallel replications (default: cores)")
    p_track.add_argument("--output-dir", help="override output_dir")
    p_track.set_defaults(func=cmd_track)

    p_plot = sub.add_parser("plot", help="render a summary CSV as a standalone SVG")
    p_plot.add_argument("summary_csv")
    p_plot.add_argument("out_svg")
    p_plot.add_argument("--pool", action="store_true",
                        help="plot the pool-baseline columns instead of best-in-hindsight")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotErgodicError, NotUnichainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"error: {exc} (best bracket {exc.bracket})", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
