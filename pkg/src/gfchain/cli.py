"""Command-line front end.

Usage::

    gfchain kernel    --model example1 --a 2 --nx 4 --out kernel.csv
    gfchain invariant --model example1 --a 5 --nx 500 --out pi.csv
    gfchain simulate  --model example1 --a 10 --nx 500 --steps 100000 --seed 7 --out path.csv
    gfchain refine    --model example1 --a 10 --h-max 0.1 --levels 6 --out conv.csv
    gfchain check     --model example1 --points 2,3,4,6 --out drift.csv

Options may also come from ``--config FILE`` holding ``key = value`` lines
(keys as the long flag names); command-line flags win.

Exit status: 0 success, 1 a diagnostic inequality failed, 2 invalid
configuration or model, 3 non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import drift_check, refinement_study, tail_check
from .errors import ConvergenceError, GFError
from .kernel import build_matrix, write_matrix_csv
from .measures import invariant_measure, write_measure_csv
from .model import BUILTIN_MODELS, Grid, ModelSpec, builtin
from .sampler import simulate_path, write_trajectory_csv

COMMANDS = ("kernel", "invariant", "simulate", "refine", "check")

EXIT_OK, EXIT_DIAGNOSTIC, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 1, 2, 3, 4


class ConfigError(GFError, ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    command: str
    model: str = "example1"
    table: Optional[str] = None
    a: float = 10.0
    nx: int = 500
    tol: float = 1e-12
    max_iter: int = 100_000
    seed: int = 0
    steps: int = 1000
    init: float = 1.0
    levels: int = 6
    h_max: float = 0.1
    points: Optional[str] = None
    tail_x: Optional[float] = None
    out: Optional[str] = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.model != "table" and self.model not in BUILTIN_MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "table":
            if not self.table:
                raise ConfigError("model=table needs --table")
            if not Path(self.table).is_file():
                raise ConfigError(f"table file {self.table!r} does not exist")
        if self.nx < 2 or self.nx % 2:
            raise ConfigError(f"nx must be an even integer >= 2, got {self.nx}")
        if not self.a > 0:
            raise ConfigError(f"a must be positive, got {self.a}")
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1 or self.steps < 0 or self.levels < 2 or not self.h_max > 0:
            raise ConfigError("max-iter >= 1, steps >= 0, levels >= 2 and h-max > 0 required")
        if not self.init > 0:
            raise ConfigError(f"init must be positive, got {self.init}")
        if self.out is None:
            self.out = f"gfchain-{self.command}.csv"

    @property
    def grid(self) -> Grid:
        return Grid(self.a, self.nx)

    def point_list(self) -> list[float]:
        default = "1,2,3" if self.tail_x is not None else "2,3,4,6"
        try:
            return [float(p) for p in (self.points or default).split(",") if p.strip()]
        except ValueError:
            raise ConfigError(f"cannot parse points {self.points!r}") from None

    def load_model(self) -> ModelSpec:
        if self.model != "table":
            return builtin(self.model)
        try:
            data = np.genfromtxt(self.table, delimiter=",", names=True, ndmin=1)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read table {self.table!r}: {exc}") from None
        if data.dtype.names is None or set(data.dtype.names) != {"x", "s"}:
            raise ConfigError("table needs exactly the columns x,s")
        return ModelSpec.from_table(data["x"], data["s"], tag=f"table:{Path(self.table).name}")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str,
          "Optional[str]": str, "Optional[float]": float}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in _FIELD_TYPES or key == "command":
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(values: dict) -> dict:
    out = {}
    for key, value in values.items():
        cast = _CASTS[_FIELD_TYPES[key]]
        try:
            if cast is int and isinstance(value, str):
                value = float(value)  # allow 1e5
            out[key] = cast(value)
        except ValueError:
            raise ConfigError(f"bad value for {key}: {value!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfchain",
                                description="Discrete growth-fragmentation chain toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--model", help="example1..example4 or table")
    p.add_argument("--table", help="CSV with columns x,s on the grid points")
    p.add_argument("--a", type=float, help="range of the grid")
    p.add_argument("--nx", type=int, help="even number of grid units")
    p.add_argument("--tol", type=float, help="l1 tolerance of power iteration")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="trajectory length for simulate")
    p.add_argument("--init", type=float, help="initial size for simulate")
    p.add_argument("--levels", type=int, help="number of refinement errors")
    p.add_argument("--h-max", type=float, help="coarsest reported mesh for refine")
    p.add_argument("--points", help="comma separated sample points for check")
    p.add_argument("--tail-x", type=float, help="check the tail bound from this x")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc.strerror}") from None
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None and key != "command":
            values[key] = v
    return RunConfig(command=args.command, **_coerce(values))


def run(config: RunConfig) -> int:
    """Execute one command and write its CSV.  Returns the exit status."""
    model = config.load_model()
    out = config.out
    if config.command == "kernel":
        matrix = build_matrix(model, config.grid)
        write_matrix_csv(matrix, out)
        print(f"wrote {matrix.dim}x{matrix.dim} matrix to {out}")
    elif config.command == "invariant":
        pi, it = invariant_measure(build_matrix(model, config.grid),
                                   tol=config.tol, max_iter=config.max_iter)
        write_measure_csv(pi, out)
        print(f"converged in {it} iterations; wrote {pi.n_units} units to {out}")
    elif config.command == "simulate":
        grid = config.grid
        sizes = simulate_path(config.init, config.steps, grid, model, seed=config.seed)
        write_trajectory_csv(sizes, out)
        print(f"wrote {config.steps} steps to {out}")
    elif config.command == "refine":
        report = refinement_study(model, config.a, config.h_max, config.levels,
                                  tol=config.tol, max_iter=config.max_iter)
        report.to_csv(out)
        tail = f" (last three levels: {report.tail_order:.4f})" if len(report.hs) >= 3 else ""
        order = f"{report.order:.4f}" if len(report.hs) >= 3 else "n/a"
        print(f"fitted order: {order}{tail}")
    elif config.command == "check":
        pts = config.point_list()
        if config.tail_x is not None:
            report = tail_check(model, config.tail_x, pts)
        else:
            report = drift_check(model, pts)
        report.to_csv(out)
        print(f"{report.kind} check: {'pass' if report.passed else 'FAIL'}")
        if not report.passed:
            return EXIT_DIAGNOSTIC
    return EXIT_OK


def _fail(kind: str, exc: BaseException, code: int) -> int:
    msg = " ".join(str(exc).split())
    print(f"gfchain: error: {kind}: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="gfchain: %(levelname)s: %(message)s")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = run(config_from_args(args))
        except ConvergenceError as exc:
            code = _fail("convergence", exc, EXIT_CONVERGENCE)
        except GFError as exc:
            code = _fail("config", exc, EXIT_CONFIG)
        except OSError as exc:
            code = _fail("io", exc, EXIT_IO)
    for w in caught:
        print(f"gfchain: warning: {w.message}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
