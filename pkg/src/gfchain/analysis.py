"""Mesh-refinement studies and numerical checks of the ergodicity bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DomainError
from .kernel import build_matrix
from .measures import invariant_measure, tv_cross_grid, tv_same_grid, zero_pad
from .model import (DEFAULT_QUAD_STEP, Grid, ModelSpec, continuous_pv, lyapunov_v,
                    tail_integral, unit_masses)

log = logging.getLogger(__name__)


def fit_order(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size < 3 or hs.size != errors.size:
        raise DomainError(f"need at least 3 (h, error) pairs, got {hs.size}")
    if np.any(hs <= 0) or np.any(errors <= 0):
        raise DomainError("mesh sizes and errors must be positive")
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    """Cross-grid errors ``||pi_{a,h} - pi_{a,2h}||`` for halving meshes ``h``."""

    model_tag: str
    a: float
    hs: list[float]
    errors: list[float]
    iterations: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.hs) != len(self.errors):
            raise DomainError("hs and errors must have equal length")
        for h0, h1 in zip(self.hs, self.hs[1:]):
            if not math.isclose(h0, 2 * h1, rel_tol=1e-9):
                raise DomainError(f"mesh sizes must halve consecutively ({h0}, {h1})")

    @property
    def ratios(self) -> list[float]:
        return [e0 / e1 for e0, e1 in zip(self.errors, self.errors[1:])]

    @property
    def order(self) -> float:
        return order_estimate(self)

    @property
    def tail_order(self) -> float:
        """Slope over the three finest levels only."""
        return fit_order(self.hs[-3:], self.errors[-3:])

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("h,tv_error,ratio\n")
            prev = None
            for h, e in zip(self.hs, self.errors):
                ratio = "" if prev is None else f"{prev / e:.17g}"
                fh.write(f"{h:.17g},{e:.17g},{ratio}\n")
                prev = e


def order_estimate(report: ConvergenceReport) -> float:
    return fit_order(report.hs, report.errors)


def refinement_study(model: ModelSpec, a: float, h_max: float, levels: int,
                     tol: float = 1e-12, max_iter: int = 100_000) -> ConvergenceReport:
    """Invariant measures at meshes ``2*h_max, h_max, ..., h_max/2^(levels-1)``.

    Each of the ``levels`` reported errors compares a mesh with the one twice
    as coarse, so the coarsest solve is at ``2*h_max``.

    Raises
    ------
    ConvergenceError
        If power iteration fails at any level.
    """
    if levels < 2:
        raise DomainError(f"levels must be >= 2, got {levels}")
    meshes = [2 * h_max / 2 ** k for k in range(levels + 1)]
    grids = [Grid.from_mesh(a, h) for h in meshes]  # validates evenness
    prev = None
    hs, errors, iters = [], [], []
    for grid in grids:
        pi, it = invariant_measure(build_matrix(model, grid), tol=tol, max_iter=max_iter)
        log.info("%s a=%g h=%g: %d iterations", model.tag, a, grid.h, it)
        if prev is not None:
            hs.append(grid.h)
            errors.append(tv_cross_grid(pi, prev))
            iters.append(it)
        prev = pi
    return ConvergenceReport(model.tag, a, hs, errors, iters)


def truncation_gap(model: ModelSpec, h: float, a_small: float, a_large: float,
                   tol: float = 1e-12) -> float:
    """TV distance between invariant measures at two ranges, same mesh.

    The measure on the smaller range is zero-padded to the larger grid.
    """
    small = Grid.from_mesh(a_small, h)
    large = Grid.from_mesh(a_large, h)
    pi_s, _ = invariant_measure(build_matrix(model, small), tol=tol)
    pi_l, _ = invariant_measure(build_matrix(model, large), tol=tol)
    return tv_same_grid(zero_pad(pi_s, large), pi_l)


def kernel_discrepancy(model: ModelSpec, grid: Grid,
                       quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """Max over rows of the TV distance between the matrix row and the exact
    unit masses of the continuous kernel started at the same grid point."""
    matrix = build_matrix(model, grid)
    worst = 0.0
    for unit in range(1, matrix.dim + 1):
        exact = unit_masses(model, unit * grid.h, grid, matrix.dim, quad_step)
        worst = max(worst, float(np.abs(matrix.row(unit) - exact).sum()))
    return worst


@dataclass(frozen=True)
class DiagnosticSample:
    x: float
    lhs: float
    bound: float
    passed: bool


@dataclass
class DiagnosticsReport:
    """Samples of an inequality ``lhs <= bound``, each tested with slack."""

    kind: str
    samples: list[DiagnosticSample]
    slack: float = 0.05

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.samples)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("x,lhs,bound,pass\n")
            for s in self.samples:
                fh.write(f"{s.x:.17g},{s.lhs:.17g},{s.bound:.17g},{str(s.passed).lower()}\n")


def _growth(model):
    if model.growth is None:
        raise DomainError(f"model {model.tag!r} declares no growth parameters")
    return model.growth


def drift_check(model: ModelSpec, x_samples: Sequence[float],
                quad_step: float = DEFAULT_QUAD_STEP, slack: float = 0.05) -> DiagnosticsReport:
    """Check ``PV(x) <= C1 V(x) exp(-C2 (x/2)^alpha)`` at each sample."""
    g = _growth(model)
    samples = []
    for x in x_samples:
        if not x > 2 * g.x0:
            raise DomainError(f"drift samples must exceed 2*x0={2 * g.x0:g}, got {x!r}")
        lhs = continuous_pv(model, x, quad_step)
        bound = g.c1 * lyapunov_v(model, x, quad_step) * math.exp(-g.c2 * (x / 2) ** g.alpha)
        samples.append(DiagnosticSample(float(x), lhs, bound, lhs <= (1 + slack) * bound))
    return DiagnosticsReport("drift", samples, slack)


def tail_check(model: ModelSpec, x: float, xprime_samples: Sequence[float],
               quad_step: float = DEFAULT_QUAD_STEP, slack: float = 0.05) -> DiagnosticsReport:
    """Check ``int_{x'}^inf p(x,y) V(y) dy <= C1 V(x) exp(-C2 x'^alpha)``.

    Rows of the report carry ``x'`` in their ``x`` field.
    """
    g = _growth(model)
    vx = lyapunov_v(model, x, quad_step)
    samples = []
    for xp in xprime_samples:
        if not xp > g.x0:
            raise DomainError(f"tail samples must exceed x0={g.x0:g}, got {xp!r}")
        lhs = tail_integral(model, x, xp, quad_step)
        bound = g.c1 * vx * math.exp(-g.c2 * xp ** g.alpha)
        samples.append(DiagnosticSample(float(xp), lhs, bound, lhs <= (1 + slack) * bound))
    return DiagnosticsReport("tail", samples, slack)
