"""Piecewise-uniform measures on a grid, their evolution under the discrete
kernel, invariant measures and total-variation distances."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConvergenceError, DomainError, GridMismatchError
from .kernel import TransitionMatrix
from .model import Grid

log = logging.getLogger(__name__)

_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PiecewiseUniformMeasure:
    """Mass vector over units ``E_1..E_m`` of ``grid``; uniform within each unit.

    ``m`` is ``n_x/2 + 1`` for measures of the discrete chain and ``n_x + 1``
    for projections onto the full grid.  ``masses[k-1]`` is the mass of unit
    ``k``.
    """

    grid: Grid
    masses: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float)
        if masses.ndim != 1 or masses.size == 0:
            raise DomainError("masses must be a non-empty vector")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise DomainError("masses must be finite and nonnegative")
        if self.normalized and abs(masses.sum() - 1.0) > _SUM_TOL * max(1, masses.size):
            raise DomainError(f"masses sum to {masses.sum()!r}, expected 1")
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)

    def __len__(self):
        return self.masses.size

    @property
    def n_units(self) -> int:
        return self.masses.size

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.grid.unit_edges(self.n_units)

    def to_csv(self, path: Union[str, Path]) -> None:
        write_measure_csv(self, path)


def uniform(grid: Grid, n_units: Optional[int] = None) -> PiecewiseUniformMeasure:
    """Equal masses on every unit (the default initial vector)."""
    n = grid.n_chain_units if n_units is None else n_units
    return PiecewiseUniformMeasure(grid, np.full(n, 1.0 / n))


def point_mass(grid: Grid, unit: int, n_units: Optional[int] = None) -> PiecewiseUniformMeasure:
    n = grid.n_chain_units if n_units is None else n_units
    if not 1 <= unit <= n:
        raise DomainError(f"unit {unit} outside 1..{n}")
    m = np.zeros(n)
    m[unit - 1] = 1.0
    return PiecewiseUniformMeasure(grid, m)


def project_fv(cdf: Callable, grid: Grid) -> PiecewiseUniformMeasure:
    """Finite volume projection of the law with distribution function ``cdf``.

    Unit ``j <= n_x`` receives ``cdf(x_j) - cdf(x_{j-1})`` and the appended
    unit ``n_x + 1`` receives the tail ``1 - cdf(a)``.
    """
    x = grid.points()
    c = np.array([float(cdf(v)) for v in x])
    if np.any(np.diff(c) < 0):
        k = int(np.flatnonzero(np.diff(c) < 0)[0]) + 1
        raise DomainError(f"cdf decreases at x={x[k]!r}")
    if c[0] < 0 or c[-1] > 1 + 1e-12:
        raise DomainError("cdf values must lie in [0, 1]")
    masses = np.empty(grid.n_x + 1)
    masses[:-1] = np.diff(c)
    masses[0] += c[0]  # any atom at 0 belongs to E_1
    masses[-1] = max(0.0, 1.0 - c[-1])
    return PiecewiseUniformMeasure(grid, masses)


def _check_same_grid(mu, nu):
    if mu.grid != nu.grid or mu.n_units != nu.n_units:
        raise GridMismatchError(
            f"measures differ in grid or size: {mu.grid}/{mu.n_units} vs {nu.grid}/{nu.n_units}")


def evolve_step(mu: PiecewiseUniformMeasure, P: TransitionMatrix) -> PiecewiseUniformMeasure:
    """One step of the chain, ``mu P``.

    ``mu`` normally has ``P.dim`` units.  A full-grid measure (``n_x + 1``
    units) is also accepted; it is pushed forward with the out-of-range
    rounding rule and returned on ``n_x + 1`` units, all mass landing in the
    first ``n_x/2 + 1``.
    """
    if mu.grid != P.grid:
        raise GridMismatchError("measure and matrix live on different grids")
    if mu.n_units == P.dim:
        out = mu.masses @ P.dense
    elif mu.n_units == P.grid.n_x + 1:
        out = np.zeros(mu.n_units)
        units = np.arange(1, mu.n_units + 1)
        live = units[mu.masses > 0]
        for u, rows in P.iter_row_blocks(live):
            out[:P.dim] += mu.masses[u - 1] @ rows
    else:
        raise GridMismatchError(f"measure has {mu.n_units} units, matrix has {P.dim}")
    np.maximum(out, 0.0, out=out)
    return PiecewiseUniformMeasure(mu.grid, out, normalized=mu.normalized)


def invariant_measure(P: TransitionMatrix, init: Optional[PiecewiseUniformMeasure] = None,
                      tol: float = 1e-12, max_iter: int = 100_000
                      ) -> tuple[PiecewiseUniformMeasure, int]:
    """Power iteration ``mu <- mu P`` until the l1 change is at most ``tol``.

    Returns
    -------
    (PiecewiseUniformMeasure, int)
        The fixed point and the number of iterations taken.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations do not reach ``tol``.
    """
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if init is None:
        init = uniform(P.grid)
    if init.n_units != P.dim or init.grid != P.grid:
        raise GridMismatchError(f"initial vector has {init.n_units} units, matrix has {P.dim}")
    mat = P.dense
    mu = init.masses.copy()
    change = math.inf
    for it in range(1, max_iter + 1):
        nxt = mu @ mat
        change = float(np.abs(nxt - mu).sum())
        mu = nxt
        if change <= tol:
            log.debug("power iteration converged in %d steps (change %.3e)", it, change)
            np.maximum(mu, 0.0, out=mu)
            return PiecewiseUniformMeasure(P.grid, mu), it
    raise ConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iter} steps "
        f"(last change {change:.3e})", residual=change, iterations=max_iter)


def to_density(mu: PiecewiseUniformMeasure) -> np.ndarray:
    """Masses scaled by ``1/h``: the piecewise-constant density."""
    return mu.masses / mu.grid.h


def tv_same_grid(mu: PiecewiseUniformMeasure, nu: PiecewiseUniformMeasure) -> float:
    """l1 distance between mass vectors on the same grid."""
    _check_same_grid(mu, nu)
    return float(np.abs(mu.masses - nu.masses).sum())


def _check_refinement(fine, coarse):
    if not math.isclose(fine.grid.a, coarse.grid.a, rel_tol=1e-12):
        raise GridMismatchError(f"ranges differ: {fine.grid.a} vs {coarse.grid.a}")
    if fine.grid.n_x != 2 * coarse.grid.n_x:
        raise GridMismatchError(
            f"fine grid needs twice the units of the coarse one "
            f"({fine.grid.n_x} vs {coarse.grid.n_x})")


def tv_cross_grid(fine: PiecewiseUniformMeasure, coarse: PiecewiseUniformMeasure) -> float:
    """l1 distance between a mesh-h measure and the split of a mesh-2h one.

    Fine unit ``i`` lies inside coarse unit ``ceil(i/2)``, which contributes
    half its mass; coarse indices past the end count as zero.
    """
    _check_refinement(fine, coarse)
    i = np.arange(1, fine.n_units + 1)
    j = (i + 1) // 2
    half = np.zeros(fine.n_units)
    ok = j <= coarse.n_units
    half[ok] = 0.5 * coarse.masses[j[ok] - 1]
    return float(np.abs(fine.masses - half).sum())


def refine(coarse: PiecewiseUniformMeasure, n_units: Optional[int] = None) -> PiecewiseUniformMeasure:
    """Split every coarse unit's mass evenly over its two halves."""
    grid = coarse.grid.refined()
    split = np.repeat(0.5 * coarse.masses, 2)
    n = split.size if n_units is None else n_units
    out = np.zeros(n)
    out[:min(n, split.size)] = split[:n]
    return PiecewiseUniformMeasure(grid, out, normalized=coarse.normalized and n >= split.size)


def zero_pad(mu: PiecewiseUniformMeasure, grid: Grid, n_units: Optional[int] = None) -> PiecewiseUniformMeasure:
    """Embed ``mu`` into a larger grid with the same mesh, zero beyond its units."""
    if not math.isclose(grid.h, mu.grid.h, rel_tol=1e-12):
        raise GridMismatchError(f"mesh differs: {grid.h} vs {mu.grid.h}")
    n = grid.n_chain_units if n_units is None else n_units
    if n < mu.n_units:
        raise GridMismatchError(f"cannot pad {mu.n_units} units into {n}")
    out = np.zeros(n)
    out[:mu.n_units] = mu.masses
    return PiecewiseUniformMeasure(grid, out, normalized=mu.normalized)


def write_measure_csv(mu: PiecewiseUniformMeasure, path: Union[str, Path]) -> None:
    left, right = mu.edges()
    dens = to_density(mu)
    with open(path, "w", newline="\n") as fh:
        fh.write("x_left,x_right,mass,density\n")
        for row in zip(left, right, mu.masses, dens):
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_measure_csv(path: Union[str, Path]) -> np.ndarray:
    """Structured array with fields ``x_left, x_right, mass, density``."""
    return np.genfromtxt(path, delimiter=",", names=True, ndmin=1)
