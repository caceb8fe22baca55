"""Sampling trajectories of the discrete growth-fragmentation chain.

A step draws the next unit by inverting the discretized tail: with
``E = -log(u)``, ``u`` uniform on (0, 1], the next unit is the first ``k``
with ``P[2k] > P[i] + E`` (equivalently ``Q_{i,2k} < u <= Q_{i,2k-2}``),
and the new size is uniform inside that unit.  Each step consumes exactly
two uniforms from the generator, so scalar and batched sampling see the
same stream.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DomainError, GridMismatchError
from .kernel import TransitionMatrix, build_matrix
from .measures import PiecewiseUniformMeasure
from .model import Grid, ModelSpec

_BLOCK = 65536


def round_to_grid(size: float, grid: Grid) -> tuple[int, bool]:
    """Index ``i`` of the unit ``E_i = (x_{i-1}, x_i]`` containing ``size``.

    Returns ``(i, beyond_grid)`` where ``beyond_grid`` means ``size > a``.
    """
    if not size > 0:
        raise DomainError(f"size must be positive, got {size!r}")
    h = grid.h
    i = max(1, math.ceil(size / h))
    # guard against size/h rounding across a grid point
    while i > 1 and size <= (i - 1) * h:
        i -= 1
    while size > i * h:
        i += 1
    return i, i > grid.n_x


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class ChainSampler:
    """Draws steps of the discrete chain from a :class:`TransitionMatrix`."""

    def __init__(self, matrix: TransitionMatrix):
        self.matrix = matrix
        self.grid = matrix.grid
        self._prefix = matrix.prefix
        self._even = matrix.prefix[0::2]
        self._prefix_list = matrix.prefix.tolist()
        self._even_list = self._even.tolist()

    def _unit(self, i: int, u: float) -> int:
        n_x = self.grid.n_x
        if i > n_x:
            return n_x // 2 + 1
        target = self._prefix_list[i] - math.log(u)
        return min(bisect.bisect_right(self._even_list, target), n_x // 2 + 1)

    def next_size(self, size: float, rng: np.random.Generator) -> float:
        i, _ = round_to_grid(size, self.grid)
        u = 1.0 - rng.random()
        v = 1.0 - rng.random()
        k = self._unit(i, u)
        return self.grid.h * (k - 1 + v)

    def next_units(self, units, rng) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized step for many states given by their unit indices.

        Returns ``(next_units, next_sizes)``.
        """
        rng = _as_generator(rng)
        units = np.asarray(units, dtype=np.int64)
        n_x = self.grid.n_x
        r = rng.random((units.size, 2))
        u = 1.0 - r[:, 0]
        v = 1.0 - r[:, 1]
        start = np.minimum(units, n_x)
        target = self._prefix[start] - np.log(u)
        k = np.minimum(np.searchsorted(self._even, target, side="right"), n_x // 2 + 1)
        k[units > n_x] = n_x // 2 + 1
        return k, self.grid.h * (k - 1 + v)

    def path(self, init: float, n_steps: int, rng) -> np.ndarray:
        """Trajectory of ``n_steps`` steps from ``init`` (length ``n_steps + 1``)."""
        if n_steps < 0:
            raise DomainError(f"n_steps must be >= 0, got {n_steps}")
        rng = _as_generator(rng)
        out = np.empty(n_steps + 1)
        out[0] = init
        size = float(init)
        h = self.grid.h
        done = 0
        unit = self._unit
        while done < n_steps:
            m = min(_BLOCK, n_steps - done)
            r = rng.random(2 * m).tolist()
            for s in range(m):
                i, _ = round_to_grid(size, self.grid)
                k = unit(i, 1.0 - r[2 * s])
                size = h * (k - 1 + (1.0 - r[2 * s + 1]))
                out[done + s + 1] = size
            done += m
        return out


@dataclass
class ChainState:
    """Current size of the chain together with the random stream that drives it."""

    size: float
    grid: Grid
    rng: np.random.Generator

    def __post_init__(self):
        if not self.size > 0:
            raise DomainError(f"size must be positive, got {self.size!r}")
        self.rng = _as_generator(self.rng)


def step_sample(state: ChainState, matrix: TransitionMatrix) -> ChainState:
    """Advance ``state`` by one step of the discrete chain.

    The generator is shared with (and advanced in) the returned state.
    """
    if state.grid != matrix.grid:
        raise GridMismatchError("state and matrix live on different grids")
    nxt = ChainSampler(matrix).next_size(state.size, state.rng)
    return ChainState(nxt, state.grid, state.rng)


def simulate_path(init: float, n_steps: int, grid: Grid, model: ModelSpec,
                  seed=None) -> np.ndarray:
    """Deterministic trajectory given ``seed`` (an int, SeedSequence or Generator)."""
    if not init > 0:
        raise DomainError(f"initial size must be positive, got {init!r}")
    return ChainSampler(build_matrix(model, grid)).path(init, n_steps, seed)


def spawn_generators(seed, n: int) -> list[np.random.Generator]:
    """Independent generators for ``n`` parallel trajectories."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(n)]


def empirical_histogram(sizes, grid: Grid, n_units: Optional[int] = None) -> PiecewiseUniformMeasure:
    """Normalized unit-occupancy counts of ``sizes``."""
    sizes = np.asarray(sizes, dtype=float)
    if sizes.size == 0:
        raise DomainError("cannot build a histogram of no samples")
    n = grid.n_chain_units if n_units is None else n_units
    if np.any(sizes <= 0):
        raise DomainError("sizes must be positive")
    units = np.ceil(sizes / grid.h).astype(np.int64)
    # sizes sitting on a grid point belong to the lower unit
    units -= ((units - 1) * grid.h >= sizes).astype(np.int64)
    units = np.maximum(units, 1)
    if np.any(units > n):
        raise DomainError(f"a size falls beyond unit {n} (x > {n * grid.h:g})")
    counts = np.bincount(units - 1, minlength=n).astype(float)
    return PiecewiseUniformMeasure(grid, counts / sizes.size)


def write_trajectory_csv(path_values, out: Union[str, Path]) -> None:
    with open(out, "w", newline="\n") as fh:
        fh.write("step,size\n")
        for n, s in enumerate(path_values):
            fh.write(f"{n},{s:.17g}\n")
