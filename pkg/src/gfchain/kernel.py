"""Discrete transition kernel of the finite-volume growth-fragmentation chain.

Everything is derived from the right-endpoint prefix sums of S on the grid,
so a matrix needs only O(n_x) storage until a dense copy is requested.

Indexing follows the grid: grid indices run ``0..n_x`` and chain units run
``1..n_x/2+1``.  Arrays are 0-based, so unit ``k`` sits at position ``k-1``.
"""

from __future__ import annotations

from functools import cached_property
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from .errors import DomainError, GridMismatchError
from .model import Grid, ModelSpec, prefix_integral

_ROW_BLOCK = 256


def compute_q_row(prefix: np.ndarray, i: int) -> np.ndarray:
    """Discretized complementary distribution of the size at fragmentation.

    ``Q[k] = exp(-(P[max(i, k)] - P[i]))`` for ``k = 0..n_x``, so ``Q[k] = 1``
    for ``k <= i``.
    """
    n_x = len(prefix) - 1
    if not 0 <= i <= n_x:
        raise IndexError(f"grid index {i} outside 0..{n_x}")
    q = np.ones(n_x + 1)
    q[i + 1:] = np.exp(-(prefix[i + 1:] - prefix[i]))
    return q


def transition_row(q: np.ndarray, grid: Grid, i: int) -> np.ndarray:
    """Unit-to-unit probabilities out of a state rounded to grid index ``i``.

    Entry ``k`` (unit ``k = 1..n_x/2``) is ``Q[2k-2] - Q[2k]``; the last
    entry is ``Q[n_x]``.  ``i`` is implicit in ``q``, it is accepted for
    symmetry with :func:`compute_q_row`.
    """
    if len(q) != grid.n_x + 1:
        raise GridMismatchError(f"Q-row has length {len(q)}, grid expects {grid.n_x + 1}")
    even = q[0::2]
    row = np.empty(grid.n_chain_units)
    row[:-1] = even[:-1] - even[1:]
    row[-1] = even[-1]
    return row


def _start_index(unit, n_x):
    # states beyond the grid round to x_{n_x}
    return np.minimum(unit, n_x)


def _rows_block(prefix, units, n_x):
    i = _start_index(np.asarray(units), n_x)
    even = np.arange(0, n_x + 1, 2)
    idx = np.maximum(i[:, None], even[None, :])
    q = np.exp(-(prefix[idx] - prefix[i][:, None]))
    out = np.empty((len(i), even.size))
    out[:, :-1] = q[:, :-1] - q[:, 1:]
    out[:, -1] = q[:, -1]
    return out


class TransitionMatrix:
    """Row-stochastic ``(n_x/2+1) x (n_x/2+1)`` matrix of the discrete chain.

    Rows are regenerated on demand from the shared prefix-sum vector; the
    dense matrix is only built when :attr:`dense` is first accessed.
    """

    def __init__(self, grid: Grid, prefix: np.ndarray, model_tag: str = "custom"):
        prefix = np.asarray(prefix, dtype=float)
        if prefix.shape != (grid.n_x + 1,):
            raise GridMismatchError(
                f"prefix has shape {prefix.shape}, grid expects ({grid.n_x + 1},)")
        prefix.setflags(write=False)
        self.grid = grid
        self.prefix = prefix
        self.model_tag = model_tag

    def __repr__(self):
        return (f"TransitionMatrix(a={self.grid.a:g}, n_x={self.grid.n_x}, "
                f"model={self.model_tag!r})")

    @property
    def dim(self) -> int:
        return self.grid.n_chain_units

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dim, self.dim)

    def q_row(self, unit: int) -> np.ndarray:
        """Q-row for a state in ``unit`` (any unit ``>= 1``, including beyond the grid)."""
        if unit < 1:
            raise IndexError(f"unit index must be >= 1, got {unit}")
        return compute_q_row(self.prefix, int(_start_index(unit, self.grid.n_x)))

    def row(self, unit: int) -> np.ndarray:
        """Next-unit distribution for a state in ``unit``.

        Units above ``n_x/2 + 1`` are accepted so that measures on the full
        grid can be pushed forward; units past ``n_x`` share row ``n_x``.
        """
        return transition_row(self.q_row(unit), self.grid, unit)

    def iter_row_blocks(self, units=None, block: int = _ROW_BLOCK) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(units, rows)`` blocks without materializing the full matrix."""
        if units is None:
            units = np.arange(1, self.dim + 1)
        units = np.asarray(units)
        for s in range(0, units.size, block):
            u = units[s:s + block]
            yield u, _rows_block(self.prefix, u, self.grid.n_x)

    @cached_property
    def dense(self) -> np.ndarray:
        m = np.empty(self.shape)
        for u, rows in self.iter_row_blocks():
            m[u - 1] = rows
        m.setflags(write=False)
        return m

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.dense, dtype=dtype)

    def max_row_sum_error(self) -> float:
        """Largest ``|sum(row) - 1|`` over all rows, computed block-wise."""
        worst = 0.0
        for _, rows in self.iter_row_blocks():
            worst = max(worst, float(np.max(np.abs(rows.sum(axis=1) - 1.0))))
        return worst

    def to_csv(self, path: Union[str, Path]) -> None:
        write_matrix_csv(self, path)


def build_matrix(model: ModelSpec, grid: Grid) -> TransitionMatrix:
    """Transition matrix of the discrete chain for ``model`` on ``grid``."""
    if model.is_tabulated and not model.s_eval.matches(grid):
        raise DomainError(f"tabulated model {model.tag!r} was not given on this grid")
    return TransitionMatrix(grid, prefix_integral(model, grid), model.tag)


def write_matrix_csv(matrix: TransitionMatrix, path: Union[str, Path]) -> None:
    g = matrix.grid
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# gf-kernel matrix a={g.a!r} nx={g.n_x} model={matrix.model_tag}\n")
        for _, rows in matrix.iter_row_blocks():
            for r in rows:
                fh.write(",".join(f"{v:.17g}" for v in r))
                fh.write("\n")


def read_matrix_csv(path: Union[str, Path]) -> tuple[dict, np.ndarray]:
    """Read a matrix CSV back.  Returns ``(header fields, matrix)``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# gf-kernel matrix"):
            raise ValueError(f"{path}: not a gf-kernel matrix file")
        meta = dict(tok.split("=", 1) for tok in header.split()[3:])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, data
