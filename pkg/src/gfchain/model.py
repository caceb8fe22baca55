"""Continuous growth-fragmentation model: grids, the rate ratio S = B/g and
quadrature-based evaluation of the exact transition kernel.

The continuous quantities here (tail, density, Lyapunov function, PV) are
computed with composite midpoint quadrature and act as the high-accuracy
oracle for the discrete scheme in :mod:`gfchain.kernel`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, EvaluationError, GridWarning

DEFAULT_QUAD_STEP = 1e-3


@dataclass(frozen=True)
class Grid:
    """Uniform grid on (0, a] with an even number of units.

    Units are left-open, right-closed: ``E_j = (x_{j-1}, x_j]`` for
    ``j = 1..n_x`` with ``x_j = j*h``.  Unit ``n_x + 1`` is the appended
    cell ``(a, a+h]`` that receives mass from the infinite tail.
    """

    a: float
    n_x: int

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DomainError(f"range a must be positive and finite, got {self.a!r}")
        if int(self.n_x) != self.n_x or self.n_x < 2 or self.n_x % 2:
            raise DomainError(f"n_x must be an even integer >= 2, got {self.n_x!r}")
        object.__setattr__(self, "n_x", int(self.n_x))
        object.__setattr__(self, "a", float(self.a))
        h = self.h
        if h > 1:
            warnings.warn(f"mesh h={h:g} exceeds 1", GridWarning, stacklevel=3)
        if self.a <= 3 * h:
            warnings.warn(f"range a={self.a:g} is not larger than 3h={3 * h:g}",
                          GridWarning, stacklevel=3)

    @classmethod
    def from_mesh(cls, a: float, h: float) -> "Grid":
        ratio = a / h
        n_x = int(round(ratio))
        if n_x < 1 or abs(ratio - n_x) > 1e-9 * ratio:
            raise DomainError(f"a/h = {ratio!r} is not an integer")
        return cls(a, n_x)

    @property
    def h(self) -> float:
        return self.a / self.n_x

    @property
    def n_chain_units(self) -> int:
        """Number of units the discrete chain lives on, ``n_x/2 + 1``."""
        return self.n_x // 2 + 1

    def points(self) -> np.ndarray:
        """Grid points ``x_0 .. x_{n_x}``."""
        return self.h * np.arange(self.n_x + 1)

    def unit_edges(self, n_units: int) -> tuple[np.ndarray, np.ndarray]:
        """Left and right edges of units ``1..n_units``."""
        j = np.arange(1, n_units + 1)
        return (j - 1) * self.h, j * self.h

    def refined(self) -> "Grid":
        return Grid(self.a, 2 * self.n_x)

    def coarsened(self) -> "Grid":
        if self.n_x % 4:
            raise DomainError(f"n_x={self.n_x} cannot be halved into an even count")
        return Grid(self.a, self.n_x // 2)


@dataclass(frozen=True)
class GrowthParams:
    """Polynomial growth bounds ``m x^(alpha-1) <= S(x) <= M x^(alpha-1)``
    for ``x >= x0``."""

    m: float
    M: float
    alpha: float
    x0: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.M >= self.m and self.alpha > 0 and self.x0 >= 0):
            raise DomainError(f"invalid growth parameters {self!r}")

    @property
    def c1(self) -> float:
        p = 2.0 ** self.alpha
        return p * self.M / ((p - 1.0) * self.m)

    @property
    def c2(self) -> float:
        return self.m * (2.0 ** self.alpha - 1.0) / self.alpha


class TabulatedS:
    """S known only at a fixed set of points.  Any other query is an error."""

    def __init__(self, xs, ss):
        xs = np.asarray(xs, dtype=float)
        ss = np.asarray(ss, dtype=float)
        if xs.ndim != 1 or xs.shape != ss.shape or xs.size == 0:
            raise DomainError("table needs two equal-length one-dimensional columns")
        if np.any(np.diff(xs) <= 0):
            raise DomainError("table x column must be strictly increasing")
        self.xs = xs
        self.ss = ss
        spacing = np.min(np.diff(xs)) if xs.size > 1 else max(abs(xs[0]), 1.0)
        self._atol = 1e-9 * spacing

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, x), 0, self.xs.size - 1)
        lower = np.clip(idx - 1, 0, self.xs.size - 1)
        pick = np.where(np.abs(self.xs[lower] - x) < np.abs(self.xs[idx] - x), lower, idx)
        miss = np.abs(self.xs[pick] - x) > self._atol
        if np.any(miss):
            bad = np.atleast_1d(x)[np.atleast_1d(miss)][0]
            raise DomainError(f"tabulated S has no value at x={bad!r}")
        return self.ss[pick]

    def matches(self, grid: Grid) -> bool:
        """True when the table covers every grid point ``x_1..x_{n_x}``."""
        pts = grid.points()[1:]
        if self.xs.size not in (pts.size, pts.size + 1):
            return False
        xs = self.xs[-pts.size:]
        return bool(np.all(np.abs(xs - pts) <= 1e-9 * grid.h))


@dataclass(frozen=True)
class ModelSpec:
    """Growth-fragmentation model reduced to its rate ratio ``S = B/g``.

    Parameters
    ----------
    tag : str
        Short identifier used in file headers and reports.
    s_eval : callable
        Vectorized ``S(x)`` for ``x > 0``.
    growth : GrowthParams, optional
        User-declared growth bounds; diagnostics refuse to run without them.
    integrable_at_zero : bool
        False when S is not integrable near 0, in which case the Lyapunov
        function and everything built on it is unavailable.
    """

    tag: str
    s_eval: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    growth: Optional[GrowthParams] = None
    integrable_at_zero: bool = True

    @classmethod
    def from_table(cls, xs, ss, tag: str = "table", growth=None) -> "ModelSpec":
        return cls(tag, TabulatedS(xs, ss), growth=growth)

    @classmethod
    def constant(cls, c: float, tag: Optional[str] = None) -> "ModelSpec":
        return cls(tag or f"constant({c:g})", lambda x: np.full(np.shape(x), float(c)),
                   growth=GrowthParams(c, c, 1.0, 0.0) if c > 0 else None)

    @property
    def is_tabulated(self) -> bool:
        return isinstance(self.s_eval, TabulatedS)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def verify_growth(self, samples=None) -> bool:
        """Check the declared growth bounds on a lattice of points above ``x0``."""
        if self.growth is None:
            raise DomainError(f"model {self.tag!r} declares no growth parameters")
        g = self.growth
        if samples is None:
            samples = g.x0 + np.geomspace(1e-3, 100.0, 400)
        xs = np.asarray(samples, dtype=float)
        xs = xs[xs > g.x0]
        s = evaluate(self, xs)
        scale = xs ** (g.alpha - 1.0)
        slack = 1e-12 * np.maximum(1.0, s)
        return bool(np.all(g.m * scale <= s + slack) and np.all(s <= g.M * scale + slack))


def evaluate(model: ModelSpec, x) -> np.ndarray:
    """Evaluate S, rejecting non-finite or negative values."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.asarray(model.s_eval(x), dtype=float)
    s = np.broadcast_to(s, x.shape)
    bad = ~np.isfinite(s) | (s < 0)
    if np.any(bad):
        where = np.flatnonzero(np.atleast_1d(bad))[0]
        raise EvaluationError(
            f"S is not a finite nonnegative number at x={np.atleast_1d(x)[where]!r} "
            f"(got {np.atleast_1d(s)[where]!r}) for model {model.tag!r}")
    return s


def _s_example1(x):
    return x


def _s_example2(x):
    return np.maximum(x, x * x) / x


def _s_example3(x):
    with np.errstate(divide="ignore"):
        return x + np.where(x > 1, 1.0 / x, 0.0)


def _s_example4(x):
    return 1.0 + 1.0 / x


BUILTIN_MODELS = {
    # g = x, B = x^2
    "example1": lambda: ModelSpec("example1", _s_example1, GrowthParams(1.0, 1.0, 2.0, 0.0)),
    # g = x, B = max(x, x^2): Lipschitz, not smooth
    "example2": lambda: ModelSpec("example2", _s_example2, GrowthParams(1.0, 1.0, 2.0, 1.0)),
    # g = x, B = x^2 + 1_{(1, inf)}: discontinuous at 1
    "example3": lambda: ModelSpec("example3", _s_example3, GrowthParams(1.0, 2.0, 2.0, 1.0)),
    # g = x, B = 1 + x: singular at 0, outside the ergodicity theory
    "example4": lambda: ModelSpec("example4", _s_example4, None, integrable_at_zero=False),
}


def builtin(name: str) -> ModelSpec:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise DomainError(
            f"unknown model {name!r}; choose one of {sorted(BUILTIN_MODELS)}") from None


# -- discrete quadrature used by the scheme ---------------------------------

def prefix_integral(model: ModelSpec, grid: Grid) -> np.ndarray:
    """Right-endpoint prefix sums ``P[k] = h * sum_{j=1..k} S(x_j)``.

    ``S(x_0)`` is never evaluated, so models singular at the origin work.

    Returns
    -------
    numpy.ndarray
        Array of length ``n_x + 1`` with ``P[0] = 0``.
    """
    s = evaluate(model, grid.points()[1:])
    out = np.empty(grid.n_x + 1)
    out[0] = 0.0
    np.cumsum(grid.h * s, out=out[1:])
    return out


# -- composite midpoint quadrature for the continuous oracle -----------------

def _segment_integrals(model, lo, hi, step):
    """Composite midpoint integral of S over each ``[lo[i], hi[i]]``."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    width = hi - lo
    out = np.zeros(lo.shape)
    live = width > 0
    if not np.any(live):
        return out
    lo_l, w_l = lo[live], width[live]
    n = np.maximum(np.ceil(w_l / step).astype(np.int64), 1)
    seg = np.repeat(np.arange(lo_l.size), n)
    offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    dx = w_l / n
    mids = lo_l[seg] + (offs + 0.5) * dx[seg]
    vals = evaluate(model, mids) * dx[seg]
    out[live] = np.bincount(seg, weights=vals, minlength=lo_l.size)
    return out


def _running_integral(model, start, points, step):
    """``int_start^p S`` for each p of an increasing array ``points >= start``."""
    points = np.asarray(points, dtype=float)
    lows = np.concatenate(([start], points[:-1]))
    return np.cumsum(_segment_integrals(model, lows, points, step))


def integral_s(model: ModelSpec, lo: float, hi: float,
               quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """``int_lo^hi S(t) dt`` by composite midpoint rule with panels <= quad_step."""
    if hi < lo:
        raise DomainError(f"integration bounds out of order: [{lo}, {hi}]")
    if lo == 0 and hi > 0 and not model.integrable_at_zero:
        raise EvaluationError(f"S of model {model.tag!r} is not integrable near 0")
    return float(_segment_integrals(model, lo, hi, quad_step)[0])


def _require_v(model: ModelSpec):
    if not model.integrable_at_zero:
        raise EvaluationError(
            f"Lyapunov function unavailable: S of model {model.tag!r} is not "
            "integrable near 0")


def lyapunov_v(model: ModelSpec, x: float, quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """``V(x) = exp(int_0^x S)``."""
    _require_v(model)
    if x < 0:
        raise DomainError(f"V needs x >= 0, got {x!r}")
    return math.exp(integral_s(model, 0.0, x, quad_step))


def tail_probability(model: ModelSpec, x: float, y: float,
                     quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """Probability that the next birth size exceeds ``y`` given current size ``x``."""
    if y < x / 2:
        raise DomainError(f"tail needs y >= x/2, got x={x!r}, y={y!r}")
    return math.exp(-integral_s(model, x, 2 * y, quad_step))


def density_p(model: ModelSpec, x: float, y: float,
              quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """Transition density ``p(x, y) = 2 S(2y) exp(-int_x^{2y} S)`` on ``y >= x/2``."""
    if x <= 0 or y <= 0:
        raise DomainError(f"density needs x, y > 0, got x={x!r}, y={y!r}")
    if y < x / 2:
        return 0.0
    return 2.0 * float(evaluate(model, 2 * y)) * tail_probability(model, x, y, quad_step)


def unit_masses(model: ModelSpec, x: float, grid: Grid, n_units: Optional[int] = None,
                quad_step: float = DEFAULT_QUAD_STEP) -> np.ndarray:
    """Masses the continuous kernel from ``x`` puts on units ``1..n_units``.

    The last entry collects everything above ``x_{n_units-1}``, matching the
    truncation used by the discrete chain.
    """
    if n_units is None:
        n_units = grid.n_chain_units
    edges = grid.h * np.arange(n_units)  # x_0 .. x_{n_units-1}
    tails = np.ones(n_units)
    above = 2 * edges > x
    if np.any(above):
        tails[above] = np.exp(-_running_integral(model, x, 2 * edges[above], quad_step))
    out = np.empty(n_units)
    out[:-1] = tails[:-1] - tails[1:]
    out[-1] = tails[-1]
    return out


def tail_integral(model: ModelSpec, x: float, lower: float,
                  quad_step: float = DEFAULT_QUAD_STEP, rel_cutoff: float = 1e-14,
                  chunk: int = 2048, max_span: float = 1e4) -> float:
    """``int_lower^inf p(x, y) V(y) dy``.

    Marches outward in chunks of midpoint panels of width ``quad_step`` and
    stops once the integrand drops below ``rel_cutoff`` times the running
    total while decaying.
    """
    _require_v(model)
    if x <= 0:
        raise DomainError(f"x must be positive, got {x!r}")
    start = max(lower, x / 2)
    hy = quad_step
    f_start = integral_s(model, 0.0, start, quad_step)      # log V(start)
    g_start = integral_s(model, x, 2 * start, quad_step)    # int_x^{2 start} S
    half = 0.5 * hy * np.arange(1, 2 * chunk + 1)
    total = 0.0
    y0 = start
    while True:
        pts = start + half
        f = f_start + _running_integral(model, start, pts, quad_step)
        g = g_start + _running_integral(model, 2 * start, 2 * pts, quad_step)
        mids = pts[0::2]
        expo = f[0::2] - g[0::2]
        with np.errstate(under="ignore"):
            vals = 2.0 * evaluate(model, 2 * mids) * np.exp(expo)
        total += float(vals.sum()) * hy
        f_start, g_start, start = f[-1], g[-1], pts[-1]
        decaying = vals[-1] <= vals[-2]
        if decaying and vals[-1] <= rel_cutoff * total:
            return total
        if total == 0.0 and expo[-1] < -745.0 and expo[-1] <= expo[-2]:
            return 0.0
        if start - y0 > max_span:
            raise EvaluationError(
                f"tail integral from x={x!r} did not decay within {max_span:g}")


def continuous_pv(model: ModelSpec, x: float, quad_step: float = DEFAULT_QUAD_STEP) -> float:
    """``[P V](x) = int_{x/2}^inf p(x, y) V(y) dy``."""
    return tail_integral(model, x, x / 2, quad_step)
