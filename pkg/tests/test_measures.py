import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gfchain import (ConvergenceError, Grid, GridMismatchError, PiecewiseUniformMeasure,
                     TransitionMatrix, build_matrix, builtin, evolve_step, invariant_measure,
                     point_mass, project_fv, read_measure_csv, refine, to_density,
                     tv_cross_grid, tv_same_grid, uniform, zero_pad)
from gfchain.errors import DomainError

EX1 = builtin("example1")


class _Dense(TransitionMatrix):
    """Matrix with explicitly supplied rows, for synthetic chains."""

    def __init__(self, grid, rows):
        super().__init__(grid, np.zeros(grid.n_x + 1), "synthetic")
        self.__dict__["dense"] = np.asarray(rows, dtype=float)


def _measure(grid, masses, normalized=True):
    return PiecewiseUniformMeasure(grid, np.asarray(masses, float), normalized)


# -- construction -----------------------------------------------------------

def test_measure_validation():
    g = Grid(2, 4)
    with pytest.raises(DomainError):
        _measure(g, [0.5, 0.6, -0.1])
    with pytest.raises(DomainError):
        _measure(g, [0.5, 0.6, 0.1])
    m = _measure(g, [2.0, 1.0, 0.0], normalized=False)
    assert m.total == 3.0


# -- projection -------------------------------------------------------------

def test_projection_of_uniform_unit_is_idempotent():
    g = Grid(2, 8)
    lo, hi = 0.75, 1.0  # unit 4

    def cdf(x):
        return min(max((x - lo) / (hi - lo), 0.0), 1.0)

    mu = project_fv(cdf, g)
    expected = np.zeros(9)
    expected[3] = 1.0
    np.testing.assert_allclose(mu.masses, expected, atol=1e-15)


def test_projection_of_point_mass():
    g = Grid(2, 8)
    mu = project_fv(lambda x: float(x >= 1.1), g)  # 1.1 in (1.0, 1.25] = E_5
    assert mu.masses[4] == 1.0 and mu.total == 1.0


def test_projection_sends_tail_to_appended_unit():
    g = Grid(2, 8)
    mu = project_fv(lambda x: 0.0, g)  # all mass on (a, inf)
    assert mu.n_units == 9
    assert mu.masses[-1] == 1.0


def test_projection_of_exponential():
    g = Grid(3, 30)
    mu = project_fv(lambda x: 1 - np.exp(-x), g)
    x = g.points()
    np.testing.assert_allclose(mu.masses[:-1], np.exp(-x[:-1]) - np.exp(-x[1:]), rtol=1e-12)
    assert mu.masses[-1] == pytest.approx(np.exp(-3.0))
    assert mu.total == pytest.approx(1.0, abs=1e-14)


def test_projection_rejects_decreasing_cdf():
    with pytest.raises(DomainError):
        project_fv(lambda x: 1.0 - x / 4, Grid(2, 4))


# -- evolution --------------------------------------------------------------

def test_evolve_with_identity_leaves_measure():
    g = Grid(4, 8)
    P = _Dense(g, np.eye(5))
    mu = _measure(g, [0.1, 0.2, 0.3, 0.25, 0.15])
    np.testing.assert_array_equal(evolve_step(mu, P).masses, mu.masses)


def test_evolve_point_mass_gives_row():
    g = Grid(10, 100)
    P = build_matrix(EX1, g)
    for unit in (1, 7, 51):
        np.testing.assert_allclose(evolve_step(point_mass(g, unit), P).masses, P.row(unit),
                                   rtol=0, atol=1e-17)


def test_evolve_preserves_mass_long_run():
    g = Grid(5, 250)
    P = build_matrix(EX1, g)
    mu = uniform(g)
    assert abs(evolve_step(mu, P).total - 1.0) <= 1e-14
    for _ in range(10_000):
        nxt = evolve_step(mu, P)
        assert abs(nxt.total - mu.total) <= 1e-14
        mu = nxt


def test_evolve_dimension_mismatch():
    g = Grid(4, 8)
    P = build_matrix(EX1, g)
    with pytest.raises(GridMismatchError):
        evolve_step(uniform(g, 4), P)
    with pytest.raises(GridMismatchError):
        evolve_step(uniform(Grid(4, 16)), P)


def test_full_grid_measure_lands_in_half_grid():
    g = Grid(6, 24)
    P = build_matrix(EX1, g)
    mu = project_fv(lambda x: 1 - np.exp(-0.2 * x), g)  # heavy tail beyond a
    out = evolve_step(mu, P)
    assert out.n_units == g.n_x + 1
    assert np.all(out.masses[g.n_chain_units:] == 0)
    assert out.total == pytest.approx(1.0, abs=1e-14)
    # the appended unit and every unit past n_x/2 use the degenerate row
    assert out.masses[g.n_chain_units - 1] >= mu.masses[g.n_x:].sum()


# -- invariant measure ------------------------------------------------------

def test_absorbing_unit():
    g = Grid(4, 8)
    rows = np.zeros((5, 5))
    rows[:, 2] = 0.5
    rows[:, 0] = 0.5
    rows[2] = [0, 0, 1, 0, 0]
    mu, _ = invariant_measure(_Dense(g, rows))
    np.testing.assert_allclose(mu.masses, [0, 0, 1, 0, 0], atol=1e-12)


def test_example1_iterations_and_residual():
    g = Grid.from_mesh(5, 0.02)
    P = build_matrix(EX1, g)
    pi, it = invariant_measure(P, uniform(g), tol=1e-12)
    assert 15 <= it <= 60
    assert np.abs(pi.masses @ P.dense - pi.masses).sum() <= 1e-12


def test_fixed_point_independent_of_start():
    g = Grid.from_mesh(5, 0.02)
    P = build_matrix(EX1, g)
    a, _ = invariant_measure(P, uniform(g), tol=1e-12)
    b, _ = invariant_measure(P, point_mass(g, 1), tol=1e-12)
    assert tv_same_grid(a, b) <= 10 * 1e-12


def test_non_convergence_reports_residual():
    P = build_matrix(EX1, Grid(5, 250))
    with pytest.raises(ConvergenceError) as info:
        invariant_measure(P, tol=1e-12, max_iter=3)
    assert info.value.residual > 1e-12
    assert info.value.iterations == 3


def test_periodic_chain_does_not_converge():
    g = Grid(4, 8)
    rows = np.roll(np.eye(5), 1, axis=1)
    with pytest.raises(ConvergenceError):
        invariant_measure(_Dense(g, rows), point_mass(g, 1), max_iter=50)


# -- density and distances --------------------------------------------------

def test_to_density():
    g = Grid(2, 4)
    np.testing.assert_array_equal(to_density(point_mass(g, 2)), [0, 2, 0])
    np.testing.assert_allclose(to_density(uniform(g)), 1 / (3 * 0.5))
    mu = _measure(g, [0.2, 0.7, 0.1])
    assert np.array_equal(to_density(mu) * g.h, mu.masses)


@pytest.mark.filterwarnings("ignore::gfchain.errors.GridWarning")
def test_tv_same_grid():
    g = Grid(2, 2)
    a = _measure(g, [0.6, 0.4])
    b = _measure(g, [0.5, 0.5])
    assert tv_same_grid(a, a) == 0
    assert tv_same_grid(a, b) == pytest.approx(0.2)
    assert tv_same_grid(point_mass(g, 1), point_mass(g, 2)) == 2
    with pytest.raises(GridMismatchError):
        tv_same_grid(a, uniform(Grid(4, 4)))


def test_tv_cross_grid_split_is_zero():
    coarse = _measure(Grid(4, 8), [0.1, 0.2, 0.3, 0.25, 0.15])
    fine_split = refine(coarse)
    # a 9-unit fine chain keeps the whole last coarse mass on its last unit
    masses = fine_split.masses[:9].copy()
    masses[-1] = 0.15
    fine = _measure(Grid(4, 16), masses)
    assert tv_cross_grid(fine_split, coarse) == 0.0
    assert tv_cross_grid(fine, coarse) == pytest.approx(0.075)


def test_tv_cross_grid_single_unit():
    coarse = _measure(Grid(4, 4), [1, 0, 0])
    fine = _measure(Grid(4, 8), [1, 0, 0, 0, 0])
    assert tv_cross_grid(fine, coarse) == pytest.approx(1.0)


def test_tv_cross_grid_incompatible():
    with pytest.raises(GridMismatchError):
        tv_cross_grid(uniform(Grid(4, 8)), uniform(Grid(4, 8)))
    with pytest.raises(GridMismatchError):
        tv_cross_grid(uniform(Grid(5, 16)), uniform(Grid(4, 8)))


@pytest.mark.filterwarnings("ignore::gfchain.errors.GridWarning")
@settings(max_examples=100, deadline=None)
@given(w=arrays(np.float64, st.integers(1, 40), elements=st.floats(0.01, 10)))
def test_refinement_identity(w):
    coarse = _measure(Grid(7.0, 2 * w.size), w / w.sum())
    assert tv_cross_grid(refine(coarse), coarse) == pytest.approx(0.0, abs=1e-15)


def test_zero_pad():
    pi = uniform(Grid(5, 250))
    big = zero_pad(pi, Grid(10, 500))
    assert big.n_units == 251
    assert np.all(big.masses[126:] == 0)
    with pytest.raises(GridMismatchError):
        zero_pad(pi, Grid(10, 250))


def test_measure_csv(tmp_path):
    g = Grid(5, 250)
    pi, _ = invariant_measure(build_matrix(EX1, g))
    out = tmp_path / "pi.csv"
    pi.to_csv(out)
    assert out.read_text().splitlines()[0] == "x_left,x_right,mass,density"
    data = read_measure_csv(out)
    np.testing.assert_array_equal(data["mass"], pi.masses)
    np.testing.assert_allclose(data["density"], pi.masses / g.h, rtol=1e-15)
    assert data["mass"].sum() == pytest.approx(1.0, abs=1e-9)
    assert data["x_right"][-1] == pytest.approx(2.5 + 0.02)
