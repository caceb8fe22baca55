import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gfchain import (Grid, GridWarning, ModelSpec, build_matrix, builtin, compute_q_row,
                     kernel_discrepancy, prefix_integral, read_matrix_csv, transition_row)
from gfchain.errors import DomainError

EX1 = builtin("example1")
SMALL = Grid(2, 4)


@pytest.fixture
def small_prefix():
    return prefix_integral(EX1, SMALL)


def test_q_row_from_origin(small_prefix):
    q = compute_q_row(small_prefix, 0)
    np.testing.assert_allclose(q, np.exp([0, -0.25, -0.75, -1.5, -2.5]), rtol=1e-15)
    np.testing.assert_allclose(q, [1, 0.77880, 0.47237, 0.22313, 0.08208], atol=5e-6)


def test_q_row_from_first_point(small_prefix):
    q = compute_q_row(small_prefix, 1)
    assert q[0] == q[1] == 1.0
    assert q[2] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert q[4] == pytest.approx(math.exp(-2.25), rel=1e-15)


@pytest.mark.parametrize("i", [0, 1, 2, 3, 4])
def test_q_row_is_one_up_to_i_then_decreasing(small_prefix, i):
    q = compute_q_row(small_prefix, i)
    assert np.all(q[: i + 1] == 1.0)
    assert np.all(np.diff(q) <= 0)
    assert np.all((q > 0) & (q <= 1))


@pytest.mark.parametrize("i", [-1, 5])
def test_q_row_index_error(small_prefix, i):
    with pytest.raises(IndexError):
        compute_q_row(small_prefix, i)


def test_transition_rows_small(small_prefix):
    r0 = transition_row(compute_q_row(small_prefix, 0), SMALL, 0)
    np.testing.assert_allclose(r0, [0.52763, 0.39028, 0.08208], atol=5e-6)
    r1 = transition_row(compute_q_row(small_prefix, 1), SMALL, 1)
    np.testing.assert_allclose(r1, [1 - math.exp(-0.5), math.exp(-0.5) - math.exp(-2.25),
                                    math.exp(-2.25)], rtol=1e-14)
    np.testing.assert_allclose(r1, [0.39347, 0.50113, 0.10540], atol=5e-6)


def test_transition_row_from_last_point_is_degenerate(small_prefix):
    row = transition_row(compute_q_row(small_prefix, 4), SMALL, 4)
    np.testing.assert_array_equal(row, [0, 0, 1])


def test_build_matrix_small():
    P = build_matrix(EX1, SMALL)
    assert P.shape == (3, 3)
    np.testing.assert_allclose(P.dense[0], [0.39347, 0.50113, 0.10540], atol=5e-6)
    np.testing.assert_allclose(P.dense.sum(axis=1), 1, atol=1e-15)


@pytest.mark.parametrize("name", ["example1", "example2", "example3", "example4"])
def test_smallest_grid(name):
    with pytest.warns(GridWarning):
        grid = Grid(1.0, 2)
    P = build_matrix(builtin(name), grid)
    assert P.shape == (2, 2)
    np.testing.assert_allclose(P.dense.sum(axis=1), 1, atol=1e-15)


def test_dense_matches_row_api():
    grid = Grid(10, 60)
    P = build_matrix(builtin("example3"), grid)
    for unit in (1, 2, 17, 31):
        np.testing.assert_array_equal(P.dense[unit - 1], P.row(unit))
        q = compute_q_row(P.prefix, unit)
        np.testing.assert_array_equal(P.row(unit), transition_row(q, grid, unit))


def test_rows_beyond_grid_share_last_grid_row():
    P = build_matrix(EX1, Grid(4, 20))
    last = np.zeros(P.dim)
    last[-1] = 1.0
    for unit in (20, 21, 50):
        np.testing.assert_array_equal(P.row(unit), last)


@pytest.mark.parametrize("name", ["example1", "example2", "example3", "example4"])
def test_matrix_invariants(name):
    grid = Grid(10, 400)
    P = build_matrix(builtin(name), grid)
    M = P.dense
    assert np.all(M >= 0)
    assert P.max_row_sum_error() <= 1e-12
    for unit in range(1, P.dim + 1):
        # zero mass on units k <= i/2, i.e. below the half-grid point
        assert np.all(M[unit - 1, : unit // 2] == 0)


@pytest.mark.filterwarnings("ignore::gfchain.errors.GridWarning")
@settings(max_examples=40, deadline=None)
@given(s=arrays(np.float64, st.integers(1, 30).map(lambda n: 2 * n),
                elements=st.floats(0, 50, allow_nan=False)),
       a=st.floats(0.5, 20))
def test_random_tables_give_stochastic_matrices(s, a):
    grid = Grid(a, s.size)
    model = ModelSpec.from_table(grid.points()[1:], s)
    P = build_matrix(model, grid)
    assert np.all(P.dense >= 0)
    assert np.max(np.abs(P.dense.sum(axis=1) - 1)) <= 1e-12
    for unit in range(1, P.dim + 1):
        assert np.all(P.dense[unit - 1, : unit // 2] == 0)


def test_table_on_wrong_grid_rejected():
    g = Grid(2, 4)
    model = ModelSpec.from_table(g.points()[1:], [1, 2, 3, 4])
    with pytest.raises(DomainError):
        build_matrix(model, Grid(2, 8))
    # a table that also lists x_0 is accepted
    model0 = ModelSpec.from_table(g.points(), [0, 1, 2, 3, 4])
    np.testing.assert_array_equal(build_matrix(model0, g).dense, build_matrix(model, g).dense)


def test_discrepancy_to_continuous_kernel_is_first_order():
    d = [kernel_discrepancy(EX1, Grid.from_mesh(5, h)) for h in (0.1, 0.05, 0.025)]
    for coarse, fine in zip(d, d[1:]):
        assert 1.7 <= coarse / fine <= 2.3


def test_matrix_csv_round_trip(tmp_path):
    P = build_matrix(builtin("example2"), Grid(3, 12))
    out = tmp_path / "k.csv"
    P.to_csv(out)
    first = out.read_text().splitlines()[0]
    assert first == "# gf-kernel matrix a=3.0 nx=12 model=example2"
    meta, data = read_matrix_csv(out)
    assert meta == {"a": "3.0", "nx": "12", "model": "example2"}
    np.testing.assert_array_equal(data, P.dense)
    np.testing.assert_allclose(data.sum(axis=1), 1, atol=1e-9)
