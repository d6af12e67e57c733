import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floorop.paths import BLOCK_SIZE, ParameterError, TimeGrid, build_lattice, simulate_paths


def test_grid_nodes():
    g = TimeGrid(2.0, 4)
    assert g.dt == 0.5
    np.testing.assert_array_equal(g.times, [0, 0.5, 1.0, 1.5, 2.0])
    assert g.t(4) == 2.0


@pytest.mark.parametrize("T,N", [(1.0, 0), (0.0, 3), (-1.0, 3), (np.inf, 3), (1.0, 2.5)])
def test_grid_rejects_bad_input(T, N):
    with pytest.raises(ParameterError):
        TimeGrid(T, N)


def test_single_step_path():
    p = simulate_paths(TimeGrid(1.0, 1), 1, 1, seed=42)
    assert p.W.shape == (1, 2, 1)
    assert p.W[0, 0, 0] == 0.0
    assert np.isfinite(p.W[0, 1, 0]) and p.W[0, 1, 0] != 0.0


def test_terminal_moments_seed7():
    M = 10**5
    W = simulate_paths(TimeGrid(1.0, 50), 1, M, seed=7).W[:, -1, 0]
    assert abs(W.mean()) <= 3 / np.sqrt(M)
    assert abs(W.var() - 1.0) <= 0.02


def test_determinism_bit_identical():
    g = TimeGrid(1.0, 20)
    a = simulate_paths(g, 2, 5000, seed=3, stream=1)
    b = simulate_paths(g, 2, 5000, seed=3, stream=1)
    assert np.array_equal(a.W, b.W)
    c = simulate_paths(g, 2, 5000, seed=3, stream=2)
    assert not np.array_equal(a.W, c.W)


def test_paths_do_not_depend_on_count():
    # a path is a function of (seed, stream, index) only
    g = TimeGrid(1.0, 5)
    small = simulate_paths(g, 1, BLOCK_SIZE + 10, seed=11)
    big = simulate_paths(g, 1, 3 * BLOCK_SIZE, seed=11)
    assert np.array_equal(small.W, big.W[: BLOCK_SIZE + 10])


@pytest.mark.parametrize("d,M", [(0, 5), (1, 0)])
def test_rejects_empty(d, M):
    with pytest.raises(ParameterError):
        simulate_paths(TimeGrid(1.0, 3), d, M, seed=0)


def test_increment_sanity_many_paths():
    p = simulate_paths(TimeGrid(2.0, 10), 3, 20_000, seed=5)
    dW = np.stack([p.increment(i) for i in range(10)], axis=1)
    se = np.sqrt(p.grid.dt / p.M)
    assert np.all(np.abs(dW.mean(axis=0)) <= 4 * se)
    # variance band at 3 sigma: sd of sample variance is dt * sqrt(2 / M)
    assert np.all(np.abs(dW.var(axis=0) - p.grid.dt) <= 4 * p.grid.dt * np.sqrt(2 / p.M))


def test_lattice_n2_nodes():
    lat = build_lattice(TimeGrid(1.0, 2))
    r = 1 / np.sqrt(2)
    np.testing.assert_allclose(lat.nodes(0), [0.0])
    np.testing.assert_allclose(lat.nodes(1), [-r, r])
    np.testing.assert_allclose(lat.nodes(2), [-2 * r, 0.0, 2 * r])


def test_lattice_second_moment_n100():
    lat = build_lattice(TimeGrid(1.0, 100))
    assert lat.probabilities(100) @ lat.nodes(100) ** 2 == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 200), T=st.floats(0.1, 10.0), frac=st.floats(0, 1))
def test_lattice_moment_exactness(N, T, frac):
    lat = build_lattice(TimeGrid(T, N))
    i = int(round(frac * N))
    p, x = lat.probabilities(i), lat.nodes(i)
    assert lat.node_count(i) == i + 1 == len(x)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert abs(p @ x) <= 1e-9 * max(1.0, np.sqrt(T))
    assert p @ x**2 == pytest.approx(lat.grid.t(i), rel=1e-10, abs=1e-12)
