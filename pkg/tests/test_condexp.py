import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from floorop.condexp import (DegenerateRegressionError, EnsembleBackend, RegressionSpec,
                             cond_exp, cond_exp_weighted)
from floorop.paths import TimeGrid, simulate_paths

from conftest import ensemble, lattice


def test_constants_fixed_on_both_backends():
    lat = lattice(6)
    assert np.array_equal(lat.cond_exp(np.full(6, 2.5), 4), np.full(5, 2.5))
    ens = ensemble(6, 5000, seed=1)
    for i in (0, 3, 5):
        np.testing.assert_allclose(ens.cond_exp(np.full(5000, 2.5), i), 2.5, atol=1e-10)


def test_lattice_martingale():
    lat = lattice(10)
    for i in range(10):
        np.testing.assert_allclose(lat.cond_exp(lat.brownian(i + 1)[:, 0], i), lat.brownian(i)[:, 0], atol=1e-15)


def test_lattice_square_one_step():
    lat = lattice(1)
    v = lat.brownian(1)[:, 0] ** 2
    assert lat.cond_exp(v, 0)[0] == pytest.approx(1.0, abs=1e-15)


def test_weighted_examples():
    lat = lattice(8)
    dt = lat.grid.dt
    for i in range(8):
        assert np.all(lat.cond_exp_weighted(np.full(i + 2, 3.0), i) == 0.0)
        np.testing.assert_allclose(lat.cond_exp_weighted(lat.brownian(i + 1)[:, 0], i), dt, rtol=1e-14)
    # the increment itself, on the ensemble: E[dW dW | F_i] ~ dt
    ens = ensemble(4, 50_000, seed=2)
    dW = ens.paths.increment(2)[:, 0]
    est = ens.cond_exp_weighted(dW, 2)
    assert abs(est.mean() - ens.grid.dt) < 4 * ens.grid.dt * np.sqrt(2 / 50_000)
    # constants: the raw regression of c*dW is zero only up to sampling noise, the
    # centred Z estimator used by the solver vanishes up to rounding
    c = np.full(50_000, 7.0)
    raw = ens.cond_exp_weighted(c, 2)
    assert abs(raw.mean()) < 4 * 7.0 * np.sqrt(ens.grid.dt / 50_000)
    assert np.max(np.abs(ens.z_estimate(c, ens.cond_exp(c, 2), 2))) < 1e-10


def test_module_level_wrappers():
    lat = lattice(4)
    v = np.arange(5.0)
    assert np.array_equal(cond_exp(v, 3, lat), lat.cond_exp(v, 3))
    assert np.array_equal(cond_exp_weighted(v, 3, lat), lat.cond_exp_weighted(v, 3))


def test_lattice_tower_brute_force():
    lat = lattice(5)
    rng = np.random.default_rng(0)
    v = rng.normal(size=6)
    two = lat.cond_exp(lat.cond_exp(v, 4), 3)
    # four equally likely outcomes from node j at step 3: uu, ud, du, dd
    brute = np.array([0.25 * (v[j + 2] + 2 * v[j + 1] + v[j]) for j in range(4)])
    np.testing.assert_allclose(two, brute, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(a=arrays(float, 9, elements=st.floats(-100, 100)), b=arrays(float, 9, elements=st.floats(-100, 100)),
       c=st.floats(-10, 10), i=st.integers(0, 7))
def test_lattice_linear_and_positive(a, b, c, i):
    lat = lattice(8)
    a, b = a[: i + 2], b[: i + 2]
    np.testing.assert_allclose(lat.cond_exp(a + c * b, i), lat.cond_exp(a, i) + c * lat.cond_exp(b, i),
                               atol=1e-9)
    assert np.all(lat.cond_exp(np.abs(a), i) >= 0)


@settings(max_examples=15, deadline=None)
@given(c1=st.floats(-5, 5), c2=st.floats(-5, 5))
def test_ensemble_linear(c1, c2):
    ens = ensemble(3, 2000, seed=4)
    x = ens.brownian(3)[:, 0]
    a, b = np.sin(x), x**3
    np.testing.assert_allclose(ens.cond_exp(c1 * a + c2 * b, 1), c1 * ens.cond_exp(a, 1) + c2 * ens.cond_exp(b, 1),
                               atol=1e-8)


def test_ensemble_projection_close_to_truth():
    # E[W_{i+1}^2 | W_i] = W_i^2 + dt lies in the basis, so the regression recovers it
    ens = ensemble(4, 20_000, seed=9)
    v = ens.brownian(3)[:, 0] ** 2
    truth = ens.brownian(2)[:, 0] ** 2 + ens.grid.dt
    assert np.sqrt(np.mean((ens.cond_exp(v, 2) - truth) ** 2)) < 0.03


def test_degenerate_regression_names_step():
    # zero ridge and a state with too few distinct values -> singular normal equations
    spec = RegressionSpec(degree=4, ridge=0.0, state=lambda t, w: np.sign(w))
    ens = EnsembleBackend(simulate_paths(TimeGrid(1.0, 3), 1, 500, seed=0), spec)
    with pytest.raises(DegenerateRegressionError) as err:
        ens.cond_exp(np.ones(500), 2)
    assert err.value.step == 2
    assert "step 2" in str(err.value)


def test_spec_validation_and_describe():
    with pytest.raises(ValueError):
        RegressionSpec(degree=-1)
    with pytest.raises(ValueError):
        RegressionSpec(ridge=-1.0)
    assert "deg=4" in RegressionSpec().describe()


def test_non_finite_input_rejected():
    with pytest.raises((ValueError, FloatingPointError, ArithmeticError)):
        lattice(2).cond_exp(np.array([1.0, np.nan, 2.0]), 1)


def test_subtree_matches_main_lattice():
    lat = lattice(6)
    sub = lat.subtree(2, 1)
    assert sub.size(2) == 1 and sub.size(6) == 5
    np.testing.assert_allclose(sub.brownian(6), lat.brownian(6)[1:6])
