import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from floorop.bsde import (ClaimError, TerminalClaim, abs_claim, backward, brownian_claim, constant_claim,
                          duality_check, e_mu, moment_bound_check, restart_consistency, solve_bsde, square_claim)
from floorop.generators import DISCOUNT, EMU, LINEAR, NEG_EMU, ZERO, custom
from floorop.oracles import closed_form_linear, exhaustive_expectation

from conftest import ensemble, lattice, prefix_nodes


@pytest.mark.parametrize("N", [1, 2, 7, 50, 400])
def test_zero_driver_square_is_one(N):
    sol = solve_bsde(square_claim(), ZERO(), lattice(N))
    assert sol.y0 == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("be", [lattice(6), ensemble(6, 3000, seed=1)], ids=["lattice", "ensemble"])
def test_constant_claim(be):
    sol = solve_bsde(constant_claim(2.5), EMU(1.0), be)
    for i in range(7):
        np.testing.assert_allclose(sol.y(i), 2.5, atol=1e-12)
        if i < 6:
            np.testing.assert_allclose(sol.z(i), 0.0, atol=1e-10)
    assert np.all(sol.mean_K() == 0.0)


@pytest.mark.parametrize("mu", [0.0, 0.5, 2.0])
def test_linear_closed_form(mu):
    be = lattice(10)
    sol = solve_bsde(brownian_claim(), LINEAR(mu), be)
    for i in range(11):
        w = be.brownian(i)[:, 0]
        expect = np.array([closed_form_linear(mu, be.grid.t(i), x, 1.0) for x in w])
        np.testing.assert_allclose(sol.y(i), expect, atol=1e-12)
        if i < 10:
            np.testing.assert_allclose(sol.z(i), 1.0, atol=1e-12)


def test_e_mu_examples():
    be = lattice(10)
    assert np.all(e_mu(constant_claim(-3.0), 2.0, be).y(0) == -3.0)
    sol = e_mu(brownian_claim(), 1.5, be)
    for i in range(11):
        np.testing.assert_allclose(sol.y(i), be.brownian(i)[:, 0] + 1.5 * (1 - be.grid.t(i)), atol=1e-12)
    vals = [e_mu(abs_claim(), m, be).y0 for m in (0.0, 0.25, 0.5, 1.0, 2.0)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_solver_matches_frozen_oracles(frozen):
    assert solve_bsde(square_claim(), ZERO(), lattice(3)).y0 == pytest.approx(
        frozen("exhaustive", claim="B_T^2", gen="zero", N=3, T=1.0), abs=1e-14)
    assert solve_bsde(brownian_claim(), EMU(1.0), lattice(3)).y0 == pytest.approx(
        frozen("exhaustive", claim="B_T", gen="emu(1)", N=3, T=1.0), abs=1e-14)
    for N in (8, 10):
        assert e_mu(abs_claim(), 1.0, lattice(N)).y0 == frozen("exhaustive", claim="|B_T|", gen="emu(1)",
                                                                 N=N, T=1.0)


def test_duality_examples():
    be = lattice(8)
    assert duality_check(constant_claim(1.5), 2.0, 1.0, be, 3) < 1e-14
    # X = B_T, Y = 0: both sides are W_t - mu (T - t)
    assert duality_check(brownian_claim(), 0.0, 1.0, be, 4) < 1e-14
    be4 = lattice(4)
    for t in range(5):
        assert duality_check(square_claim(), be4.brownian(t)[:, 0], 1.0, be4, t) <= 1e-12


def test_duality_brute_force_n4():
    # both sides by exhaustive enumeration of the 16 paths
    N, mu = 4, 1.0
    be = lattice(N)
    for t in range(N + 1):
        lhs = exhaustive_expectation(lambda W: W[:, N] ** 2 + W[:, t], N, 1.0, NEG_EMU(mu),
                                     path_functional=True, return_tree=True)[t]
        inner = exhaustive_expectation(lambda x: -x[:, 0] ** 2, N, 1.0, EMU(mu), return_tree=True)[t]
        pos = be.brownian(t)[:, 0][prefix_nodes(t)]
        np.testing.assert_allclose(lhs, pos - inner, atol=1e-12)


def test_duality_on_ensemble_statistical():
    be = ensemble(10, 20_000, seed=3)
    r = duality_check(abs_claim(), 0.5, 1.0, be, 0)
    assert r < 1e-8


def test_moment_bound_examples(frozen):
    be = lattice(8)
    rep = moment_bound_check(constant_claim(2.0), 1.0, 2.0, be)
    assert rep.passed and rep.lhs < rep.rhs
    assert rep.factor == pytest.approx(np.e, rel=1e-15)
    for p, mu in [(2.0, 1.0), (1.5, 1.0), (2.0, 0.5)]:
        rep = moment_bound_check(abs_claim(), mu, p, be)
        assert rep.passed
        assert rep.lhs == pytest.approx(frozen("moment_lhs", p=p, mu=mu, N=8, T=1.0), rel=1e-13)
        assert rep.rhs == pytest.approx(rep.factor * frozen("moment_ex_p", p=p, N=8, T=1.0), rel=1e-13)


def test_moment_bound_rejects():
    be = lattice(4)
    for p in (1.0, 2.5, 0.5):
        with pytest.raises(ValueError):
            moment_bound_check(abs_claim(), 1.0, p, be)
    with pytest.raises(ClaimError):
        moment_bound_check(brownian_claim(), 1.0, 2.0, be)


def test_moment_bound_ensemble():
    rep = moment_bound_check(abs_claim(), 1.0, 2.0, ensemble(20, 20_000, seed=5))
    assert rep.passed


terminal = arrays(float, 9, elements=st.floats(-20, 20))


@settings(max_examples=60, deadline=None)
@given(a=terminal, b=terminal, mu=st.floats(0, 2.8))
def test_lattice_comparison(a, b, mu):
    # mu * sqrt(dt) <= 1 keeps the explicit step monotone
    be = lattice(8)
    hi, lo = np.maximum(a, b), np.minimum(a, b)
    s_hi, s_lo = solve_bsde(hi, EMU(mu), be), solve_bsde(lo, EMU(mu), be)
    for i in range(9):
        assert np.all(s_hi.y(i) >= s_lo.y(i) - 1e-12)


@settings(max_examples=60, deadline=None)
@given(a=terminal, c=st.floats(-50, 50), mu=st.floats(0, 3))
def test_lattice_translation(a, c, mu):
    be = lattice(8)
    s1, s2 = solve_bsde(a, EMU(mu), be), solve_bsde(a + c, EMU(mu), be)
    for i in range(9):
        np.testing.assert_allclose(s2.y(i), s1.y(i) + c, atol=1e-11)


@settings(max_examples=8, deadline=None)
@given(c=st.floats(-20, 20))
def test_ensemble_translation(c):
    be = ensemble(6, 4000, seed=2)
    x = np.abs(be.brownian(6)[:, 0])
    s1, s2 = solve_bsde(x, EMU(1.0), be), solve_bsde(x + c, EMU(1.0), be)
    for i in range(7):
        np.testing.assert_allclose(s2.y(i), s1.y(i) + c, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(a=terminal, b=terminal, mu=st.floats(0, 2.8))
def test_l2_continuity(a, b, mu):
    be = lattice(8)
    y1, y2 = solve_bsde(a, EMU(mu), be).y0, solve_bsde(b, EMU(mu), be).y0
    dist = np.sqrt(be.expectation((a - b) ** 2, 8))
    assert abs(y1 - y2) <= np.exp(mu**2 / 2) * dist * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(a=terminal, j=st.integers(0, 8), mu=st.floats(0, 3))
def test_restart_is_bit_identical(a, j, mu):
    be = lattice(8)
    sol = solve_bsde(a, EMU(mu), be)
    assert restart_consistency(sol, j, EMU(mu)) == 0.0


def test_path_dependent_claim_rejected_on_lattice():
    runmax = TerminalClaim("max W", path_payoff=lambda W: W[:, :, 0].max(axis=1))
    with pytest.raises(ClaimError):
        solve_bsde(runmax, ZERO(), lattice(4))
    be = ensemble(4, 2000, seed=0)
    assert solve_bsde(runmax, ZERO(), be).y0 > 0


def test_bad_claim_shapes():
    with pytest.raises(ClaimError):
        solve_bsde(np.zeros(3), ZERO(), lattice(4))
    with pytest.raises(ClaimError):
        solve_bsde(np.array([0, 1, np.nan, 0, 0.0]), ZERO(), lattice(4))


def test_overflow_flagged_with_step():
    boom = custom("boom", lambda t, y, z: 1e308 * np.abs(z[:, 0]) * 1e10, lip_z=0.0, spot_check=False)
    with pytest.raises(FloatingPointError, match="step 4"):
        with np.errstate(over="ignore"):
            solve_bsde(brownian_claim(), boom, lattice(5))


def test_discount_driver_solution():
    # g = -r y on a constant claim: explicit scheme gives c (1 - r dt)^N
    be = lattice(20)
    sol = solve_bsde(constant_claim(3.0), DISCOUNT(0.05), be)
    assert sol.y0 == pytest.approx(3.0 * (1 - 0.05 / 20) ** 20, rel=1e-14)


def test_backward_index_checks():
    with pytest.raises(IndexError):
        backward(np.zeros(5), 4, 5, ZERO(), lattice(4))
