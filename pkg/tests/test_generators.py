import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from floorop.generators import (DISCOUNT, EMU, LINEAR, NEG_EMU, ZERO, GeneratorError, by_name, custom,
                                validate_generator)


def test_emu2_ratio_within_declared():
    rep = validate_generator(EMU(2.0), probe_count=1000, box=10.0, dim=3)
    assert rep.ok and rep.worst_z_ratio <= 2.0 * (1 + 1e-10)
    assert rep.worst_z_ratio > 1.5  # the probes do get near the constant


def test_zero_ratios_vanish():
    rep = validate_generator(ZERO())
    assert rep.ok and rep.worst_z_ratio == 0.0 and rep.worst_y_ratio == 0.0


def test_square_misdeclared_reports_violation():
    g = custom("z^2", lambda t, y, z: z[:, 0] ** 2, lip_z=1.0, spot_check=False)
    rep = validate_generator(g, probe_count=1000, box=5.0, dim=1)
    assert not rep.ok
    assert rep.offending[0] == "z"
    # |z1^2 - z2^2| / |z1 - z2| = |z1 + z2| <= 10 on the box
    assert 1.0 < rep.worst_z_ratio <= 10.0


def test_misdeclared_generator_rejected_at_construction():
    with pytest.raises(GeneratorError):
        custom("z^2", lambda t, y, z: z[:, 0] ** 2, lip_z=1.0)
    with pytest.raises(GeneratorError):
        custom("one", lambda t, y, z: np.ones(len(y)), zero_at_zero=True)
    with pytest.raises(GeneratorError):
        custom("y", lambda t, y, z: y, lip_y=1.0, y_independent=True)


def test_discount_metadata():
    g = DISCOUNT(0.05)
    assert not g.y_independent and not g.z_only
    np.testing.assert_allclose(g(0.0, np.array([2.0]), np.zeros((1, 1))), [-0.1])
    assert validate_generator(g).ok


def test_linear_and_by_name():
    g = LINEAR([1.0, -2.0])
    np.testing.assert_allclose(g(0.0, np.zeros(1), np.array([[3.0, 1.0]])), [1.0])
    assert by_name("emu", mu=3.0).mu == 3.0
    assert by_name("ZERO").name == "zero"
    with pytest.raises(GeneratorError):
        by_name("quadratic")
    with pytest.raises(GeneratorError):
        EMU(-1.0)


def test_l1_norm_option():
    g = EMU(1.0, norm="l1")
    np.testing.assert_allclose(g(0.0, np.zeros(1), np.array([[3.0, -4.0]])), [7.0])
    np.testing.assert_allclose(EMU(1.0)(0.0, np.zeros(1), np.array([[3.0, -4.0]])), [5.0])


zs = arrays(float, (20, 2), elements=st.floats(-50, 50))


@settings(max_examples=50, deadline=None)
@given(z=zs, mu=st.floats(0, 5), frac=st.floats(0, 1), b=st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_emu_dominates_z_only_class(z, mu, frac, b):
    # any z-only driver with g(t, 0) = 0 and lip_z <= mu sits under mu |z|
    bb = np.array(b)
    if np.linalg.norm(bb) > 0:
        bb = bb / np.linalg.norm(bb) * frac * mu
    y = np.zeros(len(z))
    dom = EMU(mu)(0.3, y, z)
    for g in (LINEAR(bb), EMU(frac * mu), NEG_EMU(frac * mu), ZERO()):
        assert np.all(np.abs(g(0.3, y, z)) <= dom * (1 + 1e-12) + 1e-12)


@settings(max_examples=50, deadline=None)
@given(z=zs, mu=st.floats(0, 5))
def test_neg_emu_is_negated_emu(z, mu):
    y = np.zeros(len(z))
    np.testing.assert_array_equal(NEG_EMU(mu)(0.0, y, z), -EMU(mu)(0.0, y, z))
