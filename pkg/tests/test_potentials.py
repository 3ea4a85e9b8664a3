import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavetraj import potentials as pot
from wavetraj.errors import NoBracket

FIELDS = [
    pot.ConstantForce(0.01),
    pot.GaussianBarrier(1.0, 200.0, 20.0),
    pot.LogisticStep(0.25, 200.0, 1.0),
    pot.Harmonic(0.3),
    pot.LensLike(0.002, 20.0, 60.0),
    pot.Free(),
]


@pytest.mark.parametrize("field", FIELDS, ids=lambda f: f.kind)
def test_gradient_matches_central_difference(field):
    rng = np.random.default_rng(7)
    x = rng.uniform(-5, 5, 1000)
    z = rng.uniform(-10, 260, 1000)
    h = 1e-5
    gx, gz = field.gradient(x, z)
    nx = (field.value(x + h, z) - field.value(x - h, z)) / (2 * h)
    nz = (field.value(x, z + h) - field.value(x, z - h)) / (2 * h)
    scale = 1.0 + np.hypot(gx, gz)
    assert np.all(np.abs(gx - nx) <= 1e-7 * scale)
    assert np.all(np.abs(gz - nz) <= 1e-7 * scale)


@given(st.integers(0, 500 * 1024))
def test_barrier_and_harmonic_are_even(k):
    # dyadic offsets keep z_c +- delta exactly representable
    delta = k / 1024
    b = pot.GaussianBarrier(1.0, 200.0, 20.0)
    assert b.value(0.0, 200.0 + delta) == b.value(0.0, 200.0 - delta)
    h = pot.Harmonic(0.3)
    assert h.value(0.0, delta) == h.value(0.0, -delta)


def test_step_is_monotone():
    z = np.linspace(-100, 500, 20001)
    v = pot.LogisticStep(0.25, 200.0, 1.0).value(0.0, z)
    assert np.all(np.diff(v) >= 0)


def test_constant_force_turning_point():
    assert pot.classical_turning_point(pot.ConstantForce(0.5), 1.0) == pytest.approx(2.0, rel=1e-12)


def test_barrier_turning_point_closed_form():
    # V0 exp(-2 u^2) = E  ->  z = z_b - d sqrt(ln(V0/E) / 2)
    z = pot.classical_turning_point(pot.GaussianBarrier(1.0, 200.0, 20.0), 0.5)
    assert z == pytest.approx(200.0 - 20.0 * math.sqrt(math.log(2.0) / 2.0), rel=1e-10)
    assert z == pytest.approx(188.2258, abs=1e-4)


def test_no_bracket_over_low_barrier():
    field = pot.GaussianBarrier(0.1, 200.0, 20.0)
    assert pot.classical_turning_point(field, 0.5, max_distance=1e3) is None
    with pytest.raises(NoBracket):
        pot.require_turning_point(field, 0.5, max_distance=1e3)


def test_lens_taper_is_zero_outside_slab():
    lens = pot.LensLike(0.002, 20.0, 60.0)
    assert lens.value(3.0, 10.0) == 0.0 and lens.value(3.0, 70.0) == 0.0
    assert lens.value(3.0, 40.0) == pytest.approx(0.002 * 9.0)


def test_make_potential_registry():
    f = pot.make_potential("harmonic", m_omega_sq=2.0)
    assert isinstance(f, pot.Harmonic) and f.value(0.0, 1.0) == 1.0
