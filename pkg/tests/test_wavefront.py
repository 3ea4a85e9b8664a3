import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from wavetraj import wavefront as wf
from wavetraj.errors import CausticCollapse, LongitudinalStall, WindowTooSmall
from wavetraj.model import NumericsConfig


def _front(x, amp, mom=(0.0, 1.0)):
    x = np.asarray(x, dtype=float)
    pos = np.stack([x, np.zeros_like(x)], axis=1)
    return wf.make_front(pos, np.tile(mom, (len(x), 1)), amp)


@settings(max_examples=100, deadline=None)
@given(steps=arrays(float, 31, elements=st.floats(0.05, 1.0)),
       a=st.floats(-2, 2), b=st.floats(-1, 1), c=st.floats(-0.5, 0.5),
       window=st.integers(2, 6))
def test_estimator_exact_on_log_quadratic(steps, a, b, c, window):
    x = np.cumsum(steps)
    x -= x[15]
    front = _front(x, np.exp(a + b * x + c * x * x))
    num = NumericsConfig(n_rays=31, fit_window=window, amplitude_floor=0.0)
    g1, g2 = wf.estimate_log_amplitude_derivatives(front, num)
    np.testing.assert_allclose(g1, b + 2 * c * x, rtol=1e-12, atol=1e-12 * (1 + abs(b) + abs(c)))
    np.testing.assert_allclose(g2, 2 * c, rtol=1e-12, atol=1e-12 * (1 + abs(c)))


def test_gaussian_launch_front():
    front = wf.init_gaussian_front(NumericsConfig(n_rays=61, front_half_width=3.0))
    assert front.n == 61
    assert np.isclose(front.pos[:, 0], 1.0).any() and np.isclose(front.pos[:, 0], -1.0).any()
    np.testing.assert_allclose(front.amp, np.exp(-front.pos[:, 0] ** 2), rtol=1e-15)
    np.testing.assert_allclose(front.xi, front.pos[:, 0], atol=1e-15)


def test_laplacian_ratio_for_unit_gaussian():
    # R = exp(-x^2): Lap R / R = 4 x^2 - 2
    front = wf.init_gaussian_front(NumericsConfig(n_rays=61))
    g1, g2 = wf.estimate_log_amplitude_derivatives(front, NumericsConfig(n_rays=61, fit_window=5))
    L, stalled = wf.laplacian_ratio(front, g1, g2)
    np.testing.assert_allclose(L, 4 * front.pos[:, 0] ** 2 - 2, atol=1e-9)
    assert not stalled.any()


def test_strict_projection_vanishes_for_axial_momentum():
    front = wf.init_gaussian_front(NumericsConfig(n_rays=61))
    g1, g2 = wf.estimate_log_amplitude_derivatives(front, NumericsConfig(n_rays=61))
    L, _ = wf.laplacian_ratio(front, g1, g2, strict_projection=True)
    assert np.all(L == 0)


def test_stall_freeze_and_raise():
    x = np.linspace(-1, 1, 11)
    front = _front(x, np.exp(-x * x), mom=(1.0, 1e-4))
    g1, g2 = np.zeros(11), np.full(11, -2.0)
    L, stalled = wf.laplacian_ratio(front, g1, g2)
    assert stalled.all() and np.all(L == -2.0)
    with pytest.raises(LongitudinalStall):
        wf.laplacian_ratio(front, g1, g2, on_stall="raise")


def test_wave_potential_sign_and_eikonal():
    assert wf.wave_potential(np.array([2.0]), 0.1)[0] == pytest.approx(-0.01)
    assert wf.wave_potential(np.array([2.0]), 0.1, eikonal_mode=True)[0] == 0.0


@settings(max_examples=50, deadline=None)
@given(angle=st.floats(-1.2, 1.2), curv=st.floats(0.0, 0.3))
def test_w_force_is_orthogonal_to_momentum(angle, curv):
    num = NumericsConfig(n_rays=41)
    front = wf.init_gaussian_front(num, p_launch=(np.sin(angle), np.cos(angle)))
    x = front.pos[:, 0]
    front = wf.make_front(np.stack([x, curv * x * x], axis=1),
                          front.mom + np.stack([0.05 * x, np.zeros_like(x)], axis=1), front.amp)
    state = wf.wave_state(front, num, 0.05)
    dot = np.einsum("ij,ij->i", state.w_force, front.mom)
    bound = 1e-15 * np.hypot(*state.w_force.T) * np.hypot(*front.mom.T) + 1e-300
    assert np.all(np.abs(dot) <= 4 * bound)


def test_flux_is_conserved_by_transport():
    num = NumericsConfig(n_rays=21)
    prev = wf.init_gaussian_front(num)
    rng = np.random.default_rng(3)
    pos = prev.pos + np.stack([0.3 * prev.pos[:, 0], np.full(21, 0.5)], axis=1)
    mom = prev.mom * rng.uniform(0.5, 1.5, (21, 1))
    nxt = wf.transport_amplitude(prev, type(prev)(**{**vars(prev), "pos": pos, "mom": mom}))
    assert wf.flux_deviation(nxt) <= 1e-12


def test_caustic_on_swapped_neighbours():
    num = NumericsConfig(n_rays=11)
    prev = wf.init_gaussian_front(num)
    pos = prev.pos.copy()
    pos[[4, 5]] = pos[[5, 4]]
    nxt = type(prev)(**{**vars(prev), "pos": pos})
    with pytest.raises(CausticCollapse) as exc:
        wf.transport_amplitude(prev, nxt)
    assert exc.value.pair == (3, 4) or exc.value.pair == (4, 5)


def test_windows_need_three_usable_rays():
    with pytest.raises(WindowTooSmall):
        wf.fit_windows(10, np.eye(1, 10, 4, dtype=bool)[0] | np.eye(1, 10, 5, dtype=bool)[0], 2)
