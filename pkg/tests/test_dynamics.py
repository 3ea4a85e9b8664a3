import math

import numpy as np
import pytest

from wavetraj import dynamics as dyn
from wavetraj.errors import MaxStepsExceeded, RelativisticPole
from wavetraj.model import NumericsConfig, Regime, RegimeConfig, validate_config
from wavetraj.potentials import ConstantForce, Free, Harmonic, RadialParabolic, Uniform
from wavetraj.verify import mirror_error, reversal_error, rk4_order
from wavetraj.scenarios import build_scenario
from wavetraj.wavefront import init_gaussian_front


def _run(field=None, regime=None, **num):
    num = {"n_rays": 41, "dt": 0.05, "t_end": 20.0, **num}
    setup = validate_config(regime or RegimeConfig(), NumericsConfig(**num))
    system = dyn.RaySystem(setup, field)
    return dyn.integrate(system, init_gaussian_front(setup.numerics))


def test_free_space_keeps_momentum_magnitude():
    log = _run()
    assert np.max(np.abs(log.pmag - 1.0)) <= 1e-12
    assert np.max(log.flux_dev) <= 1e-12
    assert log.termination == "t_end" and log.t[-1] == pytest.approx(20.0)


def test_classical_vacuum_matches_free_matter_wave():
    a = _run()
    b = _run(Uniform(), RegimeConfig(regime=Regime.CLASSICAL))
    assert np.max(np.abs(a.pos - b.pos)) <= 1e-10
    assert np.max(np.abs(a.mom - b.mom)) <= 1e-10


def test_symmetric_launch_stays_symmetric():
    assert mirror_error(_run(t_end=40.0)) <= 1e-9


def test_beam_spreads_with_wave_potential_only():
    full = _run(t_end=60.0)
    eik = _run(t_end=60.0, eikonal_mode=True)
    edge = full.n_rays - 1
    assert full.pos[-1, edge, 0] > full.pos[0, edge, 0]
    assert eik.pos[-1, edge, 0] == eik.pos[0, edge, 0]


def test_eikonal_energy_conservation_in_uniform_force():
    log = _run(ConstantForce(0.05), dt=0.01, t_end=40.0, eikonal_mode=True)
    assert np.max(log.H_drift) <= 1e-8
    # the axis ray stops at E/F = 10 and comes back down
    assert np.max(log.pos[:, log.axis, 1]) == pytest.approx(10.0, rel=1e-6)


def test_turning_event_terminates():
    log = _run(ConstantForce(0.05), t_end=None, event="turning", eikonal_mode=True)
    assert log.termination == "turning"
    turns = [e for e in log.events if e["kind"] == "turning"]
    assert len(turns) == 1 and turns[0]["z"] == pytest.approx(10.0, rel=1e-3)


def test_rk4_order_on_harmonic_ray():
    _, orders = rk4_order(halvings=3)
    assert min(orders) >= 3.8


def test_eikonal_time_reversal():
    cfg = build_scenario("free_gaussian", {"eikonal_mode": True, "n_rays": 41})
    assert reversal_error(cfg, 20.0) <= 1e-6


def test_full_time_reversal():
    cfg = build_scenario("free_gaussian", {"n_rays": 41})
    assert reversal_error(cfg, 20.0) <= 1e-4


def test_workers_do_not_change_results():
    a = _run(Harmonic(1e-4), t_end=30.0)
    b = _run(Harmonic(1e-4), t_end=30.0, workers=4)
    assert np.array_equal(a.pos, b.pos) and np.array_equal(a.amp, b.amp)


def test_max_steps():
    with pytest.raises(MaxStepsExceeded):
        _run(max_steps=5)


def test_relativistic_pole():
    reg = RegimeConfig(regime=Regime.RELATIVISTIC, mass=1.0, light_speed=1.0, total_energy=1.5)
    setup = validate_config(reg, NumericsConfig(n_rays=11))
    system = dyn.RaySystem(setup, ConstantForce(1.0))
    with pytest.raises(RelativisticPole):
        system.velocity(np.array([[0.0, 1e3]]), np.array([[0.0, 1.0]]))


def test_massless_rays_move_at_light_speed():
    reg = RegimeConfig(regime=Regime.RELATIVISTIC, mass=0.0, light_speed=2.0, total_energy=3.0)
    setup = validate_config(reg, NumericsConfig(n_rays=11))
    system = dyn.RaySystem(setup)
    mom = np.array([[0.3, 0.9], [0.0, 1.0]])
    speed = np.hypot(*system.velocity(np.zeros((2, 2)), mom).T) / np.hypot(*mom.T)
    np.testing.assert_allclose(speed, math.sqrt(setup.scales.c2), rtol=1e-15)


def test_field_type_must_match_regime():
    with pytest.raises(TypeError):
        dyn.RaySystem(validate_config(RegimeConfig(), NumericsConfig()), RadialParabolic(1.0, 0.1))
    with pytest.raises(TypeError):
        dyn.RaySystem(validate_config(RegimeConfig(regime="classical"), NumericsConfig()), Free())


def test_needs_termination_condition():
    setup = validate_config(RegimeConfig(), NumericsConfig(n_rays=11))
    with pytest.raises(ValueError):
        dyn.integrate(dyn.RaySystem(setup), init_gaussian_front(setup.numerics))


def test_flag_string():
    assert dyn.flag_string(0) == ""
    assert dyn.flag_string(dyn.FLAG_STALL | dyn.FLAG_EDGE) == "stall+edge"
