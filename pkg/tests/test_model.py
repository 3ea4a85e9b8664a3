import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavetraj.errors import ConfigError
from wavetraj.model import (NumericsConfig, Regime, RegimeConfig, default_fit_window,
                            derive_scales, unit_system, validate_config)


def test_desk_scale_epsilon_and_rayleigh_length():
    s = derive_scales(RegimeConfig(wavelength_ratio=1e-2))
    assert s.epsilon == pytest.approx(1.59155e-3, rel=1e-5)
    assert s.rayleigh_length == pytest.approx(100 * math.pi, rel=1e-14)


def test_paper_scale_rayleigh_length():
    assert derive_scales(RegimeConfig(wavelength_ratio=1e-4)).rayleigh_length == \
        pytest.approx(1e4 * math.pi, rel=1e-14)


def test_nonrelativistic_launch_momentum():
    s = derive_scales(RegimeConfig(mass=1.0, total_energy=1.0))
    assert s.p0 == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert s.energy == 0.5


def test_relativistic_internal_light_speed():
    # m0 c^2 = 1, E = 2: c^2 in internal units equals E / (E - m0 c^2 mu) ...
    cfg = RegimeConfig(regime=Regime.RELATIVISTIC, mass=1.0, light_speed=1.0, total_energy=2.0)
    s = derive_scales(cfg)
    assert s.p0 == pytest.approx(math.sqrt(3.0))
    assert s.launch_speed == pytest.approx(math.sqrt(3.0) / 2.0)
    assert s.c2 == pytest.approx(1.0 / (1.0 - 0.25))


def test_derive_scales_is_pure():
    cfg = RegimeConfig(wavelength_ratio=3.7e-3, mass=2.5, total_energy=0.8)
    assert derive_scales(cfg) == derive_scales(cfg)


@settings(max_examples=200, deadline=None)
@given(value=st.floats(1e-6, 1e6), ratio=st.floats(1e-5, 1e-1),
       mass=st.floats(1e-3, 1e3), energy=st.floats(1e-3, 1e3),
       kind=st.sampled_from(["length", "momentum", "time", "energy", "velocity", "force"]))
def test_unit_round_trip(value, ratio, mass, energy, kind):
    units = unit_system(RegimeConfig(wavelength_ratio=ratio, mass=mass, total_energy=energy))
    back = units.to_user(units.to_internal(value, kind), kind)
    assert abs(back - value) <= 1e-14 * abs(value)


def test_unknown_quantity_kind():
    with pytest.raises(ValueError):
        unit_system(RegimeConfig()).to_internal(1.0, "charge")


def test_validation_collects_every_violation():
    with pytest.raises(ConfigError) as exc:
        validate_config(RegimeConfig(wavelength_ratio=-1.0, mass=0.0),
                        NumericsConfig(n_rays=200, dt=-1.0))
    codes = exc.value.codes()
    assert codes.count("NonPositiveParameter") == 3
    assert "EvenRayCount" in codes


def test_relativistic_energy_below_rest_mass():
    cfg = RegimeConfig(regime="relativistic", mass=1.0, light_speed=1.0, total_energy=0.9)
    with pytest.raises(ConfigError) as exc:
        validate_config(cfg, NumericsConfig())
    assert exc.value.code == "RelativisticEnergyBelowRestMass"


def test_default_fit_window_spans_half_a_waist():
    setup = validate_config(RegimeConfig(), NumericsConfig(n_rays=201, front_half_width=3.0))
    # 100 rays per 3 waists -> 33 per waist -> 16 per side
    assert setup.numerics.fit_window == 16 == default_fit_window(setup.numerics)
    assert default_fit_window(NumericsConfig(n_rays=7)) == 2


def test_epsilon_matches_hbar_over_p0_w0():
    setup = validate_config(RegimeConfig(hbar=0.3, mass=4.0, total_energy=2.0), NumericsConfig())
    s = setup.scales
    assert 0.3 / (s.p0 * s.waist) == pytest.approx(s.epsilon, rel=1e-13)
    assert np.isnan(s.c2)
