"""Domain configuration, internal unit system and derived beam scales.

Internally every quantity is dimensionless: lengths are measured in the beam
waist ``w0``, momenta (or wave vectors) in the launch value ``p0`` (``k0``),
and time in ``w0 / v0`` where ``v0`` is the launch speed.  Energies are then
measured in ``p0 * v0``, which for the non-relativistic regime is ``p0**2/m``
so that the launch kinetic energy equals 1/2.  The single knob left is

    eps = lambda0 / (2 pi w0) = hbar / (p0 w0),

which plays the role of the reduced Planck constant in internal units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError


class Regime(str, enum.Enum):
    CLASSICAL = "classical"
    NONRELATIVISTIC = "nonrelativistic"
    RELATIVISTIC = "relativistic"


@dataclass(frozen=True)
class RegimeConfig:
    """Active Hamiltonian system and its physical constants (user units).

    For ``RELATIVISTIC`` ``mass`` is the rest mass and ``total_energy`` includes
    the rest energy.  ``CLASSICAL`` uses ``light_speed`` and
    ``angular_frequency`` (``k0 = omega / c``); ``hbar`` is then only a formal
    conversion factor between wave vector and momentum.
    """

    regime: Regime = Regime.NONRELATIVISTIC
    hbar: float = 1.0
    mass: float | None = 1.0
    light_speed: float | None = 1.0
    total_energy: float | None = 0.5
    angular_frequency: float | None = 1.0
    wavelength_ratio: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))


@dataclass(frozen=True)
class NumericsConfig:
    n_rays: int = 201
    front_half_width: float = 3.0
    dt: float | None = None
    t_end: float | None = None
    z_end: float | None = None
    event: str | None = None
    fit_window: int | None = None
    record_stride: int | None = None
    strict_projection: bool = False
    eikonal_mode: bool = False
    caustic_min_spacing: float = 1e-6
    amplitude_floor: float = 1e-6
    stall_ratio: float = 0.1
    momentum_clamp: float = 1e-12
    max_steps: int = 2_000_000
    workers: int = 1


@dataclass(frozen=True)
class Scales:
    """Scales derived from a :class:`RegimeConfig`.

    ``p0``, ``waist`` and ``launch_speed`` are in user units; ``epsilon`` and
    ``rayleigh_length`` (in waists) are dimensionless.  ``energy`` is the total
    energy in internal units and ``c2`` the squared light speed in internal
    units (relativistic regime only, else ``nan``).
    """

    epsilon: float
    p0: float
    rayleigh_length: float
    waist: float
    wavelength: float
    launch_speed: float
    energy: float
    c2: float = math.nan


@dataclass(frozen=True)
class UnitSystem:
    """User-unit size of one internal unit of each kind."""

    length: float
    momentum: float
    time: float
    energy: float

    KINDS = ("length", "momentum", "time", "energy", "velocity", "force")

    def _factor(self, kind):
        if kind == "velocity":
            return self.length / self.time
        if kind == "force":
            return self.momentum / self.time
        if kind not in ("length", "momentum", "time", "energy"):
            raise ValueError(f"unknown quantity kind {kind!r}")
        return getattr(self, kind)

    def to_internal(self, value, kind):
        return value / self._factor(kind)

    def to_user(self, value, kind):
        return value * self._factor(kind)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Setup:
    """A validated configuration with every derived quantity filled in."""

    regime: RegimeConfig
    numerics: NumericsConfig
    scales: Scales
    units: UnitSystem = field(repr=False)

    @property
    def epsilon(self):
        return self.scales.epsilon


def _positive(value):
    return value is not None and math.isfinite(value) and value > 0


def _regime_violations(regime):
    out = []
    if not _positive(regime.wavelength_ratio):
        out.append(("NonPositiveParameter", "wavelength_ratio must be > 0"))
    if not _positive(regime.hbar):
        out.append(("NonPositiveParameter", "hbar must be > 0"))
    kind = regime.regime
    if kind is Regime.NONRELATIVISTIC:
        if not _positive(regime.mass):
            out.append(("NonPositiveParameter", "mass must be > 0"))
        if not _positive(regime.total_energy):
            out.append(("NonPositiveParameter", "total_energy must be > 0"))
    elif kind is Regime.RELATIVISTIC:
        if regime.mass is None or not math.isfinite(regime.mass) or regime.mass < 0:
            out.append(("NonPositiveParameter", "rest mass must be >= 0"))
        if not _positive(regime.light_speed):
            out.append(("NonPositiveParameter", "light_speed must be > 0"))
        if not _positive(regime.total_energy):
            out.append(("NonPositiveParameter", "total_energy must be > 0"))
        if not out:
            rest = regime.mass * regime.light_speed**2
            if regime.total_energy <= rest * (1 + 1e-12):
                out.append((
                    "RelativisticEnergyBelowRestMass",
                    f"E = {regime.total_energy!r} does not exceed m0 c^2 = {rest!r}",
                ))
    else:
        if not _positive(regime.light_speed):
            out.append(("NonPositiveParameter", "light_speed must be > 0"))
        if not _positive(regime.angular_frequency):
            out.append(("NonPositiveParameter", "angular_frequency must be > 0"))
    return out


def _numerics_violations(num):
    out = []
    if num.n_rays < 5:
        out.append(("NonPositiveParameter", "n_rays must be >= 5"))
    if num.n_rays % 2 == 0:
        out.append(("EvenRayCount", f"n_rays = {num.n_rays} must be odd"))
    if num.fit_window is not None and num.fit_window < 2:
        out.append(("NonPositiveParameter", "fit_window must be >= 2"))
    if not _positive(num.front_half_width):
        out.append(("NonPositiveParameter", "front_half_width must be > 0"))
    if num.dt is not None and not _positive(num.dt):
        out.append(("NonPositiveParameter", "dt must be > 0"))
    if num.t_end is not None and not (math.isfinite(num.t_end) and num.t_end >= 0):
        out.append(("NonPositiveParameter", "t_end must be >= 0"))
    if num.record_stride is not None and num.record_stride < 1:
        out.append(("NonPositiveParameter", "record_stride must be >= 1"))
    if num.event not in (None, "turning"):
        out.append(("InvalidEvent", f"unknown termination event {num.event!r}"))
    if num.caustic_min_spacing < 0:
        out.append(("NonPositiveParameter", "caustic_min_spacing must be >= 0"))
    if num.workers < 1:
        out.append(("NonPositiveParameter", "workers must be >= 1"))
    if num.max_steps < 1:
        out.append(("NonPositiveParameter", "max_steps must be >= 1"))
    return out


def rays_per_waist(numerics):
    """Launch rays per waist; the launch grid spacing is its inverse."""
    half = numerics.n_rays // 2
    return max(1, round(half / numerics.front_half_width))


def default_fit_window(numerics):
    """Neighbours per side spanning about half a waist, never fewer than 2."""
    return max(2, round(rays_per_waist(numerics) / 2))


def derive_scales(regime: RegimeConfig) -> Scales:
    """Return epsilon, launch momentum and Rayleigh length for ``regime``.

    Assumes ``regime`` already passed validation.
    """
    ratio = regime.wavelength_ratio
    eps = ratio / (2 * math.pi)
    energy = 0.5
    c2 = math.nan
    if regime.regime is Regime.NONRELATIVISTIC:
        p0 = math.sqrt(2 * regime.mass * regime.total_energy)
        speed = p0 / regime.mass
        wavelength = 2 * math.pi * regime.hbar / p0
    elif regime.regime is Regime.RELATIVISTIC:
        c = regime.light_speed
        big_e = regime.total_energy
        rest = regime.mass * c * c
        p0 = math.sqrt((big_e / c) ** 2 - (regime.mass * c) ** 2)
        speed = c * c * p0 / big_e
        wavelength = 2 * math.pi * regime.hbar / p0
        # internal units: p0 = 1 and v0 = c^2 p0 / E = 1, hence c^2 = E
        mu = rest / big_e
        energy = 1.0 / (1.0 - mu * mu)
        c2 = energy
    else:
        k0 = regime.angular_frequency / regime.light_speed
        p0 = regime.hbar * k0
        speed = regime.light_speed
        wavelength = 2 * math.pi / k0
    waist = wavelength / ratio
    return Scales(
        epsilon=eps,
        p0=p0,
        rayleigh_length=math.pi / ratio,
        waist=waist,
        wavelength=wavelength,
        launch_speed=speed,
        energy=energy,
        c2=c2,
    )


def unit_system(regime: RegimeConfig, scales: Scales | None = None) -> UnitSystem:
    scales = scales or derive_scales(regime)
    time = scales.waist / scales.launch_speed
    return UnitSystem(
        length=scales.waist,
        momentum=scales.p0,
        time=time,
        energy=scales.p0 * scales.launch_speed,
    )


def validate_config(regime: RegimeConfig, numerics: NumericsConfig) -> Setup:
    """Validate both configs at once and fill in derived quantities.

    Raises
    ------
    ConfigError
        Carrying every violation found, never just the first.
    """
    violations = _regime_violations(regime) + _numerics_violations(numerics)
    if violations:
        raise ConfigError(violations)
    if numerics.fit_window is None:
        numerics = replace(numerics, fit_window=default_fit_window(numerics))
    scales = derive_scales(regime)
    if regime.regime is not Regime.CLASSICAL:
        check = regime.hbar / (scales.p0 * scales.waist)
        if not math.isclose(check, scales.epsilon, rel_tol=1e-12):
            raise ConfigError([("InconsistentScales", f"hbar/(p0 w0) = {check} != eps")])
    return Setup(regime, numerics, scales, unit_system(regime, scales))


def with_numerics(setup: Setup, **changes) -> Setup:
    return validate_config(setup.regime, replace(setup.numerics, **changes))
