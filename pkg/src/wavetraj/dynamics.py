"""Hamiltonian ray systems and their time integration.

Three regimes share one integrator, all in internal units:

* classical Helmholtz rays:   dr/dt = k,            dk/dt = grad(n^2)/2 + F_W
* non-relativistic particles: dr/dt = p,            dp/dt = -grad V + F_W
* Klein-Gordon particles:     dr/dt = E p / (E - V), dp/dt = -grad V + F_W

where ``F_W`` is the Wave-Potential force from :mod:`wavetraj.wavefront`
(already carrying ``E/(E - V)`` in the relativistic case).  Each step freezes
the tangential magnitude of ``F_W`` on the current front and advances every
ray with classical RK4; the direction of ``F_W`` follows the momentum through
the RK stages so that it stays orthogonal to ``p``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import wavefront as wf
from .errors import CausticCollapse, MaxStepsExceeded, NonFinite, RelativisticPole
from .model import Regime
from .potentials import Free, PotentialField, RefractiveIndexField, Uniform

FLAG_STALL = 1
FLAG_CLAMP = 2
FLAG_EDGE = 4
FLAG_NAMES = {FLAG_STALL: "stall", FLAG_CLAMP: "clamp", FLAG_EDGE: "edge"}


def flag_string(bits):
    names = [name for bit, name in FLAG_NAMES.items() if bits & bit]
    return "+".join(names)


class RaySystem:
    """Regime-specific right-hand sides bound to one validated setup and field."""

    def __init__(self, setup, field=None):
        self.setup = setup
        self.regime = setup.regime.regime
        if field is None:
            field = Uniform() if self.regime is Regime.CLASSICAL else Free()
        if self.regime is Regime.CLASSICAL and not isinstance(field, RefractiveIndexField):
            raise TypeError("classical regime needs a refractive-index field")
        if self.regime is not Regime.CLASSICAL and not isinstance(field, PotentialField):
            raise TypeError("matter-wave regimes need a potential field")
        self.field = field
        self.energy = setup.scales.energy
        self.epsilon = setup.scales.epsilon

    @property
    def energy_scale(self):
        """Energy used to normalise drifts and reported W."""
        return self.energy if self.regime is Regime.RELATIVISTIC else 0.5

    def potential(self, pos):
        if self.regime is Regime.CLASSICAL:
            return np.zeros(len(pos))
        return self.field.value(pos[:, 0], pos[:, 1])

    def _kinetic_gap(self, pos):
        gap = self.energy - self.potential(pos)
        if np.any(gap <= 0):
            raise RelativisticPole("E - V(r) <= 0 on a relativistic ray")
        return gap

    def velocity(self, pos, mom):
        if self.regime is Regime.RELATIVISTIC:
            return mom * (self.energy / self._kinetic_gap(pos))[:, None]
        return mom

    def external_force(self, pos):
        x, z = pos[:, 0], pos[:, 1]
        if self.regime is Regime.CLASSICAL:
            gx, gz = self.field.index_sq_gradient(x, z)
            return 0.5 * np.stack([gx, gz], axis=1)
        gx, gz = self.field.gradient(x, z)
        return -np.stack([gx, gz], axis=1)

    def w_prefactor(self, pos):
        if self.regime is Regime.RELATIVISTIC:
            return self.energy / self._kinetic_gap(pos)
        return 1.0

    def hamiltonian(self, pos, mom, W):
        """Per-ray energy function (dispersion function D for classical rays)."""
        p2 = np.einsum("ij,ij->i", mom, mom)
        if self.regime is Regime.NONRELATIVISTIC:
            return 0.5 * p2 + W + self.potential(pos)
        if self.regime is Regime.CLASSICAL:
            n = self.field.index(pos[:, 0], pos[:, 1])
            return 0.5 * (p2 - n * n) + W
        e = self.energy
        # internal units: c^2 = E, (m0 c^2)^2 = E^2 - E, hbar^2 c^2 Lap R/R = -2 E W
        radicand = e * (p2 + e - 1.0 + 2.0 * W)
        if np.any(radicand < 0):
            raise NonFinite("negative radicand in the relativistic energy function")
        return self.potential(pos) + np.sqrt(radicand)

    def rates(self, pos, mom, f_tan, sign):
        """Time derivatives of (pos, mom) with the W-force magnitude held fixed."""
        dr = self.velocity(pos, mom)
        dp = self.external_force(pos)
        if f_tan is not None:
            dp = dp + wf._unit_tangent(mom, sign) * f_tan[:, None]
        return dr, dp

    def default_dt(self):
        curv = 0.0
        if self.regime is not Regime.CLASSICAL:
            curv = self.field.curvature_scale()
        dt = min(0.05, 0.1)
        if curv > 0:
            dt = min(dt, 0.05 / math.sqrt(curv))
        return dt


def velocity(ray, system):
    return system.velocity(ray.position[None, :], ray.momentum[None, :])[0]


def momentum_rate(ray, system, w_force=(0.0, 0.0)):
    return system.external_force(ray.position[None, :])[0] + np.asarray(w_force, dtype=float)


def hamiltonian(ray, system, W=0.0):
    return float(system.hamiltonian(ray.position[None, :], ray.momentum[None, :],
                                    np.atleast_1d(float(W)))[0])


def _rk4(system, pos, mom, f_tan, sign, dt):
    k1r, k1p = system.rates(pos, mom, f_tan, sign)
    k2r, k2p = system.rates(pos + 0.5 * dt * k1r, mom + 0.5 * dt * k1p, f_tan, sign)
    k3r, k3p = system.rates(pos + 0.5 * dt * k2r, mom + 0.5 * dt * k2p, f_tan, sign)
    k4r, k4p = system.rates(pos + dt * k3r, mom + dt * k3p, f_tan, sign)
    new_pos = pos + (dt / 6.0) * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    new_mom = mom + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return new_pos, new_mom


def _chunks(n, workers):
    edges = np.linspace(0, n, min(workers, n) + 1).astype(int)
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def rk4_rays(system, front, state, dt, pool=None):
    """Advance every ray by one RK4 step (data-parallel over rays)."""
    f_tan = None if system.setup.numerics.eikonal_mode else state.tangential_force
    if pool is None:
        return _rk4(system, front.pos, front.mom, f_tan, state.tangent_sign, dt)
    parts = _chunks(front.n, pool._max_workers)
    futures = [
        pool.submit(_rk4, system, front.pos[s], front.mom[s],
                    None if f_tan is None else f_tan[s], state.tangent_sign[s], dt)
        for s in parts
    ]
    results = [fut.result() for fut in futures]
    return (np.concatenate([r[0] for r in results]),
            np.concatenate([r[1] for r in results]))


def compute_state(system, front):
    num = system.setup.numerics
    prefactor = 1.0
    if system.regime is Regime.RELATIVISTIC and not num.eikonal_mode:
        prefactor = system.w_prefactor(front.pos)
    return wf.wave_state(front, num, system.epsilon, prefactor)


def advance_step(system, front, dt, state=None, pool=None):
    """One operator-split step; returns ``(next_front, state_of_next_front)``.

    ``state`` may be passed in when already computed for ``front``; the
    returned state can be fed straight into the following call.
    """
    num = system.setup.numerics
    if state is None:
        state = compute_state(system, front)
    pos, mom = rk4_rays(system, front, state, dt, pool)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(mom))):
        raise NonFinite(f"non-finite ray state at t = {front.t + dt:.6g}")
    last_L = np.where(state.stalled, front.last_L, state.L)
    moved = replace(front, pos=pos, mom=mom, t=front.t + dt, last_L=last_L)
    nxt = wf.transport_amplitude(front, moved, num.caustic_min_spacing, num.momentum_clamp)
    if not np.all(np.isfinite(nxt.amp)):
        raise NonFinite(f"non-finite amplitude at t = {nxt.t:.6g}")
    return nxt, compute_state(system, nxt)


@dataclass
class TrajectoryLog:
    """Recorded samples of a run (all arrays indexed ``[sample, ray]``)."""

    t: np.ndarray
    pos: np.ndarray
    mom: np.ndarray
    amp: np.ndarray
    W: np.ndarray
    H: np.ndarray
    H0: np.ndarray
    flags: np.ndarray
    flux_dev: np.ndarray
    steps: np.ndarray
    ids: np.ndarray
    energy_scale: float
    events: list = field(default_factory=list)
    termination: str = ""
    dt: float = 0.0
    error: str | None = None

    @property
    def n_samples(self):
        return len(self.t)

    @property
    def n_rays(self):
        return len(self.ids)

    @property
    def axis(self):
        return self.n_rays // 2

    @property
    def H_drift(self):
        return np.abs(self.H - self.H0[None, :]) / self.energy_scale

    @property
    def pmag(self):
        return np.hypot(self.mom[..., 0], self.mom[..., 1])


class _Recorder:
    def __init__(self, system, front):
        self.system = system
        self.rows = {k: [] for k in ("t", "pos", "mom", "amp", "W", "H", "flags", "flux", "step")}
        self.ids = front.ids.copy()
        self.H0 = None
        self.last_step = -1

    def add(self, step, front, state):
        if step == self.last_step:
            return
        self.last_step = step
        H = self.system.hamiltonian(front.pos, front.mom, state.W)
        if self.H0 is None:
            self.H0 = H.copy()
        flags = np.zeros(front.n, dtype=int)
        flags[state.stalled] |= FLAG_STALL
        if front.clamped is not None:
            flags[front.clamped] |= FLAG_CLAMP
        flags[:2] |= FLAG_EDGE
        flags[-2:] |= FLAG_EDGE
        r = self.rows
        r["t"].append(front.t)
        r["pos"].append(front.pos.copy())
        r["mom"].append(front.mom.copy())
        r["amp"].append(front.amp.copy())
        r["W"].append(np.asarray(state.W, dtype=float).copy())
        r["H"].append(H)
        r["flags"].append(flags)
        r["flux"].append(wf.flux_deviation(front))
        r["step"].append(step)

    def log(self, events, termination, dt, error=None):
        r = self.rows
        return TrajectoryLog(
            t=np.array(r["t"]), pos=np.array(r["pos"]), mom=np.array(r["mom"]),
            amp=np.array(r["amp"]), W=np.array(r["W"]), H=np.array(r["H"]),
            H0=self.H0, flags=np.array(r["flags"]), flux_dev=np.array(r["flux"]),
            steps=np.array(r["step"]), ids=self.ids,
            energy_scale=self.system.energy_scale, events=events,
            termination=termination, dt=dt, error=error,
        )


def _estimate_steps(num, dt):
    if num.t_end is not None:
        return max(1, int(math.ceil(num.t_end / dt - 1e-9)))
    if num.z_end is not None:
        return max(1, int(abs(num.z_end) / dt))
    return 1000


def integrate(system, front, stop_on_caustic=True):
    """Run the step loop until a termination condition; return a TrajectoryLog.

    Terminates on ``t_end``, on the axis ray crossing the ``z = z_end`` plane,
    on the ``turning`` event (sign change of the axis-ray ``pz``), or on a
    caustic.  Every ``record_stride``-th step is recorded together with the
    first and last step and every event step.
    """
    num = system.setup.numerics
    dt = num.dt if num.dt is not None else system.default_dt()
    if num.t_end is None and num.z_end is None and num.event is None:
        raise ValueError("no termination condition: set t_end, z_end or event")
    stride = num.record_stride or max(1, _estimate_steps(num, dt) // 400)
    axis = front.axis
    events = []
    recorder = _Recorder(system, front)
    pool = ThreadPoolExecutor(num.workers) if num.workers > 1 else None
    termination = None
    step = 0
    state = compute_state(system, front)
    recorder.add(0, front, state)
    z_side = None if num.z_end is None else np.sign(front.pos[axis, 1] - num.z_end)
    stalled_before = state.stalled.any()
    clamped_before = False
    try:
        if num.t_end is not None and num.t_end <= 0:
            termination = "t_end"
        while termination is None:
            if step >= num.max_steps:
                raise MaxStepsExceeded(f"{num.max_steps} steps without termination")
            h = dt
            if num.t_end is not None:
                h = min(dt, num.t_end - front.t)
            try:
                nxt, state = advance_step(system, front, h, state, pool)
            except CausticCollapse as exc:
                events.append({"kind": "caustic", "t": front.t, "step": step,
                               "z": float(front.pos[axis, 1]), "pair": list(exc.pair),
                               "detail": str(exc)})
                if not stop_on_caustic:
                    raise
                termination = "caustic"
                break
            step += 1
            prev_pz = front.mom[axis, 1]
            front = nxt
            event_now = False
            pz = front.mom[axis, 1]
            if prev_pz != 0 and np.sign(pz) != np.sign(prev_pz):
                events.append({"kind": "turning", "t": front.t, "step": step,
                               "z": float(front.pos[axis, 1]), "pz": float(pz)})
                event_now = True
                if num.event == "turning":
                    termination = "turning"
            stalled_now = bool(state.stalled.any())
            if stalled_now and not stalled_before:
                events.append({"kind": "stall", "t": front.t, "step": step,
                               "z": float(front.pos[axis, 1]),
                               "rays": int(state.stalled.sum())})
                event_now = True
            stalled_before = stalled_now
            clamped_now = bool(front.clamped.any())
            if clamped_now and not clamped_before:
                events.append({"kind": "clamp", "t": front.t, "step": step,
                               "z": float(front.pos[axis, 1]),
                               "rays": int(front.clamped.sum())})
                event_now = True
            clamped_before = clamped_now
            if num.t_end is not None and front.t >= num.t_end - 1e-12 * max(1.0, num.t_end):
                termination = termination or "t_end"
            if z_side is not None and np.sign(front.pos[axis, 1] - num.z_end) != z_side:
                termination = termination or "z_end"
            if event_now or termination is not None or step % stride == 0:
                recorder.add(step, front, state)
        recorder.add(step, front, state)
    finally:
        if pool is not None:
            pool.shutdown()
    return recorder.log(events, termination, dt)
