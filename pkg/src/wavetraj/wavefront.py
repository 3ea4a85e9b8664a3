"""Wavefront ensembles: transverse derivative estimation, Wave Potential,
Wave-Potential force and amplitude transport along flux tubes.

A front is stored as arrays over rays (struct of arrays); rays are kept in
transverse order and ``xi`` is the signed arclength along the polyline through
the ray positions, measured from the axis ray (the middle one).

All quantities are internal units (see :mod:`wavetraj.model`).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AmplitudeUnderflow, CausticCollapse, LongitudinalStall, WindowTooSmall
from .model import default_fit_window, rays_per_waist


@dataclass(frozen=True)
class RayState:
    id: int
    position: np.ndarray
    momentum: np.ndarray
    amplitude: float
    flux_const: float


@dataclass
class WaveFront:
    pos: np.ndarray
    mom: np.ndarray
    amp: np.ndarray
    flux: np.ndarray
    ids: np.ndarray
    xi: np.ndarray
    chord_ref: np.ndarray
    t: float = 0.0
    last_L: np.ndarray | None = None
    clamped: np.ndarray | None = None

    @property
    def n(self):
        return len(self.ids)

    @property
    def axis(self):
        return self.n // 2

    def ray(self, i):
        return RayState(int(self.ids[i]), self.pos[i].copy(), self.mom[i].copy(),
                        float(self.amp[i]), float(self.flux[i]))

    def rays(self):
        return [self.ray(i) for i in range(self.n)]

    def copy(self):
        return WaveFront(
            self.pos.copy(), self.mom.copy(), self.amp.copy(), self.flux.copy(),
            self.ids.copy(), self.xi.copy(), self.chord_ref.copy(), self.t,
            None if self.last_L is None else self.last_L.copy(),
            None if self.clamped is None else self.clamped.copy(),
        )


@dataclass
class WaveState:
    """Per-ray quantities derived from one frozen front."""

    L: np.ndarray
    W: np.ndarray
    w_force: np.ndarray
    tangential_force: np.ndarray
    tangent_sign: np.ndarray
    g1: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)
    stalled: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class CausticReport:
    pair: tuple
    reason: str
    spacing: float

    def __str__(self):
        i, j = self.pair
        return f"{self.reason} between rays {i} and {j} (spacing {self.spacing:.3e})"


def _unit_tangent(mom, sign=1.0):
    """Rotate momenta by -90 degrees: (pz, -px) / |p|, times ``sign``."""
    px = mom[..., 0]
    pz = mom[..., 1]
    pmag = np.sqrt(px * px + pz * pz)
    scale = np.asarray(sign) / np.where(pmag > 0, pmag, 1.0)
    t = np.empty(mom.shape)
    t[..., 0] = pz * scale
    t[..., 1] = -px * scale
    return t


def _launch_chord_ref(pos, mom):
    pbar = 0.5 * (mom[1:] + mom[:-1])
    return _unit_tangent(pbar)


def front_arclength(pos, chord_ref):
    """Signed arclength of each ray from the axis ray and the signed chords.

    A chord counts negative when it points against its reference direction,
    i.e. when two neighbours swapped order.
    """
    chords = np.diff(pos, axis=0)
    length = np.hypot(chords[:, 0], chords[:, 1])
    sign = np.where(np.einsum("ij,ij->i", chords, chord_ref) > 0, 1.0, -1.0)
    inc = sign * length
    n = len(pos)
    c = n // 2
    xi = np.zeros(n)
    xi[c + 1:] = np.cumsum(inc[c:])
    xi[:c] = -np.cumsum(inc[:c][::-1])[::-1]
    return xi, inc


def tube_widths(pos):
    """Flux-tube cross-section per ray: half the distance between its two
    neighbours, or the full distance to the single neighbour at an edge."""
    chords = np.diff(pos, axis=0)
    length = np.hypot(chords[:, 0], chords[:, 1])
    width = np.empty(len(pos))
    width[1:-1] = 0.5 * (length[1:] + length[:-1])
    width[0] = length[0]
    width[-1] = length[-1]
    return width


def make_front(pos, mom, amp, ids=None, t=0.0, chord_ref=None, flux=None, clamp=1e-12):
    """Assemble a front from raw arrays, capturing the tube flux if not given."""
    pos = np.array(pos, dtype=float)
    mom = np.array(mom, dtype=float)
    amp = np.array(amp, dtype=float)
    n = len(pos)
    if ids is None:
        ids = np.arange(n)
    if chord_ref is None:
        chord_ref = _launch_chord_ref(pos, mom)
    xi, _ = front_arclength(pos, chord_ref)
    if flux is None:
        pmag = np.maximum(np.hypot(mom[:, 0], mom[:, 1]), clamp)
        flux = amp**2 * pmag * tube_widths(pos)
    return WaveFront(pos, mom, amp, np.asarray(flux, dtype=float), np.asarray(ids), xi,
                     np.asarray(chord_ref, dtype=float), t, np.full(n, np.nan),
                     np.zeros(n, dtype=bool))


def init_gaussian_front(numerics, components=((0.0, 1.0),), p_launch=(0.0, 1.0), z0=0.0):
    """Launch front at ``z = z0`` carrying a sum of Gaussian amplitude profiles.

    Parameters
    ----------
    numerics : NumericsConfig
        Supplies ``n_rays`` and ``front_half_width``.
    components : sequence of (center, weight)
        ``R(x) = sum(weight * exp(-(x - center)**2))``, rescaled to max 1.
    p_launch : 2-vector
        Momentum shared by every ray.
    """
    if not components:
        raise ValueError("at least one Gaussian component is required")
    n = numerics.n_rays
    half = n // 2
    # spacing is 1/k with integer k so that the waist rays x = +-1 are on the grid
    x = np.arange(-half, half + 1) / rays_per_waist(numerics)
    amp = np.zeros(n)
    for center, weight in components:
        amp += weight * np.exp(-((x - center) ** 2))
    amp /= amp.max()
    pos = np.stack([x, np.full(n, float(z0))], axis=1)
    mom = np.tile(np.asarray(p_launch, dtype=float), (n, 1))
    return make_front(pos, mom, amp, clamp=numerics.momentum_clamp)


def fit_windows(n, usable, half_width):
    """Index windows (n, m) of the nearest usable rays for every ray.

    Windows are centred where possible and one-sided at the ends of the
    usable set.
    """
    good = np.flatnonzero(usable)
    if good.size == 0:
        raise AmplitudeUnderflow("no ray above the amplitude floor")
    if good.size < 3:
        raise WindowTooSmall(f"only {good.size} usable rays, need 3")
    m = min(2 * half_width + 1, good.size)
    k = np.searchsorted(good, np.arange(n))
    k = np.clip(k, 0, good.size - 1)
    left = np.clip(k - 1, 0, good.size - 1)
    closer_left = np.abs(good[left] - np.arange(n)) < np.abs(good[k] - np.arange(n))
    k = np.where(closer_left, left, k)
    start = np.clip(k - half_width, 0, good.size - m)
    return good[start[:, None] + np.arange(m)]


def quadratic_stencil(xi, windows):
    """Weights turning window samples into derivatives of the local LS quadratic.

    For every ray a quadratic in ``xi - xi[i]`` is fitted by least squares to
    the samples in its window; the fit is linear in the samples, so the first
    and second derivatives at ``xi[i]`` are ``w1 @ v`` and ``w2 @ v``.
    Returns ``(w1, w2)``, each shaped like ``windows``.
    """
    d = xi[windows] - xi[:, None]
    h = np.max(np.abs(d), axis=1)
    h = np.where(h > 0, h, 1.0)
    u = d / h[:, None]
    u2 = u * u
    s0 = float(windows.shape[1])
    s1 = u.sum(1)
    s2 = u2.sum(1)
    s3 = (u2 * u).sum(1)
    s4 = (u2 * u2).sum(1)
    # inverse of the symmetric normal matrix [[s0,s1,s2],[s1,s2,s3],[s2,s3,s4]]
    c00 = s2 * s4 - s3 * s3
    c01 = s2 * s3 - s1 * s4
    c02 = s1 * s3 - s2 * s2
    c11 = s0 * s4 - s2 * s2
    c12 = s1 * s2 - s0 * s3
    c22 = s0 * s2 - s1 * s1
    det = s0 * c00 + s1 * c01 + s2 * c02
    b = (c01[:, None] + c11[:, None] * u + c12[:, None] * u2) / det[:, None]
    c = (c02[:, None] + c12[:, None] * u + c22[:, None] * u2) / det[:, None]
    return b / h[:, None], 2.0 * c / (h * h)[:, None]


def local_quadratic(xi, values, windows, stencil=None):
    """Least-squares quadratic through each window, differentiated at each ray.

    Returns ``(d1, d2)``: first and second derivatives at ``xi[i]``.
    """
    w1, w2 = stencil if stencil is not None else quadratic_stencil(xi, windows)
    values = np.asarray(values, dtype=float)
    # the weights sum to zero, so the centre value can be removed exactly
    v = values[windows] - values[:, None]
    return (w1 * v).sum(1), (w2 * v).sum(1)


def _window(numerics):
    return numerics.fit_window if numerics.fit_window is not None else default_fit_window(numerics)


def _usable(front, numerics):
    return front.amp >= numerics.amplitude_floor * np.max(front.amp)


def estimate_log_amplitude_derivatives(front, numerics, windows=None, stencil=None):
    """First and second ``xi``-derivatives of ``ln R`` for every ray."""
    if windows is None:
        windows = fit_windows(front.n, _usable(front, numerics), _window(numerics))
    with np.errstate(divide="ignore"):
        log_amp = np.log(front.amp)
    log_amp = np.where(np.isfinite(log_amp), log_amp, 0.0)
    return local_quadratic(front.xi, log_amp, windows, stencil)


def laplacian_ratio(front, g1, g2, strict_projection=False, stall_ratio=0.1,
                    on_stall="freeze"):
    """``Lap(R)/R`` from the log-amplitude derivatives.

    The transverse curvature ``g2 + g1**2`` is scaled by ``(|p|/pz)**2``, or by
    the literal ``(px/pz)**2`` when ``strict_projection`` is set.  Rays whose
    ``|pz|/|p|`` falls below ``stall_ratio`` keep their last valid value
    (``on_stall="freeze"``) or raise :class:`LongitudinalStall`.

    Returns ``(L, stalled)``.
    """
    px, pz = front.mom[:, 0], front.mom[:, 1]
    pmag = np.hypot(px, pz)
    stalled = np.abs(pz) < stall_ratio * pmag
    if np.any(stalled) and on_stall == "raise":
        raise LongitudinalStall(f"{int(stalled.sum())} rays with |pz|/|p| < {stall_ratio}")
    safe_pz = np.where(stalled | (pz == 0), 1.0, pz)
    num = px if strict_projection else pmag
    L = (num / safe_pz) ** 2 * (g2 + g1 * g1)
    if np.any(stalled):
        prev = front.last_L if front.last_L is not None else np.full(front.n, np.nan)
        frozen = np.where(np.isfinite(prev), prev, g2 + g1 * g1)
        L = np.where(stalled, frozen, L)
    return L, stalled


def wave_potential(L, epsilon, eikonal_mode=False):
    """Wave Potential in internal units.

    Each regime's prefactor (hbar^2/2m, c/2k0 or hbar^2 c^2/2E) reduces to
    ``eps**2 / 2`` in internal units, so ``W = -(eps**2 / 2) L``.
    """
    L = np.asarray(L, dtype=float)
    if eikonal_mode:
        return np.zeros_like(L)
    return -0.5 * epsilon * epsilon * L


def tangent_signs(front):
    """+1 where the rotated momentum points towards increasing ``xi``."""
    pos = front.pos
    ahead = np.empty_like(pos)
    ahead[1:-1] = pos[2:] - pos[:-2]
    ahead[0] = pos[1] - pos[0]
    ahead[-1] = pos[-1] - pos[-2]
    t = _unit_tangent(front.mom)
    dot = np.einsum("ij,ij->i", t, ahead)
    return np.where(dot >= 0, 1.0, -1.0)


def wave_potential_force(front, W, windows, prefactor=1.0, stencil=None):
    """Force ``-dW/dxi`` along the unit front tangent at each ray.

    The direction is the momentum rotated by 90 degrees (oriented towards
    increasing ``xi``), so the force is orthogonal to ``p`` by construction.
    ``prefactor`` carries the relativistic ``E/(E - V)``.

    Returns ``(force_vectors, tangential_magnitude, tangent_sign)``.
    """
    dW, _ = local_quadratic(front.xi, W, windows, stencil)
    f = -dW * prefactor
    sign = tangent_signs(front)
    force = _unit_tangent(front.mom, sign) * f[:, None]
    return force, f, sign


def wave_state(front, numerics, epsilon, prefactor=1.0):
    """Evaluate L, W and the W-force on a frozen front."""
    n = front.n
    zeros = np.zeros(n)
    if numerics.eikonal_mode:
        return WaveState(zeros, zeros.copy(), np.zeros((n, 2)), zeros.copy(),
                         tangent_signs(front), zeros.copy(), zeros.copy(),
                         np.zeros(n, dtype=bool))
    windows = fit_windows(n, _usable(front, numerics), _window(numerics))
    stencil = quadratic_stencil(front.xi, windows)
    g1, g2 = estimate_log_amplitude_derivatives(front, numerics, windows, stencil)
    L, stalled = laplacian_ratio(front, g1, g2, numerics.strict_projection, numerics.stall_ratio)
    W = wave_potential(L, epsilon)
    force, f, sign = wave_potential_force(front, W, windows, prefactor, stencil)
    return WaveState(L, W, force, f, sign, g1, g2, stalled)


FOLD_TEST_RATIO = 0.1


def detect_caustic(front, min_spacing=0.0):
    """First neighbour pair that swapped order or came closer than ``min_spacing``."""
    chords = np.diff(front.pos, axis=0)
    length = np.hypot(chords[:, 0], chords[:, 1])
    flipped = np.einsum("ij,ij->i", chords, front.chord_ref) <= 0
    # slow folds: the chord must keep pointing towards +x across the local
    # propagation direction (checked only where the pair moves along +-z)
    pbar = 0.5 * (front.mom[1:] + front.mom[:-1])
    along = np.abs(pbar[:, 1]) >= FOLD_TEST_RATIO * np.hypot(pbar[:, 0], pbar[:, 1])
    across = chords[:, 0] * np.abs(pbar[:, 1]) - chords[:, 1] * pbar[:, 0] * np.sign(pbar[:, 1])
    flipped |= along & (across <= 0)
    bad = flipped | (length <= min_spacing)
    if not np.any(bad):
        return None
    i = int(np.argmax(bad))
    reason = "ordering flip" if flipped[i] else "spacing collapse"
    return CausticReport((i, i + 1), reason, float(length[i]))


def transport_amplitude(prev, nxt, min_spacing=0.0, clamp=1e-12):
    """Carry amplitudes to ``nxt`` by keeping ``R^2 |p| width`` per tube fixed.

    ``nxt`` holds the new positions and momenta; ``prev`` supplies the chord
    orientation used to detect ordering flips.  Returns a new front.
    """
    if prev.n != nxt.n or not np.array_equal(prev.ids, nxt.ids):
        raise ValueError("fronts carry different rays")
    chords = np.diff(nxt.pos, axis=0)
    probe = replace(nxt, chord_ref=prev.chord_ref)
    report = detect_caustic(probe, min_spacing)
    if report is not None:
        raise CausticCollapse(str(report), report.pair)
    xi, _ = front_arclength(nxt.pos, prev.chord_ref)
    width = tube_widths(nxt.pos)
    pmag = np.hypot(nxt.mom[:, 0], nxt.mom[:, 1])
    clamped = pmag < clamp
    amp = np.sqrt(prev.flux / (np.maximum(pmag, clamp) * width))
    length = np.hypot(chords[:, 0], chords[:, 1])
    ref = chords / length[:, None]
    return replace(nxt, amp=amp, flux=prev.flux, xi=xi, chord_ref=ref, clamped=clamped)


def flux_deviation(front):
    """Max relative deviation of ``R^2 |p| width`` from the launch flux."""
    pmag = np.hypot(front.mom[:, 0], front.mom[:, 1])
    now = front.amp**2 * pmag * tube_widths(front.pos)
    ok = ~(front.clamped if front.clamped is not None else np.zeros(front.n, bool))
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(now[ok] / front.flux[ok] - 1.0)))
