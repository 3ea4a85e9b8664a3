"""External fields: potential energies V(x, z) and refractive indices n(x, z).

All fields are analytic, vectorised over numpy arrays and expressed in
internal units (lengths in waists, energies in ``p0 * v0``).  The beam axis is
``z``; ``x`` is the transverse coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NoBracket


class PotentialField:
    """Base class of the potential variants."""

    kind = "base"

    def value(self, x, z):
        raise NotImplementedError

    def gradient(self, x, z):
        """Return ``(dV/dx, dV/dz)``."""
        raise NotImplementedError

    def length_scale(self):
        """Characteristic variation length, used to size root-bracketing scans."""
        return 1.0

    def curvature_scale(self):
        """Rough upper bound of the second derivatives of V (for time-step sizing)."""
        return 0.0

    def params(self):
        return {k: v for k, v in vars(self).items()}


@dataclass(frozen=True)
class Free(PotentialField):
    kind = "free"

    def value(self, x, z):
        return np.zeros(np.broadcast(x, z).shape)

    def gradient(self, x, z):
        shape = np.broadcast(x, z).shape
        return np.zeros(shape), np.zeros(shape)


@dataclass(frozen=True)
class ConstantForce(PotentialField):
    """Uniform force of magnitude ``force`` pointing towards -z; ``V = F z``."""

    force: float
    kind = "constant_force"

    def value(self, x, z):
        return self.force * (np.asarray(z, dtype=float) + 0.0 * np.asarray(x))

    def gradient(self, x, z):
        shape = np.broadcast(x, z).shape
        return np.zeros(shape), np.full(shape, float(self.force))

    def length_scale(self):
        return 1.0 / self.force if self.force > 0 else 1.0


@dataclass(frozen=True)
class GaussianBarrier(PotentialField):
    """``V = V0 exp(-2 (z - z_b)^2 / d^2)``."""

    v0: float
    z_b: float
    d: float
    kind = "gaussian_barrier"

    def value(self, x, z):
        u = (np.asarray(z, dtype=float) - self.z_b) / self.d
        return self.v0 * np.exp(-2.0 * u * u) + 0.0 * np.asarray(x)

    def gradient(self, x, z):
        u = (np.asarray(z, dtype=float) - self.z_b) / self.d
        gz = -4.0 * self.v0 * u / self.d * np.exp(-2.0 * u * u) + 0.0 * np.asarray(x)
        return np.zeros_like(gz), gz

    def length_scale(self):
        return self.d

    def curvature_scale(self):
        return 4.0 * abs(self.v0) / self.d**2


@dataclass(frozen=True)
class LogisticStep(PotentialField):
    """``V = V0 / (1 + exp(-alpha (z - z_s)))``, rising from 0 to ``V0``."""

    v0: float
    z_s: float
    alpha: float = 1.0
    kind = "logistic_step"

    def value(self, x, z):
        s = expit(self.alpha * (np.asarray(z, dtype=float) - self.z_s))
        return self.v0 * s + 0.0 * np.asarray(x)

    def gradient(self, x, z):
        s = expit(self.alpha * (np.asarray(z, dtype=float) - self.z_s))
        gz = self.v0 * self.alpha * s * (1.0 - s) + 0.0 * np.asarray(x)
        return np.zeros_like(gz), gz

    def length_scale(self):
        return 1.0 / self.alpha

    def curvature_scale(self):
        return abs(self.v0) * self.alpha**2 / (6.0 * math.sqrt(3.0))


@dataclass(frozen=True)
class Harmonic(PotentialField):
    """``V = m_omega_sq z^2 / 2`` (elastic force towards ``z = 0``)."""

    m_omega_sq: float
    kind = "harmonic"

    def value(self, x, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * self.m_omega_sq * z * z + 0.0 * np.asarray(x)

    def gradient(self, x, z):
        gz = self.m_omega_sq * np.asarray(z, dtype=float) + 0.0 * np.asarray(x)
        return np.zeros_like(gz), gz

    def length_scale(self):
        return 1.0 / math.sqrt(self.m_omega_sq) if self.m_omega_sq > 0 else 1.0

    def curvature_scale(self):
        return abs(self.m_omega_sq)


@dataclass(frozen=True)
class LensLike(PotentialField):
    """Transversely quadratic slab ``V = v_l s(z) x^2``.

    ``s`` is 1 on the middle half of ``[z1, z2]`` and tapers to 0 at both ends
    with a raised cosine over a quarter of the slab on each side, so ``V`` is
    C1 in ``z``.
    """

    v_l: float
    z1: float
    z2: float
    kind = "lens"

    def _taper(self, z):
        z = np.asarray(z, dtype=float)
        q = 0.25 * (self.z2 - self.z1)
        s = np.zeros_like(z)
        ds = np.zeros_like(z)
        rise = (z > self.z1) & (z < self.z1 + q)
        fall = (z > self.z2 - q) & (z < self.z2)
        flat = (z >= self.z1 + q) & (z <= self.z2 - q)
        a = math.pi / q
        s[rise] = 0.5 * (1.0 - np.cos(a * (z[rise] - self.z1)))
        ds[rise] = 0.5 * a * np.sin(a * (z[rise] - self.z1))
        s[fall] = 0.5 * (1.0 - np.cos(a * (self.z2 - z[fall])))
        ds[fall] = -0.5 * a * np.sin(a * (self.z2 - z[fall]))
        s[flat] = 1.0
        return s, ds

    def value(self, x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        s, _ = self._taper(z)
        return self.v_l * s * x * x

    def gradient(self, x, z):
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        s, ds = self._taper(z)
        return 2.0 * self.v_l * s * x, self.v_l * ds * x * x

    def length_scale(self):
        return 0.25 * (self.z2 - self.z1)

    def curvature_scale(self):
        return 2.0 * abs(self.v_l)


POTENTIALS = {
    cls.kind: cls
    for cls in (Free, ConstantForce, GaussianBarrier, LogisticStep, Harmonic, LensLike)
}


def make_potential(kind, **params):
    return POTENTIALS[kind](**params)


def eval_potential(field: PotentialField, r):
    r = np.asarray(r, dtype=float)
    return field.value(r[..., 0], r[..., 1])


def eval_gradient(field: PotentialField, r):
    r = np.asarray(r, dtype=float)
    gx, gz = field.gradient(r[..., 0], r[..., 1])
    return np.stack([gx, gz], axis=-1)


def classical_turning_point(field, energy, launch=(0.0, 0.0), direction=(0.0, 1.0),
                            max_distance=1e6, rtol=1e-12):
    """Distance along ``direction`` to the first point where ``V == energy``.

    The ray from ``launch`` is scanned on a grid a sixteenth of the field's
    length scale wide until ``V - energy`` changes sign, then the bracket is
    closed by bisection.  Returns ``None`` when no crossing exists within
    ``max_distance``.
    """
    launch = np.asarray(launch, dtype=float)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)

    def g(s):
        s = np.asarray(s, dtype=float)
        pts = launch + s[..., None] * direction
        return field.value(pts[..., 0], pts[..., 1]) - energy

    if g(0.0) >= 0:
        return 0.0
    h = field.length_scale() / 16.0
    chunk = 4096
    start = 0.0
    while start < max_distance:
        s = start + h * np.arange(1, chunk + 1)
        vals = g(s)
        hit = np.nonzero(vals >= 0)[0]
        if hit.size:
            k = hit[0]
            hi = s[k]
            lo = s[k - 1] if k > 0 else start
            break
        start = s[-1]
    else:
        return None
    # bisection only; V' may vanish near a barrier top
    while hi - lo > rtol * max(abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def require_turning_point(field, energy, **kwargs):
    z = classical_turning_point(field, energy, **kwargs)
    if z is None:
        raise NoBracket(f"V never reaches E = {energy!r} ahead of the launch point")
    return z


class RefractiveIndexField:
    kind = "base"

    def index(self, x, z):
        raise NotImplementedError

    def index_sq_gradient(self, x, z):
        """Return the gradient of ``n^2`` as ``(d/dx, d/dz)``."""
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(RefractiveIndexField):
    n0: float = 1.0
    kind = "uniform"

    def index(self, x, z):
        return np.full(np.broadcast(x, z).shape, float(self.n0))

    def index_sq_gradient(self, x, z):
        shape = np.broadcast(x, z).shape
        return np.zeros(shape), np.zeros(shape)


@dataclass(frozen=True)
class RadialParabolic(RefractiveIndexField):
    """``n^2 = n0^2 (1 - (g x)^2)``; graded-index guide about the z axis.

    Only meaningful for ``|x| < 1/g``.
    """

    n0: float = 1.0
    g: float = 0.0
    kind = "radial_parabolic"

    def index(self, x, z):
        x = np.asarray(x, dtype=float) + 0.0 * np.asarray(z)
        return self.n0 * np.sqrt(1.0 - (self.g * x) ** 2)

    def index_sq_gradient(self, x, z):
        x = np.asarray(x, dtype=float) + 0.0 * np.asarray(z)
        return -2.0 * self.n0**2 * self.g**2 * x, np.zeros_like(x)


INDEX_FIELDS = {cls.kind: cls for cls in (Uniform, RadialParabolic)}


def eval_index(field: RefractiveIndexField, r):
    r = np.asarray(r, dtype=float)
    return field.index(r[..., 0], r[..., 1])


def eval_index_gradient(field: RefractiveIndexField, r):
    r = np.asarray(r, dtype=float)
    gx, gz = field.index_sq_gradient(r[..., 0], r[..., 1])
    return np.stack([gx, gz], axis=-1)
