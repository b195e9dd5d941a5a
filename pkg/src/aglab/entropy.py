"""Entropy pairs for divergence-free unit-length fields and their diagnostics.

For a direction ``theta`` and a ramp ``s`` (zero on the negative axis, the
identity beyond ``delta``), work in coordinates where ``theta`` is the first
axis and set

    flux(z)   = ( s(z1) z1 + z2^2 s'(z1),  s(z1) z2 - z1 z2 s'(z1) )
    source(z) = ( -s'(z1),  z2 s''(z1) / 2 )

For ``m = rot90(grad u)`` (so ``div m = 0``) these satisfy

    div flux(m) = source(m) . grad(1 - |m|^2)

pointwise.  Far from the ramp the flux approximates the half-plane
indicator ``z -> theta if z.theta > 0 else 0`` on the unit circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fields as F

EVAL_RADIUS = 64.0
CURL_BOUND_CONSTANT = 8.0

# max |S''| on [0, 1] for the quintic template S(t) = 6t^3 - 8t^4 + 3t^5
_T2 = (192.0 - math.sqrt(192.0**2 - 4 * 180.0 * 36.0)) / 360.0
RAMP_K2 = abs(12.0 * _T2 * (5.0 * _T2 - 3.0) * (_T2 - 1.0))
# max |S'''| on [0, 1], attained at t = 0
RAMP_K3 = 36.0
# max S' on [0, 1], attained at t = 0.6
RAMP_K1 = 1.512


class EntropyError(ValueError):
    pass


def rotate_quarter(v: np.ndarray) -> np.ndarray:
    """Counter-clockwise rotation by 90 degrees: (a, b) -> (-b, a)."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass(frozen=True)
class SmoothRamp:
    """C^2 monotone ramp: 0 for x <= 0, x for x >= delta, quintic in between.

    On [0, delta] with t = x / delta: s = delta (6t^3 - 8t^4 + 3t^5).
    Bounds: 0 <= s' <= RAMP_K1, |s''| <= RAMP_K2 / delta,
    |s'''| <= RAMP_K3 / delta^2 (one-sided at the knots).
    """

    delta: float

    def __post_init__(self):
        if not (self.delta > 0):
            raise EntropyError("ramp width must be positive")

    def _t(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.delta, 0.0, 1.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        t = self._t(x)
        inner = self.delta * t**3 * (6.0 + t * (-8.0 + 3.0 * t))
        return np.where(x >= self.delta, x, inner)

    def d1(self, x):
        t = self._t(x)
        return t * t * (18.0 + t * (-32.0 + 15.0 * t))

    def d2(self, x):
        t = self._t(x)
        return 12.0 * t * (5.0 * t - 3.0) * (t - 1.0) / self.delta

    def d3(self, x):
        x = np.asarray(x, dtype=float)
        t = self._t(x)
        inside = (x > 0) & (x < self.delta)
        return np.where(inside, (36.0 - 192.0 * t + 180.0 * t * t) / self.delta**2, 0.0)


def make_ramp(delta: float) -> SmoothRamp:
    if not (0 < delta <= 1):
        raise EntropyError(f"ramp width must lie in (0, 1], got {delta}")
    return SmoothRamp(float(delta))


@dataclass(frozen=True)
class EntropyPair:
    theta: tuple[float, float]
    ramp: SmoothRamp

    @classmethod
    def make(cls, theta, delta: float) -> "EntropyPair":
        th = np.asarray(theta, dtype=float)
        if th.shape == ():
            th = np.array([math.cos(float(th)), math.sin(float(th))])
        nrm = float(np.hypot(*th))
        if nrm == 0:
            raise EntropyError("direction must be nonzero")
        th = th / nrm
        return cls((float(th[0]), float(th[1])), make_ramp(delta))

    @property
    def delta(self) -> float:
        return self.ramp.delta

    def _local(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(np.hypot(z[..., 0], z[..., 1]) > EVAL_RADIUS):
            raise EntropyError(f"entropy pair evaluated outside the ball of radius {EVAL_RADIUS:g}")
        c, s = self.theta
        return c * z[..., 0] + s * z[..., 1], -s * z[..., 0] + c * z[..., 1]

    def _global(self, a, b):
        c, s = self.theta
        return np.stack([c * a - s * b, s * a + c * b], axis=-1)

    def lam(self, z):
        """Half-plane indicator: theta where z . theta > 0, else the zero vector."""
        z1, _ = self._local(z)
        on = (z1 > 0).astype(float)
        return on[..., None] * np.asarray(self.theta)

    def phi(self, z):
        z1, z2 = self._local(z)
        s = self.ramp(z1)
        s1 = self.ramp.d1(z1)
        return self._global(s * z1 + z2 * z2 * s1, s * z2 - z1 * z2 * s1)

    def psi(self, z):
        z1, z2 = self._local(z)
        return self._global(-self.ramp.d1(z1), 0.5 * z2 * self.ramp.d2(z1))

    def phi_jacobian(self, z):
        """Jacobian d(phi)/dz as (..., 2, 2), in global coordinates."""
        z1, z2 = self._local(z)
        s = self.ramp(z1)
        s1 = self.ramp.d1(z1)
        s2 = self.ramp.d2(z1)
        # local partials
        a11 = s1 * z1 + s + z2 * z2 * s2
        a12 = 2.0 * z2 * s1
        a21 = s1 * z2 - z2 * s1 - z1 * z2 * s2
        a22 = s - z1 * s1
        return self._conj(a11, a12, a21, a22)

    def psi_jacobian(self, z):
        z1, z2 = self._local(z)
        s2 = self.ramp.d2(z1)
        s3 = self.ramp.d3(z1)
        return self._conj(-s2, np.zeros_like(z1), 0.5 * z2 * s3, 0.5 * s2)

    def _conj(self, a11, a12, a21, a22):
        c, s = self.theta
        Q = np.array([[c, -s], [s, c]])
        A = np.stack([np.stack([a11, a12], -1), np.stack([a21, a22], -1)], -2)
        return Q @ A @ Q.T


def _divergence(raster: F.Raster, v: np.ndarray) -> np.ndarray:
    return raster.Dx @ v[:, 0] + raster.Dy @ v[:, 1]


def rotated_gradient(u: F.ScalarField) -> F.VectorField:
    """The divergence-free field rot90(grad u)."""
    g = F.gradient(u)
    return F.VectorField(u.raster, rotate_quarter(g.values))


def identity_residual(m: F.VectorField, pair: EntropyPair, mask: np.ndarray | None = None) -> tuple[float, float]:
    """L1 norm of div flux(m) - source(m) . grad(1 - |m|^2), and L1 norm of the right side."""
    r = m.raster
    vals = m.values
    lhs = _divergence(r, pair.phi(vals))
    defect = 1.0 - np.sum(vals * vals, axis=1)
    grad_defect = np.stack([r.Dx @ defect, r.Dy @ defect], axis=1)
    rhs = np.sum(pair.psi(vals) * grad_defect, axis=1)
    return F.integrate(np.abs(lhs - rhs), r, mask), F.integrate(np.abs(rhs), r, mask)


def curl_flux_bound(m: F.VectorField, pair: EntropyPair, beta: float, constant: float = CURL_BOUND_CONSTANT,
                    mask: np.ndarray | None = None) -> tuple[float, float]:
    """Both sides of the curl estimate for the corrected flux.

    lhs = int |curl rot90(flux(m) - source(m)(1 - |m|^2))| = int |div(flux(m) - source(m)(1 - |m|^2))|
    rhs = constant * beta^(-1/2) * int |m| |1 - |m|^2| |grad m|
    """
    if not beta > 0:
        raise EntropyError("beta must be positive")
    if not math.isclose(pair.delta, beta**0.25, rel_tol=1e-12):
        raise EntropyError(f"ramp width {pair.delta} does not equal beta^(1/4) = {beta**0.25}")
    r = m.raster
    vals = m.values
    defect = 1.0 - np.sum(vals * vals, axis=1)
    corrected = pair.phi(vals) - pair.psi(vals) * defect[:, None]
    lhs = F.integrate(np.abs(_divergence(r, corrected)), r, mask)
    jac = np.stack([r.Dx @ vals[:, 0], r.Dy @ vals[:, 0], r.Dx @ vals[:, 1], r.Dy @ vals[:, 1]], axis=1)
    grad_norm = np.sqrt(np.sum(jac * jac, axis=1))
    dens = np.hypot(vals[:, 0], vals[:, 1]) * np.abs(defect) * grad_norm
    rhs = constant * beta**-0.5 * F.integrate(dens, r, mask)
    return lhs, rhs
