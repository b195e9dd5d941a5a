"""Low-energy test functions built by mollifying the distance function.

The construction:

1. ``v = min(d, cap_height + |x|)`` where ``d`` is the signed distance to the
   boundary and ``cap_height = 1 - cap_scale * beta**(3/32)``.  The upward
   cone replaces the neighborhood of the distance function's ridge.
2. ``xi(x) = int v(x - phi(x) y) rho(y) dy`` with ``rho`` the normalized
   bump ``exp(-1/(1-|y|^2))`` on the unit disk and a width
   ``phi(x) = w(|d(x)|)`` that equals the distance for points close to the
   boundary and ``eps`` from depth ``eps`` on.

Because ``rho`` is radially symmetric with unit mass, mollification
reproduces affine functions exactly for any width map.

Nodes within ``eps`` of the boundary are evaluated one by one with a polar
product quadrature of the kernel.  Deeper nodes all use width ``eps``; there
the same integral is a plain convolution, evaluated on a lattice of
half the grid spacing with an FFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import signal, spatial

from . import fields as F
from . import geometry as G
from .energy import tv_gradient  # noqa: F401  (re-exported diagnostic)
from .entropy import RAMP_K2, SmoothRamp

# mass and second moment of exp(-1/(1-|y|^2)) on the unit disk
KERNEL_MASS = 0.46651239317833
KERNEL_SECOND_MOMENT = 0.2613112034205587
WIDE_CAP_SCALE = 10.0
DEFAULT_CAP_SCALE = 1.0
CAP_EXPONENT = 3.0 / 32.0
WIDTH_K2 = 1.5 * RAMP_K2
_POLAR_BATCH = 1 << 20
_LATTICE_MAX_POINTS = 3 * 10**7


class CompetitorError(ValueError):
    pass


def bump(y: np.ndarray) -> np.ndarray:
    """Normalized bump kernel on the unit disk."""
    r2 = np.sum(np.asarray(y, dtype=float) ** 2, axis=-1)
    out = np.zeros_like(r2)
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside])) / KERNEL_MASS
    return out


@lru_cache(maxsize=8)
def kernel_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Polar product rule for the bump: q Gauss-Legendre radii times 2q angles.

    Returns points (2 q^2, 2) in the unit disk and weights summing to one.
    The point set is symmetric under y -> -y, so first moments vanish.
    """
    if q < 4:
        raise CompetitorError("kernel quadrature order must be at least 4")
    x, w = np.polynomial.legendre.leggauss(q)
    rad = 0.5 * (x + 1.0)
    wr = 0.5 * w * rad * np.exp(-1.0 / (1.0 - rad * rad))
    ang = (np.arange(2 * q) + 0.5) * (math.pi / q)
    pts = np.stack(
        [np.outer(rad, np.cos(ang)).ravel(), np.outer(rad, np.sin(ang)).ravel()], axis=1
    )
    wts = np.repeat(wr, 2 * q) * (math.pi / q)
    wts /= wts.sum()
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def adaptive_mollify(source, x, width, q: int = 32) -> np.ndarray:
    """Mollify ``source`` at points ``x`` with per-point kernel widths.

    ``source`` maps an (m, 2) array of points to m values.  ``width`` is a
    scalar or one value per point.
    """
    pts, single = G._as_points(x)
    width = np.broadcast_to(np.asarray(width, dtype=float), (len(pts),))
    if np.any(~(width > 0)):
        raise CompetitorError("mollification width must be positive")
    y, wts = kernel_rule(int(q))
    out = np.empty(len(pts))
    step = max(1, _POLAR_BATCH // len(y))
    for s in range(0, len(pts), step):
        xs = pts[s : s + step]
        ws = width[s : s + step]
        sample = xs[:, None, :] - ws[:, None, None] * y[None, :, :]
        vals = np.asarray(source(sample.reshape(-1, 2)), dtype=float).reshape(len(xs), len(y))
        out[s : s + step] = vals @ wts
    return out[0] if single else out


@dataclass(frozen=True)
class RampW:
    """Width map: ``w(z) = z`` below eps/3, ``eps`` above eps, smooth monotone between.

    Built from the quintic ramp: ``w(z) = eps - s(eps - z)`` with a ramp of
    width 2 eps / 3, so ``|w''| <= WIDTH_K2 / eps``.
    """

    eps: float

    @property
    def _ramp(self) -> SmoothRamp:
        return SmoothRamp(2.0 * self.eps / 3.0)

    def __call__(self, z):
        return self.eps - self._ramp(self.eps - np.asarray(z, dtype=float))

    def d1(self, z):
        return self._ramp.d1(self.eps - np.asarray(z, dtype=float))

    def d2(self, z):
        return -self._ramp.d2(self.eps - np.asarray(z, dtype=float))


@dataclass(frozen=True)
class CompetitorParams:
    eps: float
    beta: float
    q: int = 32
    cap_scale: float = DEFAULT_CAP_SCALE
    cap: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise CompetitorError("eps must be positive")
        if not self.beta > 0:
            raise CompetitorError("beta must be positive")
        if self.eps > math.sqrt(self.beta) / 4.0 * (1 + 1e-12):
            raise CompetitorError(f"eps={self.eps} exceeds sqrt(beta)/4={math.sqrt(self.beta) / 4.0}")
        if self.q < 16:
            raise CompetitorError("kernel quadrature order q must be at least 16")

    @property
    def cap_height(self) -> float:
        return 1.0 - self.cap_scale * self.beta**CAP_EXPONENT

    @property
    def contact_radius(self) -> float:
        """Radius where 1 - |x| meets the cap cone on the unit disk."""
        return 0.5 * self.cap_scale * self.beta**CAP_EXPONENT


def cap_function(xy: np.ndarray, cap_height: float) -> np.ndarray:
    return cap_height + np.hypot(xy[..., 0], xy[..., 1])


def cone_cap(u_values: np.ndarray, xy: np.ndarray, beta: float, cap_scale: float = DEFAULT_CAP_SCALE) -> np.ndarray:
    """Pointwise minimum of ``u`` and the upward cone ``1 - cap_scale beta^(3/32) + |x|``."""
    return np.minimum(u_values, cap_function(xy, 1.0 - cap_scale * beta**CAP_EXPONENT))


def capped_distance(domain: G.ConvexDomain, cap_height: float | None):
    """Source function ``x -> min(d(x), cap_height + |x|)`` (plain distance if no cap)."""

    def src(x):
        d = domain.signed_distance(x)
        if cap_height is None:
            return d
        return np.minimum(d, cap_function(x, cap_height))

    return src


def check_curvature(domain: G.ConvexDomain, eps: float, n: int = 1024) -> None:
    limit = eps**-0.5
    if domain.max_curvature <= limit:
        return
    s = domain.boundary_samples(n)
    k = int(np.argmax(s.curvature))
    raise CompetitorError(
        f"boundary curvature {domain.max_curvature:.6g} exceeds eps^(-1/2)={limit:.6g} "
        f"(worst sample at {s.point[k].tolist()})"
    )


@dataclass(frozen=True, eq=False)
class Competitor:
    field: F.ScalarField
    params: CompetitorParams
    width: np.ndarray
    source: np.ndarray  # capped distance at the nodes
    n_polar: int
    n_lattice: int
    meta: dict = field(default_factory=dict)


def _lattice_convolution(raster: F.Raster, nodes: np.ndarray, source, eps: float) -> np.ndarray:
    """Width-eps mollification at grid nodes by FFT convolution on a half-spacing lattice."""
    hf = 0.5 * raster.h
    ox, oy = raster.grid.origin
    # fine index of node (i, j) is (2i, 2j); pad by the kernel radius
    pad = int(math.ceil(eps / hf)) + 1
    fi = 2 * raster.i[nodes]
    fj = 2 * raster.j[nodes]
    i0, i1 = fi.min() - pad, fi.max() + pad
    j0, j1 = fj.min() - pad, fj.max() + pad
    xs = ox + hf * np.arange(i0, i1 + 1)
    ys = oy + hf * np.arange(j0, j1 + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vals = np.asarray(source(np.stack([X.ravel(), Y.ravel()], axis=1)), dtype=float).reshape(X.shape)
    k = np.arange(-pad, pad + 1) * hf / eps
    KX, KY = np.meshgrid(k, k, indexing="xy")
    ker = bump(np.stack([KX, KY], axis=-1))
    ker /= ker.sum()
    conv = signal.fftconvolve(vals, ker, mode="same")
    return conv[fj - j0, fi - i0]


def build_competitor(domain: G.ConvexDomain, params: CompetitorParams, raster: F.Raster | None = None,
                     h: float | None = None, check_beta: bool = True, lattice: bool | None = None) -> Competitor:
    """Materialize the mollified capped distance function on a grid."""
    check_curvature(domain, params.eps)
    if check_beta and params.cap:
        sym = G.disk_symmetric_difference(domain, (0.0, 0.0))
        if sym > params.beta * (1 + 1e-9):
            raise CompetitorError(f"|domain - unit disk| = {sym:.6g} exceeds beta = {params.beta:.6g}")
    if raster is None:
        raster = F.rasterize(domain, params.eps / 8.0 if h is None else h)
    cap_height = params.cap_height if params.cap else None
    src = capped_distance(domain, cap_height)
    wmap = RampW(params.eps)
    width = wmap(np.abs(raster.sd))
    values = np.empty(raster.n)
    deep = raster.sd >= params.eps
    if lattice is None:
        n_fine = (2 * raster.grid.nx) * (2 * raster.grid.ny)
        lattice = np.count_nonzero(deep) > 4096 and n_fine <= _LATTICE_MAX_POINTS
    if not lattice:
        deep = np.zeros(raster.n, dtype=bool)
    shallow = ~deep
    at_boundary = shallow & (width <= 0)
    poly = shallow & ~at_boundary
    values[at_boundary] = src(raster.xy[at_boundary])
    values[poly] = adaptive_mollify(src, raster.xy[poly], width[poly], params.q)
    if np.any(deep):
        values[deep] = _lattice_convolution(raster, np.nonzero(deep)[0], src, params.eps)
    return Competitor(
        field=F.ScalarField(raster, values),
        params=params,
        width=width,
        source=src(raster.xy),
        n_polar=int(np.count_nonzero(shallow)),
        n_lattice=int(np.count_nonzero(deep)),
    )


def mollified_distance(domain: G.ConvexDomain, eps: float, raster: F.Raster, q: int = 32) -> F.ScalarField:
    """The uncapped construction (plain mollified distance function)."""
    params = CompetitorParams(eps=eps, beta=16.0 * eps * eps, q=q, cap=False)
    return build_competitor(domain, params, raster=raster, check_beta=False).field


def boundary_layer_field(domain: G.ConvexDomain, eps: float, q: int = 32, h: float | None = None,
                         raster: F.Raster | None = None) -> F.ScalarField:
    """Adaptively mollified distance function on the layer of depth ``eps`` (plus stencil margin)."""
    check_curvature(domain, eps)
    if raster is None:
        h = eps / 4.0 if h is None else h
        raster = F.rasterize(domain, h, band=eps + 4.0 * h)
    src = capped_distance(domain, None)
    width = RampW(eps)(np.abs(raster.sd))
    values = np.empty(raster.n)
    zero = width <= 0
    values[zero] = src(raster.xy[zero])
    values[~zero] = adaptive_mollify(src, raster.xy[~zero], width[~zero], q)
    return F.ScalarField(raster, values)


def band_eikonal_error(u: F.ScalarField, depth: float) -> float:
    """max ||grad u| - 1| over valid nodes inside the domain within ``depth`` of the boundary."""
    r = u.raster
    g = F.gradient(u).values
    sel = r.valid_grad & (r.sd >= 0) & (r.sd <= depth)
    return float(np.max(np.abs(np.hypot(g[sel, 0], g[sel, 1]) - 1.0)))


def trace_normal_error(u: F.ScalarField, n_samples: int = 512) -> float:
    """max |grad u . eta - 1| at boundary samples."""
    samples, grad = F.boundary_trace(u, n_samples, derivative=True)
    return float(np.max(np.abs(np.sum(grad * samples.inward_normal, axis=1) - 1.0)))


@dataclass(frozen=True)
class ContactReport:
    n_contact: int
    radius: float
    hausdorff_band: float
    tube_area: float
    empty: bool


def contact_set_diagnostic(raster: F.Raster, u_values: np.ndarray, beta: float, eps: float,
                           cap_scale: float = DEFAULT_CAP_SCALE) -> ContactReport:
    """Locate where ``u`` meets the cap cone and measure the 2 eps tube around it.

    Contact nodes are the active nodes at which ``u - cone`` changes sign
    toward an active axis neighbor.  ``hausdorff_band`` is their largest
    distance from the circle of radius ``cap_scale/2 * beta^(3/32)``.
    """
    radius = 0.5 * cap_scale * beta**CAP_EXPONENT
    diff = np.asarray(u_values, dtype=float) - cap_function(raster.xy, 1.0 - cap_scale * beta**CAP_EXPONENT)
    pos = diff >= 0
    contact = np.zeros(raster.n, dtype=bool)
    for di, dj in ((1, 0), (0, 1)):
        nb = raster.neighbor(di, dj)
        ok = nb >= 0
        flip = np.zeros(raster.n, dtype=bool)
        flip[ok] = pos[ok] != pos[nb[ok]]
        contact |= flip
        contact[nb[flip]] = True
    n = int(np.count_nonzero(contact))
    if n == 0:
        return ContactReport(0, radius, 0.0, 0.0, True)
    pts = raster.xy[contact]
    band = float(np.max(np.abs(np.hypot(pts[:, 0], pts[:, 1]) - radius)))
    tree = spatial.cKDTree(pts)
    dist, _ = tree.query(raster.xy, k=1, distance_upper_bound=2.0 * eps + raster.h)
    inside = dist <= 2.0 * eps
    tube = float(np.sum(raster.weight[inside]) * raster.h**2)
    return ContactReport(n, radius, band, tube, False)
