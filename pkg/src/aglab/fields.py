"""Grid-sampled fields on convex domains.

A :class:`Raster` stores only the *active* nodes of a uniform node-centered
grid: nodes inside the domain (``interior``, signed distance >= h) and nodes
within one spacing of the boundary (``cut``).  Exterior nodes are dropped.
Differential operators are sparse matrices acting on the vector of active
node values, so gradients of discrete energies are obtained by transposes.

Stencils
--------
first derivative   central (f[+1] - f[-1]) / 2h, else one-sided
                   (-3 f0 + 4 f1 - f2) / 2h toward the available side
second derivative  (f[+1] - 2 f0 + f[-1]) / h^2, else one-sided
                   (2 f0 - 5 f1 + 4 f2 - f3) / h^2
mixed derivative   tensor product of the two first-derivative stencils

A node whose stencil needs a missing neighbor is *invalid*; it is left out
of every integral and its cell area is reported as ``excluded_area``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .geometry import ConvexDomain
from .io import atomic_write_bytes, atomic_write_text

CUT = 1
INTERIOR = 2
SUBCELL = 4
MIN_INTERIOR_NODES = 256


class FieldError(ValueError):
    """Invalid grid construction or field operation."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid: node (i, j) sits at ``origin + h * (i, j)``."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise FieldError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise FieldError("grid needs at least one node per axis")

    @classmethod
    def covering(cls, lo, hi, h: float, margin: float | None = None) -> "GridSpec":
        """Grid aligned to integer multiples of ``h`` covering ``[lo, hi]`` plus a margin."""
        margin = 3.0 * h if margin is None else margin
        i0 = np.floor((np.asarray(lo) - margin) / h).astype(np.int64)
        i1 = np.ceil((np.asarray(hi) + margin) / h).astype(np.int64)
        return cls((float(i0[0] * h), float(i0[1] * h)), float(h), int(i1[0] - i0[0] + 1), int(i1[1] - i0[1] + 1))

    def node_xy(self, i, j) -> np.ndarray:
        return np.stack([self.origin[0] + self.h * np.asarray(i, float), self.origin[1] + self.h * np.asarray(j, float)], axis=-1)


@dataclass(frozen=True, eq=False)
class Raster:
    """Active nodes of a grid over a domain, with quadrature weights and stencils."""

    domain: ConvexDomain
    grid: GridSpec
    index: np.ndarray  # sorted linear indices j * nx + i
    i: np.ndarray
    j: np.ndarray
    sd: np.ndarray
    kind: np.ndarray
    weight: np.ndarray
    band: float | None = None

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def n(self) -> int:
        return len(self.index)

    @cached_property
    def xy(self) -> np.ndarray:
        return self.grid.node_xy(self.i, self.j)

    @property
    def n_interior(self) -> int:
        return int(np.count_nonzero(self.kind == INTERIOR))

    @property
    def n_cut(self) -> int:
        return int(np.count_nonzero(self.kind == CUT))

    def neighbor(self, di: int, dj: int) -> np.ndarray:
        """Active position of the node offset by (di, dj), or -1 when inactive."""
        ii = self.i + di
        jj = self.j + dj
        inside = (ii >= 0) & (ii < self.grid.nx) & (jj >= 0) & (jj < self.grid.ny)
        lin = jj.astype(np.int64) * self.grid.nx + ii
        pos = np.searchsorted(self.index, lin)
        pos = np.minimum(pos, self.n - 1)
        ok = inside & (self.index[pos] == lin)
        return np.where(ok, pos, -1)

    def position_of(self, i, j) -> np.ndarray:
        lin = np.asarray(j, dtype=np.int64) * self.grid.nx + np.asarray(i, dtype=np.int64)
        pos = np.minimum(np.searchsorted(self.index, lin), self.n - 1)
        return np.where(self.index[pos] == lin, pos, -1)

    # -- stencils ----------------------------------------------------------
    def _first(self, axis: int):
        d = (1, 0) if axis == 0 else (0, 1)
        nb = {k: self.neighbor(k * d[0], k * d[1]) for k in (-2, -1, 1, 2)}
        rows, cols, vals = [], [], []
        valid = np.zeros(self.n, dtype=bool)
        h = self.h
        central = (nb[1] >= 0) & (nb[-1] >= 0)
        fwd = ~central & (nb[1] >= 0) & (nb[2] >= 0)
        bwd = ~central & ~fwd & (nb[-1] >= 0) & (nb[-2] >= 0)
        k = np.arange(self.n)
        for sel, taps in (
            (central, ((1, 0.5), (-1, -0.5))),
            (fwd, ((0, -1.5), (1, 2.0), (2, -0.5))),
            (bwd, ((0, 1.5), (-1, -2.0), (-2, 0.5))),
        ):
            for off, c in taps:
                rows.append(k[sel])
                cols.append(k[sel] if off == 0 else nb[off][sel])
                vals.append(np.full(np.count_nonzero(sel), c / h))
            valid |= sel
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n))
        return m, valid

    def _second(self, axis: int):
        d = (1, 0) if axis == 0 else (0, 1)
        nb = {k: self.neighbor(k * d[0], k * d[1]) for k in (-3, -2, -1, 1, 2, 3)}
        rows, cols, vals = [], [], []
        valid = np.zeros(self.n, dtype=bool)
        h2 = self.h * self.h
        central = (nb[1] >= 0) & (nb[-1] >= 0)
        fwd = ~central & (nb[1] >= 0) & (nb[2] >= 0) & (nb[3] >= 0)
        bwd = ~central & ~fwd & (nb[-1] >= 0) & (nb[-2] >= 0) & (nb[-3] >= 0)
        k = np.arange(self.n)
        for sel, taps in (
            (central, ((-1, 1.0), (0, -2.0), (1, 1.0))),
            (fwd, ((0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0))),
            (bwd, ((0, 2.0), (-1, -5.0), (-2, 4.0), (-3, -1.0))),
        ):
            for off, c in taps:
                rows.append(k[sel])
                cols.append(k[sel] if off == 0 else nb[off][sel])
                vals.append(np.full(np.count_nonzero(sel), c / h2))
            valid |= sel
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n))
        return m, valid

    def _mixed(self):
        """Tensor product of first-derivative stencils in x and y.

        Each node takes the first (central, forward, backward) x-stencil and
        y-stencil combination whose nine-or-fewer product nodes are active;
        the product of two second-order stencils is second order for f_xy.
        """
        stencils = (((1, 0.5), (-1, -0.5)), ((0, -1.5), (1, 2.0), (2, -0.5)), ((0, 1.5), (-1, -2.0), (-2, 0.5)))
        h2 = self.h * self.h
        todo = np.ones(self.n, dtype=bool)
        rows, cols, vals = [], [], []
        k = np.arange(self.n)
        for sx in stencils:
            for sy in stencils:
                taps = [(a, b, ca * cb) for a, ca in sx for b, cb in sy]
                pos = np.stack([self.neighbor(a, b) if (a, b) != (0, 0) else k for a, b, _ in taps], axis=1)
                sel = todo & np.all(pos >= 0, axis=1)
                if not np.any(sel):
                    continue
                for t, (_, _, c) in enumerate(taps):
                    rows.append(k[sel])
                    cols.append(pos[sel, t])
                    vals.append(np.full(np.count_nonzero(sel), c / h2))
                todo &= ~sel
        m = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n, self.n))
        return m, ~todo

    @cached_property
    def _ops(self):
        dx, vx = self._first(0)
        dy, vy = self._first(1)
        dxx, vxx = self._second(0)
        dyy, vyy = self._second(1)
        dxy, vxy = self._mixed()
        return {
            "dx": dx, "dy": dy, "dxx": dxx, "dxy": dxy, "dyy": dyy,
            "valid_grad": vx & vy, "valid_hess": vxx & vyy & vxy,
        }

    @property
    def Dx(self) -> sp.csr_matrix:
        return self._ops["dx"]

    @property
    def Dy(self) -> sp.csr_matrix:
        return self._ops["dy"]

    @property
    def Dxx(self) -> sp.csr_matrix:
        return self._ops["dxx"]

    @property
    def Dxy(self) -> sp.csr_matrix:
        return self._ops["dxy"]

    @property
    def Dyy(self) -> sp.csr_matrix:
        return self._ops["dyy"]

    @property
    def valid_grad(self) -> np.ndarray:
        return self._ops["valid_grad"]

    @property
    def valid_hess(self) -> np.ndarray:
        return self._ops["valid_hess"]

    @cached_property
    def valid(self) -> np.ndarray:
        return self.valid_grad & self.valid_hess

    @cached_property
    def quad_weight(self) -> np.ndarray:
        """Per-node quadrature weight (cell fraction times h^2), zero at invalid nodes."""
        return np.where(self.valid, self.weight * self.h * self.h, 0.0)

    @cached_property
    def excluded_area(self) -> float:
        return float(np.sum(np.where(self.valid, 0.0, self.weight)) * self.h * self.h)

    def same_grid(self, other: "Raster") -> bool:
        return self is other or (self.grid == other.grid and np.array_equal(self.index, other.index))

    # -- boundary trace operators -------------------------------------------
    def trace_operators(self, n_samples: int):
        """Sparse operators mapping node values to boundary values and gradients.

        Returns ``(samples, T, Tx, Ty)`` where ``T @ f`` gives values of the
        biquadratic interpolant at the boundary samples and ``Tx``, ``Ty``
        its partial derivatives.
        """
        return _trace_operators(self, int(n_samples))


def _lagrange3(s):
    return np.stack([0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)], axis=-1)


def _dlagrange3(s):
    return np.stack([s - 0.5, -2.0 * s, s + 0.5], axis=-1)


_trace_cache: dict = {}


def _trace_operators(r: Raster, n_samples: int):
    key = (id(r), n_samples)
    hit = _trace_cache.get(key)
    if hit is not None and hit[0] is r:
        return hit[1]
    if n_samples < 64:
        raise FieldError("boundary trace needs at least 64 samples")
    samples = r.domain.boundary_samples(n_samples)
    p = samples.point
    eta = samples.inward_normal
    h = r.h
    g = r.grid
    ox, oy = g.origin
    n = n_samples
    cols = np.full((n, 9), -1, dtype=np.int64)
    ci = np.zeros(n, dtype=np.int64)
    cj = np.zeros(n, dtype=np.int64)
    pending = np.ones(n, dtype=bool)
    shift = 1.0
    offs = [(a, b) for b in (-1, 0, 1) for a in (-1, 0, 1)]
    while np.any(pending) and shift <= 6.0:
        c = p[pending] + shift * h * eta[pending]
        ii = np.rint((c[:, 0] - ox) / h).astype(np.int64)
        jj = np.rint((c[:, 1] - oy) / h).astype(np.int64)
        pos = np.stack([r.position_of(ii + a, jj + b) for a, b in offs], axis=1)
        ok = np.all(pos >= 0, axis=1)
        idx = np.nonzero(pending)[0]
        done = idx[ok]
        cols[done] = pos[ok]
        ci[done] = ii[ok]
        cj[done] = jj[ok]
        pending[done] = False
        shift += 0.5
    if np.any(pending):
        k = int(np.argmax(pending))
        raise FieldError(f"no complete interpolation stencil near boundary sample {p[k]}")
    s = (p[:, 0] - (ox + h * ci)) / h
    t = (p[:, 1] - (oy + h * cj)) / h
    ls, lt = _lagrange3(s), _lagrange3(t)
    dls, dlt = _dlagrange3(s) / h, _dlagrange3(t) / h
    # column ordering matches offs: index = (b + 1) * 3 + (a + 1)
    w = (lt[:, :, None] * ls[:, None, :]).reshape(n, 9)
    wx = (lt[:, :, None] * dls[:, None, :]).reshape(n, 9)
    wy = (dlt[:, :, None] * ls[:, None, :]).reshape(n, 9)
    rows = np.repeat(np.arange(n), 9)
    shape = (n, r.n)
    T = sp.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=shape)
    Tx = sp.csr_matrix((wx.ravel(), (rows, cols.ravel())), shape=shape)
    Ty = sp.csr_matrix((wy.ravel(), (rows, cols.ravel())), shape=shape)
    out = (samples, T, Tx, Ty)
    _trace_cache.clear()
    _trace_cache[key] = (r, out)
    return out


def rasterize(domain: ConvexDomain, h: float, band: float | None = None, chunk: int = 1 << 18) -> Raster:
    """Classify grid nodes against ``domain`` and compute cut-cell weights.

    interior: d >= h, exterior: d <= -h, cut: otherwise.  With ``band`` set,
    only nodes with d < band are kept (a boundary layer raster).
    """
    h = float(h)
    if not h > 0:
        raise FieldError("grid spacing must be positive")
    if h > domain.diameter / 16.0:
        raise FieldError(f"grid too coarse: h={h} exceeds diameter/16={domain.diameter / 16.0}")
    lo, hi = domain.bbox()
    grid = GridSpec.covering(lo, hi, h)
    keep_lin, keep_sd = [], []
    total = grid.nx * grid.ny
    for start in range(0, total, chunk):
        lin = np.arange(start, min(total, start + chunk), dtype=np.int64)
        jj, ii = np.divmod(lin, grid.nx)
        xy = grid.node_xy(ii, jj)
        sd = domain.signed_distance(xy)
        sel = sd > -h
        if band is not None:
            sel &= sd < band
        keep_lin.append(lin[sel])
        keep_sd.append(sd[sel])
    index = np.concatenate(keep_lin)
    sd = np.concatenate(keep_sd)
    jj, ii = np.divmod(index, grid.nx)
    kind = np.where(sd >= h, INTERIOR, CUT).astype(np.int8)
    if band is None and np.count_nonzero(kind == INTERIOR) < MIN_INTERIOR_NODES:
        raise FieldError(f"grid too coarse: only {np.count_nonzero(kind == INTERIOR)} interior nodes")
    weight = np.ones(len(index))
    cut = np.nonzero(kind == CUT)[0]
    if len(cut):
        sub = (np.arange(SUBCELL) + 0.5) / SUBCELL - 0.5
        sx, sy = np.meshgrid(sub, sub, indexing="xy")
        offs = h * np.stack([sx.ravel(), sy.ravel()], axis=1)
        xy = grid.node_xy(ii[cut], jj[cut])
        pts = (xy[:, None, :] + offs[None, :, :]).reshape(-1, 2)
        inside = domain.signed_distance(pts).reshape(len(cut), -1) > 0
        weight[cut] = inside.mean(axis=1)
    return Raster(domain, grid, index, ii, jj, sd, kind, weight, band)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarField:
    raster: Raster
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.raster.n,):
            raise FieldError(f"expected {self.raster.n} node values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, raster: Raster, fn) -> "ScalarField":
        return cls(raster, np.asarray(fn(raster.xy), dtype=float))

    def check_finite(self) -> None:
        bad = ~np.isfinite(self.values)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise FieldError(f"non-finite value at node (i={self.raster.i[k]}, j={self.raster.j[k]}), xy={self.raster.xy[k]}")


@dataclass(frozen=True, eq=False)
class VectorField:
    raster: Raster
    values: np.ndarray  # (n, 2)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.raster.n, 2):
            raise FieldError(f"expected ({self.raster.n}, 2) node values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.values[:, 1]


def gradient(f: ScalarField) -> VectorField:
    r = f.raster
    return VectorField(r, np.stack([r.Dx @ f.values, r.Dy @ f.values], axis=1))


def hessian(f: ScalarField) -> np.ndarray:
    """Per-node (f_xx, f_xy, f_yy) as an (n, 3) array."""
    r = f.raster
    return np.stack([r.Dxx @ f.values, r.Dxy @ f.values, r.Dyy @ f.values], axis=1)


def hessian_norm_sq(hess: np.ndarray) -> np.ndarray:
    return hess[:, 0] ** 2 + 2.0 * hess[:, 1] ** 2 + hess[:, 2] ** 2


def integrate(g, raster: Raster, mask: np.ndarray | None = None) -> float:
    """Cut-cell quadrature of node values ``g`` over the domain.

    Invalid nodes and nodes outside ``mask`` carry zero weight.  The sum is
    numpy's pairwise reduction in node order, so identical inputs give
    bit-identical results.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (raster.n,):
        raise FieldError(f"integrand has shape {g.shape}, expected ({raster.n},)")
    w = raster.quad_weight if mask is None else np.where(mask, raster.quad_weight, 0.0)
    used = w > 0
    bad = used & ~np.isfinite(g)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise FieldError(f"NaN in integrand at node (i={raster.i[k]}, j={raster.j[k]}), xy={raster.xy[k]}")
    return float(np.sum(np.where(used, w * g, 0.0)))


def boundary_trace(f: ScalarField, n_samples: int = 256, derivative: bool = False):
    """Boundary samples and the trace of ``f`` (or of its gradient) there."""
    samples, T, Tx, Ty = f.raster.trace_operators(n_samples)
    if derivative:
        return samples, np.stack([Tx @ f.values, Ty @ f.values], axis=1)
    return samples, T @ f.values


def w12_distance(f: ScalarField, g: ScalarField) -> float:
    if not f.raster.same_grid(g.raster):
        raise FieldError("w12_distance needs fields on the same grid")
    r = f.raster
    d = f.values - g.values
    gx = r.Dx @ d
    gy = r.Dy @ d
    return float(np.sqrt(integrate(d * d, r) + integrate(gx * gx + gy * gy, r)))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<qqddd")


def to_dense(f: ScalarField) -> np.ndarray:
    """Row-major (ny, nx) array with NaN at inactive nodes."""
    g = f.raster.grid
    out = np.full(g.nx * g.ny, np.nan)
    out[f.raster.index] = f.values
    return out.reshape(g.ny, g.nx)


def encode_binary(f: ScalarField) -> bytes:
    g = f.raster.grid
    head = _HEADER.pack(g.nx, g.ny, g.h, g.origin[0], g.origin[1])
    return head + to_dense(f).astype("<f8").tobytes(order="C")


def write_binary(f: ScalarField, path) -> None:
    """Header ``int64 nx, int64 ny, float64 h, float64 ox, float64 oy`` then (ny, nx) float64 values."""
    atomic_write_bytes(path, encode_binary(f))


def read_binary(path) -> tuple[GridSpec, np.ndarray]:
    data = open(path, "rb").read()
    if len(data) < _HEADER.size:
        raise FieldError(f"{path}: truncated field header")
    nx, ny, h, ox, oy = _HEADER.unpack_from(data)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != nx * ny:
        raise FieldError(f"{path}: expected {nx * ny} values, found {body.size}")
    return GridSpec((ox, oy), h, int(nx), int(ny)), body.reshape(ny, nx).copy()


def field_from_dense(raster: Raster, grid: GridSpec, dense: np.ndarray) -> ScalarField:
    if grid != raster.grid:
        raise FieldError("stored grid does not match the raster grid")
    return ScalarField(raster, dense.ravel()[raster.index])


def write_csv(f: ScalarField, path) -> None:
    r = f.raster
    lines = ["x,y,value,mask"]
    lines += [f"{x:.17g},{y:.17g},{v:.17g},{int(k)}" for (x, y), v, k in zip(r.xy, f.values, r.kind)]
    atomic_write_text(path, "\n".join(lines) + "\n")
