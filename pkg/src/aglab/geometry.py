"""Convex planar domains with distance, projection, normal and curvature queries.

Every domain is represented as ``core + B_r``: a convex *core* set (a point,
a segment, a convex polygon or an ellipse) enlarged by a closed disk of
radius ``offset``.  This covers the four families used throughout the
package:

* disk      = point core, offset = radius
* ellipse   = ellipse core, offset = 0 (enlarged ellipses keep the core)
* stadium   = segment core, offset = radius
* rounded polygon = polygon core, offset = rounding radius

The offset representation makes Minkowski enlargement exact and gives the
signed distance in closed form from the core distance: for a point outside
the core, ``sd = offset - dist(x, core)``; inside the core,
``sd = offset + dist(x, boundary of core)``.

Signed distances are positive inside the domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy import optimize, special

TOL_GEOM = 1e-9
TOL_CENTER = 1e-5
TOL_AREA_REL = 1e-6


class GeometryError(ValueError):
    """Raised for undefined geometric queries (corners, bad shapes)."""


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 2:
        raise ValueError(f"expected points with 2 coordinates, got shape {arr.shape}")
    return arr, single


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# cores
# ---------------------------------------------------------------------------


class _PointCore:
    kind = "point"

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float).reshape(2)

    def signed(self, x: np.ndarray):
        diff = x - self.center
        return -np.hypot(diff[:, 0], diff[:, 1]), np.broadcast_to(self.center, x.shape).copy()

    def outward_normal(self, q, x):
        # only reached for points exactly on the core; any direction is valid
        out = np.zeros_like(x)
        out[:, 0] = 1.0
        return out

    def curvature_at(self, q, direction):
        return np.full(len(q), np.inf)

    def bbox(self):
        return self.center.copy(), self.center.copy()

    area = 0.0
    perimeter = 0.0

    @property
    def centroid(self):
        return self.center.copy()

    def diameter(self):
        return 0.0

    def transformed(self, scale, shift):
        return _PointCore(self.center * scale + shift)

    def pieces(self, r):
        return [("arc", self.center, r, 0.0, 2 * math.pi)]

    def to_dict(self):
        return {"center": self.center.tolist()}


class _PolygonCore:
    """Convex polygon, or a segment when given exactly two vertices."""

    kind = "polygon"

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise GeometryError("polygon needs at least two 2-D vertices")
        if len(v) > 2:
            area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
            if area2 < 0:
                v = v[::-1].copy()
            e = np.roll(v, -1, axis=0) - v
            cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
            if np.any(cross <= 1e-14 * np.max(np.abs(v)) ** 2):
                raise GeometryError("vertices are not in strictly convex position")
        elif np.allclose(v[0], v[1]):
            raise GeometryError("segment endpoints coincide")
        self.vertices = v
        self.starts = v
        self.edges = np.roll(v, -1, axis=0) - v
        self.lengths = np.hypot(self.edges[:, 0], self.edges[:, 1])
        self.normals = np.stack([self.edges[:, 1], -self.edges[:, 0]], axis=1) / self.lengths[:, None]

    @property
    def is_segment(self) -> bool:
        return len(self.vertices) == 2

    def signed(self, x: np.ndarray):
        a = self.starts[None, :, :]
        rel = x[:, None, :] - a
        t = np.clip(np.einsum("mkj,kj->mk", rel, self.edges) / self.lengths**2, 0.0, 1.0)
        foot = a + t[..., None] * self.edges[None, :, :]
        dseg = np.hypot(x[:, None, 0] - foot[..., 0], x[:, None, 1] - foot[..., 1])
        k_out = np.argmin(dseg, axis=1)
        rows = np.arange(len(x))
        s = -dseg[rows, k_out]
        proj = foot[rows, k_out]
        if not self.is_segment:
            g = -np.einsum("mkj,kj->mk", rel, self.normals)
            inside = np.all(g >= 0.0, axis=1)
            if np.any(inside):
                k_in = np.argmin(g[inside], axis=1)
                gi = g[inside, k_in]
                s[inside] = gi
                proj[inside] = x[inside] + gi[:, None] * self.normals[k_in]
        return s, proj

    def _edge_of(self, q):
        rel = q[:, None, :] - self.starts[None, :, :]
        t = np.einsum("mkj,kj->mk", rel, self.edges) / self.lengths**2
        off = np.abs(np.einsum("mkj,kj->mk", rel, self.normals))
        score = off + np.maximum(0.0, -t) * self.lengths + np.maximum(0.0, t - 1.0) * self.lengths
        return np.argmin(score, axis=1), t

    def outward_normal(self, q, x):
        k, _ = self._edge_of(q)
        n = self.normals[k].copy()
        if self.is_segment:
            flip = np.einsum("ij,ij->i", x - q, n) < 0
            n[flip] *= -1
        return n

    def vertex_index(self, q, tol=1e-10):
        d = np.hypot(q[:, None, 0] - self.vertices[None, :, 0], q[:, None, 1] - self.vertices[None, :, 1])
        k = np.argmin(d, axis=1)
        hit = d[np.arange(len(q)), k] <= tol * max(1.0, float(np.max(self.lengths)))
        return np.where(hit, k, -1)

    def curvature_at(self, q, direction):
        """Curvature of the core boundary seen along ``direction`` (inf at a corner)."""
        kv = self.vertex_index(q)
        kappa = np.zeros(len(q))
        for i in np.nonzero(kv >= 0)[0]:
            k = kv[i]
            n_prev = self.normals[k - 1]
            n_next = self.normals[k]
            d = direction[i]
            # strictly inside the normal cone of the vertex => on the rounding arc
            if min(np.linalg.norm(d - n_prev), np.linalg.norm(d - n_next)) > 1e-7:
                kappa[i] = np.inf
        return kappa

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def area(self):
        if self.is_segment:
            return 0.0
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    @property
    def perimeter(self):
        return float(np.sum(self.lengths))

    @property
    def centroid(self):
        v = self.vertices
        if self.is_segment:
            return v.mean(axis=0)
        w = v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]
        cx = np.sum((v[:, 0] + np.roll(v[:, 0], -1)) * w)
        cy = np.sum((v[:, 1] + np.roll(v[:, 1], -1)) * w)
        return np.array([cx, cy]) / (3.0 * np.sum(w))

    def diameter(self):
        v = self.vertices
        d = np.hypot(v[:, None, 0] - v[None, :, 0], v[:, None, 1] - v[None, :, 1])
        return float(d.max())

    def transformed(self, scale, shift):
        return _PolygonCore(self.vertices * scale + shift)

    def pieces(self, r):
        out = []
        n = len(self.vertices)
        for k in range(n):
            if r > 0:
                a0 = math.atan2(self.normals[k - 1, 1], self.normals[k - 1, 0])
                a1 = math.atan2(self.normals[k, 1], self.normals[k, 0])
                sweep = (a1 - a0) % (2 * math.pi)
                if self.is_segment:
                    sweep = math.pi
                out.append(("arc", self.vertices[k], r, a0, sweep))
            p0 = self.vertices[k] + r * self.normals[k]
            out.append(("line", p0, self.edges[k], self.normals[k]))
        return out

    def to_dict(self):
        return {"vertices": self.vertices.tolist()}


class _EllipseCore:
    kind = "ellipse"

    def __init__(self, a, b, center=(0.0, 0.0), rotation=0.0):
        a, b = float(a), float(b)
        if not (a > 0 and b > 0):
            raise GeometryError("ellipse semi-axes must be positive")
        if b > a:
            a, b = b, a
            rotation = rotation + math.pi / 2
        self.a, self.b = a, b
        self.center = np.asarray(center, dtype=float).reshape(2)
        self.rotation = float(rotation)
        self._R = _rot(self.rotation)

    def _to_local(self, x):
        return (x - self.center) @ self._R

    def _to_world(self, y):
        return y @ self._R.T + self.center

    def _nearest_local(self, y):
        """Nearest point on the ellipse boundary for local coordinates ``y``.

        Works in the first quadrant by symmetry and solves the stationarity
        equation in the Lagrange-multiplier variable ``t`` with a safeguarded
        Newton iteration on a bracket where the function is monotone.
        """
        e0, e1 = self.a, self.b
        sgn = np.where(y < 0, -1.0, 1.0)
        y0 = np.abs(y[:, 0])
        y1 = np.abs(y[:, 1])
        x0 = np.empty_like(y0)
        x1 = np.empty_like(y1)

        # below this the axis formula is exact to O(y1), and Newton's derivative would overflow
        gen = y1 > 1e-100 * np.maximum(1.0, y0)
        if np.any(gen):
            p0 = e0 * y0[gen]
            p1 = e1 * y1[gen]
            norm = np.hypot(p0, p1)
            # work in u = t + b^2 to avoid cancellation near the major axis.
            # The root lies in [norm - a^2 + b^2, norm] and above p1; the
            # function is convex decreasing, so Newton from the left end
            # increases monotonically to the root
            c = e0 * e0 - e1 * e1
            lo = np.maximum(p1, norm - c)
            hi = norm.copy()
            u = lo.copy()
            act = np.arange(len(u))
            for _ in range(100):
                ua, la, ha = u[act], lo[act], hi[act]
                r0 = p0[act] / (ua + c)
                r1 = p1[act] / ua
                f = r0 * r0 + r1 * r1 - 1.0
                fp = -2.0 * (r0 * r0 / (ua + c) + r1 * r1 / ua)
                pos = f > 0
                la = np.where(pos, ua, la)
                ha = np.where(pos, ha, ua)
                with np.errstate(divide="ignore", invalid="ignore"):
                    un = ua - f / fp
                bad = ~((un >= la) & (un <= ha))
                un = np.where(bad, 0.5 * (la + ha), un)
                # relative tolerance: near the major axis the root is as small as y1
                tol = 4e-16 * np.maximum(un, la)
                done = (np.abs(un - ua) <= tol) | (ha - la <= tol) | (f == 0)
                u[act], lo[act], hi[act] = un, la, ha
                act = act[~done]
                if len(act) == 0:
                    break
            x0[gen] = e0 * e0 * y0[gen] / (u + c)
            x1[gen] = np.minimum(e1 * e1 * y1[gen] / u, e1)

        axis = ~gen
        if np.any(axis):
            ya = y0[axis]
            thresh = (e0 * e0 - e1 * e1) / e0
            inner = ya < thresh
            with np.errstate(divide="ignore", invalid="ignore"):  # circle: inner is empty
                xa = np.where(inner, e0 * e0 * ya / (e0 * e0 - e1 * e1), e0)
            xb = np.where(inner, e1 * np.sqrt(np.clip(1.0 - (xa / e0) ** 2, 0.0, None)), 0.0)
            x0[axis] = xa
            x1[axis] = xb
        return np.stack([x0, x1], axis=1) * sgn

    def signed(self, x):
        y = self._to_local(x)
        q = self._nearest_local(y)
        d = np.hypot(y[:, 0] - q[:, 0], y[:, 1] - q[:, 1])
        inside = (y[:, 0] / self.a) ** 2 + (y[:, 1] / self.b) ** 2 <= 1.0
        return np.where(inside, d, -d), self._to_world(q)

    def outward_normal(self, q, x=None):
        y = self._to_local(q)
        n = np.stack([y[:, 0] / self.a**2, y[:, 1] / self.b**2], axis=1)
        n /= np.hypot(n[:, 0], n[:, 1])[:, None]
        return n @ self._R.T

    def local_curvature(self, y):
        a, b = self.a, self.b
        # curvature ab / (a^2 sin^2 t + b^2 cos^2 t)^{3/2} with cos t = x/a, sin t = y/b
        c = y[:, 0] / a
        s = y[:, 1] / b
        return a * b / (a * a * s * s + b * b * c * c) ** 1.5

    def curvature_at(self, q, direction=None):
        return self.local_curvature(self._to_local(q))

    def stationarity_residual(self, x):
        """Residual of the foot-point condition (x - q) parallel to the normal."""
        y = self._to_local(np.atleast_2d(x))
        q = self._nearest_local(y)
        n = np.stack([q[:, 0] / self.a**2, q[:, 1] / self.b**2], axis=1)
        n /= np.hypot(n[:, 0], n[:, 1])[:, None]
        diff = y - q
        return np.abs(diff[:, 0] * n[:, 1] - diff[:, 1] * n[:, 0])

    def bbox(self):
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        hx = math.sqrt((self.a * c) ** 2 + (self.b * s) ** 2)
        hy = math.sqrt((self.a * s) ** 2 + (self.b * c) ** 2)
        return self.center - [hx, hy], self.center + [hx, hy]

    @property
    def area(self):
        return math.pi * self.a * self.b

    @property
    def perimeter(self):
        m = 1.0 - (self.b / self.a) ** 2
        return 4.0 * self.a * float(special.ellipe(m))

    @property
    def centroid(self):
        return self.center.copy()

    def diameter(self):
        return 2.0 * self.a

    def transformed(self, scale, shift):
        return _EllipseCore(self.a * scale, self.b * scale, self.center * scale + shift, self.rotation)

    def pieces(self, r):
        return [("ellipse", self, r)]

    def to_dict(self):
        return {"a": self.a, "b": self.b, "center": self.center.tolist(), "rotation": self.rotation}


# ---------------------------------------------------------------------------
# boundary samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundarySample:
    """Arrays describing ``n`` points on the boundary, uniform in arclength."""

    point: np.ndarray
    inward_normal: np.ndarray
    curvature: np.ndarray
    arclength: np.ndarray
    ds: float

    def __len__(self) -> int:
        return len(self.point)


def _ellipse_arclength_table(core: _EllipseCore, r: float, n: int = 1 << 15):
    t = np.linspace(0.0, 2 * math.pi, n + 1)
    a, b = core.a, core.b
    speed = np.hypot(a * np.sin(t), b * np.cos(t))
    kappa = a * b / speed**3
    g = speed * (1.0 + r * kappa)
    # cumulative trapezoid in the ellipse parameter
    s = np.zeros_like(t)
    dt = t[1] - t[0]
    s[1:] = np.cumsum(0.5 * dt * (g[1:] + g[:-1]))
    return t, s


def _ellipse_piece_eval(core: _EllipseCore, r: float, t: np.ndarray):
    a, b = core.a, core.b
    y = np.stack([a * np.cos(t), b * np.sin(t)], axis=1)
    n_loc = np.stack([np.cos(t) / a, np.sin(t) / b], axis=1)
    n_loc /= np.hypot(n_loc[:, 0], n_loc[:, 1])[:, None]
    kappa = core.local_curvature(y)
    pts = core._to_world(y + r * n_loc)
    n_out = n_loc @ core._R.T
    return pts, -n_out, kappa / (1.0 + r * kappa)


# ---------------------------------------------------------------------------
# the domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    """A convex planar region ``core + B_offset``.

    Use the constructors :func:`disk`, :func:`ellipse`, :func:`rounded_polygon`
    and :func:`stadium` rather than instantiating directly.
    """

    shape: str
    core: Any
    offset: float = 0.0
    meta: dict = field(default_factory=dict)

    # -- basic measures ----------------------------------------------------
    @cached_property
    def area(self) -> float:
        r = self.offset
        return self.core.area + r * self.core.perimeter + math.pi * r * r

    @cached_property
    def perimeter(self) -> float:
        return self.core.perimeter + 2 * math.pi * self.offset

    @cached_property
    def diameter(self) -> float:
        return self.core.diameter() + 2 * self.offset

    @cached_property
    def centroid(self) -> np.ndarray:
        r = self.offset
        core = self.core
        if r == 0 or isinstance(core, (_PointCore, _EllipseCore)):
            return core.centroid
        # polygon (or segment) + disk: polygon, edge rectangles and vertex sectors
        A = core.area
        M = core.centroid * A
        for k in range(len(core.vertices)):
            L = core.lengths[k]
            mid = core.vertices[k] + 0.5 * core.edges[k]
            A_rect = L * r
            M = M + A_rect * (mid + 0.5 * r * core.normals[k])
            A += A_rect
        for kind, c, rad, a0, sweep in (p for p in core.pieces(r) if p[0] == "arc"):
            A_sec = 0.5 * rad * rad * sweep
            amid = a0 + 0.5 * sweep
            dist = 4.0 * rad * math.sin(0.5 * sweep) / (3.0 * sweep)
            M = M + A_sec * (np.asarray(c) + dist * np.array([math.cos(amid), math.sin(amid)]))
            A += A_sec
        return M / A

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.core.bbox()
        return lo - self.offset, hi + self.offset

    @cached_property
    def inradius_lower(self) -> float:
        return float(self.signed_distance(self.centroid))

    # -- point queries -----------------------------------------------------
    def _core_query(self, x: np.ndarray, chunk: int = 1 << 16):
        if len(x) <= chunk:
            return self.core.signed(x)
        s = np.empty(len(x))
        p = np.empty_like(x)
        for i in range(0, len(x), chunk):
            s[i : i + chunk], p[i : i + chunk] = self.core.signed(x[i : i + chunk])
        return s, p

    def signed_distance(self, x):
        """Signed distance to the boundary, positive inside. Accepts (2,) or (n, 2)."""
        pts, single = _as_points(x)
        s, _ = self._core_query(pts)
        d = s + self.offset
        return float(d[0]) if single else d

    def distance_and_projection(self, x):
        pts, single = _as_points(x)
        s, q = self._core_query(pts)
        d = s + self.offset
        b = q.copy()
        r = self.offset
        if r > 0:
            out = s < 0
            diff = pts - q
            nrm = np.hypot(diff[:, 0], diff[:, 1])
            # below rounding level the direction pts - q is noise; use the core normal
            ok = out & (nrm > 1e-14 * np.maximum(1.0, np.abs(pts).max(axis=1)))
            b[ok] = q[ok] + r * diff[ok] / nrm[ok, None]
            onc = ~ok
            if np.any(onc):
                b[onc] = q[onc] + r * self.core.outward_normal(q[onc], pts[onc])
        if single:
            return float(d[0]), b[0]
        return d, b

    def metric_projection(self, x):
        """Nearest boundary point of ``x``."""
        return self.distance_and_projection(x)[1]

    def distance_gradient(self, x):
        """Gradient of the signed distance (the inward normal at the foot point)."""
        pts, single = _as_points(x)
        d, b = self.distance_and_projection(pts)
        g = np.empty_like(pts)
        nz = np.abs(d) > 1e-14
        g[nz] = (pts[nz] - b[nz]) / d[nz, None]
        if np.any(~nz):
            g[~nz] = self.inward_normal(b[~nz], check=False)
        return g[0] if single else g

    def _check_on_boundary(self, p):
        d = self.signed_distance(p)
        bad = np.abs(d) > 1e3 * TOL_GEOM * max(1.0, self.diameter)
        if np.any(bad):
            raise GeometryError(f"point {p[np.argmax(bad)]} is not on the boundary (distance {d[np.argmax(bad)]:.3e})")

    def inward_normal(self, p, check: bool = True):
        """Unit inward normal at boundary points ``p``."""
        pts, single = _as_points(p)
        if check:
            self._check_on_boundary(pts)
        r = self.offset
        if r > 0:
            s, q = self._core_query(pts)
            diff = q - pts
            nrm = np.hypot(diff[:, 0], diff[:, 1])
            n = diff / nrm[:, None]
        elif isinstance(self.core, _EllipseCore):
            n = -self.core.outward_normal(pts)
        elif isinstance(self.core, _PolygonCore):
            if np.any(self.core.vertex_index(pts) >= 0):
                raise GeometryError("normal undefined at corner")
            n = -self.core.outward_normal(pts, pts)
        else:
            raise GeometryError("degenerate domain has no normal")
        return n[0] if single else n

    def curvature(self, p, check: bool = True):
        """Nonnegative boundary curvature at boundary points ``p``."""
        pts, single = _as_points(p)
        if check:
            self._check_on_boundary(pts)
        r = self.offset
        if r > 0:
            s, q = self._core_query(pts)
            diff = pts - q
            direction = diff / np.hypot(diff[:, 0], diff[:, 1])[:, None]
            kc = self.core.curvature_at(q, direction)
            with np.errstate(divide="ignore", invalid="ignore"):
                k = np.where(np.isinf(kc), 1.0 / r, kc / (1.0 + r * kc))
        elif isinstance(self.core, _EllipseCore):
            k = self.core.curvature_at(pts)
        elif isinstance(self.core, _PolygonCore):
            if np.any(self.core.vertex_index(pts) >= 0):
                raise GeometryError("curvature undefined at corner")
            k = np.zeros(len(pts))
        else:
            raise GeometryError("degenerate domain has no curvature")
        return float(k[0]) if single else k

    @cached_property
    def max_curvature(self) -> float:
        """Supremum of the boundary curvature (inf for sharp corners)."""
        if isinstance(self.core, _PointCore):
            return 1.0 / self.offset
        if isinstance(self.core, _EllipseCore):
            k = self.core.a / self.core.b**2
            return k / (1.0 + self.offset * k)
        return 1.0 / self.offset if self.offset > 0 else math.inf

    # -- boundary parametrisation --------------------------------------------
    def _pieces(self):
        return self.core.pieces(self.offset)

    def _piece_lengths(self):
        out = []
        for p in self._pieces():
            if p[0] == "arc":
                out.append(p[2] * p[4])
            elif p[0] == "line":
                out.append(float(np.hypot(*p[2])))
            else:
                out.append(self.perimeter)
        return np.array(out)

    def boundary_at(self, s) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Points, inward normals and curvature at arclength positions ``s``.

        Arclength starts at the first piece of the boundary and runs
        counter-clockwise; ``s`` is taken modulo the perimeter.
        """
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.perimeter)
        pts = np.empty((len(s), 2))
        nrm = np.empty((len(s), 2))
        kap = np.empty(len(s))
        pieces = self._pieces()
        lengths = self._piece_lengths()
        bounds = np.concatenate([[0.0], np.cumsum(lengths)])
        idx = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(pieces) - 1)
        for k, piece in enumerate(pieces):
            sel = idx == k
            if not np.any(sel):
                continue
            loc = s[sel] - bounds[k]
            if piece[0] == "arc":
                _, c, rad, a0, sweep = piece
                ang = a0 + loc / rad
                out = np.stack([np.cos(ang), np.sin(ang)], axis=1)
                pts[sel] = np.asarray(c) + rad * out
                nrm[sel] = -out
                kap[sel] = 1.0 / rad
            elif piece[0] == "line":
                _, p0, e, n = piece
                L = np.hypot(*e)
                pts[sel] = p0 + (loc / L)[:, None] * e
                nrm[sel] = -n
                kap[sel] = 0.0
            else:
                _, core, r = piece
                tt, ss = self._ellipse_table
                t = np.interp(loc * ss[-1] / self.perimeter, ss, tt)
                pts[sel], nrm[sel], kap[sel] = _ellipse_piece_eval(core, r, t)
        return pts, nrm, kap

    @cached_property
    def _ellipse_table(self):
        return _ellipse_arclength_table(self.core, self.offset)

    def boundary_samples(self, n: int) -> BoundarySample:
        """``n`` boundary samples uniformly spaced in arclength."""
        if n < 3:
            raise ValueError("need at least 3 boundary samples")
        ds = self.perimeter / n
        s = (np.arange(n) + 0.5) * ds
        p, nrm, k = self.boundary_at(s)
        return BoundarySample(point=p, inward_normal=nrm, curvature=k, arclength=s, ds=ds)

    def boundary_breakpoints(self) -> np.ndarray:
        """Boundary points where the curvature jumps (piece junctions)."""
        pieces = self._pieces()
        if len(pieces) <= 1:
            return np.zeros((0, 2))
        bounds = np.concatenate([[0.0], np.cumsum(self._piece_lengths())])[:-1]
        return self.boundary_at(bounds)[0]

    # -- transforms --------------------------------------------------------
    def enlarge(self, r: float) -> "ConvexDomain":
        """Minkowski enlargement by a disk of radius ``r``."""
        if r < 0:
            raise ValueError("enlargement radius must be nonnegative")
        return ConvexDomain(self.shape, self.core, self.offset + float(r), dict(self.meta))

    def transformed(self, scale: float, shift) -> "ConvexDomain":
        """Image under ``x -> scale * x + shift``."""
        if scale <= 0:
            raise ValueError("scale must be positive")
        shift = np.asarray(shift, dtype=float)
        return ConvexDomain(self.shape, self.core.transformed(scale, shift), self.offset * scale, dict(self.meta))

    def translated(self, shift) -> "ConvexDomain":
        return self.transformed(1.0, shift)

    def normalize(self) -> "ConvexDomain":
        """Similar copy with centroid at the origin and diameter 2."""
        scale = 2.0 / self.diameter
        return self.transformed(scale, -scale * self.centroid)

    # -- serialisation -----------------------------------------------------
    def to_dict(self) -> dict:
        d: dict[str, Any] = {"shape": self.shape}
        core = self.core
        if self.shape == "disk":
            d.update(center=core.center.tolist(), radius=self.offset)
            return d
        if self.shape == "stadium":
            d.update(p=core.vertices[0].tolist(), q=core.vertices[1].tolist(), radius=self.offset)
            return d
        if self.shape == "rounded-polygon":
            d.update(vertices=core.vertices.tolist(), rho=self.offset)
            return d
        d.update(core.to_dict())
        if self.offset:
            d["offset"] = self.offset
        return d

    def __repr__(self) -> str:
        return f"ConvexDomain({json.dumps(self.to_dict())})"


def disk(center=(0.0, 0.0), radius: float = 1.0) -> ConvexDomain:
    if radius <= 0:
        raise GeometryError("disk radius must be positive")
    return ConvexDomain("disk", _PointCore(center), float(radius))


def ellipse(a: float, b: float, center=(0.0, 0.0), rotation: float = 0.0, offset: float = 0.0) -> ConvexDomain:
    return ConvexDomain("ellipse", _EllipseCore(a, b, center, rotation), float(offset))


def rounded_polygon(vertices, rho: float = 0.0) -> ConvexDomain:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        raise GeometryError("rounded polygon needs at least three vertices")
    if rho < 0:
        raise GeometryError("rounding radius must be nonnegative")
    return ConvexDomain("rounded-polygon", _PolygonCore(v), float(rho))


def stadium(p, q, radius: float) -> ConvexDomain:
    if radius <= 0:
        raise GeometryError("stadium radius must be positive")
    return ConvexDomain("stadium", _PolygonCore([p, q]), float(radius))


def from_dict(desc: dict) -> ConvexDomain:
    """Build a domain from its JSON description, e.g. ``{"shape": "ellipse", "a": 1.05, "b": 0.9524}``."""
    shape = desc.get("shape")
    try:
        if shape == "disk":
            return disk(desc.get("center", (0.0, 0.0)), desc["radius"])
        if shape == "ellipse":
            return ellipse(desc["a"], desc["b"], desc.get("center", (0.0, 0.0)), desc.get("rotation", 0.0), desc.get("offset", 0.0))
        if shape == "rounded-polygon":
            return rounded_polygon(desc["vertices"], desc.get("rho", 0.0))
        if shape == "stadium":
            return stadium(desc["p"], desc["q"], desc["radius"])
    except KeyError as exc:
        raise GeometryError(f"domain description for {shape!r} is missing field {exc}") from None
    raise GeometryError(f"unknown shape {shape!r}")


def load_domain(path) -> ConvexDomain:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"domain file not found: {path}")
    return from_dict(json.loads(path.read_text()))


# ---------------------------------------------------------------------------
# comparison with unit disks
# ---------------------------------------------------------------------------


def _piece_param(piece):
    """Parameter interval and evaluator ``t -> (point, derivative)`` of a boundary piece."""
    if piece[0] == "arc":
        _, c, rad, a0, sweep = piece
        c = np.asarray(c, dtype=float)

        def ev(t):
            u = np.stack([np.cos(t), np.sin(t)], axis=1)
            return c + rad * u, rad * np.stack([-u[:, 1], u[:, 0]], axis=1)

        return (a0, a0 + sweep), ev
    if piece[0] == "line":
        _, p0, e, _n = piece

        def ev(t):
            return p0 + t[:, None] * e, np.broadcast_to(e, (len(t), 2))

        return (0.0, 1.0), ev
    _, core, r = piece

    def ev(t):
        a, b = core.a, core.b
        y = np.stack([a * np.cos(t), b * np.sin(t)], axis=1)
        dy = np.stack([-a * np.sin(t), b * np.cos(t)], axis=1)
        speed = np.hypot(dy[:, 0], dy[:, 1])
        n_loc = np.stack([dy[:, 1], -dy[:, 0]], axis=1) / speed[:, None]
        kappa = a * b / speed**3
        pts = core._to_world(y + r * n_loc)
        dpts = (dy * (1.0 + r * kappa)[:, None]) @ core._R.T
        return pts, dpts

    return (0.0, 2 * math.pi), ev


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _green(ev, a: float, b: float, panels: int, origin: np.ndarray) -> float:
    """Signed area contribution 0.5 * int (x dy - y dx) of a parametrised arc, relative to ``origin``."""
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    p, dp = ev(t)
    p = p - origin
    return 0.5 * float(np.sum(w * (p[:, 0] * dp[:, 1] - p[:, 1] * dp[:, 0])))


def _intersection_area(domain: ConvexDomain, center: np.ndarray, samples: int = 256) -> float:
    """Area of ``domain ∩ B_1(center)`` by Green's theorem on the intersection boundary.

    The boundary of the intersection consists of the parts of the domain
    boundary inside the unit circle and the arcs of the circle inside the
    domain.  Coordinates are taken relative to the circle center so that
    near-tangential slivers contribute only their own tiny area.  Crossing parameters are bracketed on a sampling of each
    boundary piece and refined with Brent's method; each sub-arc is then
    integrated with composite Gauss-Legendre.
    """
    center = np.asarray(center, dtype=float)
    tol_f = 1e-13
    total = 0.0
    crossings = []
    any_in = False
    any_out = False
    for piece in domain._pieces():
        (a, b), ev = _piece_param(piece)
        if b <= a:
            continue

        def f(t, ev=ev):
            p, _ = ev(np.atleast_1d(t))
            return np.hypot(p[:, 0] - center[0], p[:, 1] - center[1]) ** 2 - 1.0

        ts = np.linspace(a, b, samples + 1)
        fs = f(ts)
        sign = np.where(fs > tol_f, 1, -1)  # points on the circle count as inside
        roots = [a]
        for k in np.nonzero(sign[:-1] != sign[1:])[0]:
            lo, hi = ts[k], ts[k + 1]
            roots.append(optimize.brentq(lambda t: f(t)[0] - tol_f, lo, hi, xtol=1e-15, rtol=1e-15))
        roots.append(b)
        for t0, t1 in zip(roots[:-1], roots[1:]):
            if t1 <= t0:
                continue
            if f(0.5 * (t0 + t1))[0] <= tol_f:
                any_in = True
                panels = max(1, int(math.ceil(16 * (t1 - t0) / (b - a))))
                total += _green(ev, t0, t1, panels, center)
            else:
                any_out = True
        for t in roots[1:-1]:
            p, _ = ev(np.array([t]))
            crossings.append(p[0])

    if not crossings:
        if any_in and not any_out:
            return domain.area
        if domain.signed_distance(center) >= 1.0 - 1e-12:
            return math.pi
        return 0.0
    ang = np.sort(np.mod([math.atan2(p[1] - center[1], p[0] - center[0]) for p in crossings], 2 * math.pi))
    ang = np.append(ang, ang[0] + 2 * math.pi)
    for p0, p1 in zip(ang[:-1], ang[1:]):
        if p1 - p0 <= 1e-14:
            continue
        # the arc lies on one side apart from tangential touches; decide by the
        # sample farthest from the boundary so a touch point cannot mislead
        m = p0 + (p1 - p0) * np.array([0.2, 0.35, 0.5, 0.65, 0.8])
        sd = domain.signed_distance(center + np.column_stack([np.cos(m), np.sin(m)]))
        if sd[np.argmax(np.abs(sd))] > -TOL_GEOM:
            total += 0.5 * (p1 - p0)
    return total


def disk_symmetric_difference(domain: ConvexDomain, center=(0.0, 0.0)) -> float:
    """``|Ω △ B_1(center)|`` from the exact boundary parametrisation."""
    inter = _intersection_area(domain, np.asarray(center, dtype=float))
    return max(0.0, domain.area + math.pi - 2.0 * inter)


def best_fit_ball(domain: ConvexDomain, tol_center: float = TOL_CENTER):
    """Center approximately minimising ``|Ω △ B_1(y)|`` and the attained value.

    Nelder-Mead started from the centroid; never returns a worse value than
    the centroid itself.
    """
    c0 = np.asarray(domain.centroid, dtype=float)
    f0 = disk_symmetric_difference(domain, c0)
    res = optimize.minimize(
        lambda y: disk_symmetric_difference(domain, y),
        c0,
        method="Nelder-Mead",
        options={
            "xatol": tol_center,
            "fatol": 1e-3 * TOL_AREA_REL * domain.area,
            "initial_simplex": np.array([c0, c0 + [0.05, 0.0], c0 + [0.0, 0.05]]),
            "maxiter": 400,
        },
    )
    if res.fun < f0:
        return np.asarray(res.x, dtype=float), float(res.fun)
    return c0, f0


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------


def signed_distance(domain: ConvexDomain, x):
    return domain.signed_distance(x)


def metric_projection(domain: ConvexDomain, x):
    return domain.metric_projection(x)


def inward_normal(domain: ConvexDomain, p):
    return domain.inward_normal(p)


def curvature(domain: ConvexDomain, p):
    return domain.curvature(p)


def enlarge(domain: ConvexDomain, r: float) -> ConvexDomain:
    return domain.enlarge(r)


def normalize(domain: ConvexDomain) -> ConvexDomain:
    return domain.normalize()
