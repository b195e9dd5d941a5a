"""Discrete minimization of the Aviles-Giga energy with penalized boundary conditions.

Objective on node values ``u``::

    E(u) = sum_k W_k / 2 * (eps^-1 (1 - |Du|^2)^2 + eps |D^2 u|^2)
           + lam * sum_s ds * ((Tu)_s^2 + ((N u)_s - 1)^2)

where ``T`` interpolates to boundary samples and ``N`` takes the inward
normal derivative there.  All operators are sparse, so the gradient is
assembled exactly with their transposes.

The optimizer is Polak-Ribiere nonlinear conjugate gradient with Armijo
backtracking, restarted every ``restart`` iterations or when the search
direction stops being a descent direction.  An optional preconditioner
inverts a constant-coefficient model of the Hessian by FFT on the grid box.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from . import fields as F
from . import geometry as G
from .energy import EnergyReport, aviles_giga_energy

log = logging.getLogger(__name__)

SEEDS = ("competitor", "cone", "zero")


class MinimizeError(RuntimeError):
    """Numerical failure (non-finite energy or gradient); ``log`` holds the iterations so far."""

    def __init__(self, message: str, log: "IterationLog | None" = None):
        super().__init__(message)
        self.log = log if log is not None else IterationLog()


@dataclass(frozen=True)
class MinimizeOptions:
    max_iters: int = 500
    grad_tol: float = 1e-6
    boundary_penalty_weight: float = 1e3
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 50
    restart: int = 50
    seed_from: str = "competitor"
    n_boundary_samples: int | None = None
    precondition: bool = True
    beta: float | None = None  # competitor seed; defaults to 16 eps^2
    q: int = 32

    def __post_init__(self):
        if not self.boundary_penalty_weight > 0:
            raise ValueError("boundary penalty weight must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.seed_from not in SEEDS:
            raise ValueError(f"seed_from must be one of {SEEDS}")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


class DiscreteEnergy:
    """Penalized energy and its exact gradient on a fixed raster."""

    def __init__(self, raster: F.Raster, eps: float, penalty: float, n_samples: int | None = None):
        self.raster = raster
        self.eps = float(eps)
        self.penalty = float(penalty)
        if n_samples is None:
            n_samples = max(64, int(math.ceil(raster.domain.perimeter / raster.h)))
        self.samples, self.T, Tx, Ty = raster.trace_operators(n_samples)
        eta = self.samples.inward_normal
        self.N = (Tx.multiply(eta[:, [0]]) + Ty.multiply(eta[:, [1]])).tocsr()
        self.W = raster.quad_weight
        r = raster
        self._ops = (r.Dx, r.Dy, r.Dxx, r.Dxy, r.Dyy)
        self._opsT = tuple(m.T.tocsr() for m in self._ops)
        self.TT = self.T.T.tocsr()
        self.NT = self.N.T.tocsr()

    def parts(self, u: np.ndarray) -> tuple[float, float, float]:
        """(bulk energy, boundary value penalty, boundary normal penalty)."""
        dx, dy, dxx, dxy, dyy = (m @ u for m in self._ops)
        a = 1.0 - dx * dx - dy * dy
        hess2 = dxx * dxx + 2.0 * dxy * dxy + dyy * dyy
        bulk = 0.5 * float(np.sum(self.W * (a * a / self.eps + self.eps * hess2)))
        tu = self.T @ u
        nu = self.N @ u - 1.0
        ds = self.samples.ds
        return bulk, self.penalty * ds * float(np.sum(tu * tu)), self.penalty * ds * float(np.sum(nu * nu))

    def __call__(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        dx, dy, dxx, dxy, dyy = (m @ u for m in self._ops)
        W, eps = self.W, self.eps
        a = 1.0 - dx * dx - dy * dy
        hess2 = dxx * dxx + 2.0 * dxy * dxy + dyy * dyy
        bulk = 0.5 * float(np.sum(W * (a * a / eps + eps * hess2)))
        tu = self.T @ u
        nu = self.N @ u - 1.0
        ds = self.samples.ds
        lam = self.penalty
        e = bulk + lam * ds * float(np.sum(tu * tu) + np.sum(nu * nu))
        Dxt, Dyt, Dxxt, Dxyt, Dyyt = self._opsT
        c = -2.0 * W * a / eps
        g = Dxt @ (c * dx) + Dyt @ (c * dy)
        g += Dxxt @ (W * eps * dxx) + Dxyt @ (2.0 * W * eps * dxy) + Dyyt @ (W * eps * dyy)
        g += (2.0 * lam * ds) * (self.TT @ tu + self.NT @ nu)
        return e, g


class SpectralPreconditioner:
    """Inverse of eps L^2 + (2/eps) L + sigma on the grid box, by FFT (L = -Laplacian symbol)."""

    def __init__(self, raster: F.Raster, eps: float):
        g = raster.grid
        h = g.h
        self.raster = raster
        self.shape = (g.ny, g.nx)
        kx = 2.0 * np.pi * fft.rfftfreq(2 * g.nx)
        ky = 2.0 * np.pi * fft.fftfreq(2 * g.ny)
        lam = (4.0 / h**2) * (np.sin(ky[:, None] / 2) ** 2 + np.sin(kx[None, :] / 2) ** 2)
        sigma = 2.0 / eps
        self.inv = 1.0 / (h * h * (eps * lam * lam + (2.0 / eps) * lam + sigma))

    def __call__(self, r: np.ndarray) -> np.ndarray:
        ny, nx = self.shape
        box = np.zeros((2 * ny, 2 * nx))
        box[self.raster.j, self.raster.i] = r
        z = fft.irfft2(fft.rfft2(box) * self.inv, s=box.shape)
        return z[self.raster.j, self.raster.i]


@dataclass
class IterationLog:
    iters: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)

    def append(self, it, e, gn, step):
        self.iters.append(int(it))
        self.energy.append(float(e))
        self.grad_norm.append(float(gn))
        self.step.append(float(step))

    def to_csv(self) -> str:
        rows = ["iter,energy,grad_norm,step"]
        rows += [f"{i},{e:.17g},{g:.17g},{s:.17g}" for i, e, g, s in zip(self.iters, self.energy, self.grad_norm, self.step)]
        return "\n".join(rows) + "\n"

    def is_monotone(self) -> bool:
        return all(b <= a for a, b in zip(self.energy, self.energy[1:]))


@dataclass
class MinimizeResult:
    field: F.ScalarField
    log: IterationLog
    energy: float
    seed_energy: float
    converged: bool
    stalled: bool
    iterations: int
    seconds: float
    boundary_residual: tuple[float, float] = (math.nan, math.nan)
    report: EnergyReport | None = None


def seed_field(domain: G.ConvexDomain, raster: F.Raster, eps: float, opts: MinimizeOptions) -> np.ndarray:
    from . import competitor as C

    if opts.seed_from == "zero":
        return np.zeros(raster.n)
    if opts.seed_from == "cone":
        return C.mollified_distance(domain, eps, raster, q=opts.q).values
    beta = opts.beta if opts.beta is not None else 16.0 * eps * eps
    params = C.CompetitorParams(eps=eps, beta=beta, q=opts.q)
    return C.build_competitor(domain, params, raster=raster).field.values


def boundary_residual(objective: DiscreteEnergy, u: np.ndarray) -> tuple[float, float]:
    """max |u| and max |grad u . eta - 1| over the boundary samples."""
    return float(np.max(np.abs(objective.T @ u))), float(np.max(np.abs(objective.N @ u - 1.0)))


def run_ncg(objective, u0: np.ndarray, opts: MinimizeOptions, precond=None, callback=None):
    """Preconditioned Polak-Ribiere NCG with Armijo backtracking.

    Returns (u, log, converged, stalled).  Accepted iterates never increase
    the objective.
    """
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise MinimizeError("non-finite values in the initial iterate")
    e, g = objective(u)
    if not np.isfinite(e) or not np.all(np.isfinite(g)):
        raise MinimizeError("non-finite energy or gradient at the initial iterate")
    apply_p = precond if precond is not None else (lambda r: r)
    z = apply_p(g)
    d = -z
    gz = float(g @ z)
    log_ = IterationLog()
    gnorm = float(np.linalg.norm(g))
    log_.append(0, e, gnorm, 0.0)
    alpha = 1.0
    converged = stalled = False
    since_restart = 0
    for it in range(1, opts.max_iters + 1):
        if gnorm <= opts.grad_tol:
            converged = True
            break
        slope = float(g @ d)
        if slope >= 0:
            d = -z
            slope = -gz
            since_restart = 0
        step = alpha
        accepted = False
        for _ in range(opts.max_backtracks):
            u_new = u + step * d
            e_new, g_new = objective(u_new)
            if np.isfinite(e_new) and e_new <= e + opts.armijo_c1 * step * slope and e_new <= e:
                accepted = True
                break
            step *= opts.backtrack_factor
        if not accepted or e_new == e:
            # no representable decrease left: further steps only burn evaluations
            stalled = True
            log.info("line search stalled at iteration %d", it)
            break
        if not np.all(np.isfinite(g_new)):
            raise MinimizeError(f"non-finite gradient at iteration {it}", log_)
        z_new = apply_p(g_new)
        gz_new = float(g_new @ z_new)
        since_restart += 1
        if since_restart >= opts.restart:
            beta_pr = 0.0
            since_restart = 0
        else:
            beta_pr = max(0.0, (gz_new - float(g_new @ z)) / gz)
        d = -z_new + beta_pr * d
        # next trial step: quadratic model scaling of the accepted one
        new_slope = float(g_new @ d)
        alpha = min(1e6, step * slope / new_slope) if new_slope < 0 else step
        alpha = max(alpha, 1e-12)
        u, e, g, z, gz = u_new, e_new, g_new, z_new, gz_new
        gnorm = float(np.linalg.norm(g))
        log_.append(it, e, gnorm, step)
        if callback is not None:
            callback(it, u, e)
    else:
        converged = gnorm <= opts.grad_tol
    return u, log_, converged, stalled


def minimize(domain: G.ConvexDomain, eps: float, opts: MinimizeOptions | None = None, h: float | None = None,
             raster: F.Raster | None = None, seed: np.ndarray | None = None, allow_coarse: bool = False) -> MinimizeResult:
    """Minimize the penalized discrete energy on ``domain``."""
    opts = opts or MinimizeOptions()
    if raster is None:
        raster = F.rasterize(domain, eps / 4.0 if h is None else h)
    if raster.h > eps / 4.0 * (1 + 1e-12) and not allow_coarse:
        raise ValueError(f"grid spacing {raster.h} exceeds eps/4 = {eps / 4.0}")
    t0 = time.perf_counter()
    u0 = seed_field(domain, raster, eps, opts) if seed is None else np.asarray(seed, dtype=float)
    if not np.all(np.isfinite(u0)):
        k = int(np.argmax(~np.isfinite(u0)))
        raise MinimizeError(f"seed field is not finite at node {raster.xy[k].tolist()}")
    objective = DiscreteEnergy(raster, eps, opts.boundary_penalty_weight, opts.n_boundary_samples)
    precond = SpectralPreconditioner(raster, eps) if opts.precondition else None
    e0, _ = objective(u0)
    u, log_, converged, stalled = run_ncg(objective, u0, opts, precond)
    uf = F.ScalarField(raster, u)
    return MinimizeResult(
        field=uf,
        log=log_,
        energy=log_.energy[-1],
        seed_energy=e0,
        converged=converged,
        stalled=stalled,
        iterations=log_.iters[-1],
        seconds=time.perf_counter() - t0,
        boundary_residual=boundary_residual(objective, u),
        report=aviles_giga_energy(uf, eps),
    )


def check_gradient(objective, u: np.ndarray, n_dirs: int = 20, rng=None, step: float = 1e-6) -> float:
    """Largest relative gap between directional derivatives and central differences."""
    rng = np.random.default_rng(0) if rng is None else rng
    _, g = objective(u)
    worst = 0.0
    for _ in range(n_dirs):
        d = rng.standard_normal(len(u))
        d /= np.linalg.norm(d)
        ep, _ = objective(u + step * d)
        em, _ = objective(u - step * d)
        fd = (ep - em) / (2.0 * step)
        an = float(g @ d)
        worst = max(worst, abs(fd - an) / max(abs(an), abs(fd), 1e-300))
    return worst
