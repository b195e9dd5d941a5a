"""Theorem-level diagnostics for a field on a near-circular convex domain, and sweeps."""

from __future__ import annotations

import csv
import io
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import competitor as C
from . import energy as En
from . import fields as F
from . import geometry as G
from . import minimize as M

# exponents of the stability estimates (far from optimal, near-vacuous at desk scale)
SYMDIFF_EXPONENT = 1.0 / 512.0
DEVIATION_EXPONENT = 1.0 / 256.0
W12_EXPONENT = 1.0 / 3000.0
COMPETITOR_EXPONENT = 3.0 / 32.0
TRIVIAL_BOUND_CONSTANT = 10.0
ADMISSIBLE_RESIDUAL = 0.05


@dataclass(frozen=True)
class TheoremReport:
    beta_energy: float
    entropy_production: float
    eikonal_defect: float
    beta_hypothesis: float
    best_center: tuple[float, float]
    symdiff: float
    deviation: float
    deviation_exclusion_radius: float
    w12_gap: float
    epsilon: float
    alpha: float
    h: float
    excluded_area: float
    boundary_value_residual: float
    boundary_normal_residual: float
    admissible: bool

    @property
    def rate_beta(self) -> float:
        """Energy scale fed to the rate checks: 4 (alpha + eps)."""
        return 4.0 * (self.alpha + self.epsilon)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["best_center"] = list(self.best_center)
        d["rate_beta"] = self.rate_beta
        return d

    def trivial_bounds(self, constant: float = TRIVIAL_BOUND_CONSTANT) -> dict[str, bool]:
        """The stability estimates with their stated exponents and a generous constant."""
        return {
            "symdiff": self.symdiff <= constant * self.beta_energy**SYMDIFF_EXPONENT,
            "deviation": self.deviation <= constant * max(self.beta_hypothesis, 1e-300) ** DEVIATION_EXPONENT,
            "w12_gap": self.w12_gap <= constant * (self.epsilon + self.alpha) ** W12_EXPONENT,
        }


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int

    def predict(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.slope


def fit_loglog(x, y) -> FitResult:
    """Least-squares line through (log x, log y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(ok) < 3:
        raise ValueError("log-log fit needs at least three positive points")
    lx, ly = np.log(x[ok]), np.log(y[ok])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), min(1.0, max(0.0, r2)), int(np.count_nonzero(ok)))


def verify_theorem(domain: G.ConvexDomain, u: F.ScalarField, eps: float, n_boundary: int | None = None) -> TheoremReport:
    rep = En.aviles_giga_energy(u, eps)
    center, alpha = G.best_fit_ball(domain)
    symdiff = G.disk_symmetric_difference(domain, center)
    deviation, rad = En.gradient_deviation(u, center)
    zeta = F.ScalarField(u.raster, u.raster.sd)
    w12 = F.w12_distance(u, zeta)
    n = n_boundary or max(64, int(math.ceil(domain.perimeter / u.raster.h)))
    samples, T, Tx, Ty = u.raster.trace_operators(n)
    eta = samples.inward_normal
    res_val = float(np.max(np.abs(T @ u.values)))
    res_nrm = float(np.max(np.abs((Tx @ u.values) * eta[:, 0] + (Ty @ u.values) * eta[:, 1] - 1.0)))
    return TheoremReport(
        beta_energy=rep.total,
        entropy_production=rep.entropy_production,
        eikonal_defect=rep.eikonal_defect,
        beta_hypothesis=max(rep.entropy_production, math.sqrt(rep.eikonal_defect)),
        best_center=(float(center[0]), float(center[1])),
        symdiff=symdiff,
        deviation=deviation,
        deviation_exclusion_radius=rad,
        w12_gap=w12,
        epsilon=float(eps),
        alpha=float(alpha),
        h=u.raster.h,
        excluded_area=rep.excluded_area,
        boundary_value_residual=res_val,
        boundary_normal_residual=res_nrm,
        admissible=bool(res_val <= ADMISSIBLE_RESIDUAL and res_nrm <= ADMISSIBLE_RESIDUAL),
    )


# ---------------------------------------------------------------------------
# families and sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepMember:
    label: str
    domain: G.ConvexDomain
    eps: float
    beta: float | None = None
    h: float | None = None


def near_disk_ellipse(beta: float) -> G.ConvexDomain:
    """Ellipse with semi-axes 1 and 1 - beta/(2 pi): diameter 2, |E - B_1| = beta/2."""
    return G.ellipse(1.0, 1.0 - beta / (2.0 * math.pi))


def disk_family(betas, h_ratio: float = 4.0) -> list[SweepMember]:
    out = []
    for b in betas:
        eps = math.sqrt(b) / 4.0
        out.append(SweepMember(f"disk-beta{b:g}", G.disk(), eps, b, eps / h_ratio))
    return out


def ellipse_family(betas, h_ratio: float = 4.0) -> list[SweepMember]:
    out = []
    for b in betas:
        eps = math.sqrt(b) / 4.0
        out.append(SweepMember(f"ellipse-beta{b:g}", near_disk_ellipse(b), eps, b, eps / h_ratio))
    return out


def eccentricity_family(minor_axes, eps: float, h: float | None = None) -> list[SweepMember]:
    return [SweepMember(f"ellipse-b{b:g}", G.ellipse(1.0, b), eps, None, h or eps / 4.0) for b in minor_axes]


@dataclass
class SweepRow:
    label: str
    shape: str
    beta: float
    eps: float
    h: float
    alpha: float
    eps_plus_alpha: float
    rate_beta: float
    energy: float
    entropy_production: float
    eikonal_defect: float
    deviation: float
    w12_gap: float
    symdiff: float
    excluded_area: float
    admissible: bool
    iterations: int


CSV_FIELDS = [f.name for f in SweepRow.__dataclass_fields__.values()]
RESPONSES = {
    "energy_vs_beta": ("beta", "energy"),
    "w12_vs_eps_plus_alpha": ("eps_plus_alpha", "w12_gap"),
    "deviation_vs_energy": ("energy", "deviation"),
}


@dataclass
class SweepResult:
    rows: list[SweepRow]
    reports: list[TheoremReport]
    fits: dict[str, FitResult | None]
    failures: list[tuple[str, str]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            vals = []
            for name in CSV_FIELDS:
                v = getattr(r, name)
                vals.append(repr(float(v)) if isinstance(v, float) else str(v))
            w.writerow(vals)
        return buf.getvalue()


def run_member(member: SweepMember, pipeline: str, opts: M.MinimizeOptions | None = None, q: int = 32):
    dom = member.domain
    h = member.h or member.eps / 4.0
    raster = F.rasterize(dom, h)
    beta = member.beta if member.beta is not None else 16.0 * member.eps**2
    iterations = 0
    if pipeline == "competitor":
        comp = C.build_competitor(dom, C.CompetitorParams(eps=member.eps, beta=beta, q=q), raster=raster)
        u = comp.field
    elif pipeline == "minimize":
        o = opts or M.MinimizeOptions(beta=beta)
        if o.beta is None and o.seed_from == "competitor":
            o = M.MinimizeOptions(**{**asdict(o), "beta": beta})
        res = M.minimize(dom, member.eps, o, raster=raster)
        u = res.field
        iterations = res.iterations
    else:
        raise ValueError(f"unknown pipeline {pipeline!r}")
    rep = verify_theorem(dom, u, member.eps)
    row = SweepRow(
        label=member.label,
        shape=dom.shape,
        beta=float(beta),
        eps=float(member.eps),
        h=float(h),
        alpha=rep.alpha,
        eps_plus_alpha=rep.alpha + member.eps,
        rate_beta=rep.rate_beta,
        energy=rep.beta_energy,
        entropy_production=rep.entropy_production,
        eikonal_defect=rep.eikonal_defect,
        deviation=rep.deviation,
        w12_gap=rep.w12_gap,
        symdiff=rep.symdiff,
        excluded_area=rep.excluded_area,
        admissible=rep.admissible,
        iterations=iterations,
    )
    return row, rep


def exponent_sweep(family: list[SweepMember], pipeline: str = "competitor", opts: M.MinimizeOptions | None = None,
                   threads: int = 1, q: int = 32) -> SweepResult:
    """Run the pipeline on every member and fit the three log-log responses."""
    if len(family) < 3:
        raise ValueError("a sweep needs at least three family members")

    def job(m):
        try:
            return run_member(m, pipeline, opts, q), None
        except Exception as exc:  # collected, reported per member
            return None, (m.label, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(job, family))
    rows, reports, failures = [], [], []
    for ok, err in results:
        if err is not None:
            failures.append(err)
        else:
            rows.append(ok[0])
            reports.append(ok[1])
    fits: dict[str, FitResult | None] = {}
    for name, (xk, yk) in RESPONSES.items():
        try:
            fits[name] = fit_loglog([getattr(r, xk) for r in rows], [getattr(r, yk) for r in rows])
        except ValueError:
            fits[name] = None
    return SweepResult(rows, reports, fits, failures)


def read_sweep_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise ValueError("empty sweep table")
    missing = [c for c in ("label",) + tuple(v for pair in RESPONSES.values() for v in pair) if c not in reader.fieldnames]
    if missing:
        raise ValueError(f"sweep table is missing columns {missing}")
    rows = list(reader)
    if not rows:
        raise ValueError("sweep table has no rows")
    return rows


def nondecreasing_within(values, rel_noise: float = 0.05) -> bool:
    """True when every value is at least (1 - rel_noise) times every earlier one."""
    v = np.asarray(values, dtype=float)
    running = np.maximum.accumulate(v)
    return bool(np.all(v >= (1.0 - rel_noise) * running))
