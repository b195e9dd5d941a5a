"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad flags, missing files, invalid
domains or configs), 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import signal
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import competitor as C
from . import energy as En
from . import entropy as Ent
from . import fields as F
from . import geometry as G
from . import minimize as M
from . import verify as V
from .io import atomic_write_json, atomic_write_text

FORMAT_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2

VALIDATION_ERRORS = (
    FileNotFoundError,
    G.GeometryError,
    F.FieldError,
    C.CompetitorError,
    Ent.EntropyError,
    En.EnergyError,
    json.JSONDecodeError,
    KeyError,
    ValueError,
)
NUMERICAL_ERRORS = (M.MinimizeError, FloatingPointError, ArithmeticError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Sweep description loaded from JSON.

    ``family`` is one of ``disk``, ``ellipse``, ``disk+ellipse`` (driven by
    ``betas`` with eps = sqrt(beta)/4) or ``eccentricity`` (ellipses with
    semi-axes 1 and each of ``minor_axes`` at every eps in ``eps``).
    ``members`` may instead list explicit ``{"domain": {...}, "eps": ..}``
    entries.
    """

    family: str = "disk"
    betas: list = field(default_factory=list)
    eps: list = field(default_factory=list)
    minor_axes: list = field(default_factory=list)
    members: list = field(default_factory=list)
    h: float | None = None
    h_ratio: float = 4.0
    pipeline: str = "competitor"
    out: str = "out"
    seed: int = 0
    q: int = 32
    override_coarse_grid: bool = False
    minimize: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        raw = json.loads(path.read_text())
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if not cfg.out:
            cfg.out = "out"
        cfg.out = str((path.parent / cfg.out) if not Path(cfg.out).is_absolute() else cfg.out)
        return cfg

    def build_family(self) -> list[V.SweepMember]:
        if self.pipeline not in ("competitor", "minimize"):
            raise ValueError(f"pipeline must be competitor or minimize, got {self.pipeline!r}")
        if self.members:
            fam = []
            for k, m in enumerate(self.members):
                dom = G.from_dict(m["domain"])
                eps = float(m["eps"])
                fam.append(V.SweepMember(m.get("label", f"member{k}"), dom, eps, m.get("beta"), m.get("h") or self.h or eps / self.h_ratio))
        elif self.family in ("disk", "ellipse", "disk+ellipse"):
            if not self.betas:
                raise ValueError("config needs a non-empty 'betas' list")
            fam = []
            if self.family in ("disk", "disk+ellipse"):
                fam += V.disk_family(self.betas, self.h_ratio)
            if self.family in ("ellipse", "disk+ellipse"):
                fam += V.ellipse_family(self.betas, self.h_ratio)
        elif self.family == "eccentricity":
            if not self.minor_axes or not self.eps:
                raise ValueError("eccentricity family needs non-empty 'minor_axes' and 'eps'")
            fam = []
            for e in self.eps:
                fam += V.eccentricity_family(self.minor_axes, float(e), self.h or float(e) / self.h_ratio)
        else:
            raise ValueError(f"unknown family {self.family!r}")
        if not fam:
            raise ValueError("family is empty")
        for m in fam:
            h = m.h or m.eps / self.h_ratio
            if h > m.eps / 4.0 * (1 + 1e-12) and not self.override_coarse_grid:
                raise ValueError(f"{m.label}: h={h:g} exceeds eps/4={m.eps / 4:g}; pass --override-coarse-grid to allow")
        return fam


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _threads(args) -> int:
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("AGLAB_THREADS")
    return int(env) if env else 1


def _domain(args) -> G.ConvexDomain:
    if not args.domain:
        raise ValueError("--domain is required")
    return G.load_domain(args.domain)


def _grid_h(args, eps: float) -> float:
    h = args.h if args.h is not None else eps / 4.0
    if h > eps / 4.0 * (1 + 1e-12) and not args.override_coarse_grid:
        raise ValueError(f"h={h:g} exceeds eps/4={eps / 4:g}; pass --override-coarse-grid to allow")
    return h


def _out_dir(args, default: str) -> Path:
    return Path(args.out or default)


def _summary(msg: str) -> None:
    print(msg)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_domain(args) -> int:
    dom = _domain(args)
    center, alpha = G.best_fit_ball(dom)
    info = {
        "format_version": FORMAT_VERSION,
        "domain": dom.to_dict(),
        "area": dom.area,
        "perimeter": dom.perimeter,
        "diameter": dom.diameter,
        "centroid": dom.centroid.tolist(),
        "max_curvature": dom.max_curvature,
        "best_center": center.tolist(),
        "alpha": alpha,
        "normalized": dom.normalize().to_dict(),
    }
    if args.out:
        atomic_write_json(args.out, _jsonable(info))
    else:
        print(json.dumps(_jsonable(info), indent=2, sort_keys=True))
    _summary(f"domain {dom.shape}: area={dom.area:.6g} diameter={dom.diameter:.6g} alpha={alpha:.6g}")
    return EXIT_OK


def cmd_competitor(args) -> int:
    dom = _domain(args)
    if args.eps is None or args.beta is None:
        raise ValueError("competitor needs --eps and --beta")
    h = _grid_h(args, args.eps)
    params = C.CompetitorParams(eps=args.eps, beta=args.beta, q=args.q, cap_scale=args.cap_scale)
    comp = C.build_competitor(dom, params, h=h)
    u = comp.field
    rep = En.aviles_giga_energy(u, args.eps)
    contact = C.contact_set_diagnostic(u.raster, u.raster.sd, args.beta, args.eps, args.cap_scale)
    summary = {
        "format_version": FORMAT_VERSION,
        "domain": dom.to_dict(),
        "params": asdict(params),
        "h": h,
        "energy": rep.to_dict(),
        "trace_normal_error": C.trace_normal_error(u),
        "band_eikonal_error": C.band_eikonal_error(u, args.eps),
        "contact": asdict(contact),
        "n_polar_nodes": comp.n_polar,
        "n_lattice_nodes": comp.n_lattice,
    }
    out = Path(args.out or "competitor.bin")
    F.write_binary(u, out)
    atomic_write_json(out.with_suffix(".json"), _jsonable(summary))
    _summary(f"competitor: energy={rep.total:.6g} nodes={u.raster.n} -> {out}")
    return EXIT_OK


def _minimize_options(args, beta=None) -> M.MinimizeOptions:
    return M.MinimizeOptions(
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        boundary_penalty_weight=args.penalty,
        restart=args.restart,
        seed_from=args.seed_from,
        precondition=not args.no_precondition,
        beta=beta,
        q=args.q,
    )


def cmd_minimize(args) -> int:
    dom = _domain(args)
    if args.eps is None:
        raise ValueError("minimize needs --eps")
    h = _grid_h(args, args.eps)
    opts = _minimize_options(args, args.beta)
    out = _out_dir(args, "minimize_out")
    raster = F.rasterize(dom, h)
    seed = None
    if args.seed_file:
        grid, dense = F.read_binary(args.seed_file)
        seed = F.field_from_dense(raster, grid, dense).values
    try:
        res = M.minimize(dom, args.eps, opts, raster=raster, seed=seed, allow_coarse=args.override_coarse_grid)
    except M.MinimizeError as exc:
        atomic_write_text(out / "log.csv", exc.log.to_csv())
        raise
    atomic_write_text(out / "log.csv", res.log.to_csv())
    F.write_binary(res.field, out / "u.bin")
    report = {
        "format_version": FORMAT_VERSION,
        "domain": dom.to_dict(),
        "eps": args.eps,
        "h": h,
        "options": asdict(opts),
        "energy": res.report.to_dict(),
        "penalized_energy": res.energy,
        "seed_energy": res.seed_energy,
        "iterations": res.iterations,
        "converged": res.converged,
        "stalled": res.stalled,
        "boundary_residual": list(res.boundary_residual),
        "monotone": res.log.is_monotone(),
    }
    atomic_write_json(out / "report.json", _jsonable(report))
    _summary(f"minimize: E={res.energy:.6g} (seed {res.seed_energy:.6g}) iters={res.iterations} stalled={res.stalled} -> {out}")
    return EXIT_OK


def _load_field(args, dom) -> tuple[F.ScalarField, float]:
    if not args.field:
        raise ValueError("--field is required")
    path = Path(args.field)
    if not path.exists():
        raise FileNotFoundError(f"field file not found: {path}")
    grid, dense = F.read_binary(path)
    raster = F.rasterize(dom, grid.h)
    return F.field_from_dense(raster, grid, dense), grid.h


def cmd_energy(args) -> int:
    dom = _domain(args)
    if args.eps is None:
        raise ValueError("energy needs --eps")
    u, _ = _load_field(args, dom)
    rep = En.aviles_giga_energy(u, args.eps)
    text = json.dumps(_jsonable({"format_version": FORMAT_VERSION, **rep.to_dict()}), indent=2, sort_keys=True)
    if args.out:
        atomic_write_text(args.out, text + "\n")
    print(text)
    _summary(f"energy: total={rep.total:.6g}")
    return EXIT_OK


def _test_function(z):
    return 0.5 * np.cos(z[:, 0] + z[:, 1]) + 0.5 * np.sin(z[:, 0] - z[:, 1])


def cmd_identity(args) -> int:
    dom = _domain(args)
    pair = Ent.EntropyPair.make(args.theta, args.delta)
    base_h = args.h if args.h is not None else 0.04
    hs = [base_h, base_h / 2, base_h / 4] if args.source != "minimizer" else [base_h]
    residuals, rhs = [], []
    for h in hs:
        raster = F.rasterize(dom, h)
        if args.source == "test-function":
            u = F.ScalarField.from_function(raster, _test_function)
        elif args.source == "competitor":
            if args.eps is None or args.beta is None:
                raise ValueError("competitor source needs --eps and --beta")
            u = C.build_competitor(dom, C.CompetitorParams(args.eps, args.beta, q=args.q), raster=raster).field
        else:
            if args.eps is None:
                raise ValueError("minimizer source needs --eps")
            u = M.minimize(dom, args.eps, M.MinimizeOptions(seed_from="cone", max_iters=args.max_iters), raster=raster,
                           allow_coarse=True).field
        res, r = Ent.identity_residual(Ent.rotated_gradient(u), pair)
        residuals.append(res)
        rhs.append(r)
    order = None
    if len(hs) >= 3 and all(v > 0 for v in residuals):
        order = V.fit_loglog(hs, residuals).slope
    out = {
        "format_version": FORMAT_VERSION,
        "residual_l1": residuals[-1],
        "rhs_check": rhs[-1],
        "order_estimate": order,
        "h": hs,
        "residuals": residuals,
        "theta": list(pair.theta),
        "delta": pair.delta,
        "source": args.source,
    }
    text = json.dumps(_jsonable(out), indent=2, sort_keys=True)
    if args.out:
        atomic_write_text(args.out, text + "\n")
    print(text)
    _summary(f"identity-check: residual={residuals[-1]:.3e} order={order}")
    return EXIT_OK


def cmd_verify(args) -> int:
    dom = _domain(args)
    if args.eps is None:
        raise ValueError("verify needs --eps")
    if args.field:
        u, h = _load_field(args, dom)
    else:
        h = _grid_h(args, args.eps)
        beta = args.beta if args.beta is not None else 16.0 * args.eps**2
        member = V.SweepMember("single", dom, args.eps, beta, h)
        opts = _minimize_options(args, beta) if args.pipeline == "minimize" else None
        _, rep = V.run_member(member, args.pipeline, opts, q=args.q)
        return _write_report(args, rep)
    rep = V.verify_theorem(dom, u, args.eps)
    return _write_report(args, rep)


def _write_report(args, rep: V.TheoremReport) -> int:
    data = {"format_version": FORMAT_VERSION, **rep.to_dict(), "trivial_bounds": rep.trivial_bounds()}
    text = json.dumps(_jsonable(data), indent=2, sort_keys=True)
    if args.out:
        atomic_write_text(args.out, text + "\n")
    print(text)
    _summary(f"verify: energy={rep.beta_energy:.6g} alpha={rep.alpha:.6g} deviation={rep.deviation:.6g} w12={rep.w12_gap:.6g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .plots import emit_plots

    if not args.config:
        raise ValueError("sweep needs --config")
    cfg = ExperimentConfig.load(args.config)
    if args.pipeline:
        cfg.pipeline = args.pipeline
    if args.out:
        cfg.out = args.out
    if args.override_coarse_grid:
        cfg.override_coarse_grid = True
    family = cfg.build_family()
    opts = None
    if cfg.pipeline == "minimize":
        opts = M.MinimizeOptions(**cfg.minimize)
    result = V.exponent_sweep(family, cfg.pipeline, opts, threads=_threads(args), q=cfg.q)
    out = Path(cfg.out)
    csv_text = result.to_csv()
    atomic_write_text(out / "sweep.csv", csv_text)
    atomic_write_json(out / "reports.json", _jsonable([r.to_dict() for r in result.reports]))
    fits = {k: (asdict(v) if v is not None else None) for k, v in result.fits.items()}
    atomic_write_json(out / "fits.json", _jsonable({"format_version": FORMAT_VERSION, "fits": fits,
                                                    "failures": [list(f) for f in result.failures]}))
    if len(result.rows) >= 1:
        emit_plots(csv_text, out)
    _summary(f"sweep: {len(result.rows)} runs, {len(result.failures)} failures -> {out}")
    if result.failures and not result.rows:
        raise M.MinimizeError("every sweep member failed: " + "; ".join(f[0] for f in result.failures))
    return EXIT_OK


def cmd_plots(args) -> int:
    from .plots import emit_plots

    path = Path(args.csv)
    if not path.exists():
        raise FileNotFoundError(f"sweep table not found: {path}")
    written = emit_plots(path.read_text(), _out_dir(args, str(path.parent)))
    _summary(f"plots: {len(written)} SVG files")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *, field_in=False, opt=False):
    p.add_argument("--domain", metavar="FILE", help="domain JSON, e.g. {\"shape\": \"ellipse\", \"a\": 1.05, \"b\": 0.9524}")
    p.add_argument("--h", type=float, help="grid spacing (length units); default eps/4")
    p.add_argument("--eps", type=float, help="energy length scale eps (length units)")
    p.add_argument("--beta", type=float, help="energy scale beta (dimensionless); sets the cone cap and ramp width")
    p.add_argument("--q", type=int, default=32, help="kernel quadrature order (radial points; angular points = 2q)")
    p.add_argument("--out", metavar="PATH", help="output file or directory")
    p.add_argument("--threads", type=int, help="worker threads (fallback: AGLAB_THREADS, else 1)")
    p.add_argument("--override-coarse-grid", action="store_true", help="allow h > eps/4")
    if field_in:
        p.add_argument("--field", metavar="FILE", help="field in the binary field format")
    if opt:
        p.add_argument("--max-iters", type=int, default=500, help="iteration cap")
        p.add_argument("--grad-tol", type=float, default=1e-6, help="stop when the gradient norm falls below this")
        p.add_argument("--penalty", type=float, default=1e3, help="boundary penalty weight (dimensionless)")
        p.add_argument("--restart", type=int, default=50, help="conjugate gradient restart period (iterations)")
        p.add_argument("--seed-from", choices=M.SEEDS, default="competitor", help="initial field")
        p.add_argument("--seed-file", metavar="FILE", help="initial field from a binary field file (overrides --seed-from)")
        p.add_argument("--no-precondition", action="store_true", help="plain (unpreconditioned) conjugate gradient")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aglab", description="Aviles-Giga energy laboratory on convex planar domains.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    s = sub.add_parser("domain", help="geometry summary of a domain")
    _common(s)
    s.set_defaults(func=cmd_domain)

    s = sub.add_parser("competitor", help="build the mollified capped distance function")
    _common(s)
    s.add_argument("--cap-scale", type=float, default=C.DEFAULT_CAP_SCALE,
                   help=f"cone cap height is 1 - cap_scale * beta^(3/32) (default {C.DEFAULT_CAP_SCALE:g}; the wide cap uses {C.WIDE_CAP_SCALE:g})")
    s.set_defaults(func=cmd_competitor)

    s = sub.add_parser("minimize", help="minimize the penalized discrete energy")
    _common(s, opt=True)
    s.set_defaults(func=cmd_minimize)

    s = sub.add_parser("energy", help="energy report of a stored field")
    _common(s, field_in=True)
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("identity-check", help="entropy identity residual of a field source")
    _common(s)
    s.add_argument("--source", choices=("competitor", "minimizer", "test-function"), default="test-function")
    s.add_argument("--delta", type=float, default=0.7, help="ramp width in (0, 1]")
    s.add_argument("--theta", type=float, default=0.0, help="entropy direction angle (radians)")
    s.add_argument("--max-iters", type=int, default=200, help="iteration cap for the minimizer source")
    s.set_defaults(func=cmd_identity)

    s = sub.add_parser("verify", help="theorem-level report for one run")
    _common(s, field_in=True, opt=True)
    s.add_argument("--pipeline", choices=("competitor", "minimize"), default="competitor")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run a family sweep from a JSON config")
    _common(s)
    s.add_argument("--config", metavar="FILE", help="sweep configuration JSON")
    s.add_argument("--pipeline", choices=("competitor", "minimize"), help="override the config pipeline")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plots", help="SVG plots from an existing sweep.csv")
    s.add_argument("csv", help="sweep table")
    s.add_argument("--out", metavar="DIR", help="output directory (default: next to the table)")
    s.set_defaults(func=cmd_plots)
    return p


def _raise_interrupt(signum, frame):
    raise KeyboardInterrupt


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if not getattr(args, "command", None):
        parser.print_help(sys.stderr)
        return EXIT_INVALID
    try:
        # SIGTERM unwinds like Ctrl-C so atomic writers remove their temp files
        signal.signal(signal.SIGTERM, _raise_interrupt)
    except ValueError:  # not the main thread
        pass
    try:
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
