import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aglab import competitor as C
from aglab import fields as F
from aglab import geometry as G
from aglab import verify as V

BETA = 0.04
EPS = math.sqrt(BETA) / 4


def _competitor_report(domain, h=EPS / 4, cap=True):
    comp = C.build_competitor(domain, C.CompetitorParams(EPS, BETA, cap=cap), h=h)
    return V.verify_theorem(domain, comp.field, EPS)


@pytest.fixture(scope="module")
def disk_report():
    return _competitor_report(G.disk())


def test_disk_competitor_report(disk_report):
    rep = disk_report
    assert rep.symdiff <= 1e-10 and rep.alpha <= 1e-10
    assert np.allclose(rep.best_center, 0.0, atol=1e-6)
    # inside the contact disk the cap reverses the gradient: |2|^2 over pi R^2, less smoothing
    R = C.CompetitorParams(EPS, BETA).contact_radius
    assert rep.deviation == pytest.approx(4 * math.pi * R * R, rel=0.1)
    assert rep.admissible
    assert rep.beta_hypothesis == max(rep.entropy_production, math.sqrt(rep.eikonal_defect))
    assert rep.rate_beta == pytest.approx(4 * (rep.alpha + EPS))
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["best_center"] == list(rep.best_center) and "rate_beta" in d


def test_ellipse_deviates_more_than_disk():
    disk = _competitor_report(G.disk(), cap=False)
    rep = _competitor_report(V.near_disk_ellipse(BETA), cap=False)
    assert disk.deviation <= 0.05
    assert rep.alpha > 0 and rep.symdiff > 0
    assert rep.symdiff <= BETA
    assert rep.deviation > disk.deviation


def test_translation_invariance():
    # the cone cap is anchored at the origin, so compare the uncapped fields
    h = EPS / 4
    base = _competitor_report(G.disk(), h=h, cap=False)
    moved = _competitor_report(G.disk((12 * h, -7 * h)), h=h, cap=False)
    assert np.allclose(moved.best_center, (12 * h, -7 * h), atol=1e-6)
    for name in ["beta_energy", "entropy_production", "eikonal_defect", "deviation", "w12_gap"]:
        assert getattr(moved, name) == pytest.approx(getattr(base, name), rel=1e-6, abs=1e-12)


def test_trivial_bounds_hold_for_the_competitor(disk_report):
    assert all(disk_report.trivial_bounds().values())


def test_trivial_bounds_detect_violation(disk_report):
    from dataclasses import replace

    bad = replace(disk_report, deviation=1e3)
    assert bad.trivial_bounds()["deviation"] is False


def test_fit_loglog_exact_power():
    x = np.geomspace(0.01, 1, 7)
    fit = V.fit_loglog(x, 3 * x**0.75)
    assert fit.slope == pytest.approx(0.75, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0) and fit.n_points == 7
    assert np.allclose(fit.predict(x), 3 * x**0.75)


def test_fit_loglog_skips_nonpositive_and_needs_three():
    fit = V.fit_loglog([1, 2, 4, 8, -1], [1, 2, 4, 8, 5])
    assert fit.n_points == 4 and fit.slope == pytest.approx(1.0)
    with pytest.raises(ValueError):
        V.fit_loglog([1, 2, 0], [1, 2, 3])


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 10))
def test_fit_loglog_recovers_slope(p, c):
    x = np.geomspace(0.1, 10, 6)
    assert V.fit_loglog(x, c * x**p).slope == pytest.approx(p, abs=1e-9)


def test_nondecreasing_within():
    assert V.nondecreasing_within([1.0, 2.0, 1.95, 3.0])
    assert not V.nondecreasing_within([1.0, 2.0, 1.5])
    assert V.nondecreasing_within([1.0, 2.0, 1.5], rel_noise=0.3)


def test_families():
    fam = V.disk_family([0.04, 0.01])
    assert [m.eps for m in fam] == [0.05, 0.025] and fam[0].h == 0.0125
    e = V.near_disk_ellipse(0.04)
    assert e.diameter == pytest.approx(2.0)
    assert G.disk_symmetric_difference(e, (0, 0)) == pytest.approx(0.02, rel=1e-9)
    assert [m.eps for m in V.eccentricity_family([0.9, 0.8], 0.05)] == [0.05, 0.05]


@pytest.fixture(scope="module")
def sweep():
    return V.exponent_sweep(V.disk_family([0.09, 0.06, 0.04], h_ratio=2.0))


def test_sweep_table(sweep):
    assert not sweep.failures and len(sweep.rows) == 3
    rows = V.read_sweep_csv(sweep.to_csv())
    assert list(rows[0]) == V.CSV_FIELDS
    assert [r["label"] for r in rows] == [m.label for m in V.disk_family([0.09, 0.06, 0.04])]
    assert all(f is not None for f in sweep.fits.values())


def test_sweep_deterministic(sweep):
    again = V.exponent_sweep(V.disk_family([0.09, 0.06, 0.04], h_ratio=2.0), threads=2)
    assert again.to_csv() == sweep.to_csv()


def test_sweep_collects_failures():
    fam = V.disk_family([0.09, 0.06, 0.04], h_ratio=2.0)
    fam.append(V.SweepMember("too-wide", G.ellipse(1.0, 0.5), 0.05, 0.04, 0.025))
    res = V.exponent_sweep(fam)
    assert len(res.rows) == 3 and [f[0] for f in res.failures] == ["too-wide"]


def test_sweep_needs_three_members():
    with pytest.raises(ValueError, match="three"):
        V.exponent_sweep(V.disk_family([0.04, 0.01]))


def test_unknown_pipeline():
    with pytest.raises(ValueError, match="pipeline"):
        V.run_member(V.disk_family([0.04])[0], "magic")


def test_read_sweep_csv_errors():
    with pytest.raises(ValueError, match="empty"):
        V.read_sweep_csv("")
    with pytest.raises(ValueError, match="missing"):
        V.read_sweep_csv("label,beta\nx,1\n")
    header = ",".join(V.CSV_FIELDS) + "\n"
    with pytest.raises(ValueError, match="no rows"):
        V.read_sweep_csv(header)


def test_report_on_inexact_boundary_data_is_not_admissible():
    r = F.rasterize(G.disk(), EPS / 4)
    rep = V.verify_theorem(G.disk(), F.ScalarField(r, np.zeros(r.n)), EPS)
    assert not rep.admissible
    assert rep.boundary_normal_residual == pytest.approx(1.0)
