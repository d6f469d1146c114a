"""Acceptance criteria 1-12.

Each test carries ``@pytest.mark.criterion(n, title)``; ``conftest.py`` prints
one PASS/FAIL line per criterion (with the measured values) in the terminal
summary.  Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import csv
import math
import time

import numpy as np
import pytest

from sqglab.cli import main
from sqglab.data import random_profile, random_symmetric, ring_bump, symmetric_bump
from sqglab.evolve import Mollify, SolverConfig, Trajectory, mollified_drift, run, run_approximate, sample
from sqglab.field import Grid, RealField, fwd, inv, to_real, to_spectral
from sqglab.nonlocal_ops import (HomogeneousProfile, RieszQuadrature, fractional_laplacian, ju_gap, ju_scale,
                                 poisson_kernel, poisson_semigroup, riesz_perp, riesz_profile)
from sqglab.norms import NormConfig, ball_averages, budget_scaled, find_t_star, xp_norm
from sqglab.selfsim import SelfSimConfig, StabilityConfig, decay_verdict, solve_profile, stability_experiment
from sqglab.symmetry import SymmetryGroup

from test_nonlocal_ops import bump_function
from test_norms import polar_mean_power

R3 = SymmetryGroup.rotation_reflection(3)
SIN3 = HomogeneousProfile.from_function(lambda p: np.sin(3 * p), 256, R3)

# final/initial decay ratio of the stability run at R = 2, frozen after the first validated run
STABILITY_RATIO_FROZEN = 0.0158


def semigroup(theta0: RealField, t: float) -> np.ndarray:
    g = theta0.grid
    return inv(g, fwd(g, theta0.values) * np.exp(-t * g.kmag))


# -- 1 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(1, "operator exactness on plane waves (N=64)")
def test_operator_exactness(measured):
    t0 = time.perf_counter()
    g = Grid(64, math.pi)
    X, Y = g.mesh
    worst = 0.0
    for k1, k2 in [(1, 0), (0, 1), (3, -2), (7, 5), (-12, 20), (31, 31), (0, 31), (20, -31)]:
        a, b = math.pi * k1 / g.l, math.pi * k2 / g.l
        kk = math.hypot(a, b)
        for phase in (0.0, 0.7):
            w = np.cos(a * X + b * Y + phase)
            dw = -np.sin(a * X + b * Y + phase)
            F = to_spectral(RealField(g, w))

            def rel(got, exact):
                return np.abs(got - exact).max() / max(np.abs(exact).max(), np.abs(w).max())

            for s in (0.5, 1.0, 1.5, 2.0):
                worst = max(worst, rel(to_real(fractional_laplacian(F, s)).values, kk**s * w))
            v = riesz_perp(F)
            worst = max(worst, rel(v.v1.values, (-b / kk) * dw), rel(v.v2.values, (a / kk) * dw))
            for t in (0.05, 0.3, 1.0):
                worst = max(worst, rel(to_real(poisson_semigroup(F, t)).values, math.exp(-t * kk) * w))
    elapsed = time.perf_counter() - t0
    measured.update(rel_err=worst, seconds=elapsed)
    assert worst <= 1e-12
    assert elapsed < 1.0


# -- 2 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(2, "semigroup law and Poisson kernel cross-check")
def test_semigroup_and_kernel(measured):
    g = Grid(64, 1.3)
    rng = np.random.default_rng(0)
    worst = 0.0
    for seed in range(5):
        c = fwd(g, np.random.default_rng(seed).normal(size=g.shape))
        F = to_spectral(RealField(g, inv(g, np.where(g.dealias_mask, c, 0.0))))
        for s, t in rng.uniform(0, 2, size=(4, 2)):
            lhs = poisson_semigroup(poisson_semigroup(F, s), t).coeffs
            rhs = poisson_semigroup(F, s + t).coeffs
            worst = max(worst, np.abs(lhs - rhs).max() / np.abs(F.coeffs).max())
    # the planar kernel t / (2 pi (t^2 + |x|^2)^{3/2}), summed directly over a compact bump
    g = Grid(256, 16.0)
    X, Y = g.mesh
    b = RealField(g, bump_function((0.3, -0.2))(X, Y))
    sup = b.values > 0
    kern = 0.0
    for t in (0.25, 0.5, 1.0):
        P = to_real(poisson_semigroup(to_spectral(b), t)).values
        for x, y in [(0.0, 0.0), (0.5, 0.5), (1.5, -1.0), (3.0, 2.0)]:
            i, j = int(round((x + g.l) / g.dx)), int(round((y + g.l) / g.dx))
            direct = np.sum(poisson_kernel(x - X[sup], y - Y[sup], t) * b.values[sup]) * g.dx**2
            kern = max(kern, abs(P[i, j] - direct))
    measured.update(semigroup=worst, kernel=kern)
    assert worst <= 1e-12
    assert kern <= 1e-4


# -- 3 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(3, "radial data evolve by the Poisson semigroup (N=256)")
def test_radial_reduction(measured):
    t0 = time.perf_counter()
    g = Grid(256, 2 * math.pi)
    # the datum is taken inside the dealiased space the solver works in
    raw = ring_bump(g, 1.0, 0.3, core=0.5)
    th = RealField(g, inv(g, np.where(g.dealias_mask, fwd(g, raw.values), 0.0)))
    traj = run(th, SolverConfig(dt=0.01, t_end=1.0, snapshot_every=5, diagnostics=False))
    err = max(np.abs(s.values - semigroup(th, t)).max() for t, s in zip(traj.times, traj.snapshots))
    elapsed = time.perf_counter() - t0
    measured.update(rel_err=err / th.linf(), seconds=elapsed, t_end=traj.times[-1])
    assert traj.times[-1] == pytest.approx(1.0)
    assert err <= 1e-6 * th.linf()
    assert elapsed < 60


# -- 4 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(4, "maximum principle, 10 seeded 3-fold symmetric data")
def test_maximum_principle(measured):
    t0 = time.perf_counter()
    g = Grid(128, 2 * math.pi)
    worst = 0.0
    for seed in range(10):
        traj = run(random_symmetric(g, R3, seed=seed),
                   SolverConfig(dt=0.01, t_end=1.0, group=R3, resymmetrize_every=1, snapshot_every=100))
        assert traj.diagnostics[-1].t == pytest.approx(1.0)
        worst = max(worst, max(d.max_principle_margin for d in traj.diagnostics))
    elapsed = time.perf_counter() - t0
    measured.update(margin=worst, seconds=elapsed)
    assert worst <= 1e-6
    assert elapsed < 300


# -- 5 -----------------------------------------------------------------------------------------

GAUGE_CASES = {
    # m = 3 is not grid-exact: the torus image drift scales like (width/l)^5, hence the large box
    "m3": (SymmetryGroup.rotation_reflection(3), Grid(1024, 64.0), 0.5, 0.02, 0.5),
    "m2": (SymmetryGroup.rotation(2), Grid(256, 16.0), None, 0.01, 1.0),
    "m4": (SymmetryGroup.rotation(4), Grid(256, 16.0), None, 0.01, 1.0),
    "radial": (SymmetryGroup.radial(), Grid(256, 2 * math.pi), None, 0.01, 1.0),
}


@pytest.mark.criterion(5, "ball means of the velocity vanish at four radii")
@pytest.mark.parametrize("case", list(GAUGE_CASES))
def test_mean_drift(case, measured):
    G, g, width, dt, t_end = GAUGE_CASES[case]
    if G.kind == "radial":
        th = ring_bump(g, 1.0, 0.3, core=0.5)
    else:
        th = random_symmetric(g, G, seed=0, width=width)
    traj = run(th, SolverConfig(dt=dt, t_end=t_end, group=G, resymmetrize_every=10 if width else 0,
                                snapshot_every=1000))
    worst = 0.0
    for d in traj.diagnostics:
        assert len(d.mean_drift) == 4
        worst = max(worst, max(d.mean_drift) / d.linf)
    measured[f"{case}_drift"] = worst
    assert worst <= 1e-8


# -- 6 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(6, "X_p averages of cos(3 phi) and Riesz boundedness ratio")
def test_xp_machinery(measured):
    cos3 = HomogeneousProfile.from_function(lambda p: np.cos(3 * p), 256)
    func = lambda x, y: np.cos(3 * np.arctan2(y, x))  # noqa: E731
    avg = ball_averages(cos3, NormConfig(R0=0.5, J=8))
    quad = [math.sqrt(polar_mean_power(func, R, 2)) for R in (0.5, 2.0, 16.0, 128.0)]
    xp = xp_norm(cos3, NormConfig())
    measured.update(avg_spread=float(np.ptp(avg)), quad_spread=float(np.ptp(quad)), x2_err=abs(xp - 2**-0.5))
    assert np.ptp(avg) <= 1e-6 and np.ptp(quad) <= 1e-6
    assert abs(xp - 2**-0.5) <= 1e-6
    assert abs(quad[0] - 2**-0.5) <= 1e-6

    groups = [R3, SymmetryGroup.rotation(2), SymmetryGroup.rotation_reflection(4), SymmetryGroup.rotation(3)]
    q = RieszQuadrature()
    change = 0.0
    for seed in range(20):
        f = random_profile(groups[seed % 4], seed)
        coarse, fine = riesz_profile(f, q, n_eval=64), riesz_profile(f, q.refined(), n_eval=64)
        for p in (2.0, 4.0):
            cfg = NormConfig(p=p)
            r1 = xp_norm(coarse, cfg) / xp_norm(f, cfg)
            r2 = xp_norm(fine, cfg) / xp_norm(f, cfg)
            assert math.isfinite(r1) and math.isfinite(r2) and r1 > 0
            change = max(change, abs(r2 - r1) / r1)
    measured["riesz_ratio_change"] = change
    assert change < 0.1


# -- 7 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(7, "energy identity, L^p monotonicity, Ju gap")
def test_energy_structure(measured):
    g = Grid(128, 2 * math.pi)
    resid, growth = 0.0, 0.0
    for G, seed in [(R3, 0), (R3, 1), (SymmetryGroup.rotation(4), 2), (SymmetryGroup.rotation(2), 3)]:
        th = random_symmetric(g, G, seed=seed)
        d = run(th, SolverConfig(dt=0.01, t_end=1.0, group=G, resymmetrize_every=1 if G.m == 3 else 0,
                                 snapshot_every=1000)).diagnostics
        resid = max(resid, max(x.energy_residual for x in d[1:]))
        for a, b in zip(d, d[1:]):
            for p in (2, 4, "inf"):
                growth = max(growth, (b.lp_norms[p] - a.lp_norms[p]) / d[0].lp_norms[p])
    gap = math.inf
    for seed in range(20):
        th = random_symmetric(g, R3, seed=seed)
        for q in (2, 3, 4):
            gap = min(gap, float(ju_gap(th, q).values.min()) / ju_scale(th, q))
    measured.update(energy_residual=resid, lp_growth=growth, ju_gap_min=gap)
    assert resid <= 1e-4
    assert growth <= 1e-6
    assert gap >= -1e-4


# -- 8 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(8, "A_T/E_T budget at the measured T*")
def test_energy_budget(measured):
    t0 = time.perf_counter()

    def data(n):
        th = random_symmetric(Grid(n, 8.0), R3, seed=0)
        th = th * (1.0 / xp_norm(th, NormConfig(p=4)))
        return th, xp_norm(th, NormConfig(p=2))

    r_max = 0.9 * 8.0
    th, x2 = data(128)
    assert xp_norm(th, NormConfig(p=4)) == pytest.approx(1.0, rel=1e-12)
    traj = run(th, SolverConfig(dt=0.01, t_end=1.0, group=R3, resymmetrize_every=1, diagnostics=False))
    t_star = find_t_star(traj, 2.0 * x2**2, r_max, candidates=[0.01 * k for k in range(1, 26)])
    assert t_star is not None
    # refined run over T*, 2T*, 4T* with the ladder origin scaled with T
    th, x2 = data(256)
    traj = run(th, SolverConfig(dt=0.005, t_end=4 * t_star, group=R3, resymmetrize_every=1, diagnostics=False))
    rows = budget_scaled(traj, t_star, r_max)
    ratios = [b / x2**2 for _, _, b in rows]
    elapsed = time.perf_counter() - t0
    measured.update(t_star=t_star, worst_ratio=max(ratios), seconds=elapsed)
    print("budget / X_2^2 at T = 2^k T*:", ", ".join(f"{r:.3f}" for r in ratios))
    assert len(rows) >= 3
    assert max(ratios) <= 2.2
    assert elapsed < 300


# -- 9 -----------------------------------------------------------------------------------------

@pytest.mark.criterion(9, "mollified drift keeps lambda=2 DSS; approximate system converges")
def test_dss_machinery(measured):
    g = Grid(256, 16.0)
    X, Y = g.mesh
    F = lambda x, y: np.exp(-(x * x + y * y)) * (3 * x * x * y - y**3)  # noqa: E731
    traj = Trajectory(g)
    for t in np.arange(0.7, 2.6 + 1e-9, 0.01):
        traj.append(t, RealField(g, F(X / t, Y / t)))
    v1 = mollified_drift(traj, 0.2, 2.0, 1.0)
    v2 = mollified_drift(traj, 0.2, 2.0, 2.0)
    m = g.radius <= 1.0
    pts = np.stack([X[m], Y[m]], axis=1)
    dss = max(np.abs(sample(v1.v1, pts) - sample(v2.v1, 2 * pts)).max(),
              np.abs(sample(v1.v2, pts) - sample(v2.v2, 2 * pts)).max())

    g = Grid(128, 2 * math.pi)
    th = random_symmetric(g, R3, seed=1)
    base = dict(dt=0.01, t_end=1.0, group=R3, resymmetrize_every=1, diagnostics=False, snapshot_every=100)
    exact = run(th, SolverConfig(**base)).final.values
    errs = []
    for delta in (0.2, 0.1, 0.05):
        approx = run_approximate(th, SolverConfig(**base, mollify=Mollify(delta, 0.4 / delta))).final.values
        errs.append(float(np.abs(approx - exact).max()))
    measured.update(dss=dss, err_02=errs[0], err_01=errs[1], err_005=errs[2])
    assert dss <= 1e-3
    assert errs[0] > errs[1] > errs[2]


# -- 10 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(10, "self-similar profile and its asymptotic stability (N=256)")
def test_profile_and_stability(measured):
    t0 = time.perf_counter()
    A = 0.05
    prof = solve_profile(SIN3, A, R3, SelfSimConfig(n=256))
    measured.update(residual=prof.residual, asymmetry=prof.asymmetry)
    assert prof.residual < 1e-5 * A
    assert prof.asymmetry < 1e-6

    sc = StabilityConfig()
    pert = symmetric_bump(Grid(sc.n, sc.l), R3, center=(1.0, 0.5), width=1.0, amp=0.02, compact=True)
    series = stability_experiment(SIN3, A, pert, [0.5, 1.0, 2.0], prof, sc, R3)
    ok, ratio = decay_verdict(series, 2.0)
    elapsed = time.perf_counter() - t0
    measured.update(ratio_R2=ratio, seconds=elapsed)
    print("fitted decay exponents (exploratory):", series.exponent)
    assert ok and ratio <= 0.3
    assert ratio == pytest.approx(STABILITY_RATIO_FROZEN, rel=0.1)
    assert elapsed < 900


# -- 11 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(11, "amplitude sweep smoke test (N=128)")
def test_sweep_smoke(tmp_path, measured):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("profile.n = 128\n"
                   "data.profile = sin(3 phi)\n"
                   "sweep.A_values = 0.1, 0.2, 0.3, 0.5, 0.75, 1, 1.5, 2, 3, 4, 5\n"
                   "sweep.group = rotation(3)\n"
                   "sweep.reference = rotation_reflection(3)\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path), "--quiet"]) == 0
    with open(tmp_path / "branch.csv") as fh:
        rows = list(csv.DictReader(fh))
    A = [float(r["A"]) for r in rows]
    assert A[0] == 0.1 and A[-1] == 5.0 and len(A) == 11
    floor = max(float(r["asymmetry"]) for r in rows if float(r["A"]) <= 0.2)
    flagged = [float(r["A"]) for r in rows if r["breaking_candidate"] == "1"]
    measured.update(floor=floor, candidates=flagged or "none")
    print("exploratory symmetry-breaking candidates:", flagged or "none")
    assert floor <= 1e-4


# -- 12 ----------------------------------------------------------------------------------------

@pytest.mark.criterion(12, "repeated runs give identical diagnostics.csv")
def test_determinism(tmp_path, measured):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.n = 64\ngrid.l = 6.283185307179586\nsolver.dt = 0.01\nsolver.t_end = 0.3\n"
                   "solver.group = rotation_reflection(3)\nsolver.resymmetrize_every = 1\n"
                   "data.kind = random_symmetric\ndata.seed = 11\n")
    outs = []
    for k in range(3):
        out = tmp_path / f"run{k}"
        argv = ["simulate", "--config", str(cfg), "--out", str(out), "--quiet"]
        if k == 2:
            argv += ["--seed", "11"]
        assert main(argv) == 0
        outs.append((out / "diagnostics.csv").read_bytes())
    measured["rows"] = outs[0].count(b"\n") - 1
    assert outs[0] == outs[1] == outs[2]
    assert measured["rows"] == 31
