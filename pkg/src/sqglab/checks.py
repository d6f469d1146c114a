"""Fast property suites behind ``sqglab check``.

Each check is a small, self-contained invariant on a coarse grid; a suite is a
list of :class:`CheckResult`.  The exhaustive versions live in the test suite.
"""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .field import Grid, RealField, ball_mean_coeffs, fwd, inv, to_real, to_spectral
from .nonlocal_ops import (HomogeneousProfile, fractional_laplacian, poisson_semigroup, riesz_perp,
                           riesz_perp_coeffs)
from .symmetry import SymmetryGroup, asymmetry, project_symmetric


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    value: float
    bound: float
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.suite:<9} {self.name:<34} {self.value:.3e} (bound {self.bound:.1e})"


def _plane_wave(g: Grid, k1: int, k2: int) -> tuple[np.ndarray, float, float]:
    X, Y = g.mesh
    a, b = math.pi * k1 / g.l, math.pi * k2 / g.l
    return np.cos(a * X + b * Y), a, b


def _spectral() -> list[tuple[str, float, float]]:
    g = Grid(64, math.pi)
    X, Y = g.mesh
    out = []
    worst = 0.0
    for k1, k2 in [(1, 0), (3, -2), (7, 5)]:
        w, a, b = _plane_wave(g, k1, k2)
        kk = math.hypot(a, b)
        F = to_spectral(RealField(g, w))
        lam = to_real(fractional_laplacian(F, 0.5)).values
        worst = max(worst, np.abs(lam - kk**0.5 * w).max())
        v = riesz_perp(F)
        s = -np.sin(a * X + b * Y)
        worst = max(worst, np.abs(v.v1.values - (-b / kk) * s).max(), np.abs(v.v2.values - (a / kk) * s).max())
        pt = to_real(poisson_semigroup(F, 0.3)).values
        worst = max(worst, np.abs(pt - math.exp(-0.3 * kk) * w).max())
    out.append(("multipliers on plane waves", worst, 1e-12))
    rng = np.random.default_rng(0)
    F = to_spectral(RealField(g, rng.normal(size=g.shape)))
    lhs = poisson_semigroup(poisson_semigroup(F, 0.2), 0.5).coeffs
    rhs = poisson_semigroup(F, 0.7).coeffs
    out.append(("semigroup law", float(np.abs(lhs - rhs).max() / np.abs(rhs).max()), 1e-12))
    f = RealField(g, rng.normal(size=g.shape))
    back = to_real(to_spectral(f)).values
    out.append(("transform round trip", float(np.abs(back - f.values).max()), 1e-12))
    v = riesz_perp(to_spectral(f))
    out.append(("velocity is divergence free", float(np.abs(v.divergence().values).max()), 1e-10))
    return out


def _symmetry() -> list[tuple[str, float, float]]:
    from .data import random_symmetric

    g = Grid(64, math.pi)
    rng = np.random.default_rng(1)
    f = RealField(g, rng.normal(size=g.shape))
    out = []
    for G in (SymmetryGroup.rotation(4), SymmetryGroup.rotation_reflection(2)):
        p = project_symmetric(f, G)
        pp = project_symmetric(p, G)
        out.append((f"projection idempotent {G}", float(np.abs(pp.values - p.values).max()), 1e-12))
        out.append((f"projected asymmetry {G}", asymmetry(p, G), 1e-12))
    X, Y = g.mesh
    out.append(("y is not rotation_reflection(2)", -asymmetry(RealField(g, Y), SymmetryGroup.rotation_reflection(2)),
                -1.9))
    worst = 0.0
    for G in (SymmetryGroup.rotation(2), SymmetryGroup.rotation(4)):
        th = random_symmetric(g, G, seed=3)
        a, b = riesz_perp_coeffs(g, fwd(g, th.values))
        for R in (0.5, 1.0, 2.0):
            worst = max(worst, math.hypot(ball_mean_coeffs(g, a, R), ball_mean_coeffs(g, b, R)))
    out.append(("symmetric velocity ball means", worst, 1e-12))
    return out


def _norms() -> list[tuple[str, float, float]]:
    from .norms import NormConfig, ball_averages, weak_l2, xp_norm

    f = HomogeneousProfile.from_function(lambda p: np.cos(3 * p), 256)
    cfg = NormConfig()
    avg = ball_averages(f, cfg)
    out = [("homogeneous ball averages constant", float(np.ptp(avg)), 1e-12),
           ("X_2 norm of cos(3 phi)", abs(xp_norm(f, cfg) - 2**-0.5), 1e-12)]
    # indicator of k cells: sup_lambda lambda |{g > lambda}|^{1/2} = sqrt(k * area)
    v = np.zeros(100)
    v[:7] = 1.0
    out.append(("weak L2 of an indicator", abs(weak_l2(v, 0.25) - math.sqrt(7 * 0.25)), 1e-14))
    return out


def _evolve() -> list[tuple[str, float, float]]:
    from .data import random_symmetric, ring_bump
    from .evolve import SolverConfig, run

    g = Grid(128, 2 * math.pi)
    th = ring_bump(g, 1.0, 0.3, core=0.5)
    traj = run(th, SolverConfig(dt=0.02, t_end=0.2))
    c0 = fwd(g, traj.theta0.values)
    lin = inv(g, c0 * np.exp(-0.2 * g.kmag))
    out = [("radial data evolve linearly", float(np.abs(traj.final.values - lin).max() / traj.theta0.linf()), 1e-6)]
    G = SymmetryGroup.rotation(4)
    th = random_symmetric(g, G, seed=5)
    traj = run(th, SolverConfig(dt=0.01, t_end=0.2, group=G))
    d = traj.diagnostics
    out.append(("maximum principle margin", max(x.max_principle_margin for x in d), 1e-6))
    out.append(("energy identity residual", max(x.energy_residual for x in d), 1e-4))
    out.append(("symmetry preserved", max(x.asymmetry for x in d), 1e-6))
    out.append(("mean drift", max(max(x.mean_drift) for x in d) / d[0].linf, 1e-8))
    return out


def _selfsim() -> list[tuple[str, float, float]]:
    from .data import homogeneous
    from .field import gradient_coeffs
    from .nonlocal_ops import poisson_homogeneous

    G = SymmetryGroup.rotation_reflection(3)
    f = HomogeneousProfile.from_function(lambda p: np.sin(3 * p), 256, G)
    # e^{-Lambda} of 0-homogeneous data solves y . grad Theta = Lambda Theta; the
    # periodic semigroup on a large box is the independent oracle
    g = Grid(512, 32.0)
    X, Y = g.mesh
    c = fwd(g, homogeneous(g, f, 1.0, mollify_cells=0.0).values) * np.exp(-g.kmag)
    d1, d2 = gradient_coeffs(g, c)
    m = g.radius <= 2.0
    steady = (X * inv(g, d1) + Y * inv(g, d2) - inv(g, g.kmag * c))[m]
    out = [("Poisson flow is a steady profile", float(np.abs(steady).max()), 1e-3)]
    err = np.abs(inv(g, c)[m] - poisson_homogeneous(f, X[m], Y[m])).max()
    out.append(("closed-form linear profile", float(err), 1e-3))
    return out


def _io() -> list[tuple[str, float, float]]:
    from .config import ConfigError, parse_config
    from .snapshot import read_snapshot, write_snapshot

    g = Grid(32, 1.7)
    f = RealField(g, np.random.default_rng(2).normal(size=g.shape))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "f.sqgf"
        write_snapshot(f, 0.125, path)
        back, t = read_snapshot(path)
    same = np.array_equal(back.values, f.values) and t == 0.125 and back.grid == g
    try:
        parse_config("grid.n = 100")
        rejected = False
    except ConfigError:
        rejected = True
    return [("snapshot round trip bit-exact", 0.0 if same else 1.0, 0.0),
            ("non power of two grid rejected", 0.0 if rejected else 1.0, 0.0)]


SUITES: dict[str, Callable[[], list]] = {
    "spectral": _spectral,
    "symmetry": _symmetry,
    "norms": _norms,
    "evolve": _evolve,
    "selfsim": _selfsim,
    "io": _io,
}


def run_suite(name: str = "all") -> list[CheckResult]:
    if name != "all" and name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    names = list(SUITES) if name == "all" else [name]
    results = []
    for s in names:
        t0 = time.perf_counter()
        rows = SUITES[s]()
        dt = (time.perf_counter() - t0) / max(len(rows), 1)
        for label, value, bound in rows:
            ok = bool(np.isfinite(value) and value <= bound)
            results.append(CheckResult(s, label, ok, float(value), float(bound), dt))
    return results
