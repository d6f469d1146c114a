"""Self-similar profiles in similarity variables, their stability, amplitude sweeps.

With ``y = x/t`` and ``s = log t`` a solution ``theta(x, t) = Theta(x/t, log t)``
obeys (``Lambda`` is 1-homogeneous, ``R_perp`` 0-homogeneous)::

    d_s Theta = -(R_perp Theta - y) . grad Theta - Lambda Theta

and self-similar solutions are its steady states.  On the periodic box
``[-L, L)^2`` the drift ``y`` is tapered to zero near the box edge and a sponge
``-sigma(|y|) (Theta - A f)`` relaxes the outer shell to the far-field datum.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import homogeneous, smooth_step
from .evolve import NumericalError, SolverConfig, run, sample
from .field import Grid, RealField, fwd, gradient_coeffs, inv
from .nonlocal_ops import (HomogeneousProfile, lambda_coeffs, poisson_homogeneous, riesz_perp_coeffs,
                           riesz_profile_exact)
from .symmetry import SymmetryGroup, asymmetry, project_windowed


@dataclass(frozen=True)
class SelfSimConfig:
    n: int = 256
    L: float = 8.0
    sponge_start: float = 0.6  # fraction of L where the sponge begins
    sponge_full: float = 0.95  # fraction of L where the sponge reaches full rate
    sponge_rate: float = 5.0
    drift_taper: tuple = (0.6, 0.98)  # y-drift weight falls from 1 to 0 across these fractions of L
    target_taper: tuple = (0.6, 0.98)  # stored far field blends to its angular mean across these
    cfl: float = 0.5
    dt: float | None = None  # pseudo-time step; default from the stability bound
    s_max: float = 20.0
    tol_rel: float = 1e-5  # residual tolerance relative to A
    residual_radius: float = 0.5  # fraction of L
    check_every: int = 25
    project_above: float = 20.0  # re-project the state while the residual exceeds this many tolerances
    disable_riesz: bool = False

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.L)


class SimilarityProblem:
    """Right-hand side of the similarity-variable flow for a fixed far-field datum.

    The profile is split as ``Theta = Theta_lin + Phi`` where ``Theta_lin =
    e^{-Lambda}(A f)`` is known in closed form and satisfies ``y . grad Theta_lin
    = Lambda Theta_lin`` exactly.  Only the decaying remainder ``Phi`` lives on
    the periodic grid::

        d_s Phi = w y . grad Phi - Lambda Phi - w_n (R_perp Theta) . grad Theta - sigma Phi

    with ``R_perp Theta_lin`` and ``grad Theta_lin`` also in closed form.  The drift
    weight ``w`` and the forcing weight ``w_n`` fall to zero near the box edge
    where the sponge ``sigma`` takes over.  The discrete right-hand side lives on
    the disc of retained modes ``|k| <= n/3`` (unlike the square 2/3 rule it
    commutes with rotations) and, with a group, is projected onto the symmetric
    fields, so pseudo-time steady states are exact zeros of this operator.
    """

    def __init__(self, f: HomogeneousProfile, A: float, cfg: SelfSimConfig = SelfSimConfig(),
                 group: SymmetryGroup | None = None):
        self.f, self.A, self.cfg, self.group = f, float(A), cfg, group
        g = self.grid = cfg.grid
        L, r = cfg.L, g.radius
        X, Y = g.mesh
        a, b = cfg.drift_taper
        self.w = smooth_step((r / L - a) / (b - a))
        self.yw = (X * self.w, Y * self.w)
        s0, s1 = cfg.sponge_start, cfg.sponge_full
        self.sigma = cfg.sponge_rate * (1.0 - smooth_step((r / L - s0) / (s1 - s0)))
        far, grad = poisson_homogeneous(f, X, Y, gradient=True)
        self.far_grad = self.A * grad
        if cfg.disable_riesz:
            self.far_vel = None
        else:
            rf = riesz_profile_exact(f).values
            perp = HomogeneousProfile(np.stack([-rf[:, 1], rf[:, 0]], axis=1))
            self.far_vel = self.A * poisson_homogeneous(perp, X, Y)
        ta, tb = cfg.target_taper
        wt = smooth_step((r / L - ta) / (tb - ta))
        mean = self.A * float(f.mean())
        self.far = mean + wt * (self.A * far - mean)  # exact inside ta * L, periodic-compatible
        self.interior = r <= cfg.residual_radius * L
        self.mask = np.hypot(*g.k_int) <= cfg.n / 3

    def remainder(self, theta: RealField) -> np.ndarray:
        """Coefficients of ``Phi = Theta - Theta_lin``."""
        return np.where(self.mask, fwd(self.grid, theta.values - self.far), 0.0)

    def theta(self, c: np.ndarray) -> RealField:
        return RealField(self.grid, self.far + inv(self.grid, c))

    def rhs_coeffs(self, c: np.ndarray) -> np.ndarray:
        """Filtered, projected right-hand side for the remainder coefficients ``c``."""
        g = self.grid
        phi = inv(g, c)
        d1, d2 = gradient_coeffs(g, c)
        p1, p2 = inv(g, d1), inv(g, d2)
        full = self.yw[0] * p1 + self.yw[1] * p2 - inv(g, lambda_coeffs(g, c)) - self.sigma * phi
        if self.far_vel is not None:
            a, b = riesz_perp_coeffs(g, c)
            u1 = self.far_vel[..., 0] + inv(g, a)
            u2 = self.far_vel[..., 1] + inv(g, b)
            full -= self.w * (u1 * (self.far_grad[..., 0] + p1) + u2 * (self.far_grad[..., 1] + p2))
        if self.group is not None:
            full = project_windowed(g, full, self.group)
        return np.where(self.mask, fwd(g, full), 0.0)

    def rhs_values(self, theta: RealField) -> np.ndarray:
        return inv(self.grid, self.rhs_coeffs(self.remainder(theta)))

    def residual(self, theta: RealField) -> float:
        """``||similarity_rhs(Theta)||_{L^2(B_{r L})}`` on the interior ball."""
        return self._residual(self.remainder(theta))

    def _residual(self, c: np.ndarray) -> float:
        v = inv(self.grid, self.rhs_coeffs(c))
        return float(np.sqrt(np.sum(v[self.interior] ** 2) * self.grid.dx**2))

    def stable_dt(self) -> float:
        """Step inside the SSP-RK3 stability region for advection, dissipation and sponge."""
        g = self.grid
        v = np.hypot(*self.yw)
        if self.far_vel is not None:
            v = v + self.w * np.hypot(self.far_vel[..., 0], self.far_vel[..., 1])
        vmax = float(v.max()) + (0.0 if self.far_vel is None else 0.5 * abs(self.A))
        stiff = float(np.max(g.kmag[self.mask])) + self.cfg.sponge_rate
        return self.cfg.cfl * min(g.dx / max(vmax, 1e-12), 2.5 / stiff)


def similarity_rhs(theta: RealField, f: HomogeneousProfile, A: float,
                   cfg: SelfSimConfig = SelfSimConfig(), group: SymmetryGroup | None = None) -> RealField:
    """Discrete similarity-flow right-hand side at ``theta`` (see :class:`SimilarityProblem`)."""
    if theta.grid != cfg.grid:
        raise ValueError("theta must live on the similarity grid of cfg")
    out = SimilarityProblem(f, A, cfg, group).rhs_values(theta)
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite similarity right-hand side")
    return RealField(theta.grid, out)


@dataclass
class Profile:
    theta: RealField
    boundary: HomogeneousProfile
    amplitude: float
    residual: float
    asymmetry: float
    group: SymmetryGroup | None
    converged: bool = True
    s_final: float = 0.0
    history: list = field(default_factory=list)  # (s, residual)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        """``Theta`` at similarity points ``(P, 2)`` by cubic splines."""
        return sample(self.theta, y)

    def at_time(self, points: np.ndarray, t: float) -> np.ndarray:
        """``theta_ss(x, t) = Theta(x / t)``."""
        return self(np.asarray(points) / t)


def initial_guess(f: HomogeneousProfile, A: float, cfg: SelfSimConfig) -> RealField:
    """The linear profile: ``A f`` mollified by the Poisson kernel at unit time."""
    return linear_profile(f, A, cfg)


def linear_profile(f: HomogeneousProfile, A: float, cfg: SelfSimConfig) -> RealField:
    """``e^{-Lambda}(A f)`` in closed form: the self-similar profile without advection.

    Blended to its angular mean across ``cfg.target_taper`` so it is periodic.
    """
    g = cfg.grid
    X, Y = g.mesh
    r = g.radius
    ta, tb = cfg.target_taper
    wt = smooth_step((r / cfg.L - ta) / (tb - ta))
    mean = A * float(f.mean())
    return RealField(g, mean + wt * (A * poisson_homogeneous(f, X, Y) - mean))


def _ssp_rk3(c: np.ndarray, F, dt: float) -> np.ndarray:
    c1 = c + dt * F(c)
    c2 = 0.75 * c + 0.25 * (c1 + dt * F(c1))
    return c / 3.0 + 2.0 / 3.0 * (c2 + dt * F(c2))


def solve_profile(f: HomogeneousProfile, A: float, G: SymmetryGroup | None,
                  cfg: SelfSimConfig = SelfSimConfig(), guess: RealField | None = None) -> Profile:
    """Pseudo-time integration of the similarity flow to a steady state.

    SSP-RK3 on the filtered, projected right-hand side, so fixed points are
    exact zeros of the discrete operator.  Increments are symmetric only up to
    interpolation and filtering error, which accumulates while the right-hand
    side is large; the state is therefore re-projected at every residual check
    until the residual falls below ``project_above`` tolerances, and left alone
    afterwards so the final approach is an unperturbed fixed-point iteration.
    The loop stops below ``tol_rel * A`` or at ``s_max``.
    """
    if A < 0:
        raise ValueError("A must be non-negative")
    g = cfg.grid
    if G is not None and f.group is None:
        from .nonlocal_ops import symmetry_defect

        if symmetry_defect(f, G) > 1e-10 * max(1.0, float(np.max(np.abs(f.values)))):
            raise ValueError(f"far-field profile is not {G}-symmetric")
    if A == 0:
        z = RealField.zeros(g)
        return Profile(z, f, 0.0, 0.0, 0.0, G, True, 0.0, [(0.0, 0.0)])
    prob = SimilarityProblem(f, A, cfg, G)
    if guess is not None and guess.grid != g:
        raise ValueError("guess must live on the similarity grid")
    c = np.zeros(g.shape, complex) if guess is None else prob.remainder(guess)
    if G is not None and guess is not None:
        c = _project(prob, c)
    dt = cfg.dt or prob.stable_dt()
    tol = cfg.tol_rel * A
    history = []
    s, k = 0.0, 0
    n_max = int(math.ceil(cfg.s_max / dt))
    res = prob._residual(c)
    history.append((0.0, res))
    while k < n_max and res >= tol:
        c = _ssp_rk3(c, prob.rhs_coeffs, dt)
        k += 1
        s += dt
        if not np.all(np.isfinite(c)):
            raise NumericalError("similarity flow blew up", k)
        if k % cfg.check_every == 0 or k == n_max:
            if G is not None and res > cfg.project_above * tol:
                c = _project(prob, c)
            res = prob._residual(c)
            history.append((s, res))
    theta = prob.theta(c)
    asym = asymmetry(theta, G) if G is not None else 0.0
    return Profile(theta, f, float(A), res, asym, G, res < tol, s, history)


def _project(prob: SimilarityProblem, c: np.ndarray) -> np.ndarray:
    g = prob.grid
    return np.where(prob.mask, fwd(g, project_windowed(g, inv(g, c), prob.group)), 0.0)


# -- stability of the profile under perturbation ----------------------------------------

@dataclass(frozen=True)
class StabilityConfig:
    n: int = 512
    l: float = 64.0
    dt: float = 0.025
    t0: float = 0.25
    n_checkpoints: int = 5  # t_k = t0 2^k
    trust: float = 1e-3  # admissible far-field contamination, relative to A
    scheme: str = "etd2"
    resymmetrize_every: int = 10  # with a group: re-project against periodic-image asymmetry

    def checkpoints(self) -> list[float]:
        return [self.t0 * 2.0**k for k in range(self.n_checkpoints)]


@dataclass
class DecaySeries:
    times: list
    radii: list
    errors: np.ndarray  # (k, R), NaN where invalid
    valid: np.ndarray
    exponent: dict  # R -> fitted exponent of e_k ~ t^-a (exploratory)

    def series(self, R: float) -> tuple[np.ndarray, np.ndarray]:
        j = self.radii.index(R)
        ok = self.valid[:, j]
        return np.asarray(self.times)[ok], self.errors[ok, j]


def contamination(t: float, r: float, l: float, taper_start: float = 0.85) -> float:
    """Relative influence at radius ``r`` and time ``t`` of replacing the datum beyond
    ``taper_start * l``: the Poisson kernel's third angular moment gives
    ``~ t r^3 / rho^4`` for a harmonic-3 far field."""
    rho = taper_start * l
    return t * r**3 / rho**4


def stability_experiment(f: HomogeneousProfile, A: float, perturbation: RealField | None,
                         R_list: Sequence[float], profile: Profile,
                         cfg: StabilityConfig = StabilityConfig(),
                         group: SymmetryGroup | None = None) -> DecaySeries:
    """Evolve ``A f`` (mollified, tapered) plus ``perturbation`` and compare with ``Theta(x/t)``.

    ``e_k(R) = ||theta(., t_k) - Theta(./t_k)||_{L^inf(B(R t_k))}``.  A cell is
    invalid when ``R t_k`` leaves the trusted core ``0.45 * 2l`` or the far-field
    truncation can reach it (``contamination > cfg.trust``), or when ``R``
    exceeds the profile's interior ball.
    """
    g = Grid(cfg.n, cfg.l)
    theta0 = homogeneous(g, f, A)
    if perturbation is not None:
        if perturbation.grid != g:
            raise ValueError("perturbation must live on the stability grid")
        theta0 = theta0 + perturbation
    if group is not None and perturbation is not None and group.grid_exact:
        if asymmetry(perturbation, group) > 1e-6:
            raise ValueError("perturbation is not symmetric")
    times = cfg.checkpoints()
    traj = run(theta0, SolverConfig(dt=cfg.dt, t_end=times[-1], scheme=cfg.scheme, diagnostics=False,
                                     group=group, resymmetrize_every=cfg.resymmetrize_every if group else 0,
                                     snapshot_every=_every(times, cfg.dt)))
    Ly = profile.theta.grid.l
    errors = np.full((len(times), len(R_list)), np.nan)
    valid = np.zeros_like(errors, dtype=bool)
    X, Y = g.mesh
    for k, t in enumerate(times):
        snap = traj.at(t)
        for j, R in enumerate(R_list):
            r = R * t
            ok = (r <= 0.9 * g.l and R <= 0.5 * Ly and r >= 2 * g.dx
                  and contamination(t, r, g.l) <= cfg.trust)
            if not ok:
                continue
            mask = g.radius <= r
            pts = np.stack([X[mask], Y[mask]], axis=1)
            errors[k, j] = float(np.max(np.abs(snap.values[mask] - profile.at_time(pts, t))))
            valid[k, j] = True
    expo = {}
    for j, R in enumerate(R_list):
        ok = valid[:, j] & (errors[:, j] > 0)
        if ok.sum() >= 2:
            tt = np.asarray(times)[ok]
            expo[R] = float(-np.polyfit(np.log(tt), np.log(errors[ok, j]), 1)[0])
    return DecaySeries(times, list(R_list), errors, valid, expo)


def _every(times: Sequence[float], dt: float) -> int:
    steps = [round(t / dt) for t in times]
    if any(abs(s * dt - t) > 1e-9 * max(t, 1) for s, t in zip(steps, times)):
        raise ValueError("checkpoints must be multiples of dt")
    return int(np.gcd.reduce(steps))


def eventually_decreasing(e: np.ndarray, tail: int = 3) -> bool:
    """The last ``tail`` entries of ``e`` decrease strictly."""
    e = np.asarray(e)[-tail:]
    return len(e) >= 2 and bool(np.all(np.diff(e) < 0))


def decay_verdict(series: DecaySeries, R: float, min_span: float = 10.0, tail: int = 3,
                  max_ratio: float = 0.3) -> tuple[bool, float]:
    """``(passed, final/initial)`` for one radius: the valid series must span
    ``min_span`` in time, decrease over its last ``tail`` entries and shrink by
    ``max_ratio``."""
    t, e = series.series(R)
    if len(t) < 2:
        return False, float("nan")
    ratio = float(e[-1] / e[0])
    ok = t[-1] / t[0] >= min_span and eventually_decreasing(e, tail) and ratio <= max_ratio
    return ok, ratio


# -- amplitude continuation ---------------------------------------------------------------

@dataclass
class BranchEntry:
    A: float
    residual: float
    asymmetry: float
    converged: bool
    profile_path: str = ""
    profile: Profile | None = None


@dataclass
class Branch:
    entries: list
    group_constrained: SymmetryGroup
    group_reference: SymmetryGroup
    floor: float = 0.0
    breaking_candidates: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["A", "residual", "asymmetry", "converged", "breaking_candidate", "profile"])
            for e in self.entries:
                w.writerow([repr(e.A), repr(e.residual), repr(e.asymmetry), int(e.converged),
                            int(e.A in self.breaking_candidates), e.profile_path])


def antisymmetric_seed(grid: Grid, m: int, eps: float, width: float = 1.5) -> RealField:
    """``eps (r/w)^m e^{-(r/w)^2} cos(m phi)``: invariant under rotation by ``2 pi/m``,
    odd under the signed reflection."""
    r, phi = grid.radius, grid.angle
    env = (r / width) ** m * np.exp(-((r / width) ** 2))
    env /= env.max()
    return RealField(grid, eps * env * np.cos(m * phi))


def sweep_amplitude(f: HomogeneousProfile, A_values: Sequence[float], G: SymmetryGroup,
                    Gbar: SymmetryGroup, cfg: SelfSimConfig = SelfSimConfig(n=128),
                    seed_eps: float = 1e-3, out_dir: str | Path | None = None,
                    floor_max_A: float = 0.2, jump: float = 100.0) -> Branch:
    """Natural-parameter continuation in ``A`` within the ``Gbar`` class.

    Each solve starts from the previous profile rescaled to the new amplitude
    plus a fixed reflection-antisymmetric seed; the ``G``-asymmetry of the
    result is recorded.  Entries whose asymmetry exceeds ``jump`` times the
    small-amplitude floor on two consecutive amplitudes are listed as breaking
    candidates (exploratory output only).
    """
    A_values = [float(a) for a in A_values]
    if any(b <= a for a, b in zip(A_values[:-1], A_values[1:])):
        raise ValueError("A_values must increase strictly")
    if Gbar == G or Gbar.kind != "rotation" or G.kind != "rotation_reflection" or Gbar.m != G.m:
        raise ValueError("Gbar must be the rotation subgroup of the reference group G")
    g = cfg.grid
    seed = antisymmetric_seed(g, G.m, seed_eps)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    entries, prev = [], None
    for A in A_values:
        if A == 0:
            entries.append(BranchEntry(A, 0.0, 0.0, True))
            continue
        base = initial_guess(f, A, cfg) if prev is None else prev.theta * (A / prev.amplitude)
        guess = base + seed * A
        try:
            prof = solve_profile(f, A, Gbar, cfg, guess=guess)
            asym = asymmetry(prof.theta, G)
            e = BranchEntry(A, prof.residual, asym, prof.converged, profile=prof)
            prev = prof
        except NumericalError:
            e = BranchEntry(A, float("nan"), float("nan"), False)
        if out is not None and e.profile is not None:
            from .snapshot import write_snapshot

            name = f"profile_A{A:.6g}.sqgf"
            write_snapshot(e.profile.theta, 0.0, out / name)
            e.profile_path = name
        entries.append(e)
    small = [e.asymmetry for e in entries if 0 < e.A <= floor_max_A and np.isfinite(e.asymmetry)]
    floor = min(small) if small else min((e.asymmetry for e in entries if e.A > 0), default=0.0)
    flags = [e.A for e in entries if np.isfinite(e.asymmetry) and e.asymmetry > jump * max(floor, 1e-300)]
    cands = [a for a in flags if _next_flagged(a, flags, A_values)]
    return Branch(entries, Gbar, G, floor, cands)


def _next_flagged(a: float, flags: list, A_values: list) -> bool:
    i = A_values.index(a)
    nb = [A_values[j] for j in (i - 1, i + 1) if 0 <= j < len(A_values)]
    return any(b in flags for b in nb)
