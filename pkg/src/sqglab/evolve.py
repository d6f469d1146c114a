"""Pseudo-spectral time stepping for critical SQG and its mollified approximation.

``d_t theta + R_perp theta . grad theta + Lambda theta = 0`` is advanced with
exponential time differencing: the dissipation ``-Lambda`` is integrated exactly
in Fourier space and the advection term ``N(theta) = -P(v . grad theta)`` (``P``
the 2/3 filter) explicitly.  The state is kept band-limited, so the discrete
mean and energy balance are exact up to time-integration error.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.special import jv, roots_legendre

from .field import Grid, RealField, VectorField, ball_mean_coeffs, fwd, gradient_coeffs, inv
from .nonlocal_ops import lambda_coeffs, riesz_perp_coeffs
from .symmetry import SymmetryGroup, asymmetry, project_values, project_windowed

GAUGE_FRACTION = 0.5
SCHEMES = ("etd1", "etd2")
DRIFT_FRACTIONS = (0.125, 0.25, 0.5, 1.0)  # of 0.9 l


class NumericalError(RuntimeError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class Mollify:
    """Space-time mollification scale ``delta`` and cutoff radius ``rho`` (in units of ``t``)."""

    delta: float
    rho: float

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.rho < 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: str = "etd2"
    resymmetrize_every: int = 0
    group: SymmetryGroup | None = None
    mollify: Mollify | None = None
    lambda_dss: float | None = None
    snapshot_every: int = 1
    diagnostics: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.resymmetrize_every < 0 or self.snapshot_every < 1:
            raise ValueError("resymmetrize_every >= 0 and snapshot_every >= 1 required")
        if self.lambda_dss is not None and self.lambda_dss <= 1:
            raise ValueError("lambda_dss must exceed 1")


@dataclass
class StepDiagnostics:
    step: int
    t: float
    linf: float
    grad_linf: float
    t_grad_linf: float
    t2_hess_linf: float
    energy: float
    dissipation: float
    energy_residual: float
    mean_drift: list
    psi_p4: float
    max_principle_margin: float
    asymmetry: float
    cfl: float
    lp_norms: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    grid: Grid
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    theta0: RealField | None = None

    def append(self, t: float, f: RealField) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("snapshot times must increase strictly")
        if f.grid != self.grid:
            raise ValueError("snapshot grid differs from trajectory grid")
        self.times.append(float(t))
        self.snapshots.append(f)

    @property
    def final(self) -> RealField:
        return self.snapshots[-1]

    def at(self, t: float) -> RealField:
        """Linear-in-time interpolation between stored snapshots."""
        T = np.asarray(self.times)
        if not T[0] - 1e-12 <= t <= T[-1] + 1e-12:
            raise ValueError(f"t={t} outside the stored span [{T[0]}, {T[-1]}]")
        i = int(np.clip(np.searchsorted(T, t) - 1, 0, len(T) - 2)) if len(T) > 1 else 0
        if len(T) == 1:
            return self.snapshots[0]
        w = (t - T[i]) / (T[i + 1] - T[i])
        w = min(max(w, 0.0), 1.0)
        return RealField(self.grid, (1 - w) * self.snapshots[i].values + w * self.snapshots[i + 1].values)


# -- exponential integrator ------------------------------------------------------------

def _phi_functions(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1 = (e^z - 1)/z``, ``phi2 = (e^z - 1 - z)/z^2`` with series near 0."""
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    em1 = np.expm1(zs)
    phi1 = np.where(small, 1 + z / 2 + z**2 / 6 + z**3 / 24, em1 / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z**2 / 24 + z**3 / 120, (em1 - zs) / zs**2)
    return phi1, phi2


def gauge_radius(grid: Grid, group: SymmetryGroup | None) -> float | None:
    """Radius of the disc on which the velocity mean is pinned to zero, or ``None``.

    For a grid-exact group the zero-mode gauge already gives vanishing ball
    means.  For other groups the square torus breaks the symmetry of
    non-decaying data and the zero-mode gauge leaves a spurious uniform drift;
    pinning the mean over the inner half of the box restores the symmetric gauge.
    """
    if group is None or group.grid_exact:
        return None
    return GAUGE_FRACTION * grid.l


def _pin_mean(grid: Grid, a: np.ndarray, R: float) -> np.ndarray:
    a = a.copy()
    a[0, 0] -= ball_mean_coeffs(grid, a, R)
    return a


def spectral_mask(grid: Grid, group: SymmetryGroup | None = None) -> np.ndarray:
    """Dealiasing filter: the square two-thirds rule, or its disc version for
    groups whose rotations do not map the square onto itself."""
    if group is None or group.grid_exact:
        return grid.dealias_mask
    return grid.disc_mask


def advection(grid: Grid, c: np.ndarray, v: tuple[np.ndarray, np.ndarray] | None = None,
              gauge: float | None = None, mask: np.ndarray | None = None) -> np.ndarray:
    """``-P(v . grad theta)`` in coefficient space; ``v = R_perp theta`` unless given (nodal).

    With ``gauge`` the velocity mean over ``B_gauge`` is set to zero.  ``P`` is
    ``mask`` (default: the square two-thirds rule).
    """
    if v is None:
        a, b = riesz_perp_coeffs(grid, c)
        if gauge is not None:
            a, b = _pin_mean(grid, a, gauge), _pin_mean(grid, b, gauge)
        v = inv(grid, a), inv(grid, b)
    d1, d2 = gradient_coeffs(grid, c)
    prod = v[0] * inv(grid, d1) + v[1] * inv(grid, d2)
    return -np.where(grid.dealias_mask if mask is None else mask, fwd(grid, prod), 0.0)


def flux_divergence(grid: Grid, c: np.ndarray, v: tuple[np.ndarray, np.ndarray],
                    mask: np.ndarray | None = None) -> np.ndarray:
    """``-P div(v theta)`` for a prescribed (dealiased, divergence-free) drift."""
    th = inv(grid, c)
    k1, k2 = grid.kappa
    f1, f2 = fwd(grid, v[0] * th), fwd(grid, v[1] * th)
    ny1, ny2 = grid.nyquist
    div = np.where(ny1, 0.0, 1j * k1 * f1) + np.where(ny2, 0.0, 1j * k2 * f2)
    return -np.where(grid.dealias_mask if mask is None else mask, div, 0.0)


class Stepper:
    """ETD1 / ETD2 (Cox-Matthews) step for ``c' = -|kappa| c + N(c)``."""

    def __init__(self, grid: Grid, dt: float, scheme: str = "etd2"):
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        self.grid, self.dt, self.scheme = grid, dt, scheme
        z = -dt * grid.kmag
        self.E = np.exp(z)
        p1, p2 = _phi_functions(z)
        self.hphi1, self.hphi2 = dt * p1, dt * p2

    def advance(self, c: np.ndarray, N: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        n0 = N(c)
        a = self.E * c + self.hphi1 * n0
        if self.scheme == "etd1":
            return a
        return a + self.hphi2 * (N(a) - n0)


def _dealiased(grid: Grid, values: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    return np.where(grid.dealias_mask if mask is None else mask, fwd(grid, values), 0.0)


def step(theta: RealField, cfg: SolverConfig, nonlinear: bool = True) -> RealField:
    """One step of size ``cfg.dt``; ``nonlinear=False`` forces ``N = 0``."""
    if cfg.group is not None and asymmetry(theta, cfg.group) > 1e-6:
        raise ValueError(f"input is not {cfg.group}-symmetric")
    g = theta.grid
    st = Stepper(g, cfg.dt, cfg.scheme)
    c = fwd(g, theta.values)
    mask = spectral_mask(g, cfg.group)
    N = (lambda u: advection(g, u, mask=mask)) if nonlinear else (lambda u: np.zeros_like(u))
    return _checked(g, st.advance(c, N), 1)


def _checked(grid: Grid, c: np.ndarray, k: int) -> RealField:
    vals = inv(grid, c)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite values", k)
    return RealField(grid, vals)


# -- diagnostics -------------------------------------------------------------------------

def drift_radii(grid: Grid) -> list[float]:
    return [0.9 * grid.l * f for f in DRIFT_FRACTIONS]


def _energy_terms(grid: Grid, c: np.ndarray) -> tuple[float, float, np.ndarray]:
    area = (2 * grid.l) ** 2
    p = np.abs(c) ** 2
    return 0.5 * area * float(p.sum()), area * float((grid.kmag * p).sum()), p


def _log_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a - b) / log(a / b)``: exact time average of an exponential through a and b."""
    out = 0.5 * (a + b)
    ok = (a > 0) & (b > 0) & (np.abs(a - b) > 1e-12 * (a + b))
    out[ok] = (a[ok] - b[ok]) / np.log(a[ok] / b[ok])
    return out


class Diagnostician:
    """Per-step diagnostic record for the physical solver."""

    def __init__(self, grid: Grid, c0: np.ndarray, group: SymmetryGroup | None):
        self.grid, self.c0, self.group = grid, c0, group
        self.radii = drift_radii(grid)
        self.linf0 = float(np.max(np.abs(inv(grid, c0))))
        self.region = grid.radius <= 0.9 * grid.l
        self.prev = None

    def record(self, k: int, t: float, c: np.ndarray, dt: float) -> StepDiagnostics:
        g = self.grid
        vals = inv(g, c)
        d1, d2 = gradient_coeffs(g, c)
        grad = np.hypot(inv(g, d1), inv(g, d2))
        k1, k2 = g.kappa
        ny1, ny2 = g.nyquist
        h11 = inv(g, np.where(ny1, 0.0, 1j * k1 * d1))
        h22 = inv(g, np.where(ny2, 0.0, 1j * k2 * d2))
        h12 = inv(g, np.where(ny1, 0.0, 1j * k1 * d2))
        hess = np.sqrt(h11**2 + h22**2 + 2 * h12**2)
        energy, diss, power = _energy_terms(g, c)
        resid = 0.0
        if self.prev is not None:
            e_prev, p_prev = self.prev
            area = (2 * g.l) ** 2
            lost = area * float((g.kmag * _log_mean(p_prev, power)).sum())
            resid = abs((energy - e_prev) / dt + lost) / max(e_prev, np.finfo(float).tiny)
        self.prev = (energy, power)
        a, b = riesz_perp_coeffs(g, c)
        drift = [math.hypot(ball_mean_coeffs(g, a, R), ball_mean_coeffs(g, b, R)) for R in self.radii]
        vmax = float(np.max(np.hypot(inv(g, a), inv(g, b))))
        psi = vals - inv(g, self.c0 * np.exp(-t * g.kmag))
        psi4 = 0.0 if t == 0 else t**-0.5 * float((np.sum(psi[self.region] ** 4) * g.dx**2) ** 0.25)
        linf = float(np.max(np.abs(vals)))
        asym = asymmetry(RealField(g, vals), self.group) if self.group is not None else float("nan")
        lp = {p: float((np.sum(np.abs(vals) ** p) * g.dx**2) ** (1 / p)) for p in (2, 4)}
        lp["inf"] = linf
        return StepDiagnostics(
            step=k, t=t, linf=linf, grad_linf=float(grad.max()), t_grad_linf=t * float(grad.max()),
            t2_hess_linf=t * t * float(hess.max()), energy=energy, dissipation=diss,
            energy_residual=resid, mean_drift=drift, psi_p4=psi4,
            max_principle_margin=linf - self.linf0, asymmetry=asym, cfl=dt * vmax / g.dx, lp_norms=lp)


# -- drivers -----------------------------------------------------------------------------

def _n_steps(cfg: SolverConfig) -> list[float]:
    n = max(0, int(math.ceil(cfg.t_end / cfg.dt - 1e-9)))
    steps = [cfg.dt] * n
    if n:
        steps[-1] = cfg.t_end - cfg.dt * (n - 1)
    return steps


def run(theta0: RealField, cfg: SolverConfig, drift=None) -> Trajectory:
    """Integrate to ``cfg.t_end``; the initial datum is first 2/3-filtered.

    ``drift`` (used by :func:`run_approximate`) replaces the constitutive law:
    a callable ``(t, history) -> (v1, v2)`` of nodal velocities.
    """
    g = theta0.grid
    mask = spectral_mask(g, cfg.group)
    c = _dealiased(g, theta0.values, mask)
    if cfg.group is not None:
        c = _symmetrize(g, c, cfg.group)
    traj = Trajectory(g, theta0=RealField(g, inv(g, c)))
    traj.append(0.0, traj.theta0)
    diag = Diagnostician(g, c, cfg.group) if cfg.diagnostics else None
    if diag:
        traj.diagnostics.append(diag.record(0, 0.0, c, cfg.dt))
    steppers: dict[float, Stepper] = {}
    history = _History() if drift is not None else None
    gauge = gauge_radius(g, cfg.group)
    t = 0.0
    steps = _n_steps(cfg)
    for k, h in enumerate(steps, start=1):
        st = steppers.get(h) or steppers.setdefault(h, Stepper(g, h, cfg.scheme))
        if drift is None:
            N = lambda u: advection(g, u, gauge=gauge, mask=mask)  # noqa: E731
        else:
            history.push(t, c)
            v = drift(t, history)
            if gauge is not None:
                v = tuple(x - ball_mean_coeffs(g, fwd(g, x), gauge) for x in v)
            N = lambda u, v=v: flux_divergence(g, u, v, mask)  # noqa: E731
        c = st.advance(c, N)
        t = t + h if k < len(steps) else cfg.t_end
        if not np.all(np.isfinite(c)):
            raise NumericalError("non-finite coefficients", k)
        if cfg.resymmetrize_every and cfg.group is not None and k % cfg.resymmetrize_every == 0:
            c = _symmetrize(g, c, cfg.group)
        if diag:
            d = diag.record(k, t, c, h)
            if d.cfl > 1:
                warnings.warn(f"CFL number {d.cfl:.2f} exceeds 1 at step {k}", RuntimeWarning)
            traj.diagnostics.append(d)
        if k % cfg.snapshot_every == 0 or k == len(steps):
            traj.append(t, _checked(g, c, k))
    return traj


def _symmetrize(grid: Grid, c: np.ndarray, G: SymmetryGroup) -> np.ndarray:
    return _dealiased(grid, project_windowed(grid, inv(grid, c), G), spectral_mask(grid, G))


# -- mollified approximate system ------------------------------------------------------

ETA_POWER = 4


def space_mollifier_symbol(kmag: np.ndarray, scale: float) -> np.ndarray:
    """Fourier symbol of ``eta_s(z) = s^-2 eta(z/s)``, ``eta ~ (1 - |z|^2)^4`` on the unit disc."""
    nu = ETA_POWER
    x = kmag * scale
    out = np.ones_like(x)
    nz = x > 1e-8
    out[nz] = 2 ** (nu + 1) * math.gamma(nu + 2) * jv(nu + 1, x[nz]) / x[nz] ** (nu + 1)
    return out


def _time_nodes(order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``tau`` in (-1, 1) and weights of the normalized ``(1 - tau^2)^4`` density."""
    x, w = roots_legendre(order)
    w = w * (1 - x**2) ** ETA_POWER
    return x, w / w.sum()


def cutoff(r: np.ndarray) -> np.ndarray:
    """Smooth radial cutoff: 1 on ``r <= 1``, 0 on ``r >= 2``."""
    s = np.clip(r - 1.0, 0.0, 1.0)

    def bump(u):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = bump(1 - s), bump(s)
    return a / (a + b)


def mollify_space_time(source, delta: float, t: float, causal: bool = False, order: int = 8) -> np.ndarray:
    """``b_delta(., t)`` (coefficients): space-time average at scale ``t delta``.

    ``source(s)`` returns coefficient arrays at time ``s``.  The centred window
    is ``[t(1 - delta), t(1 + delta)]``; ``causal=True`` uses ``[t(1 - 2 delta), t]``
    so only the past is needed.
    """
    tau, w = _time_nodes(order)
    times = t - t * delta * (1 + tau) if causal else t + t * delta * tau
    acc = None
    for s, ws in zip(times, w):
        c = ws * source(max(s, 0.0))
        acc = c if acc is None else acc + c
    return acc


def mollified_drift(b_traj: Trajectory, delta: float, rho: float, t: float,
                    causal: bool = False) -> VectorField:
    """``R_perp(b_{delta,rho})(., t)`` with ``b_{delta,rho} = b_delta psi(x / (rho t))``."""
    if t <= 0:
        raise ValueError("t must be positive")
    Mollify(delta, rho)
    lo, hi = (t * (1 - 2 * delta), t) if causal else (t * (1 - delta), t * (1 + delta))
    T = b_traj.times
    if lo < T[0] - 1e-12 or hi > T[-1] + 1e-12:
        raise ValueError(f"trajectory covers [{T[0]}, {T[-1]}], need [{lo}, {hi}]")
    g = b_traj.grid
    src = lambda s: fwd(g, b_traj.at(s).values)  # noqa: E731
    v1, v2 = _drift_from_source(g, src, delta, rho, t, causal)
    return VectorField(RealField(g, v1), RealField(g, v2))


def _drift_from_source(g: Grid, src, delta: float, rho: float, t: float, causal: bool):
    c = mollify_space_time(src, delta, t, causal) * space_mollifier_symbol(g.kmag, t * delta)
    b = inv(g, c) * cutoff(g.radius / (rho * t))
    a1, a2 = riesz_perp_coeffs(g, _dealiased(g, b))
    return inv(g, a1), inv(g, a2)


class _History:
    """Recent coefficient states for the causal time mollifier."""

    def __init__(self):
        self.t: list[float] = []
        self.c: list[np.ndarray] = []

    def push(self, t: float, c: np.ndarray) -> None:
        self.t.append(t)
        self.c.append(c)

    def prune(self, t_min: float) -> None:
        while len(self.t) > 2 and self.t[1] <= t_min:
            self.t.pop(0)
            self.c.pop(0)

    def __call__(self, s: float) -> np.ndarray:
        T = self.t
        if s <= T[0]:
            return self.c[0]
        if s >= T[-1]:
            return self.c[-1]
        i = int(np.searchsorted(T, s)) - 1
        w = (s - T[i]) / (T[i + 1] - T[i])
        return (1 - w) * self.c[i] + w * self.c[i + 1]


def run_approximate(theta0: RealField, cfg: SolverConfig) -> Trajectory:
    """Solve ``d_t theta + Lambda theta + div(v theta) = 0``, ``v = R_perp(theta_{delta,rho})``.

    The drift at step start is built from the solution's own past (causal window
    ``[t(1 - 2 delta), t]``) and frozen over the step.  At ``t = 0`` the window
    is empty and the drift is that of the initial datum.
    """
    if cfg.mollify is None:
        raise ValueError("run_approximate needs cfg.mollify")
    m = cfg.mollify
    g = theta0.grid

    def drift(t: float, history: _History):
        history.prune(t * (1 - 2 * m.delta))
        if t == 0:
            c = history.c[-1]
            a1, a2 = riesz_perp_coeffs(g, c)
            return inv(g, a1), inv(g, a2)
        return _drift_from_source(g, history, m.delta, m.rho, t, causal=True)

    return run(theta0, cfg, drift=drift)


# -- trajectory diagnostics ----------------------------------------------------------------

def psi_diagnostic(traj: Trajectory, theta0: RealField, p: float, radius: float | None = None) -> np.ndarray:
    """``t^{-2/p} ||theta(t) - e^{-t Lambda} theta0||_{L^p(B)}`` per snapshot, ``B = B_{0.9 l}``."""
    if p <= 2:
        raise ValueError("p must exceed 2")
    g = traj.grid
    c0 = fwd(g, theta0.values)
    mask = g.radius <= (0.9 * g.l if radius is None else radius)
    out = []
    for t, s in zip(traj.times, traj.snapshots):
        if t == 0:
            out.append(0.0)
            continue
        psi = s.values - inv(g, c0 * np.exp(-t * g.kmag))
        out.append(t ** (-2 / p) * float((np.sum(np.abs(psi[mask]) ** p) * g.dx**2) ** (1 / p)))
    return np.array(out)


def sample(f: RealField, points: np.ndarray, order: int = 3) -> np.ndarray:
    """Periodic spline interpolation of ``f`` at physical points ``(P, 2)``."""
    g = f.grid
    idx = (np.asarray(points, float) + g.l) / g.dx
    return ndimage.map_coordinates(f.values, idx.T, order=order, mode="grid-wrap")


def dss_error(traj: Trajectory, lam: float, probe_radius: float | None = None,
              times: Sequence[float] | None = None) -> float:
    """``max |theta(lam x, lam t) - theta(x, t)|`` over ``|x| <= probe_radius``.

    Space: cubic splines; time: linear interpolation between snapshots.  The
    default probe ball keeps ``lam x`` inside ``0.45`` of the box.
    """
    if lam <= 1:
        raise ValueError("lam must exceed 1")
    g = traj.grid
    R = probe_radius if probe_radius is not None else 0.9 * g.l / lam
    T = np.asarray(traj.times)
    if times is None:
        times = [t for t in T if t > 0 and lam * t <= T[-1] + 1e-12]
    if not times:
        raise ValueError("trajectory does not span [t, lam t] for any stored t > 0")
    mask = g.radius <= R
    X, Y = g.mesh
    pts = np.stack([X[mask], Y[mask]], axis=1)
    worst = 0.0
    for t in times:
        if lam * t > T[-1] + 1e-12 or t < T[0]:
            raise ValueError(f"t={t} outside the usable span")
        a = sample(traj.at(t), pts)
        b = sample(traj.at(min(lam * t, T[-1])), lam * pts)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst
