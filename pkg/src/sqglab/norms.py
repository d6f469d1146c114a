"""Weighted ball-average norms and the seminorms used by the diagnostics.

``X_p``: ``sup_{R in ladder} (avg_{B_R} |f|^p)^{1/p}``.  Ball averages use
midpoint quadrature on grid nodes for fields and the exact radial-angular
factorization ``avg_{B_R} |f|^p = (2 pi)^-1 int |f(phi)|^p dphi`` for
0-homogeneous profiles.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .field import Grid, RealField, fwd, gradient_coeffs, inv
from .nonlocal_ops import HomogeneousProfile, RieszQuadrature, lambda_coeffs, riesz_coeffs, riesz_profile

PROFILE_LADDER_J = 10


@dataclass(frozen=True)
class NormConfig:
    R0: float = 1.0
    J: int | None = None  # ladder length; default: fit the field's probe region, or 10 for profiles
    p: float = 2.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.R0 <= 0:
            raise ValueError("R0 must be positive")

    def ladder(self, grid: Grid | None = None) -> np.ndarray:
        J = self.J
        if J is None:
            if grid is None:
                J = PROFILE_LADDER_J
            else:
                J = int(np.floor(np.log2(0.9 * grid.l / self.R0) + 1e-12))
                if J < 0:
                    raise ValueError(f"R0={self.R0} exceeds the probe region 0.9 l")
        return self.R0 * 2.0 ** np.arange(J + 1)

    def with_p(self, p: float) -> "NormConfig":
        return NormConfig(self.R0, self.J, p, self.alpha)


def _ball_nodes(grid: Grid, R: float) -> np.ndarray:
    if R < grid.dx:
        raise ValueError(f"ball radius {R} is below the grid spacing {grid.dx}")
    return grid.ball_mask(R)


def ball_averages(f, cfg: NormConfig, oscillation: bool = False) -> np.ndarray:
    """Per-radius ``(avg_{B_R} |f - m|^p)^{1/p}``, ``m`` the ball mean when ``oscillation``."""
    p = cfg.p
    if isinstance(f, HomogeneousProfile):
        vals = f.values
        if vals.ndim == 2:
            vals = np.hypot(vals[:, 0], vals[:, 1]) if not oscillation else vals
        R = cfg.ladder()
        if oscillation:
            d = vals - vals.mean(axis=0)
            d = np.hypot(d[:, 0], d[:, 1]) if d.ndim == 2 else d
        else:
            d = vals
        val = float(np.mean(np.abs(d) ** p)) ** (1.0 / p)
        return np.full(len(R), val)
    if isinstance(f, RealField):
        out = []
        for R in cfg.ladder(f.grid):
            v = f.values[_ball_nodes(f.grid, R)]
            if oscillation:
                v = v - v.mean()
            out.append(float(np.mean(np.abs(v) ** p)) ** (1.0 / p))
        return np.array(out)
    raise TypeError("expected a RealField or HomogeneousProfile")


def xp_norm(f, cfg: NormConfig) -> float:
    return float(np.max(ball_averages(f, cfg)))


def xp_osc_norm(f, cfg: NormConfig) -> float:
    return float(np.max(ball_averages(f, cfg, oscillation=True)))


# -- exterior Hoelder seminorm ------------------------------------------------------

PAIR_CHUNK = 1024


def ydot_alpha(f, cfg: NormConfig, n_pairs: int = 4096, seed: int = 0) -> float:
    """Lower estimator of ``sup_r r^alpha [f]_{C^alpha(R^2 minus B_r)}`` by random pairs.

    For every ladder radius ``r`` pairs ``(x, x')`` outside ``B_r`` with
    ``|x - x'| <= r/2`` are drawn with a fixed seed: half at the maximal
    separation ``r/2``, half with log-uniform separation.  Pairs come in seeded
    chunks, so raising ``n_pairs`` only adds pairs and the estimate can only grow.
    """
    if isinstance(f, HomogeneousProfile):
        if f.values.ndim != 1:
            raise ValueError("ydot_alpha needs a scalar profile")
        radii, chunk = cfg.ladder(), _profile_pairs
    elif isinstance(f, RealField):
        radii, chunk = cfg.ladder(f.grid), _field_pairs
    elif callable(f):
        radii, chunk = cfg.ladder(), _profile_pairs
    else:
        raise TypeError("expected a RealField or HomogeneousProfile")
    a = cfg.alpha
    best = 0.0
    n_chunks = max(1, -(-n_pairs // PAIR_CHUNK))
    for i, r in enumerate(radii):
        for c in range(n_chunks):
            rng = np.random.default_rng([seed, i, c])
            diff, dist = chunk(f, r, rng, PAIR_CHUNK)
            if len(diff):
                best = max(best, r**a * float(np.max(diff / dist**a)))
    return best


def _profile_pairs(f, r: float, rng, n: int):
    rad = r * np.exp(rng.uniform(0, np.log(4.0), n))
    phi = rng.uniform(0, 2 * np.pi, n)
    sep = _separations(rng, r, n, smallest=r * 1e-6)
    turn = rng.uniform(0, 2 * np.pi, n)
    x1, y1 = rad * np.cos(phi), rad * np.sin(phi)
    x2, y2 = x1 + sep * np.cos(turn), y1 + sep * np.sin(turn)
    ok = np.hypot(x2, y2) > r
    return np.abs(f(x1, y1) - f(x2, y2))[ok], sep[ok]


def _field_pairs(f: RealField, r: float, rng, n: int):
    g = f.grid
    dx = g.dx
    region = g.radius <= 0.9 * g.l
    cand = np.argwhere(region & (g.radius > r))
    if len(cand) == 0:
        return np.empty(0), np.empty(0)
    idx = cand[rng.integers(0, len(cand), n)]
    sep = _separations(rng, r, n, smallest=dx)
    turn = rng.uniform(0, 2 * np.pi, n)
    off = np.rint(np.stack([sep * np.cos(turn), sep * np.sin(turn)], 1) / dx).astype(int)
    off[np.all(off == 0, axis=1), 0] = 1
    j = idx + off
    inside = np.all((j >= 0) & (j < g.n), axis=1)
    j = np.clip(j, 0, g.n - 1)
    ok = inside & region[j[:, 0], j[:, 1]] & (g.radius[j[:, 0], j[:, 1]] > r)
    dist = dx * np.hypot(*off.T)
    ok &= dist <= r / 2
    diff = np.abs(f.values[idx[:, 0], idx[:, 1]] - f.values[j[:, 0], j[:, 1]])
    return diff[ok], dist[ok]


def _separations(rng, r: float, n: int, smallest: float) -> np.ndarray:
    half = n // 2
    hi = r / 2
    lo = min(smallest, hi)
    logs = rng.uniform(np.log(lo), np.log(hi), n - half)
    return np.concatenate([np.full(half, hi), np.exp(logs)])


@dataclass(frozen=True)
class RefinementReport:
    estimates: list
    slope: float  # log-log growth of the estimate against the pair count
    unbounded: bool


def ydot_refinement(f, cfg: NormConfig, n_pairs: int = 1024, levels: int = 6,
                    seed: int = 0, max_slope: float = 0.1) -> RefinementReport:
    """Estimator under repeated doubling of the pair count.

    A finite seminorm saturates; a jump makes the estimate grow like a power of
    the pair count (short straddling pairs keep appearing).  ``unbounded`` is
    set when the fitted log-log slope exceeds ``max_slope``.
    """
    counts = n_pairs * 2.0 ** np.arange(levels)
    est = [ydot_alpha(f, cfg, int(c), seed) for c in counts]
    if min(est) <= 0:
        return RefinementReport(est, 0.0, False)
    slope = float(np.polyfit(np.log(counts), np.log(est), 1)[0])
    return RefinementReport(est, slope, slope > max_slope)


# -- composite data norm --------------------------------------------------------------

@dataclass(frozen=True)
class YbbRecord:
    linf: float
    ydot: float
    riesz_linf: float
    grad_l2weak: float
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.linf + self.ydot + self.riesz_linf + self.grad_l2weak)


def weak_l2(values: np.ndarray, cell_area: float) -> float:
    """``sup_lambda lambda * |{|g| > lambda}|^{1/2}`` for a piecewise-constant grid function.

    Exact over all ``lambda``: just below the k-th largest value the level set
    holds ``k`` cells.
    """
    g = np.sort(np.abs(np.ravel(values)))[::-1]
    k = np.arange(1, len(g) + 1)
    return float(np.max(g * np.sqrt(k * cell_area), initial=0.0))


def ybb_alpha(theta0, cfg: NormConfig, quad: RieszQuadrature = RieszQuadrature(),
              n_pairs: int = 4096, seed: int = 0) -> YbbRecord:
    if isinstance(theta0, HomogeneousProfile):
        vals = theta0.values
        linf = float(np.max(np.abs(vals)))
        if linf == 0.0:
            return YbbRecord(0.0, 0.0, 0.0, 0.0)
        rf = riesz_profile(theta0, quad)
        riesz_linf = float(np.max(np.hypot(rf.values[:, 0], rf.values[:, 1])))
        # |grad f| = |f'(phi)| / r, so |{|grad f| > lam}| = (2 lam^2)^-1 int f'^2 dphi
        dphi = 2 * np.pi / theta0.size
        grad = float(np.sqrt(0.5 * np.sum(theta0.derivative() ** 2) * dphi))
        return YbbRecord(linf, ydot_alpha(theta0, cfg, n_pairs, seed), riesz_linf, grad)
    if isinstance(theta0, RealField):
        g = theta0.grid
        c = fwd(g, theta0.values)
        r1, r2 = riesz_coeffs(g, c)
        riesz_linf = float(np.max(np.hypot(inv(g, r1), inv(g, r2))))
        d1, d2 = gradient_coeffs(g, c)
        grad = weak_l2(np.hypot(inv(g, d1), inv(g, d2)), g.dx**2)
        return YbbRecord(theta0.linf(), ydot_alpha(theta0, cfg, n_pairs, seed), riesz_linf, grad)
    raise TypeError("expected a RealField or HomogeneousProfile")


# -- trajectory norms -------------------------------------------------------------------

def _snapshots(traj):
    snaps = list(getattr(traj, "snapshots", []))
    if not snaps:
        raise ValueError("trajectory has no snapshots")
    return np.asarray(traj.times, float), snaps


def at_norm(traj, R0: float = 1.0, J: int | None = None) -> float:
    """``sup_t ||theta(t)||_{X_2}`` with ladder starting at ``R0``."""
    _, snaps = _snapshots(traj)
    cfg = NormConfig(R0=R0, J=J, p=2.0)
    return max(xp_norm(s, cfg) for s in snaps)


def et_norm(traj, R0: float = 1.0, J: int | None = None) -> float:
    """``(sup_R R^-2 int_0^T int_{B_R} |Lambda^{1/2} theta|^2)^{1/2}`` by trapezoid in time."""
    times, snaps = _snapshots(traj)
    if len(snaps) < 2:
        raise ValueError("et_norm needs at least two snapshots")
    g = snaps[0].grid
    radii = NormConfig(R0=R0, J=J).ladder(g)
    masks = [_ball_nodes(g, R) for R in radii]
    dens = []
    for s in snaps:
        h = inv(g, lambda_coeffs(g, fwd(g, s.values), 0.5))
        h2 = h * h * g.dx**2
        dens.append([float(h2[m].sum()) for m in masks])
    integ = trapezoid(np.array(dens), times, axis=0)
    return float(np.sqrt(np.max(integ / radii**2)))


@dataclass
class _Window:
    times: list
    snapshots: list


def truncate(traj, T: float) -> _Window:
    """The snapshots of ``traj`` with ``t <= T``."""
    k = int(np.searchsorted(np.asarray(traj.times), T + 1e-9 * max(1.0, T)))
    if k < 2:
        raise ValueError(f"fewer than two snapshots up to T={T}")
    return _Window(list(traj.times[:k]), list(traj.snapshots[:k]))


def energy_budget(traj, T: float, R0: float = 1.0) -> float:
    """``||theta||_{A_T}^2 + ||theta||_{E_T}^2`` with the ladder starting at ``R0``."""
    w = truncate(traj, T)
    return at_norm(w, R0) ** 2 + et_norm(w, R0) ** 2


def budget_scaled(traj, t_star: float, r_max: float, factor: float = 2.0):
    """Budgets at ``T = 2^k t_star`` with ``R0 = T / t_star`` for every ``R0 <= r_max``
    inside the stored span, as ``[(T, R0, budget), ...]``."""
    out, c = [], 1.0
    while c <= r_max and c * t_star <= traj.times[-1] + 1e-9:
        out.append((c * t_star, c, energy_budget(traj, c * t_star, c)))
        c *= factor
    return out


def find_t_star(traj, bound: float, r_max: float, candidates=None) -> float | None:
    """Largest candidate ``T*`` such that every ``T = 2^k T*`` obeys
    ``budget(T, R0 = T/T*) <= bound``; ``None`` when no candidate works."""
    cands = sorted(candidates if candidates is not None else [t for t in traj.times if t > 0], reverse=True)
    for ts in cands:
        rows = budget_scaled(traj, ts, r_max)
        if rows and all(b <= bound for _, _, b in rows):
            return float(ts)
    return None
