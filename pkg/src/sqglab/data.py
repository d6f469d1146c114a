"""Initial data on a grid: symmetric random fields, bumps, 0-homogeneous data."""
from __future__ import annotations

import numpy as np

from .field import Grid, RealField, fwd, inv
from .nonlocal_ops import HomogeneousProfile
from .symmetry import SymmetryGroup

TAPER = (0.85, 0.98)  # fractions of l where 0-homogeneous data blends to its mean


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity transition from 1 (``s <= 0``) to 0 (``s >= 1``)."""
    s = np.clip(s, 0.0, 1.0)

    def e(u):
        return np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)

    a, b = e(1 - s), e(s)
    return a / (a + b)


def mollify(f: RealField, scale: float) -> RealField:
    """Convolve with the normalized ``(1 - |z|^2)^4`` bump of radius ``scale``."""
    from .evolve import space_mollifier_symbol

    g = f.grid
    return RealField(g, inv(g, fwd(g, f.values) * space_mollifier_symbol(g.kmag, scale)))


def homogeneous(grid: Grid, profile: HomogeneousProfile, A: float = 1.0,
                mollify_cells: float = 2.0, taper: tuple = TAPER) -> RealField:
    """``A f(x/|x|)`` mollified at ``mollify_cells * dx``, blended to ``A mean(f)``
    between ``taper[0] l`` and ``taper[1] l`` so the field is periodic-compatible."""
    r = grid.radius
    vals = A * profile.at_angle(grid.angle)
    mean = A * float(profile.mean())
    w = smooth_step((r / grid.l - taper[0]) / (taper[1] - taper[0]))
    f = RealField(grid, mean + w * (vals - mean))
    return mollify(f, mollify_cells * grid.dx) if mollify_cells > 0 else f


def ring_bump(grid: Grid, r0: float = 1.0, width: float = 0.3, amp: float = 1.0,
              core: float | None = None) -> RealField:
    """Gaussian ring ``amp exp(-((r - r0)/width)^2)``.

    With ``core`` set, a central Gaussian of that width is subtracted so the net
    mass vanishes.  On the torus the periodic images of a radial field are not
    radial; their effect scales with the mass, so zero-mass rings keep the
    discrete dynamics radial to near round-off.
    """
    r = grid.radius
    vals = np.exp(-((r - r0) / width) ** 2)
    if core is not None:
        c = np.exp(-(r / core) ** 2)
        vals = vals - c * vals.sum() / c.sum()
    return RealField(grid, amp * vals)


def gaussian(grid: Grid, center=(0.0, 0.0), width: float = 0.5, amp: float = 1.0) -> RealField:
    X, Y = grid.mesh
    return RealField(grid, amp * np.exp(-((X - center[0]) ** 2 + (Y - center[1]) ** 2) / width**2))


def compact_bump(grid: Grid, center=(0.0, 0.0), radius: float = 1.0, amp: float = 1.0) -> RealField:
    """``amp * exp(1 - 1/(1 - |z|^2))`` on ``|z| < 1``, ``z = (x - center)/radius``."""
    X, Y = grid.mesh
    z2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2) / radius**2
    inside = z2 < 1
    out = np.zeros(grid.shape)
    out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - z2[inside]))
    return RealField(grid, out)


def symmetric_bump(grid: Grid, G: SymmetryGroup, center=(1.0, 0.5), width: float = 0.3,
                   amp: float = 1.0, compact: bool = False) -> RealField:
    """Signed sum of bumps at the group images of ``center`` (exactly symmetric).

    Gaussian bumps of width ``width``, or with ``compact`` the
    :func:`compact_bump` of radius ``width``.
    """
    if G.kind == "radial":
        r0 = float(np.hypot(*center))
        return ring_bump(grid, r0, width, amp)
    X, Y = grid.mesh
    out = np.zeros(grid.shape)
    c = np.asarray(center, float)
    for g in G.elements():
        p = g.matrix() @ c
        if compact:
            out += g.det * compact_bump(grid, tuple(p), width).values
        else:
            out += g.det * np.exp(-((X - p[0]) ** 2 + (Y - p[1]) ** 2) / width**2)
    return RealField(grid, amp * out)


def random_symmetric(grid: Grid, G: SymmetryGroup, seed: int, width: float | None = None,
                     n_harmonics: int = 2, linf: float | None = 1.0) -> RealField:
    """Random smooth ``G``-symmetric field built from allowed angular harmonics.

    ``sum_j (r/s_j)^{jm} exp(-r^2/(2 s_j^2)) (a_j cos(jm phi) + b_j sin(jm phi))``:
    each term is a polynomial in ``(x, y)`` times a Gaussian, hence smooth.
    Reflection-symmetric groups keep the sine terms only; radial keeps ``j = 0``.
    The field is 2/3-filtered and scaled to ``||.||_inf = linf``.
    """
    rng = np.random.default_rng(seed)
    s0 = 0.12 * grid.l if width is None else width
    r, phi = grid.radius, grid.angle
    m = 0 if G.kind == "radial" else G.m
    js = [0] if G.kind == "radial" else range(0 if G.kind == "rotation" else 1, n_harmonics + 1)
    out = np.zeros(grid.shape)
    for j in js:
        s = s0 * rng.uniform(0.8, 1.2)
        k = j * m
        peak = (k ** (k / 2) * np.exp(-k / 2)) if k else 1.0
        env = (r / s) ** k * np.exp(-r**2 / (2 * s**2)) / peak
        a, b = rng.normal(size=2)
        if G.kind == "rotation_reflection":
            a = 0.0
        out += env * (a * np.cos(k * phi) + b * np.sin(k * phi))
    c = np.where(grid.dealias_mask, fwd(grid, out), 0.0)
    vals = inv(grid, c)
    if linf is not None:
        vals *= linf / np.max(np.abs(vals))
    return RealField(grid, vals)


def random_profile(G: SymmetryGroup, seed: int, M: int = 256, n_harmonics: int = 3) -> HomogeneousProfile:
    """Random smooth ``G``-symmetric angular profile ``sum_j j^-2 (a_j cos + b_j sin)(j m phi)``.

    Reflection-symmetric groups keep the sine terms; ``rotation`` adds a mean
    and cosines; ``radial`` gives a random constant.
    """
    rng = np.random.default_rng(seed)
    phi = HomogeneousProfile.angles_for(M)
    if G.kind == "radial":
        return HomogeneousProfile(np.full(M, rng.normal()), G)
    vals = np.zeros(M)
    if G.kind == "rotation":
        vals += rng.normal()
    for j in range(1, n_harmonics + 1):
        a, b = rng.normal(size=2)
        if G.kind == "rotation_reflection":
            a = 0.0
        k = j * G.m
        vals += (a * np.cos(k * phi) + b * np.sin(k * phi)) / j**2
    return HomogeneousProfile(vals, G)
