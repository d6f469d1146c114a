"""Fractional Laplacian, Riesz transforms, Poisson semigroup and friends.

Multiplier conventions (``kappa`` the physical wavevector)::

    Lambda^s      |kappa|^s
    R             i kappa / |kappa|          (R = grad (-Delta)^(-1/2))
    R_perp        i (-kappa_2, kappa_1) / |kappa|
    e^{-t Lambda} exp(-t |kappa|)

The zero mode of ``R`` and ``R_perp`` is set to zero.  For symmetric data this
is the symmetric representative: every ball mean of the velocity vanishes.

In physical space ``R f = K * f`` with ``K(y) = c y / |y|^3`` and
``c = RIESZ_KERNEL_CONSTANT = -1/(2 pi)``; the sign follows from the multiplier
above (``K = grad`` of the kernel ``1/(2 pi |y|)`` of ``Lambda^-1``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre

from .field import Grid, RealField, SpectralField, VectorField, fwd, inv
from .symmetry import SymmetryGroup

RIESZ_KERNEL_CONSTANT = -1.0 / (2.0 * np.pi)


# -- Fourier multipliers ------------------------------------------------------------

def fractional_laplacian(F: SpectralField, s: float) -> SpectralField:
    if not 0 < s <= 2:
        raise ValueError(f"s must lie in (0, 2], got {s}")
    return SpectralField(F.grid, F.coeffs * F.grid.kmag**s)


def lambda_coeffs(grid: Grid, c: np.ndarray, s: float = 1.0) -> np.ndarray:
    return c * grid.kmag**s


def _unit_kappa(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    k1, k2 = grid.kappa
    kk = grid.kmag.copy()
    kk[0, 0] = 1.0
    return k1 / kk, k2 / kk


def riesz_coeffs(grid: Grid, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u1, u2 = _unit_kappa(grid)
    return 1j * u1 * c, 1j * u2 * c


def riesz_perp_coeffs(grid: Grid, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u1, u2 = _unit_kappa(grid)
    return -1j * u2 * c, 1j * u1 * c


def riesz(F: SpectralField) -> VectorField:
    g = F.grid
    a, b = riesz_coeffs(g, F.coeffs)
    return VectorField(RealField(g, inv(g, a)), RealField(g, inv(g, b)))


def riesz_perp(F: SpectralField) -> VectorField:
    """Velocity ``v = R_perp theta`` in the symmetric (zero-mean) gauge."""
    g = F.grid
    a, b = riesz_perp_coeffs(g, F.coeffs)
    return VectorField(RealField(g, inv(g, a)), RealField(g, inv(g, b)))


def poisson_semigroup(F: SpectralField, t: float) -> SpectralField:
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return SpectralField(F.grid, F.coeffs * np.exp(-t * F.grid.kmag))


def poisson_kernel(x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Kernel of ``e^{-t Lambda}`` on the plane, ``t / (2 pi (|x|^2 + t^2)^(3/2))``."""
    return t / (2.0 * np.pi * (x**2 + y**2 + t**2) ** 1.5)


# -- 0-homogeneous profiles -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HomogeneousProfile:
    """0-homogeneous function ``f(x) = value(arg x)`` from uniform angular samples.

    ``values`` has shape ``(M,)`` (scalar) or ``(M, 2)`` (vector valued); sample
    ``j`` sits at angle ``2 pi j / M``.
    """

    values: np.ndarray
    group: SymmetryGroup | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        M = v.shape[0]
        if M < 64 or M & (M - 1):
            raise ValueError(f"sample count must be a power of two >= 64, got {M}")
        if v.ndim not in (1, 2) or (v.ndim == 2 and v.shape[1] != 2):
            raise ValueError("values must have shape (M,) or (M, 2)")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.group is not None:
            if v.ndim != 1:
                raise ValueError("symmetry tags are only supported for scalar profiles")
            defect = symmetry_defect(self, self.group)
            if defect > 1e-10 * max(1.0, float(np.abs(v).max())):
                raise ValueError(f"samples are not {self.group}-symmetric (defect {defect:.2e})")

    @classmethod
    def from_function(cls, func: Callable[[np.ndarray], np.ndarray], M: int = 256,
                      group: SymmetryGroup | None = None) -> "HomogeneousProfile":
        return cls(func(cls.angles_for(M)), group)

    @staticmethod
    def angles_for(M: int) -> np.ndarray:
        return 2.0 * np.pi * np.arange(M) / M

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def angles(self) -> np.ndarray:
        return self.angles_for(self.size)

    def harmonics(self) -> np.ndarray:
        """Complex Fourier coefficients ``c_k`` with ``f = sum_k c_k e^{i k phi}``."""
        return np.fft.fft(self.values, axis=0) / self.size

    def mean(self):
        return self.values.mean(axis=0)

    def derivative(self) -> np.ndarray:
        """Angular derivative ``f'(phi)`` at the sample angles (spectral)."""
        M = self.size
        k = np.fft.fftfreq(M, 1.0 / M)
        k[M // 2] = 0.0
        c = np.fft.fft(self.values, axis=0)
        shape = (M,) + (1,) * (self.values.ndim - 1)
        return np.fft.ifft(1j * k.reshape(shape) * c, axis=0).real

    def _table(self) -> np.ndarray:
        if "table" not in self._cache:
            M, fine = self.size, 1 << 16
            c = np.fft.fft(self.values, axis=0)
            pad = np.zeros((fine,) + c.shape[1:], complex)
            h = M // 2
            pad[:h] = c[:h]
            pad[-h + 1:] = c[-h + 1:]
            pad[h] = 0.5 * c[h]
            pad[-h] = 0.5 * c[h]
            self._cache["table"] = np.fft.ifft(pad, axis=0).real * (fine / M)
        return self._cache["table"]

    def at_angle(self, phi: np.ndarray) -> np.ndarray:
        """Trigonometric interpolant evaluated at arbitrary angles."""
        table = self._table()
        fine = table.shape[0]
        s = np.mod(np.asarray(phi, float), 2 * np.pi) * (fine / (2 * np.pi))
        i0 = np.floor(s).astype(np.int64) % fine
        w = s - np.floor(s)
        i1 = (i0 + 1) % fine
        if table.ndim == 1:
            return (1 - w) * table[i0] + w * table[i1]
        return (1 - w)[..., None] * table[i0] + w[..., None] * table[i1]

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.at_angle(np.arctan2(y, x))

    def scaled(self, A: float) -> "HomogeneousProfile":
        return HomogeneousProfile(A * self.values, self.group)


def symmetry_defect(f: HomogeneousProfile, G: SymmetryGroup) -> float:
    """Size of the harmonics forbidden by ``G`` (signed action on samples)."""
    c = f.harmonics()
    M = f.size
    k = np.fft.fftfreq(M, 1.0 / M).astype(int)
    if G.kind == "radial":
        allowed = k == 0
    else:
        allowed = k % G.m == 0
    bad = float(np.max(np.abs(c[~allowed]), initial=0.0))
    if G.kind == "rotation_reflection":
        # S.f(phi) = -f(-phi): only sine terms survive, c_k = -c_{-k}
        bad = max(bad, float(np.max(np.abs(c + np.roll(c[::-1], 1)))))
    return bad


# -- modified Riesz transform by quadrature ------------------------------------------

@dataclass(frozen=True)
class RieszQuadrature:
    """Polar quadrature controls for :func:`modified_riesz`."""

    J: int = 12  # truncation radius 2**J
    n_angle: int = 256  # directions over the half circle (antipodal pairs)
    panel: float = 0.25  # width of Gauss-Legendre panels in log(radius)
    order: int = 8
    rho_min: float = 1e-5

    def refined(self) -> "RieszQuadrature":
        return RieszQuadrature(self.J, 2 * self.n_angle, self.panel / 2, self.order, self.rho_min)


def _log_nodes(a: float, b: float, breaks: Sequence[float], q: RieszQuadrature):
    """Composite Gauss-Legendre nodes/weights in ``u = log rho`` on ``[a, b]``."""
    pts = sorted({a, b, *[u for u in breaks if a < u < b]})
    xg, wg = roots_legendre(q.order)
    nodes, weights = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        m = max(1, int(np.ceil((hi - lo) / q.panel)))
        edges = np.linspace(lo, hi, m + 1)
        for e0, e1 in zip(edges[:-1], edges[1:]):
            h = 0.5 * (e1 - e0)
            nodes.append(e0 + h * (xg + 1))
            weights.append(h * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _as_callable(f) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if isinstance(f, HomogeneousProfile):
        if f.values.ndim != 1:
            raise ValueError("modified_riesz needs a scalar profile")
        return f
    if callable(f):
        return f
    raise TypeError("f must be a HomogeneousProfile or a callable f(x, y)")


def modified_riesz(f, points: np.ndarray, quad: RieszQuadrature = RieszQuadrature(),
                   singular_radius: float | None = None, gauge: bool = True,
                   perp: bool = False, constant: float = RIESZ_KERNEL_CONSTANT) -> np.ndarray:
    """Riesz transform of non-decaying data, defined up to the standard constant::

        R f(x) = R(1_{B_1} f)(x) + pv int [K(x - y) - K(-y)] 1_{|y|>1} f(y) dy

    evaluated at ``points`` (shape ``(P, 2)``).  The principal value at ``y = x``
    is taken in polar coordinates centred at ``x`` with antipodal direction
    pairing; the disc ``|y - x| < rho_min`` is replaced by its Taylor value
    ``-c pi rho_min grad f(x)``.  ``singular_radius`` (default: ``|x|`` for
    profiles) adds a panel break where the rays cross the profile's singular
    point at the origin.  ``gauge=False`` drops the ``K(-y)`` subtraction (the
    plain principal value, fine for decaying data); ``perp=True`` returns
    ``R_perp f = (-R_2 f, R_1 f)``.  Returns an array of shape ``(P, 2)``.
    """
    func = _as_callable(f)
    pts = np.atleast_2d(np.asarray(points, float))
    if pts.shape[1] != 2:
        raise ValueError("points must have shape (P, 2)")
    c = constant
    rho_max = 2.0**quad.J
    na = quad.n_angle
    phi = np.pi * (np.arange(na) + 0.5) / na
    e = np.stack([np.cos(phi), np.sin(phi)], axis=1)  # (na, 2)
    dphi = np.pi / na
    is_profile = isinstance(f, HomogeneousProfile)

    out = np.empty((len(pts), 2))
    for p, x in enumerate(pts):
        r = float(np.hypot(*x))
        if is_profile and r < 1e-12:
            raise ValueError("cannot evaluate a 0-homogeneous profile's transform at the origin")
        breaks = []
        sr = r if (singular_radius is None and is_profile) else singular_radius
        if sr:
            breaks.append(np.log(sr))
        rho_min = quad.rho_min * (sr if sr else 1.0)
        u, w = _log_nodes(np.log(rho_min), np.log(rho_max), breaks, quad)
        rho = np.exp(u)
        # y = x +/- rho e ; integrand in u: e [f(x + rho e) - f(x - rho e)] (d rho / rho = du)
        Y1 = x[0] + rho[:, None] * e[None, :, 0]
        Y2 = x[1] + rho[:, None] * e[None, :, 1]
        Z1 = x[0] - rho[:, None] * e[None, :, 0]
        Z2 = x[1] - rho[:, None] * e[None, :, 1]
        diff = func(Y1, Y2) - func(Z1, Z2)  # (nu, na)
        ang = diff @ e * dphi  # (nu, 2)
        main = -c * (w @ ang)
        h = 1e-3 * rho_min
        grad = np.array([func(x[0] + h, x[1]) - func(x[0] - h, x[1]),
                         func(x[0], x[1] + h) - func(x[0], x[1] - h)], float) / (2 * h)
        taylor = -c * np.pi * rho_min * grad
        out[p] = main + taylor
    if gauge:
        out -= _gauge_term(func, quad, c)
    if perp:
        out = np.stack([-out[:, 1], out[:, 0]], axis=1)
    return out


def _gauge_term(func, quad: RieszQuadrature, c: float) -> np.ndarray:
    """``int_{1<|y|<2^J} K(-y) f(y) dy`` on an origin-centred polar grid."""
    na = 2 * quad.n_angle
    phi = 2 * np.pi * np.arange(na) / na
    e = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    u, w = _log_nodes(0.0, quad.J * np.log(2.0), [], quad)
    rho = np.exp(u)
    vals = func(rho[:, None] * e[None, :, 0], rho[:, None] * e[None, :, 1])
    # K(-y) dy = -c e / rho^2 * rho d rho dphi = -c e du dphi
    return -c * (w @ (vals @ e)) * (2 * np.pi / na)


def riesz_tail_bound(points: np.ndarray, sup_f: float, J: int = 12) -> np.ndarray:
    """Crude bound ``|c| * 2 pi * |x| / 2^J * sup|f|`` on the neglected tail."""
    r = np.hypot(*np.atleast_2d(points).T)
    return abs(RIESZ_KERNEL_CONSTANT) * 2 * np.pi * r / 2.0**J * sup_f


def riesz_profile(f: HomogeneousProfile, quad: RieszQuadrature = RieszQuadrature(),
                  n_eval: int | None = None) -> HomogeneousProfile:
    """``R f`` of a 0-homogeneous profile, itself 0-homogeneous, sampled on the unit circle."""
    M = n_eval or f.size
    ang = HomogeneousProfile.angles_for(M)
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return HomogeneousProfile(modified_riesz(f, pts, quad))


def riesz_profile_exact(f: HomogeneousProfile) -> HomogeneousProfile:
    """Closed form of ``R f`` for 0-homogeneous ``f`` without +-1 harmonics.

    With the multiplier ``i kappa/|kappa|``, ``(R_1 + i R_2) e^{i n phi}`` equals
    ``-n/(n+1) e^{i(n+1)phi}`` for ``n >= 0`` and ``|n|/(|n|-1) e^{i(n+1)phi}`` for
    ``n <= -2`` (Fourier transforms of homogeneous harmonics).
    """
    c = f.harmonics()
    M = f.size
    k = np.fft.fftfreq(M, 1.0 / M).astype(int)
    if np.any(np.abs(c[np.abs(k) == 1]) > 1e-12 * max(1.0, np.abs(c).max())):
        raise ValueError("profile has +-1 harmonics; its Riesz transform is not 0-homogeneous")
    z = np.zeros(M, complex)
    for kk, ck in zip(k, c):
        if kk == 0 or abs(kk) == 1 or abs(kk + 1) >= M // 2:
            continue
        factor = -kk / (kk + 1) if kk > 0 else abs(kk) / (abs(kk) - 1)
        z[(kk + 1) % M] += factor * ck
    Z = np.fft.ifft(z) * M
    return HomogeneousProfile(np.stack([Z.real, Z.imag], axis=1))


def poisson_homogeneous(f: HomogeneousProfile, x: np.ndarray, y: np.ndarray, t: float = 1.0,
                        gradient: bool = False):
    """``e^{-t Lambda} f`` on the plane for 0-homogeneous ``f``, in closed form.

    Each harmonic ``e^{i n phi}`` is mapped to ``q^{|n|} e^{i n phi}`` with
    ``q = rho / (1 + sqrt(1 + rho^2))``, ``rho = |x|/t``.  Vector profiles are
    extended componentwise.  With ``gradient`` the spatial gradient is returned
    as well, with shape ``value.shape + (2,)``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    x, y = np.asarray(x, float), np.asarray(y, float)
    rho = np.hypot(x, y) / t
    phi = np.arctan2(y, x)
    sq = np.sqrt(1.0 + rho * rho)
    q = rho / (1.0 + sq)
    vals = f.values if f.values.ndim == 2 else f.values[:, None]
    out = np.zeros(x.shape + (vals.shape[1],))
    grad = np.zeros(out.shape + (2,)) if gradient else None
    cosp, sinp = np.cos(phi), np.sin(phi)
    for j in range(vals.shape[1]):
        c = np.fft.fft(vals[:, j]) / len(vals)
        keep = np.abs(c) > 1e-14 * max(np.abs(c).max(), 1e-300)
        out[..., j] += c[0].real
        for n in np.nonzero(keep[1:len(c) // 2])[0] + 1:
            e = 2.0 * c[n] * np.exp(1j * n * phi)  # n and -n together
            qn1 = q ** (n - 1)
            out[..., j] += (qn1 * q * e).real
            if gradient:
                base = qn1 / (t * (1.0 + sq)) * e
                dr, dang = (n / sq * base).real, (1j * n * base).real
                grad[..., j, 0] += cosp * dr - sinp * dang
                grad[..., j, 1] += sinp * dr + cosp * dang
    if f.values.ndim == 1:
        out = out[..., 0]
        grad = grad[..., 0, :] if gradient else None
    return (out, grad) if gradient else out


# -- dyadic shells --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DyadicDecomposition:
    """``f = P_{<=1} f + sum_{j=2}^J P_j f + tail`` on the sample points."""

    core: np.ndarray
    blocks: list  # list of (j, values)
    tail: np.ndarray
    scale: float = 1.0

    def reassemble(self) -> np.ndarray:
        total = self.core.copy()
        for _, b in self.blocks:
            total = total + b
        return total + self.tail


def dyadic_blocks(f, J: int, scale: float = 1.0, points: np.ndarray | None = None) -> DyadicDecomposition:
    """Split samples of ``f`` into the ball ``B(2 scale)``, shells ``B(2^j)\\B(2^{j-1})`` and the rest.

    ``f`` is either a :class:`RealField` or an array of values at ``points`` (``(P, 2)``).
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if isinstance(f, RealField):
        vals, r = f.values, f.grid.radius
    else:
        if points is None:
            raise ValueError("points are required for raw sample values")
        vals = np.asarray(f, float)
        r = np.hypot(*np.asarray(points, float).T)
    zero = np.zeros_like(vals)
    inside = lambda j: r < scale * 2.0**j  # noqa: E731
    core = np.where(inside(1), vals, zero)
    blocks = [(j, np.where(inside(j) & ~inside(j - 1), vals, zero)) for j in range(2, J + 1)]
    tail = np.where(inside(max(J, 1)), zero, vals)
    return DyadicDecomposition(core, blocks, tail, scale)


# -- Ju's pointwise inequality -------------------------------------------------------

def ju_gap(theta: RealField, q: float) -> RealField:
    """``q |t|^{q-2} t Lambda t - 2 |t|^{q/2} Lambda(|t|^{q/2})`` pointwise (non-negative in theory).

    ``|theta|^{q/2}`` is taken at the nodes and passed to the grid ``Lambda``
    unfiltered: truncating its kinks at a cutoff leaves Gibbs undershoot that
    shows up as a spurious negative gap.
    """
    if q < 2:
        raise ValueError(f"q must be >= 2, got {q}")
    g = theta.grid
    t = theta.values
    lam_t = inv(g, lambda_coeffs(g, fwd(g, t)))
    a = np.abs(t) ** (q / 2)
    lam_a = inv(g, lambda_coeffs(g, fwd(g, a)))
    first = q * np.abs(t) ** (q - 2) * t * lam_t if q != 2 else 2.0 * t * lam_t
    return RealField(g, first - 2.0 * a * lam_a)


def ju_scale(theta: RealField, q: float) -> float:
    """``||theta||_inf^{q-1} ||Lambda theta||_inf``, the size of the first term."""
    g = theta.grid
    lam_t = inv(g, lambda_coeffs(g, fwd(g, theta.values)))
    return theta.linf() ** (q - 1) * float(np.max(np.abs(lam_t)))
