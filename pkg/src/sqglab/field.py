"""Periodic grids, scalar/vector fields and their Fourier representation.

The plane is replaced by the torus ``[-l, l)^2`` sampled at ``n`` points per
axis.  Array axis 0 is ``x`` and axis 1 is ``y`` (``values[i, j] = f(x_i, y_j)``).

Fourier convention (used everywhere in the package)::

    coeff[k] = n^-2 * sum_j f(x_j) exp(-i kappa_k . x_j),   kappa = pi k / l
    f(x_j)   = sum_k coeff[k] exp(+i kappa_k . x_j)

so the forward transform carries the ``1/n^2`` factor and the coefficients are
those of the physical coordinate ``x`` (not of the array index).  Coefficient
arrays use numpy's FFT ordering of the integer wavevector ``k``.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import j1

_WORKERS = int(os.environ.get("SQG_NUM_THREADS", "1") or 1)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Square periodic grid on ``[-l, l)^2`` with ``n`` nodes per axis."""

    n: int
    l: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {n!r}")
        if not np.isfinite(self.l) or self.l <= 0:
            raise ValueError(f"l must be positive, got {self.l!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def dx(self) -> float:
        return 2.0 * self.l / self.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @cached_property
    def x(self) -> np.ndarray:
        """Node coordinates ``x_i = -l + i dx`` (same for both axes)."""
        return _readonly(-self.l + self.dx * np.arange(self.n))

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        return _readonly(X), _readonly(Y)

    @cached_property
    def radius(self) -> np.ndarray:
        X, Y = self.mesh
        return _readonly(np.hypot(X, Y))

    @cached_property
    def angle(self) -> np.ndarray:
        X, Y = self.mesh
        return _readonly(np.arctan2(Y, X))

    @cached_property
    def k_int(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        K1, K2 = np.meshgrid(k, k, indexing="ij")
        return _readonly(K1), _readonly(K2)

    @cached_property
    def kappa(self) -> tuple[np.ndarray, np.ndarray]:
        K1, K2 = self.k_int
        return _readonly(np.pi * K1 / self.l), _readonly(np.pi * K2 / self.l)

    @cached_property
    def kmag(self) -> np.ndarray:
        k1, k2 = self.kappa
        return _readonly(np.hypot(k1, k2))

    @cached_property
    def _phase(self) -> np.ndarray:
        K1, K2 = self.k_int
        return _readonly(np.where((K1 + K2) % 2 == 0, 1.0, -1.0))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        K1, K2 = self.k_int
        return _readonly(np.maximum(np.abs(K1), np.abs(K2)) <= self.n / 3)

    @cached_property
    def disc_mask(self) -> np.ndarray:
        """Isotropic two-thirds filter ``|k| <= n/3``; it commutes with rotations."""
        return _readonly(np.hypot(*self.k_int) <= self.n / 3)

    @cached_property
    def nyquist(self) -> tuple[np.ndarray, np.ndarray]:
        K1, K2 = self.k_int
        return _readonly(K1 == -self.n // 2), _readonly(K2 == -self.n // 2)

    def ball_mask(self, R: float) -> np.ndarray:
        return self.radius <= R


def make_grid(n: int, l: float) -> Grid:
    return Grid(n, l)


# -- raw array transforms (hot paths use these directly) ----------------------

def fwd(grid: Grid, values: np.ndarray) -> np.ndarray:
    return sfft.fft2(values, workers=_WORKERS) * (grid._phase / grid.n**2)


def inv(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifft2(coeffs * grid._phase, workers=_WORKERS).real * grid.n**2


@dataclass(frozen=True, eq=False)
class RealField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "RealField":
        X, Y = grid.mesh
        return cls(grid, np.broadcast_to(func(X, Y), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "RealField":
        return cls(grid, np.zeros(grid.shape))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values + other.values)

    def __sub__(self, other: "RealField") -> "RealField":
        _same_grid(self.grid, other.grid)
        return RealField(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "RealField":
        return RealField(self.grid, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        if c.shape != self.grid.shape:
            raise ValueError(f"coeffs shape {c.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients contain NaN or Inf")
        object.__setattr__(self, "coeffs", _readonly(c))

    def coeff(self, k1: int, k2: int) -> complex:
        n = self.grid.n
        return complex(self.coeffs[k1 % n, k2 % n])

    def hermitian_defect(self) -> float:
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1))
        return float(np.max(np.abs(c - np.conj(flipped)), initial=0.0))


@dataclass(frozen=True, eq=False)
class VectorField:
    v1: RealField
    v2: RealField

    def __post_init__(self):
        _same_grid(self.v1.grid, self.v2.grid)

    @property
    def grid(self) -> Grid:
        return self.v1.grid

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.v1.values, self.v2.values)

    def divergence(self) -> RealField:
        g = self.grid
        k1, k2 = g.kappa
        c = 1j * k1 * fwd(g, self.v1.values) + 1j * k2 * fwd(g, self.v2.values)
        return RealField(g, inv(g, c))


def _same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def to_spectral(f: RealField) -> SpectralField:
    return SpectralField(f.grid, fwd(f.grid, f.values))


def to_real(F: SpectralField, tol: float = 1e-9) -> RealField:
    g = F.grid
    z = sfft.ifft2(F.coeffs * g._phase, workers=_WORKERS) * g.n**2
    scale = max(float(np.max(np.abs(z.real))), 1.0)
    if np.max(np.abs(z.imag)) > tol * scale:
        raise ValueError("coefficients are not Hermitian (field would be complex)")
    return RealField(g, z.real)


def gradient_coeffs(grid: Grid, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k1, k2 = grid.kappa
    ny1, ny2 = grid.nyquist
    d1 = np.where(ny1, 0.0, 1j * k1 * c)
    d2 = np.where(ny2, 0.0, 1j * k2 * c)
    return d1, d2


def gradient(F: SpectralField) -> VectorField:
    """Spectral gradient; the Nyquist mode of each derivative is zeroed."""
    g = F.grid
    d1, d2 = gradient_coeffs(g, F.coeffs)
    return VectorField(RealField(g, inv(g, d1)), RealField(g, inv(g, d2)))


def dealias(F: SpectralField) -> SpectralField:
    """Two-thirds rule: zero every mode with ``max(|k1|, |k2|) > n/3``."""
    return SpectralField(F.grid, np.where(F.grid.dealias_mask, F.coeffs, 0.0))


def ball_mean_coeffs(grid: Grid, c: np.ndarray, R: float) -> float:
    """Exact disc average over ``B_R`` of the trigonometric interpolant.

    Uses ``mean_{B_R} exp(i kappa.x) = 2 J1(|kappa| R) / (|kappa| R)``; unlike a
    node count this has no staircase error at the disc edge.
    """
    return float(np.real(np.sum(c * _ball_weights(grid, float(R)))))


@lru_cache(maxsize=32)
def _ball_weights(grid: Grid, R: float) -> np.ndarray:
    z = grid.kmag * R
    w = np.ones_like(z)
    nz = z > 0
    w[nz] = 2.0 * j1(z[nz]) / z[nz]
    return _readonly(w)
