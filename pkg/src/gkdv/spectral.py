"""Periodic Fourier substrate: grids, fields, differentiation, Airy propagation.

The real line is truncated to the periodic box [-L, L).  Every operator here is
a Fourier multiplier or a pointwise product, so all of them are pure functions
of their inputs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, PrecisionError

# Multiplier exp(i * AIRY_SIGN * k^3 * t) solves u_t = -u_xxx under d/dx -> ik.
AIRY_SIGN = 1

REAL_TOL = 1e-12
OUTER_FRACTION = 0.1
CONTAINMENT_TOL = 1e-6


def fft_workers():
    value = os.environ.get("GKDV_THREADS")
    if not value:
        return os.cpu_count() or 1
    return max(1, int(value))


def fft(values):
    return sfft.fft(values, axis=-1, workers=fft_workers())


def ifft(coeffs):
    return sfft.ifft(coeffs, axis=-1, workers=fft_workers())


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Uniform periodic grid of ``n`` points on [-L, L).

    ``k`` holds wavenumbers in FFT order.  ``k_odd`` is the same array with the
    Nyquist entry set to zero; odd-order multipliers use it so that real data
    stay real (the Nyquist mode has no conjugate partner).
    """

    n: int
    L: float
    x: np.ndarray = field(init=False, repr=False)
    k: np.ndarray = field(init=False, repr=False)
    k_odd: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n, L = self.n, float(self.L)
        object.__setattr__(self, "L", L)
        x = -L + np.arange(n) * (2.0 * L / n)
        k = sfft.fftfreq(n, d=2.0 * L / n) * 2.0 * np.pi
        k_odd = k.copy()
        k_odd[n // 2] = 0.0
        keep = np.abs(k) <= (2.0 / 3.0) * self.k_max
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "k", _readonly(k))
        object.__setattr__(self, "k_odd", _readonly(k_odd))
        object.__setattr__(self, "dealias_mask", _readonly(keep))

    @property
    def dx(self):
        return 2.0 * self.L / self.n

    @property
    def dk(self):
        return np.pi / self.L

    @property
    def k_max(self):
        return np.pi / self.dx

    @property
    def max_derivative_order(self):
        return self.n // 4

    def bracket(self, power=1.0):
        """<x>^power on the grid nodes."""
        return (1.0 + self.x**2) ** (0.5 * power)

    def __eq__(self, other):
        if not isinstance(other, SpectralGrid):
            return NotImplemented
        return self.n == other.n and self.L == other.L

    def __hash__(self):
        return hash((self.n, self.L))


def make_grid(n, L):
    if isinstance(n, bool) or int(n) != n:
        raise ConfigError(f"grid size must be an integer, got {n!r}")
    n = int(n)
    if n < 16 or n & (n - 1):
        raise ConfigError(f"grid size must be a power of two >= 16, got {n}")
    if not np.isfinite(L) or L <= 0:
        raise ConfigError(f"half-length L must be positive, got {L}")
    return SpectralGrid(n, float(L))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid.  ``is_real`` fields carry zero imaginary part."""

    grid: SpectralGrid
    values: np.ndarray
    is_real: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n,):
            raise ConfigError(f"field has shape {v.shape}, grid expects ({self.grid.n},)")
        if self.is_real:
            v = _enforce_real(v)
        object.__setattr__(self, "values", _readonly(v))

    @property
    def real(self):
        return self.values.real

    def coefficients(self):
        return fft(self.values)

    def with_values(self, values):
        return Field(self.grid, values, self.is_real)

    def __add__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values, self.is_real and other.is_real)

    def __sub__(self, other):
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values, self.is_real and other.is_real)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return Field(self.grid, self.values * scalar, self.is_real and scalar.imag == 0.0)

    __rmul__ = __mul__


def _enforce_real(v):
    imag = np.max(np.abs(v.imag), initial=0.0)
    if imag > REAL_TOL * max(np.max(np.abs(v), initial=0.0), np.finfo(float).tiny):
        raise ValueError(f"real field has imaginary part {imag:.3e}")
    return v.real.astype(complex)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ConfigError("fields live on different grids")


def field_from_function(grid, func, is_real=True):
    return Field(grid, func(grid.x), is_real)


def from_coefficients(grid, coeffs, is_real):
    v = ifft(coeffs)
    if is_real:
        v = v.real
    return Field(grid, v, is_real)


def derivative_multiplier(grid, order):
    if order < 0 or int(order) != order:
        raise ValueError(f"derivative order must be a non-negative integer, got {order}")
    if order > grid.max_derivative_order:
        raise PrecisionError(
            f"derivative order {order} exceeds n/4 = {grid.max_derivative_order}; "
            f"(ik)^{order} amplifies roundoff by ~{grid.k_max:.1f}^{order}"
        )
    k = grid.k_odd if order % 2 else grid.k
    return (1j * k) ** order


def spectral_derivative(f, order):
    if order == 0:
        return f
    coeffs = f.coefficients() * derivative_multiplier(f.grid, order)
    return from_coefficients(f.grid, coeffs, f.is_real)


def airy_multiplier(grid, t):
    k = grid.k_odd
    return np.exp(1j * AIRY_SIGN * k**3 * t)


def airy_propagate(f, t):
    """Free evolution U(t) f of u_t + u_xxx = 0."""
    if t == 0:
        return f
    return from_coefficients(f.grid, f.coefficients() * airy_multiplier(f.grid, t), f.is_real)


def dealias(f):
    """Two-thirds rule: drop modes with |k| > (2/3) k_max."""
    return from_coefficients(f.grid, f.coefficients() * f.grid.dealias_mask, f.is_real)


def apply_weight(f, power):
    if power == 0:
        return f
    return Field(f.grid, f.values * f.grid.bracket(power), f.is_real)


def l2_norm(f):
    return float(np.sqrt(f.grid.dx * np.sum(np.abs(f.values) ** 2)))


def l2_norm_spectral(f):
    c = f.coefficients()
    return float(np.sqrt(f.grid.dx * np.sum(np.abs(c) ** 2) / f.grid.n))


def outer_mass_fraction(values, grid):
    """Share of |u|^2 in the outer 10% of the box (5% on each side)."""
    v2 = np.abs(values) ** 2
    total = np.sum(v2, axis=-1)
    outer = np.abs(grid.x) > (1.0 - OUTER_FRACTION) * grid.L
    mass = np.sum(v2[..., outer], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, mass / np.where(total > 0, total, 1.0), 0.0)


def is_contained(f, tol=CONTAINMENT_TOL):
    return bool(outer_mass_fraction(f.values, f.grid) <= tol)
