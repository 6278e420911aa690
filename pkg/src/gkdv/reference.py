"""Closed-form reference objects: the m(alpha) rule, traveling waves, admissible data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ConstraintError, ContaminationError
from .spectral import (
    CONTAINMENT_TOL,
    Field,
    apply_weight,
    l2_norm,
    outer_mass_fraction,
    spectral_derivative,
)

log = logging.getLogger(__name__)

CONSTANT_MODES = ("paper_literal", "ode_derived")


def m_of_alpha(alpha):
    """Weight exponent m = floor(1/alpha) + 1 for alpha in (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    return math.floor(1.0 / alpha) + 1


@dataclass(frozen=True)
class TravelingWaveSpec:
    c: float
    alpha: float
    constant_mode: str = "ode_derived"

    def __post_init__(self):
        if not self.c > 0:
            raise ConfigError(f"wave speed must be positive, got {self.c}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.constant_mode not in CONSTANT_MODES:
            raise ConfigError(f"constant_mode must be one of {CONSTANT_MODES}")

    @property
    def amplitude(self):
        """Peak of the unit-speed profile.

        ``ode_derived`` comes from the first integral of
        -c phi + phi'' + phi^(a+1)/(a+1) = 0 at the turning point phi' = 0,
        which forces phi(0)^a = c (a+1)(a+2)/2.  ``paper_literal`` keeps the
        alternative outer exponent 2/a.
        """
        base = (self.alpha + 1.0) * (self.alpha + 2.0) / 2.0
        power = 2.0 / self.alpha if self.constant_mode == "paper_literal" else 1.0 / self.alpha
        return base**power

    @property
    def peak(self):
        return self.c ** (1.0 / self.alpha) * self.amplitude

    def profile(self, xi):
        a = self.alpha
        e = np.exp(-np.abs(0.5 * a * np.sqrt(self.c) * np.asarray(xi, dtype=float)))
        sech = 2.0 * e / (1.0 + e * e)
        return self.peak * sech ** (2.0 / a)


def periodic_offset(grid, x, shift):
    """x - shift wrapped back into [-L, L)."""
    return np.mod(x - shift + grid.L, 2.0 * grid.L) - grid.L


def traveling_wave(spec, grid, t=0.0, check_containment=True):
    xi = periodic_offset(grid, grid.x, spec.c * t)
    f = Field(grid, spec.profile(xi), is_real=True)
    if check_containment and outer_mass_fraction(f.values, grid) > CONTAINMENT_TOL:
        raise ContaminationError(
            f"traveling wave at t={t} puts more than {CONTAINMENT_TOL:g} of its mass near the seam"
        )
    return f


def profile_residual(phi, c, alpha):
    """||-c phi' + phi''' + |phi|^alpha phi'||_2 / ||phi||_2."""
    norm = l2_norm(phi)
    if norm == 0.0:
        log.warning("profile residual requested for the zero field; it is not a wave")
        return 0.0
    d1 = spectral_derivative(phi, 1).values
    d3 = spectral_derivative(phi, 3).values
    r = -c * d1 + d3 + np.abs(phi.values) ** alpha * d1
    return l2_norm(Field(phi.grid, r, phi.is_real)) / norm


def tw_residual(spec, grid):
    return profile_residual(traveling_wave(spec, grid, 0.0, check_containment=False), spec.c, spec.alpha)


def cazenave_naumkin_data(lam, theta, grid, m, phi=None):
    """u0 = 2 lam e^{i theta} / <x>^m + phi, with ||<x>^m phi||_inf <= lam."""
    if not lam > 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    phase = complex(math.cos(theta), math.sin(theta))
    if abs(phase.imag) < 1e-15:
        phase = complex(math.copysign(1.0, phase.real), 0.0)
    values = 2.0 * lam * phase * grid.bracket(-m)
    is_real = phase.imag == 0.0
    if phi is not None:
        if phi.grid != grid:
            raise ConfigError("perturbation lives on a different grid")
        size = float(np.max(np.abs(apply_weight(phi, m).values)))
        if size > lam * (1.0 + 1e-12):
            raise ConstraintError(f"||<x>^m phi||_inf = {size:.6g} exceeds lambda = {lam:.6g}")
        values = values + phi.values
        is_real = is_real and phi.is_real
    return Field(grid, values, is_real)
