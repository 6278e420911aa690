"""Measurable functionals of solutions: invariants, weighted norms, lower-bound
persistence, Kato smoothing and the Airy commutator identity.

All L-infinity quantities are maxima over grid nodes, without interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContaminationError, PrecisionError
from .spectral import (
    AIRY_SIGN,
    Field,
    airy_propagate,
    derivative_multiplier,
    fft,
    ifft,
    l2_norm,
    outer_mass_fraction,
    spectral_derivative,
)

# U(-t) x U(t) f = x f - 3 * COMMUTATOR_SIGN * t * f''  under the Airy convention.
COMMUTATOR_SIGN = -AIRY_SIGN

SERIES_COLUMNS = (
    "t", "I1", "I2", "I3", "winf", "wl2_1", "wl2_2", "wl2_3", "wl2_4",
    "lower", "hs", "deviation_from_u0", "I1_imag",
)


@dataclass(frozen=True)
class InvariantTriple:
    I1: complex
    I2: float
    I3: float
    formal: bool = False


def invariants(u, params):
    """Mass, L2 mass and energy by grid quadrature.

    For complex input the same formulas are evaluated with |u| and the triple
    is marked ``formal``; the conservation laws only hold for real data.
    """
    dx = u.grid.dx
    a = params.alpha
    v = u.values
    ux = spectral_derivative(u, 1).values
    I1 = complex(dx * np.sum(v))
    I2 = float(dx * np.sum(np.abs(v) ** 2))
    potential = 2.0 / ((a + 1.0) * (a + 2.0)) * dx * np.sum(np.abs(v) ** (a + 2.0))
    I3 = float(dx * np.sum(np.abs(ux) ** 2) - params.sign * potential)
    if u.is_real:
        I1 = complex(I1.real, 0.0)
    return InvariantTriple(I1, I2, I3, formal=not u.is_real)


def hs_norm_from_coefficients(coeffs, grid, s):
    if s > grid.max_derivative_order:
        raise PrecisionError(f"H^{s} norm needs more than n/4 = {grid.max_derivative_order} orders")
    w = (1.0 + grid.k**2) ** s
    return np.sqrt(grid.dx / grid.n * np.sum(w * np.abs(coeffs) ** 2, axis=-1))


def hs_norm(f, s):
    return float(hs_norm_from_coefficients(f.coefficients(), f.grid, s))


@dataclass(frozen=True)
class WeightedReport:
    winf: float
    wl2_derivs: tuple
    lower: float
    hs: float

    @property
    def delta_sum(self):
        return self.hs + self.winf + sum(self.wl2_derivs)


def weighted_derivative_norms(coeffs, grid, m, orders=(1, 2, 3, 4)):
    """||<x>^m d^l u||_2 for each order, row-wise over ``coeffs``."""
    w = grid.bracket(m)
    out = []
    for l in orders:
        d = ifft(coeffs * derivative_multiplier(grid, l))
        out.append(np.sqrt(grid.dx * np.sum(np.abs(w * d) ** 2, axis=-1)))
    return out


def weighted_report(u, params):
    grid, m = u.grid, params.m
    c = u.coefficients()
    w = grid.bracket(m) * np.abs(u.values)
    derivs = weighted_derivative_norms(c, grid, m)
    return WeightedReport(
        winf=float(np.max(w)),
        wl2_derivs=tuple(float(d) for d in derivs),
        lower=float(np.min(w)),
        hs=float(hs_norm_from_coefficients(c, grid, params.s)),
    )


@dataclass(frozen=True)
class AdmissibilityVerdict:
    lower: float
    delta_sum: float
    lambda_ok: bool
    delta_ok: bool
    window_half_lengths: tuple
    window_norms: tuple
    weighted_l2_diverging: bool
    report: WeightedReport

    @property
    def passed(self):
        return self.lambda_ok and self.delta_ok


def windowed_weighted_l2(u, power, half_lengths):
    """||<x>^power u||_{L2(-a, a)} for each a, restricted to the grid box."""
    x = u.grid.x
    dens = np.abs(u.values) ** 2 * u.grid.bracket(2.0 * power) * u.grid.dx
    return tuple(float(np.sqrt(np.sum(dens[np.abs(x) < a]))) for a in half_lengths)


def admissibility_check(u0, params, doublings=3):
    """Measure lambda and the delta-sum of u0 and test them against ``params``.

    Also records ||<x>^(m-1/2) u0||_2 on nested windows |x| < L/2^k.  For data
    bounded below by lambda/<x>^m the squared norm gains about the same amount
    at every doubling (logarithmic divergence); ``weighted_l2_diverging`` is
    set when every squared increment is at least a quarter of the first one.
    """
    rep = weighted_report(u0, params)
    L = u0.grid.L
    halves = tuple(L / 2**k for k in range(doublings, -1, -1))
    norms = windowed_weighted_l2(u0, params.m - 0.5, halves)
    sq = np.square(norms)
    inc = np.diff(sq)
    diverging = bool(len(inc) and inc[0] > 0 and np.all(inc >= 0.25 * inc[0]))
    return AdmissibilityVerdict(
        lower=rep.lower,
        delta_sum=rep.delta_sum,
        lambda_ok=rep.lower >= params.lam,
        delta_ok=rep.delta_sum < params.delta,
        window_half_lengths=halves,
        window_norms=norms,
        weighted_l2_diverging=diverging,
        report=rep,
    )


@dataclass(frozen=True)
class PersistenceResult:
    times: np.ndarray
    deviation: np.ndarray
    lower: np.ndarray
    threshold: float

    @property
    def holds(self):
        return bool(np.all(self.deviation <= self.threshold) and np.all(self.lower >= self.threshold))


def persistence_monitor(traj, u0, params):
    """Per slice: ||<x>^m (u(t) - u0)||_inf and inf <x>^m |u(t)|, against lambda/2."""
    w = traj.grid.bracket(params.m)
    dev = np.max(w * np.abs(traj.values - u0.values[None, :]), axis=1)
    low = np.min(w * np.abs(traj.values), axis=1)
    return PersistenceResult(traj.times.copy(), dev, low, params.lam / 2.0)


def trapezoid_weights(count, h):
    w = np.full(count, h)
    if count:
        w[0] = w[-1] = 0.5 * h
    if count == 1:
        w[0] = 0.0
    return w


def kato_smoothing_norm(u0, T, slice_count, chunk=256):
    """max_x ( int_0^T |d/dx U(t) u0 (x)|^2 dt )^(1/2), trapezoid in t."""
    grid = u0.grid
    times = np.linspace(0.0, T, int(slice_count) + 1)
    weights = trapezoid_weights(len(times), T / int(slice_count))
    c = u0.coefficients() * (1j * grid.k_odd)
    acc = np.zeros(grid.n)
    for start in range(0, len(times), chunk):
        t = times[start:start + chunk]
        mult = np.exp(1j * AIRY_SIGN * grid.k_odd[None, :] ** 3 * t[:, None])
        d = ifft(c[None, :] * mult)
        acc += weights[start:start + chunk] @ (np.abs(d) ** 2)
    return float(np.sqrt(np.max(acc)))


def _central_norm(values, grid):
    mask = np.abs(grid.x) < 0.5 * grid.L
    return float(np.sqrt(grid.dx * np.sum(np.abs(values[mask]) ** 2)))


def commutator_residuals(f, t, leak_tol=1e-8):
    """Relative residual of U(-t) x U(t) f - (x f - 3 s t f'') for s = +1 and -1.

    Evaluated on the central half of the box, normalised by
    ||x f|| + 3|t| ||f''|| there.  Returns {+1: r_plus, -1: r_minus}.
    """
    leak = float(outer_mass_fraction(f.values, f.grid))
    if leak > leak_tol:
        raise ContaminationError(
            f"commutator identity needs a contained field; outer mass fraction {leak:.2e} > {leak_tol:g}"
        )
    grid = f.grid
    x = grid.x
    lhs = airy_propagate(Field(grid, x * airy_propagate(f, t).values, f.is_real), -t).values
    xf = x * f.values
    fxx = spectral_derivative(f, 2).values
    scale = _central_norm(xf, grid) + 3.0 * abs(t) * _central_norm(fxx, grid)
    if scale == 0.0:
        return {1: 0.0, -1: 0.0}
    return {s: _central_norm(lhs - (xf - 3.0 * s * t * fxx), grid) / scale for s in (1, -1)}


def operator_identity_residual(f, t, sign=COMMUTATOR_SIGN):
    return commutator_residuals(f, t)[sign]


def annihilating_sign(f, t):
    """The sign s in x f - 3 s t f'' that the discrete group actually satisfies."""
    r = commutator_residuals(f, t)
    return min(r, key=r.get)


def diagnostic_rows(traj, u0, params):
    """Time series with one row per slice, columns as in ``SERIES_COLUMNS``."""
    grid, m = traj.grid, params.m
    c = traj.coefficients()
    w = grid.bracket(m)
    dev = np.max(w * np.abs(traj.values - u0.values[None, :]), axis=1)
    hs = hs_norm_from_coefficients(c, grid, params.s)
    derivs = weighted_derivative_norms(c, grid, m)
    rows = []
    for i, t in enumerate(traj.times):
        u = traj.slice(i)
        inv = invariants(u, params)
        wu = w * np.abs(u.values)
        rows.append((
            float(t), inv.I1.real, inv.I2, inv.I3, float(np.max(wu)),
            *(float(d[i]) for d in derivs),
            float(np.min(wu)), float(hs[i]), float(dev[i]), inv.I1.imag,
        ))
    return rows


def relative_drift(series):
    """max_i |q_i - q_0| / |q_0| for a 1-D sequence of invariant values."""
    q = np.asarray(series)
    ref = abs(q[0])
    return float(np.max(np.abs(q - q[0])) / ref) if ref else float(np.max(np.abs(q - q[0])))


@dataclass
class DriftReport:
    I1: float
    I2: float
    I3: float
    rows: list = field(repr=False, default_factory=list)


def invariant_drift(traj, params):
    trip = [invariants(traj.slice(i), params) for i in range(len(traj.times))]
    return DriftReport(
        I1=relative_drift([t.I1 for t in trip]),
        I2=relative_drift([t.I2 for t in trip]),
        I3=relative_drift([t.I3 for t in trip]),
        rows=trip,
    )
