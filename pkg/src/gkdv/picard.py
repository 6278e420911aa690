"""Fixed-point iteration on the Duhamel map over stored time slices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (
    admissibility_check,
    hs_norm_from_coefficients,
    trapezoid_weights,
    weighted_derivative_norms,
)
from .dynamics import Trajectory, _nonlinear_hat, free_evolution_trajectory
from .errors import ConfigError, NonContractionError, PrecisionError
from .spectral import AIRY_SIGN, derivative_multiplier, fft, ifft

log = logging.getLogger(__name__)

SMOOTHING_DENSITY = 64


@dataclass(frozen=True)
class XTNormReport:
    hs_sup: float
    weighted_sup_inf: float
    weighted_deriv_l2: tuple
    smoothing: float
    slice_density: float = float("inf")

    @property
    def total(self):
        return self.hs_sup + self.weighted_sup_inf + sum(self.weighted_deriv_l2) + self.smoothing

    @property
    def smoothing_trusted(self):
        return self.slice_density >= SMOOTHING_DENSITY


def _xt_components(values, times, grid, params):
    s, m = params.s, params.m
    if s + 1 > grid.max_derivative_order:
        raise PrecisionError(f"smoothing term needs d^{s + 1}, beyond n/4 = {grid.max_derivative_order}")
    c = fft(values)
    hs = hs_norm_from_coefficients(c, grid, s)
    winf = np.max(np.abs(values) * grid.bracket(m), axis=1)
    derivs = weighted_derivative_norms(c, grid, m)
    M = len(times) - 1
    if M == 0:
        smoothing = 0.0
    else:
        d = ifft(c * derivative_multiplier(grid, s + 1))
        h = (times[-1] - times[0]) / M
        smoothing = float(np.sqrt(np.max(trapezoid_weights(M + 1, h) @ (np.abs(d) ** 2))))
    density = M / times[-1] if M and times[-1] > 0 else float("inf")
    return XTNormReport(
        hs_sup=float(np.max(hs)),
        weighted_sup_inf=float(np.max(winf)),
        weighted_deriv_l2=tuple(float(np.max(d)) for d in derivs),
        smoothing=smoothing,
        slice_density=density,
    )


def xt_norm(traj, params):
    """Composite X_T norm of a trajectory, one report entry per component."""
    return _xt_components(traj.values, traj.times, traj.grid, params)


def _check_compatible(a, b):
    if a.grid != b.grid:
        raise ConfigError("trajectories live on different grids")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-14):
        raise ConfigError("trajectories have different slice times")


def xt_distance(a, b, params):
    _check_compatible(a, b)
    return _xt_components(a.values - b.values, a.times, a.grid, params).total


def duhamel_apply(traj, u0, params):
    """Phi(u)(t_i) = U(t_i) u0 + int_0^t_i U(t_i - s) N(u(s)) ds, trapezoid over slices.

    N already carries the sign of the nonlinearity.  Written as
    U(t_i) [u0 + int_0^t_i U(-s) N(u(s)) ds], the quadrature becomes a running
    sum, so one call costs O(M n) plus two batched FFTs.
    """
    if u0.grid != traj.grid:
        raise ConfigError("initial datum and trajectory live on different grids")
    grid, t = traj.grid, traj.times
    M = len(t) - 1
    if M >= 1 and not np.allclose(np.diff(t), t[-1] / M, rtol=1e-12, atol=0):
        raise ConfigError("Duhamel quadrature needs uniform slice times")
    is_real = traj.is_real and u0.is_real
    nhat, _ = _nonlinear_hat(fft(traj.values), grid, params, is_real)
    phase = AIRY_SIGN * grid.k_odd[None, :] ** 3 * t[:, None]
    v = np.exp(-1j * phase) * nhat
    acc = np.zeros_like(v)
    if M >= 1:
        h = t[-1] / M
        acc[1:] = np.cumsum(0.5 * h * (v[:-1] + v[1:]), axis=0)
    out = ifft(np.exp(1j * phase) * (u0.coefficients()[None, :] + acc))
    return Trajectory(params, grid, t, out.real if is_real else out, is_real, {"scheme": "duhamel"})


@dataclass
class ContractionReport:
    T: float
    slice_count: int
    tol: float
    ball_radius: float = float("inf")
    distances: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    converged: bool = False
    final_norm: XTNormReport | None = None

    @property
    def ratios(self):
        d = self.distances
        return [d[i + 1] / d[i] if d[i] > 0 else 0.0 for i in range(len(d) - 1)]

    @property
    def iterations(self):
        return len(self.distances)

    @property
    def in_ball(self):
        """Every iterate satisfied sup_t ||<x>^m (u(t) - u0)||_inf <= lambda/2."""
        return all(d <= self.ball_radius for d in self.deviations)

    @property
    def median_ratio(self):
        r = self.ratios
        return float(np.median(r)) if r else 0.0

    def as_dict(self):
        return {
            "T": self.T,
            "slice_count": self.slice_count,
            "tol": self.tol,
            "iterations": self.iterations,
            "converged": self.converged,
            "distances": list(self.distances),
            "ratios": self.ratios,
            "median_ratio": self.median_ratio,
            "ball_radius": self.ball_radius,
            "deviations": list(self.deviations),
            "in_ball": self.in_ball,
        }


def picard_solve(u0, T, params, slice_count, max_iter=60, tol=None, rtol=1e-9, force=False):
    """Iterate u^(k+1) = Phi(u^(k)) from the free evolution until the X_T distance < tol.

    ``tol`` defaults to ``rtol`` times the X_T norm of the free evolution.
    Three consecutive ratios d_{k+1}/d_k >= 1, or a non-finite iterate, raise
    NonContractionError carrying the report.
    """
    if not force:
        verdict = admissibility_check(u0, params)
        if not verdict.passed:
            raise ConfigError(
                f"initial datum is not admissible (lower = {verdict.lower:.4g}, "
                f"delta-sum = {verdict.delta_sum:.4g}); pass force=True to iterate anyway"
            )
    current = free_evolution_trajectory(u0, T, slice_count, params)
    if tol is None:
        tol = rtol * xt_norm(current, params).total
    report = ContractionReport(T=T, slice_count=int(slice_count), tol=tol, ball_radius=params.lam / 2.0)
    weight = u0.grid.bracket(params.m)

    def deviation(traj):
        return float(np.max(weight * np.abs(traj.values - u0.values[None, :])))

    report.deviations.append(deviation(current))
    streak = 0
    for _ in range(max_iter):
        nxt = duhamel_apply(current, u0, params)
        if not np.all(np.isfinite(nxt.values)):
            report.distances.append(float("inf"))
            raise NonContractionError(f"Picard iterate became non-finite at T = {T}; try a smaller T", report)
        d = xt_distance(nxt, current, params)
        report.distances.append(d)
        report.deviations.append(deviation(nxt))
        current = nxt
        if d < tol or d == 0.0:
            report.converged = True
            break
        if len(report.distances) >= 2:
            streak = streak + 1 if report.ratios[-1] >= 1.0 else 0
            if streak >= 3:
                raise NonContractionError(
                    f"Duhamel map is not contracting at T = {T} (ratios {report.ratios[-3:]}); try a smaller T",
                    report,
                )
    if not report.converged:
        log.warning("Picard iteration hit max_iter=%d with distance %.3e", max_iter, report.distances[-1])
    report.final_norm = xt_norm(current, params)
    current.meta.update({"scheme": "picard", "contraction": report.as_dict()})
    return current, report


def contraction_time(u0, params, candidates=(0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125),
                     slice_count=64, max_ratio=0.5, **kwargs):
    """Largest candidate T at which the iteration is a contraction inside the X_T ball.

    Accepted when it converges, every ratio after the first is < 1, the median
    ratio is <= ``max_ratio`` and every iterate keeps
    sup_t ||<x>^m (u - u0)||_inf <= lambda/2.  Returns (T, trajectory, report).
    """
    last = None
    for T in sorted(candidates, reverse=True):
        try:
            traj, rep = picard_solve(u0, T, params, slice_count, **kwargs)
        except NonContractionError as exc:
            last = exc
            continue
        r = rep.ratios
        if rep.converged and rep.in_ball and all(x < 1.0 for x in r[1:]) and rep.median_ratio <= max_ratio:
            return T, traj, rep
        last = NonContractionError(
            f"T = {T}: converged={rep.converged}, in_ball={rep.in_ball}, median ratio {rep.median_ratio:.3f}", rep
        )
    raise NonContractionError(f"no candidate T contracted; last: {last}", getattr(last, "report", None))
