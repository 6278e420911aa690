"""Moving-window energies for one-sided regular data.

The cutoff chi_{eps,b} is built from the C-infinity step
p(y) = e^{-1/y} / (e^{-1/y} + e^{-1/(1-y)}) on (0, 1).  Its derivative is a
plateau bump psi / (b - 3 eps) with psi rising on [eps, 2 eps], equal to 1 on
[2 eps, b - 2 eps] and falling on [b - 2 eps, b - eps].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .diagnostics import admissibility_check, trapezoid_weights
from .dynamics import ModelParams, _nonlinear_hat, simulate
from .errors import ConfigError, GenerationError
from .reference import cazenave_naumkin_data
from .spectral import OUTER_FRACTION, Field, derivative_multiplier, ifft, make_grid, spectral_derivative

log = logging.getLogger(__name__)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _step_derivatives(y, order):
    """p and its first ``order`` derivatives at y, with p = 0 for y <= 0 and 1 for y >= 1."""
    y = np.asarray(y, dtype=float)
    inside = (y > 0.0) & (y < 1.0)
    yi = np.where(inside, y, 0.5)
    h = 1.0 / yi - 1.0 / (1.0 - yi)
    p = expit(-h)
    q = expit(h) * p  # p (1 - p)
    h1 = -1.0 / yi**2 - 1.0 / (1.0 - yi) ** 2
    h2 = 2.0 / yi**3 - 2.0 / (1.0 - yi) ** 3
    h3 = -6.0 / yi**4 - 6.0 / (1.0 - yi) ** 4
    p1 = -q * h1
    p2 = -(1.0 - 2.0 * p) * p1 * h1 - q * h2
    p3 = (2.0 * p1 * p1 * h1 - (1.0 - 2.0 * p) * (p2 * h1 + 2.0 * p1 * h2) - q * h3)
    vals = [np.where(inside, p, (y >= 1.0).astype(float))]
    for d in (p1, p2, p3)[:order]:
        vals.append(np.where(inside, np.nan_to_num(d), 0.0))
    return vals


def _step_integral(y):
    """int_0^y p for y in [0, 1], 64-point Gauss-Legendre; p + p(1 - .) = 1 gives the value 1/2 at y = 1."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    t = 0.5 * y[..., None] * (_GL_NODES + 1.0)
    return 0.5 * y * (_step_derivatives(t, 0)[0] @ _GL_WEIGHTS)


@dataclass(frozen=True)
class CutoffFamily:
    eps: float
    b: float

    @property
    def slope(self):
        """Plateau value of chi'; the largest constant any C^1 member can attain there."""
        return 1.0 / (self.b - 3.0 * self.eps)

    def _psi(self, x, order):
        e, b = self.eps, self.b
        up = _step_derivatives((x - e) / e, order)
        down = _step_derivatives((b - e - x) / e, order)
        up = [d / e**k for k, d in enumerate(up)]
        down = [(-1.0) ** k * d / e**k for k, d in enumerate(down)]
        if order == 0:
            return up[0] * down[0]
        if order == 1:
            return up[1] * down[0] + up[0] * down[1]
        if order == 2:
            return up[2] * down[0] + 2.0 * up[1] * down[1] + up[0] * down[2]
        return up[3] * down[0] + 3.0 * up[2] * down[1] + 3.0 * up[1] * down[2] + up[0] * down[3]

    def __call__(self, x):
        e, b = self.eps, self.b
        x0 = np.asarray(x, dtype=float)
        x = np.atleast_1d(x0)
        out = np.clip(x - 2.0 * e, 0.0, b - 4.0 * e)
        out = out + np.where(x >= 2.0 * e, 0.5 * e, 0.0) + np.where(x >= b - e, 0.5 * e, 0.0)
        rise = (x > e) & (x < 2.0 * e)
        out[rise] += e * _step_integral((x[rise] - e) / e)
        fall = (x > b - 2.0 * e) & (x < b - e)
        out[fall] += e * (0.5 - _step_integral((b - e - x[fall]) / e))
        out = np.clip(out * self.slope, 0.0, 1.0)
        out[x >= b - e] = 1.0
        return out.reshape(x0.shape)

    def derivative(self, x, order=1):
        if order == 0:
            return self(x)
        if order not in (1, 2, 3):
            raise ValueError(f"cutoff derivatives are available for orders 1..3, got {order}")
        x0 = np.asarray(x, dtype=float)
        x = np.atleast_1d(x0)
        out = np.zeros(x.shape)
        live = (x > self.eps) & (x < self.b - self.eps)
        out[live] = self._psi(x[live], order - 1) * self.slope
        return out.reshape(x0.shape)

    def sample(self, grid, shift=0.0, order=0):
        return self.derivative(grid.x + shift, order)


def make_cutoff(eps, b):
    if not eps > 0:
        raise ConfigError(f"cutoff eps must be positive, got {eps}")
    if b < 5.0 * eps:
        raise ConfigError(f"cutoff needs b >= 5 eps, got b = {b}, eps = {eps}")
    return CutoffFamily(float(eps), float(b))


def cutoff_properties(cut, density=10_000):
    """Dense-sampling check of the cutoff invariants.

    ``literal_lower_bound`` tests chi' >= 1/(b - 4 eps) on [2 eps, b - 2 eps].
    A nondecreasing C^1 function that climbs by 1 with chi' vanishing at eps and
    b - eps cannot keep that slope on the whole plateau (it would climb by
    more than 1), so this entry is reported but expected to be False;
    ``plateau_lower_bound`` checks the attainable constant 1/(b - 3 eps).
    """
    e, b = cut.eps, cut.b
    lo, hi = -e, b + e
    x = np.linspace(lo, hi, int(np.ceil((hi - lo) * density)) + 1)
    chi = cut(x)
    d1 = cut.derivative(x, 1)
    plateau = (x >= 2.0 * e) & (x <= b - 2.0 * e)
    half = make_cutoff(e / 2.0, b)
    denom = chi + d1
    support = denom > 1e-300
    ratio = half(x[support]) / denom[support]
    dom = float(np.min(ratio)) if ratio.size else float("inf")
    plateau_min = float(np.min(d1[plateau]))
    return {
        "zero_left": bool(np.all(chi[x < e] == 0.0)),
        "one_right": bool(np.all(chi[x > b - e] == 1.0)),
        "nondecreasing": bool(np.all(d1 >= 0.0) and np.all(np.diff(chi) >= -1e-15)),
        "derivative_support": bool(np.all(d1[(x < e) | (x > b - e)] == 0.0)),
        "plateau_min": plateau_min,
        "plateau_lower_bound": bool(plateau_min >= cut.slope * (1.0 - 1e-12)),
        "literal_bound": 1.0 / (b - 4.0 * e),
        "literal_lower_bound": bool(plateau_min >= 1.0 / (b - 4.0 * e)),
        "domination_constant": dom,
        "domination": bool(dom > 0.0),
    }


@dataclass(frozen=True)
class FrontParams:
    x0: float
    v: float
    eps_prime: float
    R: float
    l: int = 2

    def __post_init__(self):
        if not self.v > 0:
            raise ConfigError(f"front speed v must be positive, got {self.v}")
        if not self.eps_prime > 0:
            raise ConfigError(f"eps_prime must be positive, got {self.eps_prime}")
        if not self.R > self.eps_prime:
            raise ConfigError(f"R must exceed eps_prime, got R = {self.R}")
        if int(self.l) != self.l or self.l < 1:
            raise ConfigError(f"l must be a positive integer, got {self.l}")

    def cutoff(self, b_factor=5.0):
        return make_cutoff(self.eps_prime, b_factor * self.eps_prime)

    def shift(self, t):
        return self.v * t - self.x0


def _derivative_values(coeffs, grid, order):
    return ifft(coeffs * derivative_multiplier(grid, order))


def windowed_energy(u, order, cut, shift):
    """dx * sum |d^order u|^2 chi(x + shift)."""
    d = spectral_derivative(u, order).values
    return float(u.grid.dx * np.sum(np.abs(d) ** 2 * cut.sample(u.grid, shift)))


@dataclass(frozen=True)
class MovingWindow:
    """W(x, t) = chi(x + v t - x0) rho(x), with rho a static taper that vanishes past ``right_edge``.

    The semi-infinite window is closed off before the outer part of the box so
    that nothing near the periodic seam is counted.
    """

    cut: CutoffFamily
    front: FrontParams
    right_edge: float
    taper: CutoffFamily

    @property
    def taper_start(self):
        return self.right_edge - self.taper.b + self.taper.eps

    def _rho(self, x, order):
        z = x - self.taper_start
        if order == 0:
            return 1.0 - self.taper(z)
        return -self.taper.derivative(z, order)

    def derivatives(self, x, t):
        """W, W_x, W_xxx and W_t at positions x and time t."""
        y = x + self.front.shift(t)
        c = [self.cut.derivative(y, k) for k in range(4)]
        r = [self._rho(x, k) for k in range(4)]
        return {
            0: c[0] * r[0],
            1: c[1] * r[0] + c[0] * r[1],
            3: c[3] * r[0] + 3.0 * c[2] * r[1] + 3.0 * c[1] * r[2] + c[0] * r[3],
            "t": self.front.v * c[1] * r[0],
        }

    def sample(self, grid, t):
        return self.derivatives(grid.x, t)[0]


def moving_window(front, grid, cut=None, taper_width=5.0):
    """Window behind the front, closed at the containment boundary 0.9 L."""
    cut = cut or front.cutoff()
    right_edge = (1.0 - OUTER_FRACTION) * grid.L
    if right_edge - taper_width <= front.x0 + cut.b:
        raise ConfigError("front window does not fit inside the contained part of the box")
    return MovingWindow(cut, front, right_edge, make_cutoff(taper_width / 5.0, taper_width))


def windowed_energy_series(traj, order, window):
    """Energy of d^order u in the moving window, one value per slice."""
    grid = traj.grid
    d = np.abs(_derivative_values(traj.coefficients(), grid, order)) ** 2
    win = np.stack([window.sample(grid, t) for t in traj.times])
    return grid.dx * np.sum(d * win, axis=1)


def seminorm_series(traj, order):
    d = _derivative_values(traj.coefficients(), traj.grid, order)
    return traj.grid.dx * np.sum(np.abs(d) ** 2, axis=1)


def smoothing_window(cut, grid, shift, R):
    """chi(y) - chi(y - R) at y = x + shift: rises after eps, falls after R + eps."""
    y = grid.x + shift
    return cut(y) - cut(y - R)


def local_smoothing_integral(traj, order, front, cut):
    """Trapezoid in t of the spatial quadrature of |d^order u|^2 over the moving window."""
    grid = traj.grid
    d = np.abs(_derivative_values(traj.coefficients(), grid, order)) ** 2
    win = np.stack([smoothing_window(cut, grid, front.shift(t), front.R) for t in traj.times])
    per_slice = grid.dx * np.sum(d * win, axis=1)
    M = len(traj.times) - 1
    if M == 0:
        return 0.0
    h = (traj.times[-1] - traj.times[0]) / M
    return float(trapezoid_weights(M + 1, h) @ per_slice)


def kink(grid, x0, s, c_k, width=2.0):
    """c_k (x0 - x)_+^(s + 0.6) exp(-((x0 - x) / width)^2).

    The Gaussian taper is smooth with spectrum exp(-k^2 width^2 / 4), so the
    high-k tail comes only from the fractional power at x0.
    """
    r = np.clip(x0 - grid.x, 0.0, None)
    return c_k * r ** (s + 0.6) * np.exp(-((r / width) ** 2))


def one_sided_data(x0, s, l, grid, params=None, c_k=0.01, width=2.0, theta=0.0):
    """Admissible base 2 lam / <x>^m plus a kink that is rough only left of x0."""
    params = params or ModelParams(alpha=0.5)
    if s + l + 1 > grid.max_derivative_order:
        raise ConfigError(f"order s + l + 1 = {s + l + 1} exceeds n/4 = {grid.max_derivative_order}")
    if x0 - 6.0 * width < -0.9 * grid.L or x0 > 0.9 * grid.L:
        raise ConfigError("kink support must stay clear of the periodic seam")
    base = cazenave_naumkin_data(params.lam, theta, grid, params.m)
    u0 = Field(grid, base.values + kink(grid, x0, s, c_k, width), base.is_real)
    lower = admissibility_check(u0, params).lower
    if lower - params.lam < params.lam / 2.0:
        raise GenerationError(
            f"kink amplitude c_k = {c_k} leaves lower bound {lower:.4g}; margin below lambda/2, use a smaller c_k"
        )
    return u0


def _oversample(coeffs, n, factor):
    """Values of the trigonometric interpolant on a grid ``factor`` times finer (zero padding).

    The Nyquist mode is dropped: odd derivatives already discard it, and keeping
    it in even orders only would break the integration-by-parts identities.
    """
    half = n // 2
    big = np.zeros(coeffs.shape[:-1] + (n * factor,), dtype=complex)
    big[..., :half] = coeffs[..., :half]
    big[..., -half + 1:] = coeffs[..., half + 1:]
    return ifft(big) * factor


def energy_identity_terms(traj, order, window, oversample=16):
    """Per slice: E, A1, A2, A3, A4 of the windowed energy identity.

    With u_t = -u_xxx + c N(u) and w = d^order u, integration by parts gives
    E'/2 - A1 + A2 - A3 + sign * nonlinearity * A4 = 0 for
    A1 = int w^2 W_t / 2, A2 = 3/2 int w_x^2 W_x, A3 = int w^2 W_xxx / 2 and
    A4 = int d^order(|u|^alpha u_x) w W, where A4 uses the same dealiased
    nonlinearity as the integrator.  Products with W are summed on a
    zero-padded grid so that the ramps of the cutoff are resolved.
    """
    grid, params = traj.grid, traj.params
    n = grid.n
    coeffs = traj.coefficients()
    nhat, _ = _nonlinear_hat(coeffs, grid, params, traj.is_real)
    scale = params.coefficient if params.coefficient != 0 else 1.0
    up = lambda c, k: _oversample(c * derivative_multiplier(grid, k), n, oversample)
    w, w1, dn = up(coeffs, order), up(coeffs, order + 1), up(nhat / scale, order)
    h = grid.dx / oversample
    x = -grid.L + np.arange(n * oversample) * h
    out = {k: np.empty(len(traj.times)) for k in ("E", "A1", "A2", "A3", "A4")}
    for i, t in enumerate(traj.times):
        W = window.derivatives(x, t)
        w2 = np.abs(w[i]) ** 2
        out["E"][i] = h * np.sum(w2 * W[0])
        out["A1"][i] = 0.5 * h * np.sum(w2 * W["t"])
        out["A2"][i] = 1.5 * h * np.sum(np.abs(w1[i]) ** 2 * W[1])
        out["A3"][i] = 0.5 * h * np.sum(w2 * W[3])
        out["A4"][i] = h * np.sum(np.real(dn[i] * np.conj(w[i])) * W[0])
    return out


def energy_identity_residual(traj, order, window):
    """max relative residual of the identity, with E' from 4th-order central differences."""
    terms = energy_identity_terms(traj, order, window)
    params = traj.params
    E, h = terms["E"], traj.dt_slice
    if len(E) < 5:
        raise ConfigError("energy identity check needs at least five slices")
    dE = (E[:-4] - 8.0 * E[1:-3] + 8.0 * E[3:-1] - E[4:]) / (12.0 * h)
    inner = slice(2, -2)
    a = {k: v[inner] for k, v in terms.items()}
    nl = params.sign * params.nonlinearity
    res = 0.5 * dE - a["A1"] + a["A2"] - a["A3"] + nl * a["A4"]
    size = np.abs(0.5 * dE) + np.abs(a["A1"]) + np.abs(a["A2"]) + np.abs(a["A3"]) + np.abs(a["A4"])
    return float(np.max(np.abs(res) / size)), terms


def regularity_experiment(front, params, T, dt, grid=None, proxy_s=4, slice_count=None, c_k=0.01,
                          control_width=1.0, identity_check=True, identity_steps=40):
    """Run one-sided data and record moving-window energies, the smoothing integral and contrasts.

    Windowed orders are proxy_s + 1 .. proxy_s + l; the smoothing order is
    proxy_s + l + 1.  ``params.s`` is left untouched.
    """
    grid = grid or make_grid(1024, 32 * np.pi)
    l = int(front.l)
    if slice_count is None:
        slice_count = max(4, int(round(T / dt)) // 5)
    u0 = one_sided_data(front.x0, proxy_s, l, grid, params, c_k=c_k)
    traj = simulate(u0, T, dt, params, slice_count)
    cut = front.cutoff()
    window = moving_window(front, grid, cut)
    orders = list(range(proxy_s + 1, proxy_s + l + 1))
    energies = {}
    for order in orders:
        win = windowed_energy_series(traj, order, window)
        full = seminorm_series(traj, order)
        c_star = float(np.max(win))
        energies[order] = {
            "c_star": c_star,
            "windowed_series": win.tolist(),
            "full_line_series": full.tolist(),
            "full_line_min": float(np.min(full)),
            "contrast": float(np.min(full) / c_star) if c_star > 0 else float("inf"),
        }
    smooth_order = proxy_s + l + 1
    c_star_star = local_smoothing_integral(traj, smooth_order, front, cut)
    # Static window strictly left of x0, supported on [x0 - 1.95 w, x0 - 0.55 w].
    control_cut = make_cutoff(0.05 * control_width, 0.5 * control_width)
    left = front.x0 - 2.0 * control_width
    win = smoothing_window(control_cut, grid, -left, control_width)
    control = []
    for order in orders:
        d = np.abs(_derivative_values(traj.coefficients(), grid, order)) ** 2
        series = grid.dx * np.sum(d * win[None, :], axis=1)
        control.append({"order": order, "t0": float(series[0]), "t_end": float(series[-1])})
    report = {
        "proxy_s": proxy_s,
        "model_s": params.s,
        "orders": orders,
        "smoothing_order": smooth_order,
        "front": {"x0": front.x0, "v": front.v, "eps_prime": front.eps_prime, "R": front.R, "l": l},
        "cutoff": {"eps": cut.eps, "b": cut.b},
        "window_right_edge": window.right_edge,
        "T": T,
        "dt": dt,
        "slice_count": int(slice_count),
        "grid": {"n": grid.n, "L": grid.L},
        "c_k": c_k,
        "windowed": {str(k): v for k, v in energies.items()},
        "c_star_star": c_star_star,
        "control": control,
        "domain_truncation_contaminated": bool(traj.meta.get("domain_truncation_contaminated", False)),
        "times": traj.times.tolist(),
    }
    if identity_check:
        # Dedicated short run with one slice per step so that E' is resolved.
        short = simulate(u0, identity_steps * dt, dt, params, identity_steps)
        report["energy_identity_residual"] = {
            str(order): energy_identity_residual(short, order, window)[0] for order in orders
        }
    return report, traj
