from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gkdv.dynamics import ModelParams, Trajectory, free_evolution_trajectory, simulate
from gkdv.errors import ConfigError, NonContractionError, PrecisionError
from gkdv.picard import contraction_time, duhamel_apply, picard_solve, xt_distance, xt_norm
from gkdv.reference import cazenave_naumkin_data
from gkdv.spectral import Field, airy_propagate, make_grid, spectral_derivative

LAM = 0.1


@pytest.fixture(scope="module")
def cn():
    g = make_grid(1024, 32 * np.pi)
    phi = Field(g, 0.5 * LAM * np.exp(-g.x**2), True)
    u0 = cazenave_naumkin_data(LAM, 0.0, g, 3, phi)
    return u0, ModelParams(alpha=0.5, lam=LAM, delta=1.1e6)


def wide_gaussian(n=256):
    # Spectrum ~ exp(-16 k^2): the Airy phase k^3 t is resolved by the slice spacing.
    g = make_grid(n, 16 * np.pi)
    return Field(g, np.exp(-g.x**2 / 64), True)


def random_trajectory(grid, rng, M=4, T=0.1):
    c = rng.standard_normal((M + 1, grid.n)) + 1j * rng.standard_normal((M + 1, grid.n))
    c[:, np.abs(grid.k) > 0.25 * grid.k_max] = 0.0
    v = np.fft.ifft(c, axis=1) * np.exp(-grid.x**2 / 8)[None, :]
    return Trajectory(ModelParams(alpha=0.5), grid, np.linspace(0, T, M + 1), v, False)


class TestDuhamel:
    def test_zero(self):
        g = make_grid(64, 10.0)
        z = Field(g, np.zeros(64), True)
        tr = free_evolution_trajectory(z, 0.1, 4, ModelParams(alpha=0.5))
        out = duhamel_apply(tr, z, ModelParams(alpha=0.5))
        assert np.all(out.values == 0.0)

    def test_linear_is_airy(self):
        u0 = wide_gaussian()
        p = ModelParams(alpha=0.5, nonlinearity=0.0)
        rng = np.random.default_rng(1)
        tr = random_trajectory(u0.grid, rng, M=5, T=0.3)
        out = duhamel_apply(tr, u0, p)
        for t, v in zip(out.times, out.values):
            assert np.max(np.abs(v - airy_propagate(u0, t).values)) <= 1e-13

    def test_deterministic(self, cn):
        u0, p = cn
        tr = free_evolution_trajectory(u0, 0.01, 8, p)
        a = duhamel_apply(tr, u0, p)
        b = duhamel_apply(tr, u0, p)
        assert np.array_equal(a.values, b.values)

    def test_grid_mismatch(self, cn):
        u0, p = cn
        other = Field(make_grid(512, 32 * np.pi), np.zeros(512), True)
        tr = free_evolution_trajectory(u0, 0.01, 4, p)
        with pytest.raises(ConfigError):
            duhamel_apply(tr, other, p)

    def test_fixed_point_residual_is_second_order(self):
        u0 = wide_gaussian()
        p = ModelParams(alpha=0.5)
        T = 0.5
        res = []
        for M in (8, 16, 32):
            tr = simulate(u0, T, T / 1024, p, M)
            res.append(xt_distance(duhamel_apply(tr, u0, p), tr, p))
        for a, b in zip(res, res[1:]):
            assert a / b == pytest.approx(4.0, rel=0.1)


class TestXTNorm:
    def test_zero(self):
        g = make_grid(64, 10.0)
        tr = Trajectory(ModelParams(alpha=0.5), g, np.linspace(0, 1, 3), np.zeros((3, 64)), True)
        rep = xt_norm(tr, ModelParams(alpha=0.5))
        assert rep.total == 0.0
        assert rep.hs_sup == rep.smoothing == rep.weighted_sup_inf == 0.0

    def test_sin_h2_two_ways(self):
        g = make_grid(64, np.pi)
        u = Field(g, np.sin(g.x), True)
        tr = Trajectory(ModelParams(alpha=0.5), g, np.zeros(1), u.values[None, :], True)
        rep = xt_norm(tr, SimpleNamespace(s=2, m=1))
        d1 = spectral_derivative(u, 1).real
        d2 = spectral_derivative(u, 2).real
        physical = np.sqrt(g.dx * np.sum(u.real**2 + 2 * d1**2 + d2**2))
        assert abs(rep.hs_sup - physical) <= 1e-10
        assert rep.hs_sup == pytest.approx(np.sqrt(4 * np.pi), rel=1e-12)
        assert rep.smoothing == 0.0

    def test_total_is_sum(self, cn):
        u0, p = cn
        rep = xt_norm(free_evolution_trajectory(u0, 0.01, 4, p), p)
        parts = [rep.hs_sup, rep.weighted_sup_inf, *rep.weighted_deriv_l2, rep.smoothing]
        assert len(rep.weighted_deriv_l2) == 4
        assert all(v >= 0 for v in parts)
        assert rep.total == pytest.approx(sum(parts), rel=1e-14)

    def test_linear_hs_constant(self):
        u0 = wide_gaussian()
        p = ModelParams(alpha=0.5)
        a = xt_norm(free_evolution_trajectory(u0, 0.1, 4, p), p).hs_sup
        b = xt_norm(free_evolution_trajectory(u0, 1.0, 4, p), p).hs_sup
        assert a == pytest.approx(b, rel=1e-12)

    def test_slice_density_flag(self, cn):
        u0, p = cn
        assert not xt_norm(free_evolution_trajectory(u0, 1.0, 8, p), p).smoothing_trusted
        assert xt_norm(free_evolution_trajectory(u0, 0.1, 8, p), p).smoothing_trusted

    def test_precision_guard(self):
        g = make_grid(32, 10.0)
        tr = Trajectory(ModelParams(alpha=0.5), g, np.zeros(1), np.zeros((1, 32)), True)
        with pytest.raises(PrecisionError):
            xt_norm(tr, ModelParams(alpha=0.5))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric_axioms(self, seed):
        g = make_grid(64, 10.0)
        rng = np.random.default_rng(seed)
        p = ModelParams(alpha=0.5)
        a, b, c = (random_trajectory(g, rng) for _ in range(3))
        ab, ba = xt_distance(a, b, p), xt_distance(b, a, p)
        assert ab == pytest.approx(ba, rel=1e-12)
        assert ab <= xt_distance(a, c, p) + xt_distance(c, b, p) + 1e-12 * ab
        assert xt_distance(a, a, p) == 0.0

    def test_distance_needs_matching_times(self):
        g = make_grid(64, 10.0)
        rng = np.random.default_rng(0)
        with pytest.raises(ConfigError):
            xt_distance(random_trajectory(g, rng, T=0.1), random_trajectory(g, rng, T=0.2), ModelParams(alpha=0.5))


class TestPicardSolve:
    def test_zero_data(self):
        g = make_grid(64, 10.0)
        tr, rep = picard_solve(Field(g, np.zeros(64), True), 0.1, ModelParams(alpha=0.5), 4, force=True)
        assert rep.converged and rep.iterations == 1
        assert np.all(tr.values == 0.0)

    def test_inadmissible_needs_force(self):
        with pytest.raises(ConfigError, match="force"):
            picard_solve(wide_gaussian(), 0.1, ModelParams(alpha=0.5), 4)

    def test_contraction_at_005(self, cn):
        u0, p = cn
        _, rep = picard_solve(u0, 0.05, p, 64)
        assert rep.converged
        assert all(r < 0.5 for r in rep.ratios[1:])

    def test_fixed_point_property(self, cn):
        u0, p = cn
        tr, rep = picard_solve(u0, 0.0125, p, 64)
        assert xt_distance(duhamel_apply(tr, u0, p), tr, p) <= 2 * rep.tol

    def test_median_ratio_decreases_with_T(self, cn):
        u0, p = cn
        med = [picard_solve(u0, T, p, 64)[1].median_ratio for T in (0.1, 0.05, 0.025)]
        assert med[0] > med[1] > med[2]

    def test_divergence(self, cn):
        u0, p = cn
        with pytest.raises(NonContractionError) as info:
            picard_solve(u0, 5.0, p, 64)
        rep = info.value.report
        assert rep is not None and not rep.converged
        assert "smaller T" in str(info.value)

    def test_contraction_time(self, cn):
        u0, p = cn
        T, tr, rep = contraction_time(u0, p)
        assert T == 0.0125
        assert rep.in_ball and rep.median_ratio <= 0.5
        assert tr.meta["contraction"]["converged"]

    def test_agrees_with_etdrk4(self, cn):
        u0, p = cn
        T = 0.0125
        diffs = []
        for M in (32, 64):
            tr, _ = picard_solve(u0, T, p, M)
            ref = simulate(u0, T, T / (4 * M), p, M)
            diffs.append(max(np.linalg.norm(a - b) / np.linalg.norm(b) for a, b in zip(tr.values, ref.values)))
        # Both discretizations halved: the trapezoid error dominates and drops fourfold.
        assert diffs[1] <= 1e-7
        assert diffs[0] / diffs[1] == pytest.approx(4.0, rel=0.1)
