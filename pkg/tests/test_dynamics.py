import logging

import numpy as np
import pytest

from gkdv.dynamics import (
    ModelParams,
    Trajectory,
    default_slice_count,
    etd_coefficients,
    free_evolution_trajectory,
    nonlinear_rhs,
    reflect,
    simulate,
    step_etdrk4,
    step_strang,
)
from gkdv.errors import BlowupError, ConfigError
from gkdv.reference import TravelingWaveSpec, cazenave_naumkin_data, traveling_wave
from gkdv.spectral import Field, airy_propagate, l2_norm, make_grid


def sech2(grid, amp=2.0):
    return Field(grid, amp / np.cosh(grid.x / 2) ** 2, True)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestModelParams:
    def test_defaults(self):
        p = ModelParams(alpha=0.5)
        assert p.m == 3
        assert p.s == 10
        assert p.coefficient == -1.0

    @pytest.mark.parametrize("kwargs", [
        dict(alpha=1.0), dict(alpha=0.5, sign=0), dict(alpha=0.5, s=9),
        dict(alpha=0.5, lam=0.0), dict(alpha=0.5, delta=-1.0), dict(alpha=0.5, s=10.5),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ModelParams(**kwargs)

    def test_sign_flips_coefficient(self):
        assert ModelParams(alpha=0.5, sign=-1).coefficient == 1.0


class TestNonlinearRhs:
    def test_zero(self):
        g = make_grid(64, 10.0)
        out = nonlinear_rhs(Field(g, np.zeros(64), True), ModelParams(alpha=0.5))
        assert np.all(out.values == 0.0)

    def test_constant(self):
        g = make_grid(64, 10.0)
        out = nonlinear_rhs(Field(g, np.full(64, 1.7), True), ModelParams(alpha=0.5))
        assert np.max(np.abs(out.values)) < 1e-14

    def test_sech_pointwise(self):
        g = make_grid(2048, 32 * np.pi)
        x = g.x
        u = Field(g, 1 / np.cosh(x), True)
        out = nonlinear_rhs(u, ModelParams(alpha=0.5, sign=1)).real
        exact = -np.cosh(x) ** -0.5 * (-np.tanh(x) / np.cosh(x))
        assert out.dtype == float
        i0 = np.argmin(np.abs(x))
        assert abs(out[i0]) < 1e-10
        i1 = np.argmin(np.abs(x - 1.0))
        assert out[i1] == pytest.approx(exact[i1], abs=1e-9)
        assert np.max(np.abs(out - exact)) < 1e-9

    def test_sign_minus(self):
        g = make_grid(1024, 16 * np.pi)
        u = Field(g, 1 / np.cosh(g.x), True)
        plus = nonlinear_rhs(u, ModelParams(alpha=0.5, sign=1)).values
        minus = nonlinear_rhs(u, ModelParams(alpha=0.5, sign=-1)).values
        assert np.allclose(plus, -minus, rtol=0, atol=1e-15)

    def test_complex_phase_equivariance(self):
        g = make_grid(1024, 16 * np.pi)
        u = Field(g, 1 / np.cosh(g.x), True)
        phase = np.exp(0.7j)
        p = ModelParams(alpha=0.5)
        a = nonlinear_rhs(Field(g, phase * u.values, False), p).values
        b = phase * nonlinear_rhs(u, p).values
        assert np.max(np.abs(a - b)) < 1e-8

    def test_non_finite_raises(self):
        g = make_grid(64, 10.0)
        v = np.zeros(64)
        v[3] = np.inf
        with pytest.raises(BlowupError):
            nonlinear_rhs(Field(g, v, False), ModelParams(alpha=0.5), time=0.25)


class TestEtdCoefficients:
    def test_limits_at_zero(self):
        # Limits at z = 0: Q = 1/2 and all three Cox-Matthews weights equal 1/6.
        q, f1, f2, f3 = etd_coefficients(np.array([0.0]))
        assert q[0] == pytest.approx(0.5, abs=1e-14)
        assert f1[0] == pytest.approx(1 / 6, abs=1e-14)
        assert f2[0] == pytest.approx(1 / 6, abs=1e-14)
        assert f3[0] == pytest.approx(1 / 6, abs=1e-14)

    @staticmethod
    def series(z, terms=40):
        """phi_k(z) = sum_j z^j / (j + k)!, combined into the Cox-Matthews weights."""
        from math import factorial

        def phi(k, w):
            return sum(w**j / factorial(j + k) for j in range(terms))

        p1, p2, p3 = phi(1, z), phi(2, z), phi(3, z)
        return 0.5 * phi(1, z / 2), p1 - 3 * p2 + 4 * p3, p2 - 2 * p3, -p2 + 4 * p3

    @pytest.mark.parametrize("z", [0.1j, 0.49j, 0.51j, -0.51j, 1.5j, 2.0j, 0.3 + 0.3j])
    def test_against_taylor_series(self, z):
        got = etd_coefficients(np.array([z]))
        for a, b in zip(got, self.series(z)):
            assert abs(a[0] - b) < 1e-13

    def test_small_z_accuracy(self):
        # Taylor series of (e^{z/2} - 1)/z at tiny z, where the direct form loses all digits.
        z = np.array([1e-9j])
        q = etd_coefficients(z)[0][0]
        assert q == pytest.approx(0.5 + z[0] / 8, abs=1e-15)


class TestSteppers:
    @pytest.mark.parametrize("stepper", [step_etdrk4, step_strang])
    def test_linear_reduction(self, stepper):
        g = make_grid(256, 16.0)
        u = sech2(g)
        p = ModelParams(alpha=0.5, nonlinearity=0.0)
        out = stepper(u, 0.01, p)
        assert rel(out.values, airy_propagate(u, 0.01).values) <= 1e-12

    def test_traveling_wave_one_step(self):
        g = make_grid(1024, 32 * np.pi)
        spec = TravelingWaveSpec(1.0, 0.5)
        out = step_etdrk4(traveling_wave(spec, g), 1e-3, ModelParams(alpha=0.5))
        exact = traveling_wave(spec, g, 1e-3)
        assert l2_norm(out - exact) <= 1e-8

    def test_bad_dt(self):
        g = make_grid(64, 10.0)
        with pytest.raises(ConfigError):
            step_etdrk4(sech2(g), 0.0, ModelParams(alpha=0.5))

    @pytest.mark.parametrize("scheme, target", [("etdrk4", 16.0), ("strang", 4.0)])
    def test_richardson_order(self, scheme, target):
        g = make_grid(512, 8 * np.pi)
        u0 = sech2(g)
        p = ModelParams(alpha=0.5)
        out = [simulate(u0, 0.2, dt, p, 1, scheme=scheme, check_containment=False).values[-1]
               for dt in (0.02, 0.01, 0.005)]
        ratio = np.linalg.norm(out[0] - out[1]) / np.linalg.norm(out[1] - out[2])
        assert target * 0.7 <= ratio <= target * 1.3

    def test_strang_vs_etdrk4(self):
        g = make_grid(1024, 32 * np.pi)
        u0 = sech2(g)
        p = ModelParams(alpha=0.5)
        a = simulate(u0, 0.1, 1e-4, p, 1, scheme="etdrk4").values[-1]
        b = simulate(u0, 0.1, 1e-4, p, 1, scheme="strang").values[-1]
        assert rel(b, a) <= 1e-6


class TestSimulate:
    def test_zero(self):
        g = make_grid(64, 10.0)
        tr = simulate(Field(g, np.zeros(64), True), 0.1, 0.01, ModelParams(alpha=0.5), 5)
        assert np.all(tr.values == 0.0)
        assert tr.slice_count == 5 and tr.T == pytest.approx(0.1)

    def test_dt_must_divide(self):
        g = make_grid(64, 10.0)
        with pytest.raises(ConfigError, match="divide"):
            simulate(sech2(g), 1.0, 0.3, ModelParams(alpha=0.5), 2)

    @pytest.mark.parametrize("kwargs", [dict(T=0.0), dict(dt=-1.0), dict(slice_count=0), dict(scheme="euler")])
    def test_bad_arguments(self, kwargs):
        g = make_grid(64, 10.0)
        args = dict(T=0.1, dt=0.01, slice_count=1, scheme="etdrk4") | kwargs
        with pytest.raises(ConfigError):
            simulate(sech2(g), args["T"], args["dt"], ModelParams(alpha=0.5), args["slice_count"], args["scheme"])

    def test_linear_matches_airy_every_slice(self):
        g = make_grid(256, 16.0)
        u0 = sech2(g)
        tr = simulate(u0, 0.5, 0.01, ModelParams(alpha=0.5, nonlinearity=0.0), 10, check_containment=False)
        for i, t in enumerate(tr.times):
            assert rel(tr.values[i], airy_propagate(u0, t).values) <= 1e-11

    def test_traveling_wave_transport(self):
        g = make_grid(1024, 32 * np.pi)
        spec = TravelingWaveSpec(1.0, 0.5)
        tr = simulate(traveling_wave(spec, g), 1.0, 1e-3, ModelParams(alpha=0.5), 4)
        exact = traveling_wave(spec, g, 1.0)
        assert l2_norm(tr.slice(4) - exact) / l2_norm(exact) <= 1e-4

    def test_real_data_stay_real(self):
        g = make_grid(256, 8 * np.pi)
        tr = simulate(sech2(g), 0.1, 0.01, ModelParams(alpha=0.5), 2)
        assert tr.is_real
        assert all(s.is_real and np.all(s.values.imag == 0) for s in tr.slices)

    def test_blowup_reports_last_good_slice(self):
        g = make_grid(256, 8 * np.pi)
        with pytest.raises(BlowupError) as info:
            simulate(sech2(g, 1e6), 4.0, 0.5, ModelParams(alpha=0.5), 4, check_containment=False)
        assert info.value.last_good_slice is not None
        assert 0 <= info.value.last_good_slice < 4
        assert info.value.time is not None

    def test_contamination_flag(self, caplog):
        g = make_grid(256, 8 * np.pi)
        u0 = Field(g, np.exp(-((g.x - 0.95 * g.L) ** 2)), True)
        with caplog.at_level(logging.WARNING):
            tr = simulate(u0, 0.02, 0.01, ModelParams(alpha=0.5), 1)
        assert tr.meta["domain_truncation_contaminated"]
        assert "contaminated" in caplog.text

    def test_meta_and_hooks(self):
        g = make_grid(1024, 32 * np.pi)
        u0 = cazenave_naumkin_data(0.1, 0.0, g, 3)
        tr = simulate(u0, 0.01, 1e-3, ModelParams(alpha=0.5), 2,
                      hooks=[lambda t, f: {"t_seen": t, "max": float(np.max(f.real))}])
        assert tr.meta["scheme"] == "etdrk4" and tr.meta["steps_per_slice"] == 5
        assert [h["t_seen"] for h in tr.meta["hooks"]] == list(tr.times)
        assert tr.meta["lower_bound_alerts"] == []
        assert not tr.meta["domain_truncation_contaminated"]

    def test_lower_bound_alert(self):
        g = make_grid(256, 8 * np.pi)
        tr = simulate(sech2(g), 0.02, 0.01, ModelParams(alpha=0.5), 1, check_containment=False)
        # sech^2 decays exponentially, so <x>^3 |u| is far below lambda / 4 near the edges.
        assert tr.meta["lower_bound_alerts"] == [0, 1]

    def test_global_order_four(self):
        g = make_grid(512, 8 * np.pi)
        u0 = sech2(g)
        p = ModelParams(alpha=0.5)
        ref = simulate(u0, 0.2, 0.00125, p, 1, check_containment=False).values[-1]
        e1 = np.linalg.norm(simulate(u0, 0.2, 0.01, p, 1, check_containment=False).values[-1] - ref)
        e2 = np.linalg.norm(simulate(u0, 0.2, 0.005, p, 1, check_containment=False).values[-1] - ref)
        assert 16 * 0.7 <= e1 / e2 <= 16 * 1.3

    def test_time_reversal_linear_exact(self):
        # u(x, t) -> u(-x, -t) maps solutions to solutions of the same equation.
        g = make_grid(256, 16.0)
        u0 = sech2(g)
        back = reflect(airy_propagate(reflect(airy_propagate(u0, 0.7)), 0.7))
        assert rel(back.values, u0.values) <= 1e-13

    def test_time_reversal_nonlinear(self):
        g = make_grid(512, 8 * np.pi)
        u0 = sech2(g)
        p = ModelParams(alpha=0.5)
        fwd = simulate(u0, 0.5, 1e-3, p, 1, check_containment=False).slice(1)
        back = reflect(simulate(reflect(fwd), 0.5, 1e-3, p, 1, check_containment=False).slice(1))
        assert rel(back.values, u0.values) <= 1e-9

    def test_reflect_is_involution(self):
        g = make_grid(64, 3.0)
        f = Field(g, np.random.default_rng(1).standard_normal(64), True)
        assert np.array_equal(reflect(reflect(f)).values, f.values)
        assert reflect(f).values[1] == f.values[-1]


class TestTrajectory:
    def test_free_evolution(self):
        g = make_grid(128, 10.0)
        u0 = sech2(g)
        p = ModelParams(alpha=0.5)
        tr = free_evolution_trajectory(u0, 0.4, 4, p)
        assert tr.dt_slice == pytest.approx(0.1)
        assert rel(tr.values[3], airy_propagate(u0, 0.3).values) < 1e-13

    def test_shape_checked(self):
        g = make_grid(16, 1.0)
        with pytest.raises(ConfigError):
            Trajectory(ModelParams(alpha=0.5), g, [0.0, 1.0], np.zeros((3, 16)), True)

    def test_default_slice_count(self):
        assert default_slice_count(1.0) == 64
        assert default_slice_count(0.001) == 1
