import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsplab.decay import (
    DecayFit,
    bounded_check,
    compare,
    electric_gap,
    fit,
    linear_rates,
    p_to_s,
    sigma_pl,
    theory_target,
)
from nsplab.model import PhysParams
from nsplab.symbol import density_class_profile, gaussian_grad_profile, radial_norm

T = np.logspace(1, 3, 40)


class TestFit:
    def test_exact_power_law(self):
        f = fit(T, (1 + T) ** -0.75)
        assert f.exponent == pytest.approx(-1.5, abs=1e-6)
        assert f.amplitude_exponent == pytest.approx(-0.75, abs=1e-6)
        assert f.samples == 40 and f.window == (10.0, 1000.0)

    def test_perturbed_power_law(self):
        f = fit(T, (1 + T) ** -1.0 * (1 + 0.01 * np.sin(np.log(T))))
        assert f.exponent == pytest.approx(-2.0, abs=0.02)
        assert f.ci > 0

    def test_constant(self):
        f = fit(T, np.full_like(T, 3.0))
        assert f.exponent == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-3.0, 1.0), st.floats(1e-6, 1e6))
    def test_scale_invariance(self, a, c):
        y = (1 + T) ** a
        assert fit(T, c * y).exponent == pytest.approx(fit(T, y).exponent, abs=1e-12)
        assert fit(T, y).exponent == pytest.approx(2 * a, abs=1e-10)

    def test_window_selection(self):
        t = np.linspace(0, 2000, 401)
        y = np.where(t < 10, 1.0, (1 + t) ** -0.5)
        f = fit(t, y, window=(10, 1000))
        assert f.exponent == pytest.approx(-1.0, abs=1e-10)

    def test_transient_window_rejected(self):
        with pytest.raises(ValueError, match="transient"):
            fit(T, T, window=(4.0, 100.0))

    def test_box_validity(self):
        with pytest.raises(ValueError, match="validity"):
            fit(T, T, window=(10.0, 100.0), t_valid=64.0)

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="samples"):
            fit(T[:9], T[:9])

    def test_nonpositive_norms(self):
        y = (1 + T) ** -1.0
        y[5] = 0.0
        with pytest.raises(ValueError, match="positive"):
            fit(T, y)


class TestTargets:
    def test_velocity(self):
        t = theory_target("velocity", 0, s=0.5)
        assert t.amplitude == -0.25 and t.squared == -0.5

    def test_density(self):
        assert theory_target("density", 0, s=0.5).amplitude == -0.75

    def test_lp_conversion(self):
        assert p_to_s(2.0) == 0.0
        assert p_to_s(1.2) == pytest.approx(1.0)
        assert sigma_pl(2.0, 0) == 0.0
        t = theory_target("energy", 0, p=2.0)
        assert t.amplitude == 0.0 and t.kind == "bounded"
        assert theory_target("density", 0, p=2.0).amplitude == -0.5

    @pytest.mark.parametrize("p", [1.1, 1.2, 1.5, 2.0])
    @pytest.mark.parametrize("ell", [0, 1, 2])
    def test_sigma_matches_energy_rate(self, p, ell):
        assert theory_target("energy", ell, p=p).amplitude == pytest.approx(-sigma_pl(p, ell), abs=1e-15)
        assert theory_target("density", min(ell, 1), p=p).amplitude == pytest.approx(-sigma_pl(p, min(ell, 1)) - 0.5)

    def test_sup_norm_rates(self):
        assert theory_target("density_inf", p=1.5).amplitude == pytest.approx(-1.5)
        assert theory_target("velocity_inf", p=1.5).amplitude == pytest.approx(-1.0)
        with pytest.raises(ValueError):
            theory_target("velocity_inf", s=0.5)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            theory_target("velocity", 0, s=1.5)
        with pytest.raises(ValueError):
            theory_target("density", 2, s=0.5)
        with pytest.raises(ValueError):
            theory_target("velocity", 0, p=1.0)
        with pytest.raises(ValueError):
            theory_target("velocity", 0, s=0.5, p=2.0)
        with pytest.raises(ValueError):
            theory_target("pressure", 0, s=0.5)


class TestCompare:
    def _fit(self, e):
        return DecayFit(e, 0.0, (10.0, 1000.0), 40)

    def test_exact(self):
        assert compare(self._fit(-1.0), -1.0).verdict

    def test_off_by_two_tolerances(self):
        assert not compare(self._fit(-1.2), -1.0, tol=0.1).verdict

    def test_closed_boundary(self):
        assert compare(self._fit(0.25), 0.5, tol=0.25).verdict

    def test_bounded_check(self):
        assert bounded_check([1.0, 2.0, 3.0])
        assert not bounded_check([1.0, 3.5])


class TestElectricGap:
    def test_linear_rates_tables(self):
        assert linear_rates(1.0, "potential") == {"density": -1.0, "velocity": -0.5}
        assert linear_rates(1.0, "density") == {"density": -0.5, "velocity": 0.0}
        with pytest.raises(ValueError):
            linear_rates(1.0, "other")

    def test_gap_from_radial_fits(self):
        params = PhysParams()
        prof = gaussian_grad_profile(0.5, params)
        t = np.logspace(1, 3, 25)
        fd = fit(t, [radial_norm(prof, params, x, which="density") for x in t])
        fv = fit(t, [radial_norm(prof, params, x, which="velocity") for x in t])
        assert electric_gap(fd, fv) == pytest.approx(-0.5, abs=0.05)

    def test_density_class_data(self):
        # data with the density itself in the class: the velocity then lags by 1/2.
        # The velocity norm carries the plasma oscillation, so sample densely
        # enough to average over it rather than alias it.
        params = PhysParams()
        s = 1.2
        prof = density_class_profile(s)
        t = np.logspace(1, 3, 200)
        fd = fit(t, [radial_norm(prof, params, x, which="density") for x in t])
        fv = fit(t, [radial_norm(prof, params, x, which="velocity") for x in t])
        rates = linear_rates(s, "density")
        assert fd.amplitude_exponent == pytest.approx(rates["density"], abs=0.05)
        assert fv.amplitude_exponent == pytest.approx(rates["velocity"], abs=0.05)
