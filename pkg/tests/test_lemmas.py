import math
from math import comb
from types import SimpleNamespace

import numpy as np
import pytest

from nsplab.lemmas import (
    FieldEnsemble,
    commutator_check,
    commutator_norm,
    composition_check,
    composition_ratio,
    gn_check,
    gn_theta,
    hls_check,
    hls_exponent,
    hls_ratio,
    neg_interp_check,
    neg_interp_ratio,
    stability,
)
from nsplab.model import closure_h
from nsplab.spectral import Grid, SpectralField, to_spectral


def _fixed(*fields):
    """Stand-in ensemble yielding the given fields."""
    return SimpleNamespace(fields=lambda stream=0: iter(fields))


@pytest.fixture(scope="module")
def ens():
    return FieldEnsemble(Grid(32, 2 * math.pi), count=16, seed=3)


class TestInterpolation:
    def test_theta(self):
        assert gn_theta(1, 0, 2, 2, 2, 2) == pytest.approx(0.5)
        assert gn_theta(0, 0, 1, 6, 2, 2) == pytest.approx(1.0)

    def test_single_shell_is_sharp(self, grid16):
        x = grid16.coordinates()
        f = to_spectral(np.cos(x[0] + 2 * x[1]) + 0.3 * np.sin(2 * x[0] - x[1]), grid16)
        r = gn_check(_fixed(f), alpha=1, m=0, ell=2, p=2, q=2, r=2)
        assert r.max_ratio == pytest.approx(1.0, rel=1e-12)

    def test_sobolev_case(self, ens):
        r = gn_check(ens, alpha=0, m=0, ell=1, p=6, q=2, r=2)
        assert 0 < r.max_ratio < 2
        assert r.settings["theta"] == pytest.approx(1.0)

    def test_theta_outside_unit_interval(self, ens):
        with pytest.raises(ValueError, match="outside"):
            gn_check(ens, alpha=0, m=0, ell=1, p=1.5, q=2, r=2)

    def test_theta_must_match_scaling(self, ens):
        with pytest.raises(ValueError, match="violates"):
            gn_check(ens, alpha=1, m=0, ell=2, p=2, q=2, r=2, theta=0.3)


class TestNegativeInterpolation:
    def test_single_shell_equals_one(self, grid16):
        x = grid16.coordinates()
        f = to_spectral(np.sin(x[0] + x[1] + x[2]), grid16)
        for ell, s in ((1, 0.5), (0, 1), (2, 0.25)):
            assert neg_interp_ratio(f, ell, s) == pytest.approx(1.0, rel=1e-12)

    def test_two_shells_below_one(self, grid16):
        x = grid16.coordinates()
        f = to_spectral(np.sin(x[0]) + np.cos(3 * x[1]), grid16)
        assert neg_interp_ratio(f, 1, 0.5) < 1 - 1e-3

    def test_ensemble_bounded_by_one(self, ens):
        assert neg_interp_check(ens, ell=1, s=0.0).max_ratio <= 1 + 1e-12
        assert neg_interp_check(ens, ell=1, s=0.5).max_ratio <= 1 + 1e-12

    def test_nonzero_mean_rejected(self, grid16):
        x = grid16.coordinates()
        with pytest.raises(ValueError, match="mean"):
            neg_interp_ratio(to_spectral(1.0 + np.sin(x[0]), grid16), 1, 0.5)


class TestRieszPotential:
    @pytest.mark.parametrize("s,p", [(0.0, 2.0), (3.0, 2.0), (1.0, 1.0), (2.0, 1.5)])
    def test_preconditions(self, s, p):
        with pytest.raises(ValueError):
            hls_exponent(s, p)

    def test_exponent(self):
        assert hls_exponent(1.0, 2.0) == pytest.approx(6.0)
        assert hls_exponent(1.0, 1.2) == pytest.approx(2.0)

    def test_q_mismatch(self, ens):
        with pytest.raises(ValueError, match="violates"):
            hls_check(ens, 1.0, 2.0, q=5.0)

    def test_gaussian_closed_form(self):
        # f = Lambda G for a Gaussian G, so Lambda^-1 f = G - mean(G); both norms are explicit
        L, sig = 20.0, 1.0
        g = Grid(64, L)
        x = g.coordinates() - L / 2
        G = to_spectral(np.exp(-np.sum(x ** 2, axis=0) / (2 * sig ** 2)), g)
        f = SpectralField(g, G.coeffs * g.kmag)
        m = (2 * math.pi * sig ** 2) ** 1.5 / L ** 3
        moments = [L ** 3] + [(2 * math.pi * sig ** 2 / j) ** 1.5 for j in range(1, 7)]
        num = sum(comb(6, j) * (-m) ** (6 - j) * moments[j] for j in range(7)) ** (1 / 6)
        den = math.sqrt(1.5 * math.pi ** 1.5 * sig)
        assert hls_ratio(f, 1.0, 2.0, 6.0) == pytest.approx(num / den, rel=1e-6)

    def test_l_six_fifths_constant_reported(self, ens):
        r = hls_check(ens, 1.0, 1.2)
        assert r.settings["q"] == pytest.approx(2.0)
        assert np.isfinite(r.max_ratio) and r.max_ratio > 0


class TestCommutator:
    def test_constant_factor_vanishes(self, ens):
        r = commutator_check(ens, m=2, f_const=1.7)
        assert r.max_ratio < 1e-12

    def test_first_order_product_rule(self, grid16):
        # [nabla, f] g = g nabla f = (cos x cos 2y, 0, 0)
        x = grid16.coordinates()
        f = to_spectral(np.sin(x[0]), grid16)
        g = to_spectral(np.cos(2 * x[1]), grid16)
        assert commutator_norm(f, g, 1) == pytest.approx((2 * math.pi) ** 1.5 / 2, rel=1e-12)

    def test_second_order_ratio(self, ens):
        r = commutator_check(ens, m=2)
        assert np.isfinite(r.max_ratio) and 0 < r.max_ratio < 10
        assert len(r.ratios) == ens.count

    def test_holder_violation(self, ens):
        with pytest.raises(ValueError, match="exponents"):
            commutator_check(ens, m=1, p=2, p1=2, p2=2)
        with pytest.raises(ValueError):
            commutator_check(ens, m=0)


class TestComposition:
    def test_identity(self, ens):
        assert composition_check(ens, "identity", m=1).max_ratio == pytest.approx(1.0, rel=1e-12)

    def test_h_bounded_by_derivative(self, ens):
        # h'(x) = (1 + x)^-2 <= 4 on |x| <= 1/2
        assert composition_check(ens, "h", m=1).max_ratio <= 4.0

    def test_amplitude_above_one(self, ens):
        with pytest.raises(ValueError, match="exceed"):
            composition_check(ens, "h", amplitude=1.5)

    def test_ratio_rejects_large_field(self, grid16):
        x = grid16.coordinates()
        with pytest.raises(ValueError, match="exceeds"):
            composition_ratio(to_spectral(1.2 * np.sin(x[0]), grid16), closure_h, 1)


class TestReproducibility:
    def test_seeded_ensembles_are_identical(self, ens):
        a = [f.coeffs for f in ens.fields()]
        b = [f.coeffs for f in FieldEnsemble(ens.grid, count=16, seed=3).fields()]
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        assert np.array_equal(hls_check(ens, 1.0, 1.2).ratios, hls_check(ens, 1.0, 1.2).ratios)

    def test_doubling_keeps_prefix(self, ens):
        first = [f.coeffs for f in ens.fields()]
        doubled = [f.coeffs for f in ens.doubled().fields()]
        assert len(doubled) == 32 and all(np.array_equal(x, y) for x, y in zip(first, doubled))

    def test_unit_normalization(self, ens):
        for f in ens.fields():
            assert math.sqrt(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2)) == pytest.approx(1.0)

    def test_cutoff_inside_dealias_radius(self):
        with pytest.raises(ValueError):
            FieldEnsemble(Grid(16, 1.0), cutoff=6.0)

    @pytest.mark.parametrize("check,kw", [
        (gn_check, dict(alpha=0, m=0, ell=1, p=6, q=2, r=2)),
        (neg_interp_check, dict(ell=1, s=0.5)),
        (hls_check, dict(s=1.0, p=1.2)),
        (commutator_check, dict(m=2)),
        (composition_check, dict(g="h", m=1)),
        (composition_check, dict(g="f", m=1)),
    ])
    def test_doubling_rule(self, ens, check, kw):
        a, b, change, ok = stability(check, ens, **kw)
        assert b.max_ratio >= a.max_ratio
        assert ok, change
