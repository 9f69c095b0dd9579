import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from nsplab.exceptions import NeutralityError, RegimeError, VacuumError
from nsplab.lemmas import random_coeffs
from nsplab.model import (
    NspState,
    PhysParams,
    closure_constant,
    closure_f,
    closure_h,
    linear_tendency,
    poisson_solve,
    rhs,
)
from nsplab.spectral import Grid, NormRequest, SpectralField, derivative_tensor_magnitude, norm, to_spectral
from nsplab.symbol import symbol_matrix


class TestParams:
    def test_sigma0(self):
        assert PhysParams(1.0, 0.0).sigma0 == 1.0
        assert PhysParams(1.0, -0.5).sigma0 == 1.0
        assert PhysParams(1.0, -2.0 / 3.0).sigma0 == pytest.approx(1.0)
        assert PhysParams(2.0, 0.0).nu == 4.0

    def test_invalid_viscosities(self):
        with pytest.raises(ValueError):
            PhysParams(0.0, 0.0)
        with pytest.raises(ValueError):
            PhysParams(1.0, -1.0)

    def test_gamma_law_is_normalized(self):
        p = PhysParams(pressure_law="gamma", gamma=1.4)
        assert float(p.dp(1.0)) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            PhysParams(pressure_law="gamma", gamma=1.4, pressure_coeff=1.0)


class TestClosures:
    def test_values(self):
        assert float(closure_h(1.0)) == 0.5
        assert float(closure_f(0.2)) == pytest.approx(-1.0 / 6.0)
        assert float(closure_h(0.0)) == 0.0 and float(closure_f(0.0)) == 0.0

    def test_gamma_closure(self):
        p = PhysParams(pressure_law="gamma", gamma=2.0)
        # p'(1 + x) / (1 + x) - 1 = 0 for gamma = 2 and K = 1/2
        assert np.allclose(closure_f(np.array([0.1, -0.3, 0.5]), p), 0.0, atol=1e-15)

    def test_closure_constant(self):
        # |h| = |f| = |x| / (1 + x), largest at the lower end of the regime
        assert closure_constant(np.array([-0.5, 0.0, 0.3, 1.0])) == pytest.approx(2.0)
        assert closure_constant(np.zeros(4)) == 0.0
        assert closure_constant(np.array([1e-3])) == pytest.approx(1 / 1.001)

    def test_vacuum(self):
        with pytest.raises(VacuumError):
            closure_h(np.array([0.0, -1.0]))
        with pytest.raises(VacuumError):
            closure_f(-1.5)


class TestPoisson:
    def test_single_mode(self, grid16):
        x = grid16.coordinates()
        rho = to_spectral(np.sin(x[0]) * np.cos(2 * x[1]), grid16)
        gp = poisson_solve(rho).physical()
        # Phi = -rho / 5
        assert np.allclose(gp[0], -np.cos(x[0]) * np.cos(2 * x[1]) / 5, atol=1e-14)
        assert np.allclose(gp[1], 2 * np.sin(x[0]) * np.sin(2 * x[1]) / 5, atol=1e-14)
        assert np.allclose(gp[2], 0.0, atol=1e-14)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10 ** 6), st.sampled_from([0, 1, 2]))
    def test_derivative_identity(self, seed, k):
        g = Grid(16, 5.0)
        rho = SpectralField(g, random_coeffs(g, np.random.default_rng(seed)))
        gp = poisson_solve(rho)
        lhs = math.sqrt(np.sum(derivative_tensor_magnitude(gp, k + 1) ** 2) * g.dx ** 3)
        assert lhs == pytest.approx(norm(rho, NormRequest.hdot(k)), rel=1e-12)

    def test_neutrality(self, grid16):
        x = grid16.coordinates()
        with pytest.raises(NeutralityError):
            poisson_solve(to_spectral(0.1 + np.sin(x[0]), grid16))

    def test_defect(self, grid16, rng):
        rho = SpectralField(grid16, random_coeffs(grid16, rng))
        state = NspState(rho * 0.01, SpectralField.zeros(grid16, "vector"))
        assert state.poisson_defect() < 1e-14


class TestState:
    def test_zero_state_rhs(self, grid16, params):
        drho, du = rhs(NspState.zero(grid16), params)
        assert not np.any(drho.coeffs) and not np.any(du.coeffs)

    def test_regime(self, grid16):
        x = grid16.coordinates()
        with pytest.raises(RegimeError):
            NspState.from_physical(0.8 * np.sin(x[0]), np.zeros((3,) + grid16.shape), grid16)
        s = NspState.from_physical(0.8 * np.sin(x[0]), np.zeros((3,) + grid16.shape), grid16, validate=False)
        with pytest.raises(RegimeError):
            s.check_invariants()

    def test_vacuum_in_rhs(self, grid16, params):
        x = grid16.coordinates()
        s = NspState.from_physical(0.7 * np.sin(x[0]), np.zeros((3,) + grid16.shape), grid16, validate=False)
        with pytest.raises(VacuumError):
            rhs(s, params)

    def test_mass_tendency_vanishes(self, grid16, params, rng):
        rho = SpectralField(grid16, random_coeffs(grid16, rng))
        rho = rho * (0.1 / np.max(np.abs(rho.physical())))
        u = SpectralField(grid16, np.stack([random_coeffs(grid16, rng) for _ in range(3)]) * 0.05)
        drho, _ = rhs(NspState(rho, u), params)
        assert abs(drho.coeffs[0, 0, 0]) < 1e-18


class TestLinearization:
    @pytest.mark.parametrize("lam", [0.0, -0.5, 1.0])
    def test_linear_part_matches_symbol(self, lam):
        params = PhysParams(1.0, lam)
        g = Grid(16, 4 * math.pi)
        rng = np.random.default_rng(7)
        rho = SpectralField(g, random_coeffs(g, rng))
        u = SpectralField(g, np.stack([random_coeffs(g, rng) for _ in range(3)]))
        drho, du = linear_tendency(NspState(rho * 1e-3, u * 1e-3), params)
        for idx in [(1, 0, 0), (1, 2, 0), (3, 1, 2), (0, 5, 1)]:
            xi = g.k[(slice(None),) + idx]
            m = symbol_matrix(xi, params).matrix
            z = np.concatenate([[rho.coeffs[idx]], u.coeffs[(slice(None),) + idx]]) * 1e-3
            got = np.concatenate([[drho.coeffs[idx]], du.coeffs[(slice(None),) + idx]])
            assert np.allclose(got, m @ z, rtol=1e-12, atol=1e-18)

    def test_nonlinear_remainder_is_quadratic(self, grid16, params):
        rng = np.random.default_rng(3)
        rho = SpectralField(grid16, random_coeffs(grid16, rng, cutoff=3))
        u = SpectralField(grid16, np.stack([random_coeffs(grid16, rng, cutoff=3) for _ in range(3)]))
        scale = 0.05 / np.max(np.abs(rho.physical()))
        errs = []
        for eps in (1e-2, 5e-3):
            st_ = NspState(rho * (eps * scale), u * (eps * scale))
            full = rhs(st_, params)
            lin = linear_tendency(st_, params)
            errs.append(np.max(np.abs(full[1].coeffs - lin[1].coeffs * grid16.dealias_mask)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)


def _sympy_oracle(params, amp):
    """Right-hand side of the perturbation system for a trigonometric state, by sympy."""
    x, y, z = sp.symbols("x y z", real=True)
    X = (x, y, z)
    rho = amp * sp.sin(x) * sp.cos(y)
    phi = -rho / 2  # Delta(sin x cos y) = -2 sin x cos y
    u = [amp * sp.sin(y), amp * sp.cos(z) * sp.sin(x), amp * sp.sin(x + z)]
    div = sum(sp.diff(u[i], X[i]) for i in range(3))
    lap = [sum(sp.diff(u[i], X[j], 2) for j in range(3)) for i in range(3)]
    visc = [params.mu * lap[i] + (params.mu + params.lam) * sp.diff(div, X[i]) for i in range(3)]
    h = rho / (1 + rho)
    f = 1 / (1 + rho) - 1
    drho = -div - sum(sp.diff(rho * u[i], X[i]) for i in range(3))
    du = []
    for i in range(3):
        adv = sum(u[j] * sp.diff(u[i], X[j]) for j in range(3))
        du.append(visc[i] - sp.diff(rho, X[i]) + sp.diff(phi, X[i]) - adv - h * visc[i]
                  - f * sp.diff(rho, X[i]))
    fields = [rho] + u
    tend = [drho] + du
    return [sp.lambdify(X, e, "numpy") for e in fields], [sp.lambdify(X, e, "numpy") for e in tend]


class TestManufacturedSolution:
    @pytest.mark.parametrize("lam", [0.0, 0.5])
    def test_rhs_matches_symbolic(self, lam):
        params = PhysParams(1.0, lam)
        g = Grid(32, 2 * math.pi)
        x = g.coordinates()
        fields, tend = _sympy_oracle(params, 0.05)
        vals = [np.broadcast_to(f(*x), g.shape) for f in fields]
        state = NspState.from_physical(vals[0], np.stack(vals[1:]), g)
        drho, du = rhs(state, params)
        exp_rho = np.broadcast_to(tend[0](*x), g.shape)
        exp_u = np.stack([np.broadcast_to(t(*x), g.shape) for t in tend[1:]])
        scale = np.max(np.abs(exp_u))
        assert np.max(np.abs(drho.physical() - exp_rho)) < 1e-10 * scale
        assert np.max(np.abs(du.physical() - exp_u)) < 1e-10 * scale
