import math

import numpy as np
import pytest

from nsplab.exceptions import ConfigError, IntegrationAborted
from nsplab.integrator import (
    IntegratorConfig,
    Stepper,
    integrate,
    load_checkpoint,
    max_stable_dt,
    phi,
    save_checkpoint,
    step,
)
from nsplab.lemmas import random_coeffs
from nsplab.model import NspState, PhysParams
from nsplab.spectral import Grid, SpectralField
from nsplab.symbol import evolve_mode, symbol_matrix


def _smooth_state(grid, rho_amp=0.2, u_amp=0.3, seed=0):
    rng = np.random.default_rng(seed)
    rho = SpectralField(grid, random_coeffs(grid, rng, cutoff=3))
    u = SpectralField(grid, np.stack([random_coeffs(grid, rng, cutoff=3) for _ in range(3)]))
    return NspState(rho * (rho_amp / np.max(np.abs(rho.physical()))), u * (u_amp / np.max(np.abs(u.physical()))))


def _flat(state):
    return np.concatenate([state.rho.coeffs.ravel(), state.velocity.coeffs.ravel()])


def _run(stepper, state, n):
    stepper.reset()
    for _ in range(n):
        state = stepper.step(state)
    return state


class TestPhi:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_series_branch_is_continuous(self, k):
        z = np.array([0.4999999, 0.5000001, 0.4999999j, 0.5000001j])
        v = phi(k, z)
        assert abs(v[0] - v[1]) < 1e-6 and abs(v[2] - v[3]) < 1e-6

    def test_values(self):
        assert phi(1, 0.0) == pytest.approx(1.0)
        assert phi(2, 0.0) == pytest.approx(0.5)
        assert phi(1, 2.0) == pytest.approx((math.exp(2) - 1) / 2)
        assert phi(3, -1e-3) == pytest.approx(1 / 6 - 1e-3 / 24 + 1e-6 / 120, rel=1e-10)


class TestConfig:
    def test_errors_name_fields(self):
        with pytest.raises(ConfigError) as exc:
            IntegratorConfig("rk45", dt=-1.0)
        assert set(exc.value.problems) == {"integrator.scheme", "integrator.dt"}

    def test_aliases(self):
        assert IntegratorConfig("ETD-RK4").scheme == "etdrk4"
        assert IntegratorConfig("IMEX-CNAB2").scheme == "cnab2"

    def test_stability_limit(self, params):
        g = Grid(64, 32 * math.pi)
        # max |Im lambda| = sqrt(5) / 2 is reached at |xi|^2 = 1/2 for mu = 1, lam = 0
        assert max_stable_dt(g, params) == pytest.approx(0.8 * 2 * math.pi / (10 * math.sqrt(1.25)), rel=1e-3)

    def test_dt_above_limit(self, grid16, params):
        with pytest.raises(ConfigError, match="stability limit"):
            integrate(NspState.zero(grid16), IntegratorConfig(dt=5.0, t_end=10.0), params)


class TestStep:
    @pytest.mark.parametrize("scheme", ["etdrk4", "cnab2"])
    def test_zero_state_is_fixed(self, grid16, params, scheme):
        out = step(NspState.zero(grid16), IntegratorConfig(scheme, dt=0.1), params)
        assert not np.any(out.rho.coeffs) and not np.any(out.velocity.coeffs)
        assert out.time == pytest.approx(0.1)

    def test_t_end_zero_returns_initial(self, grid16, params):
        s0 = _smooth_state(grid16)
        traj = integrate(s0, IntegratorConfig(t_end=0.0), params)
        assert traj.final is s0 and traj.steps == 0

    def test_linear_mode_matches_exact_evolution(self, params):
        g = Grid(16, 4 * math.pi)
        idx = (2, 1, 0)
        rho = np.zeros(g.shape, complex)
        u = np.zeros((3,) + g.shape, complex)
        rho0, u0 = 0.01 + 0.02j, np.array([0.03, -0.01j, 0.02])
        neg = tuple(-i % g.n for i in idx)
        rho[idx], rho[neg] = rho0, np.conj(rho0)
        u[(slice(None),) + idx], u[(slice(None),) + neg] = u0, np.conj(u0)
        s0 = NspState(SpectralField(g, rho), SpectralField(g, u))
        traj = integrate(s0, IntegratorConfig("etdrk4", dt=0.4, t_end=8.0, nonlinear=False), params)
        exact_rho, exact_u = evolve_mode(symbol_matrix(g.k[(slice(None),) + idx], params), rho0, u0, 8.0)
        assert traj.final.rho.coeffs[idx] == pytest.approx(exact_rho, abs=1e-15)
        assert np.allclose(traj.final.velocity.coeffs[(slice(None),) + idx], exact_u, atol=1e-15)

    def test_cnab2_linear_order(self, grid16, params):
        s0 = _smooth_state(grid16)
        exact = _run(Stepper(grid16, params, 0.5, "etdrk4", nonlinear=False), s0, 1)
        errs = [np.max(np.abs(_flat(_run(Stepper(grid16, params, 0.5 / m, "cnab2", nonlinear=False), s0, m))
                              - _flat(exact))) for m in (16, 32, 64)]
        assert math.log2(errs[1] / errs[2]) >= 1.9

    @pytest.mark.slow
    def test_etdrk4_fourth_order(self, grid16, params):
        s0 = _smooth_state(grid16)
        T = 0.4
        ref = _flat(_run(Stepper(grid16, params, T / 256, "etdrk4"), s0, 256))
        errs = [np.max(np.abs(_flat(_run(Stepper(grid16, params, T / m, "etdrk4"), s0, m)) - ref))
                for m in (8, 16, 32)]
        slopes = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
        assert all(abs(s - 4) <= 0.2 for s in slopes), slopes

    def test_cnab2_nonlinear_order(self, grid16, params):
        s0 = _smooth_state(grid16)
        T = 0.4
        ref = _flat(_run(Stepper(grid16, params, T / 128, "cnab2"), s0, 128))
        errs = [np.max(np.abs(_flat(_run(Stepper(grid16, params, T / m, "cnab2"), s0, m)) - ref))
                for m in (4, 8, 16)]
        assert math.log2(errs[1] / errs[2]) >= 1.9

    def test_mass_and_neutrality_preserved(self, grid16, params):
        s0 = _smooth_state(grid16)
        masses = []
        traj = integrate(s0, IntegratorConfig("etdrk4", dt=0.1, t_end=1.0), params,
                         monitor=lambda s: masses.append(abs(np.mean(s.rho_physical))))
        assert max(masses) <= 1e-12
        assert traj.final.poisson_defect() < 1e-13
        assert len(traj.times) == 11


class TestCheckpoints:
    def test_round_trip(self, grid16, params, tmp_path):
        s0 = _smooth_state(grid16)
        path = save_checkpoint(tmp_path / "c.npz", s0, PhysParams(1.0, 0.5), {"note": "x"})
        state, p, header = load_checkpoint(path)
        assert np.array_equal(state.rho.coeffs, s0.rho.coeffs)
        assert np.array_equal(state.velocity.coeffs, s0.velocity.coeffs)
        assert p == PhysParams(1.0, 0.5)
        assert header["note"] == "x" and header["version"] == 1

    def test_abort_writes_last_good_state(self, grid16, params, tmp_path):
        x = grid16.coordinates()
        zero = np.zeros(grid16.shape)
        s0 = NspState.from_physical(0.45 * np.sin(x[0]), np.stack([2.0 * np.cos(x[0]), zero, zero]), grid16)
        with pytest.raises(IntegrationAborted) as exc:
            integrate(s0, IntegratorConfig("etdrk4", t_end=2.0), params, checkpoint_dir=tmp_path)
        assert exc.value.checkpoint.exists()
        state, _, header = load_checkpoint(exc.value.checkpoint)
        assert state.time == exc.value.last_time
        assert "RegimeError" in exc.value.reason
        assert header["reason"] in exc.value.reason
