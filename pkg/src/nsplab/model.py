"""
Perturbation form of the unipolar Navier-Stokes-Poisson system.

With rho = 1 + varrho the unknowns are (varrho, u) and the slaved field
grad Phi solving Delta Phi = varrho:

    d_t varrho = -div u - div(varrho u)
    d_t u      = mu Lap u + (mu + lam) grad div u - grad varrho + grad Phi
                 - u.grad u - h(varrho) (mu Lap u + (mu + lam) grad div u)
                 - f(varrho) grad varrho

    h(varrho) = varrho / (1 + varrho),   f(varrho) = p'(1 + varrho) / (1 + varrho) - 1.

Nonlinear products are formed in physical space and dealiased with the 2/3 rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import scipy.fft as sfft

from .exceptions import NeutralityError, RegimeError, VacuumError
from .spectral import Grid, SpectralField, to_physical

__all__ = [
    "PhysParams",
    "NspState",
    "closure_h",
    "closure_f",
    "closure_constant",
    "poisson_solve",
    "enforce_neutrality",
    "rhs",
    "linear_tendency",
    "nonlinear_tendency",
    "VACUUM_GUARD",
    "REGIME",
]

# 1 + varrho below this aborts the run; the a priori regime is [1/2, 2].
VACUUM_GUARD = 0.4
REGIME = (0.5, 2.0)
_NEUTRAL_RTOL = 1e-12


@dataclass(frozen=True)
class PhysParams:
    """Viscosities and pressure law.

    ``pressure_law`` is ``"linear"`` (p = rho) or ``"gamma"`` (p = K rho^gamma,
    K defaulting to 1/gamma). Construction fails unless mu > 0,
    lam + 2 mu / 3 >= 0 and p'(1) = 1.
    """

    mu: float = 1.0
    lam: float = 0.0
    pressure_law: str = "linear"
    gamma: float = 5.0 / 3.0
    pressure_coeff: Optional[float] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.lam + 2.0 * self.mu / 3.0 < 0:
            raise ValueError(f"need lam + 2 mu / 3 >= 0, got mu={self.mu}, lam={self.lam}")
        if self.pressure_law not in ("linear", "gamma"):
            raise ValueError(f"unknown pressure law {self.pressure_law!r}")
        if self.pressure_law == "gamma" and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        slope = float(self.dp(np.array(1.0)))
        if abs(slope - 1.0) > 1e-12:
            raise ValueError(f"pressure law must satisfy p'(1) = 1, got p'(1) = {slope}")

    @property
    def nu(self) -> float:
        """Longitudinal viscosity 2 mu + lam."""
        return 2.0 * self.mu + self.lam

    @property
    def sigma0(self) -> float:
        """Coercivity constant of the viscous form, min(mu, 2 mu + lam)."""
        return min(self.mu, self.nu)

    def _coeff(self) -> float:
        if self.pressure_coeff is not None:
            return self.pressure_coeff
        return 1.0 / self.gamma

    def pressure(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.pressure_law == "linear":
            return rho
        return self._coeff() * rho ** self.gamma

    def dp(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.pressure_law == "linear":
            return np.ones_like(rho)
        return self._coeff() * self.gamma * rho ** (self.gamma - 1.0)

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "lam": self.lam,
            "pressure_law": self.pressure_law,
            "gamma": self.gamma,
            "pressure_coeff": self.pressure_coeff,
        }


def _check_vacuum(varrho: np.ndarray, threshold: float = 0.0) -> None:
    low = float(np.min(varrho)) + 1.0 if varrho.size else 1.0
    if low <= threshold:
        raise VacuumError(f"density reached {low:.6g} (threshold {threshold})")


def closure_h(varrho) -> np.ndarray:
    """h(varrho) = varrho / (1 + varrho), pointwise."""
    x = np.asarray(varrho, dtype=float)
    _check_vacuum(x)
    return x / (1.0 + x)


def closure_f(varrho, params: PhysParams = PhysParams()) -> np.ndarray:
    """f(varrho) = p'(1 + varrho) / (1 + varrho) - 1, pointwise."""
    x = np.asarray(varrho, dtype=float)
    _check_vacuum(x)
    if params.pressure_law == "linear":
        # exact form of 1/(1+x) - 1, avoids cancellation for small x
        return -x / (1.0 + x)
    return params.dp(1.0 + x) / (1.0 + x) - 1.0


def closure_constant(varrho, params: PhysParams = PhysParams()) -> float:
    """Smallest C with |h|, |f| <= C |varrho| at every sample (0 for varrho = 0)."""
    x = np.asarray(varrho, dtype=float)
    nz = x != 0
    if not nz.any():
        return 0.0
    x = x[nz]
    return float(max(np.max(np.abs(closure_h(x) / x)), np.max(np.abs(closure_f(x, params) / x))))


def _mean_tolerance(c: np.ndarray) -> float:
    scale = float(np.max(np.abs(c))) if c.size else 0.0
    return _NEUTRAL_RTOL * scale


def poisson_solve(rho: SpectralField) -> SpectralField:
    """grad Phi with Delta Phi = varrho: coefficients -i k c_k / |k|^2, zero at k = 0."""
    if rho.is_vector:
        raise ValueError("poisson_solve needs a scalar density field")
    c0 = rho.coeffs[0, 0, 0]
    if abs(c0) > _mean_tolerance(rho.coeffs):
        raise NeutralityError(f"density perturbation has nonzero mean {c0!r}")
    return SpectralField(rho.grid, _grad_phi_coeffs(rho.grid, rho.coeffs))


def _grad_phi_coeffs(grid: Grid, rho_c: np.ndarray) -> np.ndarray:
    inv = np.where(grid.nonzero, 1.0 / np.where(grid.nonzero, grid.k2, 1.0), 0.0)
    return -1j * grid.k * (rho_c * inv)


def enforce_neutrality(rho: SpectralField) -> SpectralField:
    c = rho.coeffs.copy()
    c[..., 0, 0, 0] = 0.0
    return SpectralField(rho.grid, c)


@dataclass(frozen=True, eq=False)
class NspState:
    """Perturbation state (varrho, u) at ``time``; grad Phi is derived on demand."""

    rho: SpectralField
    velocity: SpectralField
    time: float = 0.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.rho.is_vector or not self.velocity.is_vector:
            raise ValueError("NspState needs a scalar density and a vector velocity")
        if self.rho.grid != self.velocity.grid:
            raise ValueError("density and velocity live on different grids")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        if self.validate:
            self.check_invariants()

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @cached_property
    def grad_phi(self) -> SpectralField:
        return poisson_solve(self.rho)

    @cached_property
    def rho_physical(self) -> np.ndarray:
        return to_physical(self.rho)

    def check_invariants(self, regime: bool = True) -> None:
        """Raise if neutrality, finiteness or the density regime is violated."""
        c = self.rho.coeffs
        if not (np.isfinite(c).all() and np.isfinite(self.velocity.coeffs).all()):
            raise VacuumError("state contains non-finite coefficients")
        if abs(c[0, 0, 0]) > _mean_tolerance(c):
            raise NeutralityError(f"density perturbation has nonzero mean {c[0, 0, 0]!r}")
        if regime:
            x = self.rho_physical
            lo, hi = 1.0 + float(np.min(x)), 1.0 + float(np.max(x))
            if lo < REGIME[0] or hi > REGIME[1]:
                raise RegimeError(f"density range [{lo:.6g}, {hi:.6g}] leaves [{REGIME[0]}, {REGIME[1]}]")

    def poisson_defect(self) -> float:
        """||div grad Phi - varrho||_{L^2} / ||varrho||_{L^2}."""
        g = self.grid
        div = np.sum(1j * g.k * self.grad_phi.coeffs, axis=0)
        num = math.sqrt(g.volume * float(np.sum(np.abs(div - self.rho.coeffs) ** 2)))
        den = math.sqrt(g.volume * float(np.sum(np.abs(self.rho.coeffs) ** 2)))
        return num / den if den > 0 else num

    @classmethod
    def from_physical(cls, rho, velocity, grid: Grid, time: float = 0.0, validate: bool = True) -> "NspState":
        from .spectral import to_spectral

        r = enforce_neutrality(to_spectral(rho, grid))
        return cls(r, to_spectral(velocity, grid), time, validate)

    @classmethod
    def zero(cls, grid: Grid) -> "NspState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid, "vector"))


# --- tendencies on raw coefficient arrays (used by the integrator) ---------------


def linear_tendency_arrays(grid: Grid, rho_c: np.ndarray, u_c: np.ndarray, params: PhysParams):
    k = grid.k
    div_u = np.sum(1j * k * u_c, axis=0)
    drho = -div_u
    visc = -params.mu * grid.k2 * u_c + (params.mu + params.lam) * 1j * k * div_u
    du = visc - 1j * k * rho_c + _grad_phi_coeffs(grid, rho_c)
    return drho, du


def _ifft(c: np.ndarray, grid: Grid) -> np.ndarray:
    n = grid.n
    return sfft.irfftn(c[..., : n // 2 + 1], s=grid.shape, axes=(-3, -2, -1), workers=-1) * n ** 3


def _fft(x: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.fftn(x, axes=(-3, -2, -1), workers=-1) / grid.n ** 3


def nonlinear_tendency_arrays(grid: Grid, rho_c: np.ndarray, u_c: np.ndarray, params: PhysParams,
                              guard: float = VACUUM_GUARD):
    """Dealiased nonlinear terms (N_rho, N_u) of the perturbation system."""
    k = grid.k
    mask = grid.dealias_mask
    rho = _ifft(rho_c, grid)
    low = 1.0 + float(np.min(rho))
    if not math.isfinite(low) or low < guard:
        raise VacuumError(f"min density {low:.6g} below guard {guard}")
    u = _ifft(u_c, grid)
    grad_rho = _ifft(1j * k * rho_c, grid)
    div_u_c = np.sum(1j * k * u_c, axis=0)
    visc = _ifft(-params.mu * grid.k2 * u_c + (params.mu + params.lam) * 1j * k * div_u_c, grid)
    h = closure_h(rho)
    f = closure_f(rho, params)

    n_rho = -np.sum(1j * k * _fft(rho * u, grid), axis=0)

    n_u_phys = np.empty_like(u)
    for i in range(3):
        grad_ui = _ifft(1j * k * u_c[i], grid)
        n_u_phys[i] = -np.sum(u * grad_ui, axis=0) - h * visc[i] - f * grad_rho[i]
    n_u = _fft(n_u_phys, grid)
    return n_rho * mask, n_u * mask


def linear_tendency(state: NspState, params: PhysParams) -> Tuple[SpectralField, SpectralField]:
    drho, du = linear_tendency_arrays(state.grid, state.rho.coeffs, state.velocity.coeffs, params)
    return SpectralField(state.grid, drho), SpectralField(state.grid, du)


def nonlinear_tendency(state: NspState, params: PhysParams) -> Tuple[SpectralField, SpectralField]:
    nr, nu = nonlinear_tendency_arrays(state.grid, state.rho.coeffs, state.velocity.coeffs, params)
    return SpectralField(state.grid, nr), SpectralField(state.grid, nu)


def rhs(state: NspState, params: PhysParams, nonlinear: bool = True) -> Tuple[SpectralField, SpectralField]:
    """Time derivative (d_t varrho, d_t u) of the perturbation system.

    The result is dealiased. With ``nonlinear=False`` only the linear part is
    returned. Raises VacuumError when 1 + varrho drops below ``VACUUM_GUARD``.
    """
    g = state.grid
    drho, du = linear_tendency_arrays(g, state.rho.coeffs, state.velocity.coeffs, params)
    if nonlinear:
        nr, nu = nonlinear_tendency_arrays(g, state.rho.coeffs, state.velocity.coeffs, params)
        drho = drho + nr
        du = du + nu
    mask = g.dealias_mask
    return SpectralField(g, drho * mask), SpectralField(g, du * mask)
