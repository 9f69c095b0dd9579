"""Named initial-data recipes and their sampling on a periodic box."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import NspState, PhysParams
from .spectral import Grid, NormRequest, SpectralField, norm
from .symbol import RadialProfile, gaussian_grad_profile, s_tail_profile

__all__ = ["DataRecipe", "upper_half", "sample_profile", "random_state", "build_state", "e03_norm"]

RECIPES = ("gaussian-grad", "s-tail", "random", "zero")


@dataclass(frozen=True)
class DataRecipe:
    """Initial-data recipe: a named profile scaled so sqrt(E_0^3(0)) = delta."""

    name: str = "gaussian-grad"
    delta: float = 1e-2
    s: float = 0.5
    eps: float = 0.0
    width: float = 0.5
    polarization: str = "wave"
    slope: float = 2.0
    cutoff: Optional[float] = None

    def __post_init__(self):
        if self.name not in RECIPES:
            raise ValueError(f"unknown recipe {self.name!r}; choose from {RECIPES}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0 <= self.s < 1.5:
            raise ValueError("s must lie in [0, 3/2)")

    def profile(self, params: PhysParams) -> Optional[RadialProfile]:
        if self.name == "gaussian-grad":
            return gaussian_grad_profile(self.s, params, self.eps, self.width, self.polarization)
        if self.name == "s-tail":
            return s_tail_profile(self.s, self.eps, self.width)
        return None


def upper_half(grid: Grid) -> np.ndarray:
    """Mask of one half of the nonzero lattice: -k lies in the other half."""
    kx, ky, kz = grid.k
    return (kz > 0) | ((kz == 0) & (ky > 0)) | ((kz == 0) & (ky == 0) & (kx > 0))


def sample_profile(profile: RadialProfile, grid: Grid) -> NspState:
    """Box coefficients of whole-space radial data.

    c_k = (2 pi)^{-3/2} (2 pi / L)^3 f_hat(k), so that box Parseval sums converge
    to the whole-space norms as L grows. Complex amplitudes are placed on one half
    of the lattice and conjugated onto the other, which keeps the physical field
    real. Modes outside the dealias ball are dropped.
    """
    scale = (2.0 * math.pi) ** -1.5 * (2.0 * math.pi / grid.L) ** 3
    mask = grid.dealias_mask & grid.nonzero
    r = grid.kmag[mask]
    rho = np.zeros(r.shape, dtype=complex)
    v = np.zeros(r.shape, dtype=complex)
    for i, ri in enumerate(r):
        rho[i], v[i] = profile.amplitudes(float(ri))
    up = upper_half(grid)[mask]
    rho = np.where(up, rho, np.conj(rho)) * scale
    v = np.where(up, v, np.conj(v)) * scale
    rho_c = np.zeros(grid.shape, dtype=complex)
    rho_c[mask] = rho
    u_c = np.zeros((3,) + grid.shape, dtype=complex)
    khat = grid.khat
    for j in range(3):
        u_c[j][mask] = -1j * v * khat[j][mask]
    return NspState(SpectralField(grid, rho_c), SpectralField(grid, u_c), 0.0, validate=False)


def random_state(grid: Grid, rng: np.random.Generator, slope: float = 2.0,
                 cutoff: Optional[float] = None) -> NspState:
    """Random smooth (rho, u): complex Gaussian coefficients times |k|^-slope."""
    from .lemmas import random_coeffs

    rho = random_coeffs(grid, rng, slope, cutoff)
    u = np.stack([random_coeffs(grid, rng, slope, cutoff) for _ in range(3)])
    return NspState(SpectralField(grid, rho), SpectralField(grid, u), 0.0, validate=False)


def e03_norm(state: NspState) -> float:
    """sqrt(E_0^3) = ||(rho, u, grad Phi)||_{H^3}."""
    total = 0.0
    for f in (state.rho, state.velocity, state.grad_phi):
        total += norm(f, NormRequest.hk(3)) ** 2
    return math.sqrt(total)


def build_state(recipe: DataRecipe, grid: Grid, params: PhysParams,
                rng: Optional[np.random.Generator] = None) -> NspState:
    """Initial state for a recipe, normalized to sqrt(E_0^3(0)) = delta."""
    if recipe.name == "zero" or recipe.delta == 0:
        return NspState.zero(grid)
    if recipe.name == "random":
        if rng is None:
            rng = np.random.default_rng(0)
        base = random_state(grid, rng, recipe.slope, recipe.cutoff)
    else:
        base = sample_profile(recipe.profile(params), grid)
    size = e03_norm(base)
    if size == 0:
        raise ValueError("recipe produced no resolved modes on this grid")
    k = recipe.delta / size
    state = NspState(base.rho * k, base.velocity * k, 0.0)
    return state
