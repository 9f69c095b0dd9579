"""
Energy functionals of the perturbation system and their balance residuals.

For the linear flow every derivative level k obeys

    1/2 d/dt E_k + mu ||nabla^{k+1} u||^2 + (mu + lam) ||nabla^k div u||^2 = 0,
    E_k = ||nabla^k rho||^2 + ||nabla^k u||^2 + ||nabla^k grad Phi||^2.

The monitor evaluates the left-hand side from the instantaneous tendency (so the
only error is round-off); for the nonlinear flow the same expression measures
the cubic contribution of the nonlinear terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import GridMismatchError
from .model import NspState, PhysParams, poisson_solve, rhs
from .spectral import NormRequest, SpectralField, divergence, hdot_inner, norm

__all__ = [
    "EnergyRequest",
    "EnergyReport",
    "report",
    "viscous_form",
    "coercivity_ratio",
    "LyapunovVerdict",
    "lyapunov_check",
    "HsVerdict",
    "hs_negative_track",
    "discrete_residuals",
]

FIELDS = ("rho", "u", "grad_phi")


@dataclass(frozen=True)
class EnergyRequest:
    """What to monitor: top order N, negative indices, (l, m) pairs, cross weight."""

    N: int = 3
    s_list: Tuple[float, ...] = (0.5,)
    pairs: Tuple[Tuple[int, int], ...] = ((0, 3), (1, 3))
    delta: float = 0.0
    eps_cross: Optional[float] = None
    linear: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        for s in self.s_list:
            if not 0 <= s < 1.5:
                raise ValueError(f"negative index s={s} outside [0, 3/2)")
        for l, m in self.pairs:
            if not 0 <= l <= m <= self.N:
                raise ValueError(f"pair (l={l}, m={m}) must satisfy 0 <= l <= m <= N")

    @property
    def cross_weight(self) -> float:
        return 0.1 * self.delta if self.eps_cross is None else self.eps_cross

    @property
    def orders(self) -> List[float]:
        neg = [-s for s in self.s_list if s > 0]
        return sorted(set(neg)) + list(range(0, self.N + 2))


@dataclass
class EnergyReport:
    time: float
    sobolev_table: Dict[str, Dict[float, float]]
    E_lm: Dict[Tuple[int, int], float]
    D_lm: Dict[Tuple[int, int], float]
    E_lm_corrected: Dict[Tuple[int, int], float]
    cross: Dict[int, float]
    energy_k: Dict[int, float]
    dissipation_k: Dict[int, float]
    identity_residual: Dict[int, float]
    coercivity_ratio: Dict[int, float]
    step_residual: Optional[Dict[int, float]] = None

    def triple_norm(self, order: float) -> float:
        """sqrt of the summed squared Hdot^order norms of (rho, u, grad Phi)."""
        return math.sqrt(sum(self.sobolev_table[f][order] ** 2 for f in FIELDS))

    def residual_lm(self, l: int, m: int) -> float:
        return sum(self.identity_residual[k] for k in range(l, m + 1))

    def relative_residual(self, k: int) -> float:
        scale = self.energy_k[k]
        return abs(self.identity_residual[k]) / scale if scale > 0 else abs(self.identity_residual[k])

    def row(self) -> Dict[str, float]:
        """Flat mapping for CSV output."""
        out = {"t": self.time}
        for f in FIELDS:
            for k, v in self.sobolev_table[f].items():
                out[f"{f}_Hdot{k:g}"] = v
        for (l, m), v in self.E_lm.items():
            out[f"E_{l}^{m}"] = v
            out[f"D_{l}^{m}"] = self.D_lm[(l, m)]
            out[f"Ecorr_{l}^{m}"] = self.E_lm_corrected[(l, m)]
        for k, v in self.cross.items():
            out[f"cross_{k}"] = v
        for k, v in self.identity_residual.items():
            out[f"residual_{k}"] = v
        for k, v in self.coercivity_ratio.items():
            out[f"coercivity_{k}"] = v
        return out


def viscous_form(u: SpectralField, params: PhysParams, k: int = 0) -> float:
    """mu ||nabla^{k+1} u||^2 + (mu + lam) ||nabla^k div u||^2."""
    grad_sq = norm(u, NormRequest.hdot(k + 1)) ** 2
    div_sq = norm(divergence(u), NormRequest.hdot(k)) ** 2
    return params.mu * grad_sq + (params.mu + params.lam) * div_sq


def coercivity_ratio(u: SpectralField, params: PhysParams, k: int = 0) -> float:
    """viscous_form / (sigma0 ||nabla^{k+1} u||^2); nan for fields with no gradient."""
    grad_sq = norm(u, NormRequest.hdot(k + 1)) ** 2
    if grad_sq == 0:
        return float("nan")
    return viscous_form(u, params, k) / (params.sigma0 * grad_sq)


def _cross(u: SpectralField, rho: SpectralField, k: int) -> float:
    """int nabla^k u . nabla nabla^k rho = L^3 sum |k|^{2k} Re(conj(u) . i k rho)."""
    g = u.grid
    grad_rho = SpectralField(g, 1j * g.k * rho.coeffs)
    return hdot_inner(u, grad_rho, k)


def _level_energy(table, k) -> float:
    return sum(table[f][k] ** 2 for f in FIELDS)


def report(state: NspState, params: PhysParams, request: EnergyRequest = EnergyRequest(),
           prev_state: Optional[NspState] = None) -> EnergyReport:
    """Evaluate every monitored functional at ``state``.

    ``identity_residual[k]`` is 1/2 dE_k/dt + dissipation_k with dE_k/dt taken
    from the instantaneous tendency (linear part only when ``request.linear``).
    With ``prev_state`` the trapezoidal per-step balance
    (E_k(t) - E_k(t - dt)) / 2 + dt (diss_k(t) + diss_k(t - dt)) / 2 is also
    returned as ``step_residual``.
    """
    if prev_state is not None and prev_state.grid != state.grid:
        raise GridMismatchError("state and prev_state live on different grids")
    fields = {"rho": state.rho, "u": state.velocity, "grad_phi": state.grad_phi}
    table = {f: {} for f in FIELDS}
    for f, x in fields.items():
        for k in request.orders:
            req = NormRequest.hdot(k, "exclude" if k < 0 else None)
            table[f][k] = norm(x, req)

    N = request.N
    E_lm, D_lm, E_corr = {}, {}, {}
    cross = {k: _cross(state.velocity, state.rho, k) for k in range(0, N)}
    for l, m in request.pairs:
        E_lm[(l, m)] = sum(_level_energy(table, k) for k in range(l, m + 1))
        D_lm[(l, m)] = sum(table["rho"][k] ** 2 + table["u"][k + 1] ** 2 + table["grad_phi"][k + 1] ** 2
                           for k in range(l, m + 1))
        E_corr[(l, m)] = E_lm[(l, m)] + request.cross_weight * sum(cross[k] for k in range(l, m))

    drho, du = rhs(state, params, nonlinear=not request.linear)
    dphi = poisson_solve(drho)
    energy_k, diss_k, resid, coerc = {}, {}, {}, {}
    for k in range(0, N + 1):
        energy_k[k] = _level_energy(table, k)
        dE = 2.0 * (hdot_inner(state.rho, drho, k) + hdot_inner(state.velocity, du, k)
                    + hdot_inner(state.grad_phi, dphi, k))
        diss_k[k] = viscous_form(state.velocity, params, k)
        resid[k] = 0.5 * dE + diss_k[k]
        coerc[k] = coercivity_ratio(state.velocity, params, k)

    step_res = None
    if prev_state is not None:
        dt = state.time - prev_state.time
        if dt <= 0:
            raise ValueError("prev_state must be earlier than state")
        prev = report(prev_state, params, EnergyRequest(N, (), ((0, N),), request.delta,
                                                          request.eps_cross, request.linear))
        step_res = {k: 0.5 * (energy_k[k] - prev.energy_k[k]) + 0.5 * dt * (diss_k[k] + prev.dissipation_k[k])
                    for k in range(0, N + 1)}

    return EnergyReport(state.time, table, E_lm, D_lm, E_corr, cross, energy_k, diss_k, resid, coerc, step_res)


def discrete_residuals(reports: Sequence[EnergyReport], k: int) -> np.ndarray:
    """Finite-difference balance 1/2 dE_k/dt + diss_k over a report series.

    Centered differences inside, one-sided at the ends; second order in the
    sample spacing, so this is a cross-check rather than a precise residual.
    """
    t = np.array([r.time for r in reports])
    e = np.array([r.energy_k[k] for r in reports])
    d = np.array([r.dissipation_k[k] for r in reports])
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    return 0.5 * np.gradient(e, t, edge_order=2) + d


@dataclass
class LyapunovVerdict:
    passed: bool
    mode: str
    l: int
    m: int
    max_increase: float
    max_ratio: float
    samples: int


def lyapunov_check(reports: Sequence[EnergyReport], l: int, m: int, linear: bool,
                   rtol: float = 1e-12, factor: float = 2.0) -> LyapunovVerdict:
    """Linear runs: E_l^m non-increasing at every sample (up to rtol * E(0)).

    Nonlinear runs: E_l^m(t) <= factor * E_l^m(0) throughout.
    """
    if len(reports) < 3:
        raise ValueError("lyapunov_check needs at least 3 samples")
    e = np.array([r.E_lm[(l, m)] for r in reports])
    e0 = e[0]
    incr = float(np.max(np.diff(e))) if len(e) > 1 else 0.0
    ratio = float(np.max(e) / e0) if e0 > 0 else (0.0 if not np.any(e) else math.inf)
    if linear:
        passed = incr <= rtol * max(e0, np.finfo(float).tiny)
        mode = "monotone"
    else:
        passed = bool(np.all(e <= factor * e0 * (1 + 1e-12))) if e0 > 0 else not np.any(e)
        mode = "a-priori"
    return LyapunovVerdict(bool(passed), mode, l, m, incr, ratio, len(e))


@dataclass
class HsVerdict:
    passed: bool
    s: float
    ratio: float
    sup: float
    initial: float


def hs_negative_track(reports: Sequence[EnergyReport], s: float, bound: float = 3.0) -> HsVerdict:
    """sup_t ||(rho, u, grad Phi)(t)||_{Hdot^-s} / its initial value; pass if <= bound."""
    if not 0 <= s < 1.5:
        raise ValueError(f"s must lie in [0, 3/2), got {s}")
    order = -s if s > 0 else 0
    vals = np.array([r.triple_norm(order) for r in reports])
    if vals.size == 0:
        raise ValueError("empty report series")
    init = float(vals[0])
    sup = float(np.max(vals))
    if init == 0:
        ratio = 0.0 if sup == 0 else math.inf
    else:
        ratio = sup / init
    return HsVerdict(ratio <= bound, s, ratio, sup, init)
