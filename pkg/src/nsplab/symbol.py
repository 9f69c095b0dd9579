"""
Per-wavenumber analysis of the linearized NSP flow.

For a wavevector xi != 0 with r = |xi| the linear generator acts on
(rho_hat, u_hat). Splitting u_hat into its longitudinal amplitude
w = xi.u_hat / r and a solenoidal remainder decouples the system into

* two solenoidal heat modes with rate -mu r^2, and
* a 2x2 block on (rho_hat, v) with v = i w,

      A(r) = [[0,            -r     ],
              [r + 1/r,      -nu r^2]],      nu = 2 mu + lam,

  with trace -nu r^2 and determinant r^2 + 1. For small r the eigenvalues are
  -nu r^2 / 2 +- i sqrt(1 + r^2 - nu^2 r^4 / 4): plasma oscillation with
  viscous damping. They turn real at the threshold eta where
  nu^2 eta^4 / 4 = eta^2 + 1.

The exponential is evaluated in closed form from

    exp(tA) = exp(alpha t) [cosh(beta t) I + sinh(beta t)/beta (A - alpha I)],

alpha = trace / 2, beta^2 = alpha^2 - det. The even/odd factors are entire in
beta^2, so the coalescing-eigenvalue (Jordan) case is covered by the power
series branch used whenever |beta t| < 0.5.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from .exceptions import DivergentIntegralError
from .model import PhysParams

__all__ = [
    "LinearSymbol",
    "symbol_matrix",
    "comp_block",
    "block_eigenvalues",
    "exp_factors",
    "block_propagator",
    "evolve_mode",
    "propagator_matrix",
    "eta_threshold",
    "GreenBoundReport",
    "green_bound_check",
    "RadialProfile",
    "s_tail_profile",
    "gaussian_grad_profile",
    "density_class_profile",
    "radial_norm",
    "heat_evolve",
    "symbol_scan",
]

_SERIES_SWITCH = 0.5
_SERIES_TERMS = 12


def comp_block(r, nu: float) -> np.ndarray:
    """The 2x2 compressible block acting on (rho_hat, v), shape (2, 2) + r.shape."""
    r = np.asarray(r, dtype=float)
    return np.array([[np.zeros_like(r), -r], [r + 1.0 / r, -nu * r ** 2]])


def block_eigenvalues(r, nu: float) -> Tuple[np.ndarray, np.ndarray]:
    """(lambda_plus, lambda_minus) of the compressible block.

    lambda_plus has the larger real part (positive imaginary part on the complex
    branch).
    """
    r = np.asarray(r, dtype=float)
    alpha = -0.5 * nu * r ** 2
    beta = np.sqrt(alpha ** 2 - (r ** 2 + 1.0) + 0j)
    return alpha + beta, alpha - beta


def eta_threshold(params: PhysParams) -> float:
    """|xi| at which the block eigenvalues coalesce (discriminant zero)."""
    nu = params.nu
    return math.sqrt(2.0 * (1.0 + math.sqrt(1.0 + nu ** 2)) / nu ** 2)


def exp_factors(alpha, beta2, t):
    """Even and odd factors (c, s) with exp(tA) = c I + s (A - alpha I).

    ``alpha`` and ``beta2`` = alpha^2 - det may be arrays; all inputs broadcast.
    c = exp(alpha t) cosh(beta t), s = exp(alpha t) sinh(beta t) / beta.
    """
    alpha = np.asarray(alpha, dtype=complex)
    beta2 = np.asarray(beta2, dtype=complex)
    t = np.asarray(t, dtype=float)
    beta = np.sqrt(beta2)
    bt = beta * t
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        ep = np.exp((alpha + beta) * t)
        em = np.exp((alpha - beta) * t)
        c = 0.5 * (ep + em)
        safe_beta = np.where(beta == 0, 1.0, beta)
        s_direct = 0.5 * (ep - em) / safe_beta
        # series in (beta t)^2 for the near-defective / small-t branch
        x = beta2 * t ** 2
        term = np.ones_like(x)
        acc = np.ones_like(x)
        for j in range(1, _SERIES_TERMS):
            term = term * x / ((2 * j) * (2 * j + 1))
            acc = acc + term
        s_series = t * np.exp(alpha * t) * acc
    small = np.abs(bt) < _SERIES_SWITCH
    s = np.where(small, s_series, s_direct)
    return c, s


def block_propagator(r, t, nu: float, shift=0.0) -> np.ndarray:
    """exp(t (A(r) + shift I)) for the compressible block, shape (2, 2) + broadcast shape."""
    r = np.asarray(r, dtype=float)
    alpha = -0.5 * nu * r ** 2
    beta2 = alpha ** 2 - (r ** 2 + 1.0)
    c, s = exp_factors(alpha + shift, beta2, t)
    half = 0.5 * nu * r ** 2
    return np.array([[c + s * half, -s * r], [s * (r + 1.0 / r), c - s * half]])


@dataclass(frozen=True)
class LinearSymbol:
    """Linear generator at one wavevector together with its Helmholtz split."""

    xi: np.ndarray
    mu: float
    lam: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float).reshape(3)
        if not np.any(xi):
            raise ValueError("symbol undefined at xi = 0 (zero mode is fixed by neutrality)")
        object.__setattr__(self, "xi", xi)

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.xi))

    @property
    def nu(self) -> float:
        return 2.0 * self.mu + self.lam

    @property
    def khat(self) -> np.ndarray:
        return self.xi / self.r

    @property
    def matrix(self) -> np.ndarray:
        """4x4 generator on (rho_hat, u_hat)."""
        r2 = self.r ** 2
        k = self.xi
        m = np.zeros((4, 4), dtype=complex)
        m[0, 1:] = -1j * k
        m[1:, 0] = -1j * k * (1.0 + 1.0 / r2)
        m[1:, 1:] = -self.mu * r2 * np.eye(3) - (self.mu + self.lam) * np.outer(k, k)
        return m

    @property
    def heat_rates(self) -> Tuple[float, float]:
        rate = -self.mu * self.r ** 2
        return (rate, rate)

    @property
    def comp_block(self) -> np.ndarray:
        return comp_block(self.r, self.nu)

    @property
    def eigenvalues(self) -> Tuple[complex, complex]:
        lp, lm = block_eigenvalues(self.r, self.nu)
        return complex(lp), complex(lm)

    @property
    def spectral_abscissa(self) -> float:
        return max(self.eigenvalues[0].real, self.heat_rates[0])

    @property
    def discriminant(self) -> float:
        return (0.5 * self.nu * self.r ** 2) ** 2 - (self.r ** 2 + 1.0)


def symbol_matrix(xi, params: PhysParams) -> LinearSymbol:
    return LinearSymbol(np.asarray(xi, dtype=float), params.mu, params.lam)


def evolve_mode(sym: LinearSymbol, rho0: complex, u0, t: float, shift: float = 0.0):
    """Exact linear evolution of one Fourier mode.

    Returns (rho_hat(t), u_hat(t)); ``shift`` multiplies the result by
    exp(shift t) without overflow (used to divide out decay envelopes).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    u0 = np.asarray(u0, dtype=complex).reshape(3)
    kh = sym.khat
    w0 = kh @ u0
    sol0 = u0 - w0 * kh
    v0 = 1j * w0
    g = block_propagator(sym.r, t, sym.nu, shift)
    rho = g[0, 0] * rho0 + g[0, 1] * v0
    v = g[1, 0] * rho0 + g[1, 1] * v0
    w = -1j * v
    heat = math.exp((shift - sym.mu * sym.r ** 2) * t)
    return complex(rho), w * kh + heat * sol0


def propagator_matrix(sym: LinearSymbol, t: float) -> np.ndarray:
    """exp(t M) on (rho_hat, u_hat) assembled column by column from evolve_mode."""
    out = np.zeros((4, 4), dtype=complex)
    for j in range(4):
        e = np.zeros(4, dtype=complex)
        e[j] = 1.0
        rho, u = evolve_mode(sym, e[0], e[1:], t)
        out[0, j] = rho
        out[1:, j] = u
    return out


# --- Green-function envelopes ------------------------------------------------------


@dataclass
class GreenBoundReport:
    """Suprema of |solution| / envelope over all data, per time sample.

    Each ``*_series`` array holds, for every t in ``t_grid``, the supremum over the
    wavenumbers on that side of ``eta`` of the largest possible ratio over data.
    On the oscillatory branch (r < eta) the ratio is the amplitude of the plasma
    oscillation, i.e. its maximum over one period; ``sampled`` holds the raw
    ratios at the sample times, which depend on where the samples fall in phase.
    """

    eta: float
    R0: float
    t_grid: np.ndarray
    xi_grid: np.ndarray
    density_small: np.ndarray
    density_large: np.ndarray
    velocity_small: np.ndarray
    velocity_large: np.ndarray
    sampled: dict = field(default_factory=dict)
    bound: float = 10.0

    def series(self):
        return {
            "density_small": self.density_small,
            "density_large": self.density_large,
            "velocity_small": self.velocity_small,
            "velocity_large": self.velocity_large,
        }

    @property
    def sup_ratio(self) -> float:
        vals = [np.nanmax(v) for v in self.series().values() if np.isfinite(v).any()]
        return float(max(vals))

    @property
    def sup_sampled(self) -> float:
        vals = [np.nanmax(v) for v in self.sampled.values() if np.isfinite(v).any()]
        return float(max(vals)) if vals else float("nan")

    def final_decade_trend(self):
        """Per series: (max over final decade, max over the decade before)."""
        t = self.t_grid
        t_end = t[-1]
        last = t >= t_end / 10.0
        prev = (t >= t_end / 100.0) & (t < t_end / 10.0)
        out = {}
        for name, v in self.series().items():
            if not np.isfinite(v).any():
                continue
            out[name] = (float(np.nanmax(v[last])), float(np.nanmax(v[prev])) if prev.any() else float("nan"))
        return out

    @property
    def non_increasing(self) -> bool:
        for last, prev in self.final_decade_trend().values():
            if math.isfinite(prev) and last > prev * (1.0 + 1e-9):
                return False
        return True

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.sup_ratio) and self.sup_ratio <= self.bound
                    and self.non_increasing and self.R0 > 0)


def _entry_amplitude(r, t, nu, shift, x, y):
    """Oscillation amplitude of exp(shift t) * (c x + s y), c, s from exp_factors.

    On the complex branch c = e^{alpha t} cos(omega t), s = e^{alpha t} sin(omega t)/omega,
    so the amplitude is e^{(alpha + shift) t} sqrt(x^2 + (y/omega)^2). On the real
    branch there is no oscillation and the value itself is returned.
    """
    alpha = -0.5 * nu * r ** 2
    beta2 = alpha ** 2 - (r ** 2 + 1.0)
    c, s = exp_factors(alpha + shift, beta2, t)
    actual = np.abs(c * x + s * y)
    omega = np.sqrt(np.maximum(-beta2, 0.0))
    osc = omega > 0
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        amp = np.exp((alpha + shift) * t) * np.sqrt(x ** 2 + (y / np.where(osc, omega, 1.0)) ** 2)
    return np.where(osc, np.maximum(amp, actual), actual)


def green_bound_check(params: PhysParams, xi_grid: Sequence[float], t_grid: Sequence[float],
                      bound: float = 10.0) -> GreenBoundReport:
    """Measure the Fourier-side envelope constants of the linear flow.

    Below eta the envelopes are exp(-(mu + lam/2) r^2 t)(|rho0| + r|u0|) for the
    density and exp(-mu r^2 t)(|rho0|/r + |u0|) for the velocity; above eta both
    are exp(-R0 t)(|rho0| + |u0|) with R0 = -max Re(spectrum) over the grid points
    with r >= eta. The supremum over data of |solution| / envelope is the dual
    (weighted l-infinity) norm of the corresponding propagator row, evaluated
    with the envelope exponential folded into the propagator as a shift.
    """
    r = np.asarray(xi_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if r.size == 0 or t.size == 0:
        raise ValueError("grids must be nonempty")
    if np.any(r <= 0):
        raise ValueError("wavenumber magnitudes must be positive")
    if np.any(t < 0):
        raise ValueError("times must be nonnegative")
    nu, mu = params.nu, params.mu
    eta = eta_threshold(params)
    small = r <= eta
    large = ~small

    if large.any():
        lp, _ = block_eigenvalues(r[large], nu)
        abscissa = np.maximum(lp.real, -mu * r[large] ** 2)
        R0 = float(-np.max(abscissa))
    else:
        R0 = float("nan")

    T, Rr = np.meshgrid(t, r, indexing="ij")  # (nt, nr)
    half = 0.5 * nu * Rr ** 2
    one = np.ones_like(Rr)
    zero = np.zeros_like(Rr)

    def _sup(mask, vals):
        out = np.where(mask[None, :], vals, -np.inf)
        res = np.max(out, axis=1)
        return np.where(np.isfinite(res), res, np.nan)

    nan = np.full(t.shape, np.nan)
    dens_s, vel_s, dens_l, vel_l = nan, nan.copy(), nan.copy(), nan.copy()
    sampled = {}
    if small.any():
        sh = (mu + 0.5 * params.lam) * Rr ** 2
        amp = np.maximum(_entry_amplitude(Rr, T, nu, sh, one, half),
                         _entry_amplitude(Rr, T, nu, sh, zero, -Rr) / Rr)
        g = block_propagator(Rr, T, nu, shift=sh)
        raw = np.maximum(np.abs(g[0, 0]), np.abs(g[0, 1]) / Rr)
        dens_s = _sup(small, amp)
        sampled["density_small"] = _sup(small, raw)

        sh = mu * Rr ** 2
        amp = np.maximum.reduce([Rr * _entry_amplitude(Rr, T, nu, sh, zero, Rr + 1.0 / Rr),
                                 _entry_amplitude(Rr, T, nu, sh, one, -half), one])
        g = block_propagator(Rr, T, nu, shift=sh)
        raw = np.maximum.reduce([Rr * np.abs(g[1, 0]), np.abs(g[1, 1]), one])
        vel_s = _sup(small, amp)
        sampled["velocity_small"] = _sup(small, raw)

    if large.any():
        g = block_propagator(Rr, T, nu, shift=R0)
        dens_l = _sup(large, np.maximum(np.abs(g[0, 0]), np.abs(g[0, 1])))
        with np.errstate(over="ignore", under="ignore"):
            heat = np.exp((R0 - mu * Rr ** 2) * T)
        vel_l = _sup(large, np.maximum.reduce([np.abs(g[1, 0]), np.abs(g[1, 1]), heat]))
        sampled["density_large"] = dens_l
        sampled["velocity_large"] = vel_l

    return GreenBoundReport(eta, R0, t, r, dens_s, dens_l, vel_s, vel_l, sampled, bound)


def symbol_scan(params: PhysParams, r_grid: Sequence[float]):
    """Eigenvalue table over |xi|: columns r, Re/Im lambda_plus, Re/Im lambda_minus, heat rate."""
    r = np.asarray(r_grid, dtype=float)
    lp, lm = block_eigenvalues(r, params.nu)
    return {
        "r": r,
        "re_lambda_plus": lp.real,
        "im_lambda_plus": lp.imag,
        "re_lambda_minus": lm.real,
        "im_lambda_minus": lm.imag,
        "heat_rate": -params.mu * r ** 2,
        "trace": (lp + lm).real,
        "det": (lp * lm).real,
    }


# --- whole-space radial norms ------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """Radial initial data on R^3 in Fourier variables.

    The data are rho_hat_0(r) = r**density_power * density(r) and
    v_0(r) = r**velocity_power * velocity(r), where v = i xi.u_hat / |xi| is the
    longitudinal velocity amplitude; the reduced callables must be bounded near
    r = 0. ``s_index`` is the declared negative Sobolev class: the triple
    (rho_0, u_0, grad Phi_0) lies in Hdot^{-s'} for every s' < s_index, and in
    Hdot^{-s_index} itself unless the profile is ``sharp`` (logarithmic
    divergence exactly at s_index).
    """

    density: Callable[[float], complex]
    velocity: Callable[[float], complex]
    density_power: float
    velocity_power: float
    s_index: float = 0.0
    r_max: float = 8.0
    name: str = "custom"

    def __post_init__(self):
        if not 0 <= self.s_index < 1.5:
            raise ValueError(f"s_index must lie in [0, 3/2), got {self.s_index}")
        for label, p in self._powers().items():
            if 2 * p - 2 * self.s_index + 3 < -1e-12:
                raise DivergentIntegralError(
                    f"{label} component is not in Hdot^-s' for s' near {self.s_index}: leading power {p}")

    def _powers(self):
        out = {}
        if self.density is not None:
            out["density"] = self.density_power
            out["electric"] = self.density_power - 1.0
        if self.velocity is not None:
            out["velocity"] = self.velocity_power
        return out

    @property
    def sharp(self) -> bool:
        return any(abs(2 * p - 2 * self.s_index + 3) < 1e-12 for p in self._powers().values())

    def amplitudes(self, r):
        """(rho_hat_0(r), v_0(r)) at radius r > 0."""
        rho = 0.0 if self.density is None else r ** self.density_power * self.density(r)
        v = 0.0 if self.velocity is None else r ** self.velocity_power * self.velocity(r)
        return rho, v


def s_tail_profile(s: float, eps: float = 0.0, width: float = 1.0) -> RadialProfile:
    """Scalar profile |f_hat_0|^2 = r^(2a) exp(-(r/width)^2), a = s - 3/2 + eps.

    Carried in the velocity slot; used for the heat-equation ladder. With eps = 0
    it is the sharp representative of the class s.
    """
    a = s - 1.5 + eps
    return RadialProfile(
        density=None,
        velocity=lambda r: math.exp(-0.5 * (r / width) ** 2),
        density_power=0.0,
        velocity_power=a,
        s_index=s,
        name=f"s-tail(a={a:g})",
    )


def gaussian_grad_profile(s: float, params: PhysParams, eps: float = 0.0, width: float = 1.0,
                          polarization: str = "wave") -> RadialProfile:
    """Sharp s-class data with a radial Gaussian density and a gradient velocity.

    |grad Phi_hat_0|^2 = r^(2s - 3 + 2 eps) exp(-(r/width)^2), i.e.
    rho_hat_0 = r^(s - 1/2 + eps) exp(-(r/width)^2 / 2). The longitudinal velocity
    is locked to the density: ``"wave"`` puts every shell on the slow eigenvector,
    v_0 = -lambda_plus(r) rho_hat_0 / r, so the modulus decays without plasma
    beating; ``"standing"`` uses the real amplitude v_0 = -sqrt(1 + r^2) rho_hat_0 / r.
    """
    nu = params.nu
    a = s - 0.5 + eps

    def dens(r):
        return math.exp(-0.5 * (r / width) ** 2)

    if polarization == "wave":
        def vel(r):
            lp, _ = block_eigenvalues(r, nu)
            return complex(-lp) * math.exp(-0.5 * (r / width) ** 2)
    elif polarization == "standing":
        def vel(r):
            return -math.sqrt(1.0 + r * r) * math.exp(-0.5 * (r / width) ** 2)
    else:
        raise ValueError(f"unknown polarization {polarization!r}")
    return RadialProfile(dens, vel, a, a - 1.0, s_index=s, r_max=8.0 * width,
                         name=f"gaussian-grad(s={s:g},{polarization})")


def density_class_profile(s: float, width: float = 1.0) -> RadialProfile:
    """Data with the density itself (not its potential) sharp in the s-class.

    rho_hat_0 = r^(s - 3/2) exp(-(r/width)^2 / 2), u_0 = 0. The electric field is
    then one derivative rougher, so the triple (rho, u, grad Phi) only lies in
    the class s - 1; requires s >= 1.
    """
    if not 1 <= s < 2.5:
        raise ValueError("density-class data need 1 <= s < 5/2")
    return RadialProfile(
        density=lambda r: math.exp(-0.5 * (r / width) ** 2),
        velocity=None,
        density_power=s - 1.5,
        velocity_power=0.0,
        s_index=s - 1.0,
        r_max=8.0 * width,
        name=f"density-class(s={s:g})",
    )


_FIELDS = ("density", "velocity", "electric")


def _evolved_powers(profile: RadialProfile):
    big = 1e300
    ap = profile.density_power if profile.density is not None else big
    av = profile.velocity_power if profile.velocity is not None else big
    a_rho = min(ap, av + 1.0)
    a_v = min(av, ap - 1.0)
    return a_rho, a_v


def _mode_reduced(profile: RadialProfile, nu: float, r: float, t: float, which: str) -> complex:
    """|field(r, t)| / r^power for the requested field, power from _evolved_powers."""
    a_rho, a_v = _evolved_powers(profile)
    rho_red = profile.density(r) if profile.density is not None else 0.0
    v_red = profile.velocity(r) if profile.velocity is not None else 0.0
    ap = profile.density_power
    av = profile.velocity_power
    alpha = -0.5 * nu * r * r
    c, s = exp_factors(alpha, alpha * alpha - (r * r + 1.0), t)
    c = complex(c)
    s = complex(s)
    half = 0.5 * nu * r * r
    if which in ("density", "electric"):
        val = 0.0
        if profile.density is not None:
            val += (c + s * half) * r ** (ap - a_rho) * rho_red
        if profile.velocity is not None:
            val += -s * r ** (av + 1.0 - a_rho) * v_red
        return val
    val = 0.0
    if profile.density is not None:
        val += s * (r * r + 1.0) * r ** (ap - 1.0 - a_v) * rho_red
    if profile.velocity is not None:
        val += (c - s * half) * r ** (av - a_v) * v_red
    return val


def _radial_quadrature(g, q: float, r_split: float, r_max: float) -> float:
    """4 pi int_0^r_max r^q g(r) dr with an algebraic-weight rule near r = 0."""
    opts = dict(epsrel=1e-10, limit=400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if q == 0.0:
            inner, _ = integrate.quad(g, 0.0, r_split, epsabs=0.0, **opts)
        else:
            inner, _ = integrate.quad(g, 0.0, r_split, weight="alg", wvar=(q, 0.0), epsabs=0.0, **opts)
        outer = 0.0
        if r_max > r_split:
            outer, _ = integrate.quad(lambda r: r ** q * g(r), r_split, r_max,
                                      epsabs=1e-14 * abs(inner), **opts)
    return 4.0 * math.pi * (inner + outer)


def radial_norm(profile: RadialProfile, params: PhysParams, t: float, ell: float = 0.0,
                which: str = "velocity") -> float:
    """||nabla^ell X(t)||_{L^2(R^3)} for the linear NSP flow from radial data.

    X is ``"density"``, ``"velocity"`` or ``"electric"`` (grad Phi); ``ell`` may be
    negative (Hdot^{ell} with ell = -s). Norms use the Plancherel convention
    ||f||^2 = int |f_hat|^2 d xi, reduced to 4 pi int r^(2 ell + 2) |X(r,t)|^2 dr.
    Raises DivergentIntegralError when the integrand is not integrable at r = 0.
    """
    if which not in _FIELDS:
        raise ValueError(f"which must be one of {_FIELDS}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    nu = params.nu
    a_rho, a_v = _evolved_powers(profile)
    if which == "density":
        power = a_rho
    elif which == "electric":
        power = a_rho - 1.0
    else:
        power = a_v
    if power > 1e299:
        return 0.0
    q = 2.0 * ell + 2.0 + 2.0 * power
    if q <= -1.0 + 1e-12:
        raise DivergentIntegralError(
            f"int r^{q:g} dr diverges at r = 0 ({which}, ell={ell}, data power {power})")
    base = "density" if which == "electric" else which

    def g(r):
        if r <= 0.0:
            r = 1e-300
        val = _mode_reduced(profile, nu, r, t, base)
        return val.real ** 2 + val.imag ** 2

    r_split = min(profile.r_max, 10.0 / math.sqrt(1.0 + nu * t))
    return math.sqrt(max(_radial_quadrature(g, q, r_split, profile.r_max), 0.0))


def heat_evolve(profile: RadialProfile, t: float, ell: float = 0.0) -> float:
    """||nabla^ell u(t)||_{L^2(R^3)} for the heat equation u_t = Lap u.

    The scalar data are taken from the profile's velocity slot.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if profile.velocity is None:
        return 0.0
    q = 2.0 * ell + 2.0 + 2.0 * profile.velocity_power
    if q <= -1.0 + 1e-12:
        raise DivergentIntegralError(f"int r^{q:g} dr diverges at r = 0 (ell={ell})")

    def g(r):
        if r <= 0.0:
            r = 1e-300
        val = profile.velocity(r)
        return (val.real ** 2 + val.imag ** 2 if isinstance(val, complex) else val * val) * math.exp(-2.0 * r * r * t)

    r_split = min(profile.r_max, 10.0 / math.sqrt(1.0 + 2.0 * t))
    return math.sqrt(max(_radial_quadrature(g, q, r_split, profile.r_max), 0.0))
