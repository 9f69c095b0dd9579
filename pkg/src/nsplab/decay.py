"""Power-law fits of norm histories and the table of predicted decay exponents."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

__all__ = [
    "DecayFit",
    "Target",
    "fit",
    "theory_target",
    "compare",
    "p_to_s",
    "sigma_pl",
    "electric_gap",
    "linear_rates",
    "QUADRATURE_WINDOW",
    "TOL_AMPLITUDE",
    "TOL_SQUARED",
]

QUADRATURE_WINDOW = (10.0, 1e3)
MIN_T_LO = 5.0
MIN_SAMPLES = 10
TOL_AMPLITUDE = 0.05
TOL_SQUARED = 0.1


@dataclass
class DecayFit:
    """Slope of 2 log(norm) against log(1 + t), i.e. the squared-norm exponent."""

    exponent: float
    ci: float
    window: Tuple[float, float]
    samples: int
    intercept: float = 0.0
    target: Optional[float] = None
    tol: Optional[float] = None
    verdict: Optional[bool] = None
    label: str = ""

    @property
    def amplitude_exponent(self) -> float:
        return 0.5 * self.exponent

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def box_window(t_max: float) -> Tuple[float, float]:
    """Default fitting window for data from a box of validity time ``t_max``."""
    return (MIN_T_LO, t_max)


def fit(times: Sequence[float], norms: Sequence[float], window: Tuple[float, float] = QUADRATURE_WINDOW,
        t_valid: Optional[float] = None, label: str = "") -> DecayFit:
    """Ordinary least squares of 2 log(norm) on log(1 + t) over ``window``.

    ``t_valid`` (the box validity time) caps the window for box data. The
    confidence half-width is the 95% Student-t interval of the slope.
    """
    t_lo, t_hi = map(float, window)
    if t_lo < MIN_T_LO:
        raise ValueError(f"window start {t_lo} is inside the initial transient (must be >= {MIN_T_LO})")
    if t_valid is not None and t_hi > t_valid * (1 + 1e-12):
        raise ValueError(f"window end {t_hi} exceeds the box validity time {t_valid}")
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and norms differ in length")
    sel = (t >= t_lo * (1 - 1e-12)) & (t <= t_hi * (1 + 1e-12))
    if sel.sum() < MIN_SAMPLES:
        raise ValueError(f"only {int(sel.sum())} samples in window [{t_lo}, {t_hi}] (need {MIN_SAMPLES})")
    if np.any(y[sel] <= 0) or not np.all(np.isfinite(y[sel])):
        raise ValueError("norms in the fitting window must be positive and finite")
    x = np.log1p(t[sel])
    z = 2.0 * np.log(y[sel])
    res = stats.linregress(x, z)
    dof = int(sel.sum()) - 2
    ci = float(stats.t.ppf(0.975, dof) * res.stderr) if dof > 0 else math.inf
    return DecayFit(float(res.slope), ci, (t_lo, t_hi), int(sel.sum()), float(res.intercept), label=label)


@dataclass(frozen=True)
class Target:
    """Predicted decay exponent of a norm (amplitude and squared)."""

    amplitude: float
    kind: str  # "decay" or "bounded"

    @property
    def squared(self) -> float:
        return 2.0 * self.amplitude


def p_to_s(p: float) -> float:
    """Negative Sobolev index embedded from L^p data: s = 3 (1/p - 1/2)."""
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    return 3.0 * (1.0 / p - 0.5)


def sigma_pl(p: float, ell: float) -> float:
    """sigma_{p, ell} = 3/2 (1/p - 1/2) + ell / 2."""
    if not 1 < p <= 2:
        raise ValueError(f"p must lie in (1, 2], got {p}")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    return 1.5 * (1.0 / p - 0.5) + 0.5 * ell


QUANTITIES = ("energy", "velocity", "electric", "density", "density_inf", "velocity_inf")


def theory_target(quantity: str, ell: float = 0.0, s: Optional[float] = None, p: Optional[float] = None,
                  N: int = 3) -> Target:
    """Predicted amplitude exponent of ||nabla^ell X(t)||.

    quantity:
      "energy", "velocity", "electric"  -(ell + s)/2   (ell <= N - 1)
      "density"                          -(ell + s + 1)/2 (ell <= N - 2)
      "density_inf"                      -3/(2p) - 1/2   (L^infinity of rho)
      "velocity_inf"                     -3/(2p)         (L^infinity of u, grad Phi)
    Give either s in [0, 3/2) or p in (1, 2] (then s = 3 (1/p - 1/2), and the
    energy-type exponent equals -sigma_{p, ell}). A zero exponent is a
    boundedness statement rather than a decay rate.
    """
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")
    if (s is None) == (p is None):
        raise ValueError("give exactly one of s or p")
    if p is not None:
        s = p_to_s(p)
    if not 0 <= s < 1.5:
        raise ValueError(f"s must lie in [0, 3/2), got {s}")
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if quantity in ("density_inf", "velocity_inf"):
        if p is None:
            raise ValueError("L^infinity rates are stated for L^p data; give p")
        amp = -1.5 / p - (0.5 if quantity == "density_inf" else 0.0)
        return Target(amp, "decay")
    if quantity == "density":
        if ell > N - 2:
            raise ValueError(f"density rate needs ell <= N - 2 = {N - 2}")
        amp = -(ell + s + 1.0) / 2.0
    else:
        if ell > N - 1:
            raise ValueError(f"rate needs ell <= N - 1 = {N - 1}")
        amp = -(ell + s) / 2.0
    amp = 0.0 if amp == 0 else amp
    return Target(amp, "bounded" if amp == 0 else "decay")


def compare(result: DecayFit, target: float, tol: float = TOL_SQUARED) -> DecayFit:
    """Attach ``target`` (squared-norm exponent) and the closed-tolerance verdict."""
    result.target = float(target)
    result.tol = float(tol)
    result.verdict = bool(abs(result.exponent - target) <= tol)
    return result


def bounded_check(norms: Sequence[float], factor: float = 3.0) -> bool:
    """Boundedness verdict for zero targets: sup / initial <= factor."""
    y = np.asarray(norms, dtype=float)
    return bool(y[0] > 0 and np.max(y) <= factor * y[0])


def linear_rates(s: float, data: str = "potential") -> dict:
    """Amplitude exponents of ||rho||, ||u|| for the linear flow by data convention.

    ``data="density"``: rho_0, u_0 in the class s (the classical L^p statement,
    s = 3 (1/p - 1/2)); the velocity then decays half a power slower than the
    density. ``data="potential"``: grad Phi_0 (equivalently Lambda^-1 rho_0) and
    u_0 in the class s; the density decays half a power faster than the velocity.
    """
    sigma = 0.5 * s
    if data == "density":
        return {"density": -sigma, "velocity": -sigma + 0.5}
    if data == "potential":
        return {"density": -sigma - 0.5, "velocity": -sigma}
    raise ValueError("data must be 'density' or 'potential'")


def electric_gap(density_fit: DecayFit, velocity_fit: DecayFit) -> float:
    """Amplitude exponent difference density minus velocity (predicted -1/2)."""
    return density_fit.amplitude_exponent - velocity_fit.amplitude_exponent
