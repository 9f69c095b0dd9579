"""
Numerical checks of the interpolation, commutator, composition and Riesz
potential inequalities on ensembles of random band-limited fields.

Each check returns the largest ratio LHS / RHS over the ensemble. Fields are
band-limited to index radius < n/4, so a product of two members is resolved on
the grid without aliasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, List, Optional, Tuple, Union

import numpy as np

from .model import PhysParams, closure_f, closure_h
from .spectral import (
    Grid,
    NormRequest,
    SpectralField,
    derivative_tensor_magnitude,
    lp_norm_samples,
    multi_indices,
    norm,
    to_physical,
    to_spectral,
)

__all__ = [
    "random_coeffs",
    "FieldEnsemble",
    "LemmaResult",
    "gn_theta",
    "gn_check",
    "neg_interp_check",
    "hls_exponent",
    "hls_check",
    "commutator_check",
    "commutator_norm",
    "composition_check",
    "stability",
]

_MEAN_TOL = 1e-12


def random_coeffs(grid: Grid, rng: np.random.Generator, slope: float = 2.0,
                  cutoff: Optional[float] = None) -> np.ndarray:
    """Coefficients of a real, mean-zero random field with spectrum ~ |k|^-slope.

    ``cutoff`` is an index radius (default just below n/4). Hermitian symmetry is
    imposed by a round trip through physical space.
    """
    if cutoff is None:
        cutoff = grid.n / 4.0 - 0.5
    i = grid.index_1d
    ii = np.sqrt(i[:, None, None] ** 2 + i[None, :, None] ** 2 + i[None, None, :] ** 2)
    keep = (ii > 0) & (ii < cutoff)
    amp = np.zeros(grid.shape)
    amp[keep] = grid.kmag[keep] ** (-slope)
    c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * amp
    x = to_physical(SpectralField(grid, c))
    out = to_spectral(x, grid).coeffs.copy()
    out[0, 0, 0] = 0.0
    return out


@dataclass(frozen=True)
class FieldEnsemble:
    """Reproducible family of random scalar fields (generated lazily, in order)."""

    grid: Grid
    count: int = 16
    slope: float = 2.0
    cutoff: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        cut = self.grid.n / 4.0 if self.cutoff is None else self.cutoff
        if cut > self.grid.n / 3.0:
            raise ValueError("cutoff must lie inside the dealias radius n/3")

    def fields(self, stream: int = 0) -> Iterator[SpectralField]:
        rng = np.random.default_rng([self.seed, stream])
        for _ in range(self.count):
            c = random_coeffs(self.grid, rng, self.slope, self.cutoff)
            yield SpectralField(self.grid, c / math.sqrt(self.grid.volume * np.sum(np.abs(c) ** 2)))

    def doubled(self) -> "FieldEnsemble":
        return replace(self, count=2 * self.count)


@dataclass
class LemmaResult:
    name: str
    max_ratio: float
    ratios: np.ndarray
    settings: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "max_ratio": self.max_ratio, "count": int(len(self.ratios)),
                "settings": self.settings}


def _lp(f: SpectralField, order: float, p: float) -> float:
    """||nabla^order f||_{L^p} with the full derivative tensor for integer orders."""
    if p == 2:
        return norm(f, NormRequest.hdot(order, "exclude" if order < 0 else None))
    return lp_norm_samples(derivative_tensor_magnitude(f, order), f.grid, p)


def _inv(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


# --- interpolation -------------------------------------------------------------------


def gn_theta(alpha: float, m: float, ell: float, p: float, q: float, r: float) -> Optional[float]:
    """theta from alpha/3 - 1/p = (m/3 - 1/q)(1 - theta) + (ell/3 - 1/r) theta.

    Returns None when every theta satisfies the relation.
    """
    a = alpha / 3.0 - _inv(p)
    b = m / 3.0 - _inv(q)
    c = ell / 3.0 - _inv(r)
    if abs(c - b) < 1e-14:
        if abs(a - b) < 1e-14:
            return None
        raise ValueError(f"no theta satisfies the scaling relation (alpha={alpha}, p={p}, q={q}, r={r})")
    return (a - b) / (c - b)


def gn_check(ensemble: FieldEnsemble, alpha: float, m: float, ell: float, p: float, q: float, r: float,
             theta: Optional[float] = None) -> LemmaResult:
    """max ||nabla^alpha f||_p / (||nabla^m f||_q^(1-theta) ||nabla^ell f||_r^theta)."""
    if not (0 <= m <= ell and 0 <= alpha <= ell):
        raise ValueError(f"need 0 <= m, alpha <= ell (got m={m}, alpha={alpha}, ell={ell})")
    for name, v in (("p", p), ("q", q), ("r", r)):
        if not v >= 1:
            raise ValueError(f"{name} must be >= 1")
    required = gn_theta(alpha, m, ell, p, q, r)
    if required is None:
        if theta is None:
            raise ValueError("theta is not determined by the scaling relation; pass it explicitly")
        required = theta
    elif theta is not None and abs(theta - required) > 1e-12:
        raise ValueError(f"theta={theta} violates the scaling relation; it requires theta={required:.12g}")
    if not -1e-14 <= required <= 1 + 1e-14:
        raise ValueError(f"scaling relation requires theta={required:.12g}, outside [0, 1]")
    th = min(max(required, 0.0), 1.0)
    ratios = []
    for f in ensemble.fields():
        lhs = _lp(f, alpha, p)
        rhs = _lp(f, m, q) ** (1 - th) * _lp(f, ell, r) ** th
        ratios.append(lhs / rhs)
    ratios = np.array(ratios)
    return LemmaResult("gn", float(ratios.max()), ratios,
                       dict(alpha=alpha, m=m, ell=ell, p=p, q=q, r=r, theta=th))


def _check_mean_zero(f: SpectralField) -> None:
    c = f.coeffs
    if abs(c[0, 0, 0]) > _MEAN_TOL * max(float(np.max(np.abs(c))), 1e-300):
        raise ValueError("field has a nonzero mean; the negative Sobolev norm is undefined")


def neg_interp_ratio(f: SpectralField, ell: float, s: float) -> float:
    _check_mean_zero(f)
    theta = 1.0 / (ell + 1.0 + s)
    lhs = norm(f, NormRequest.hdot(ell))
    rhs = norm(f, NormRequest.hdot(ell + 1)) ** (1 - theta) * norm(f, NormRequest.hdot(-s, "exclude")) ** theta
    return lhs / rhs


def neg_interp_check(ensemble: FieldEnsemble, ell: float, s: float) -> LemmaResult:
    """max ||nabla^ell f|| / (||nabla^(ell+1) f||^(1-theta) ||f||_{Hdot^-s}^theta), theta = 1/(ell+1+s)."""
    if s < 0 or ell < 0:
        raise ValueError("need s >= 0 and ell >= 0")
    ratios = np.array([neg_interp_ratio(f, ell, s) for f in ensemble.fields()])
    return LemmaResult("neg_interp", float(ratios.max()), ratios, dict(ell=ell, s=s))


# --- Riesz potential -----------------------------------------------------------------


def hls_exponent(s: float, p: float) -> float:
    """q with 1/q = 1/p - s/3, validating 0 < s < 3 and 1 < p < q < infinity."""
    if not 0 < s < 3:
        raise ValueError(f"need 0 < s < 3, got s={s}")
    if not p > 1:
        raise ValueError(f"need p > 1, got p={p}")
    inv_q = 1.0 / p - s / 3.0
    if inv_q <= 0:
        raise ValueError(f"1/p - s/3 = {inv_q:g} <= 0: no finite q with p={p}, s={s}")
    return 1.0 / inv_q


def hls_ratio(f: SpectralField, s: float, p: float, q: Optional[float] = None) -> float:
    qq = hls_exponent(s, p)
    if q is not None and abs(q - qq) > 1e-12 * qq:
        raise ValueError(f"q={q} violates 1/q + s/3 = 1/p (requires q={qq:.12g})")
    _check_mean_zero(f)
    g = f.grid
    pot = SpectralField(g, np.where(g.nonzero, g.kmag, 1.0) ** (-s) * np.where(g.nonzero, f.coeffs, 0.0))
    return _lp(pot, 0, qq) / _lp(f, 0, p)


def hls_check(ensemble: FieldEnsemble, s: float, p: float, q: Optional[float] = None) -> LemmaResult:
    """max ||Lambda^-s f||_q / ||f||_p with 1/q + s/3 = 1/p."""
    qq = hls_exponent(s, p)
    ratios = np.array([hls_ratio(f, s, p, q) for f in ensemble.fields()])
    return LemmaResult("hls", float(ratios.max()), ratios, dict(s=s, p=p, q=qq))


# --- commutator ------------------------------------------------------------------------


def _tensor_lp(comps: List[Tuple[np.ndarray, int]], grid: Grid, p: float) -> float:
    mag = np.sqrt(sum(cnt * x ** 2 for x, cnt in comps))
    return lp_norm_samples(mag, grid, p)


def commutator_norm(f: SpectralField, g: SpectralField, m: int, p: float = 2.0) -> float:
    """||nabla^m (f g) - f nabla^m g||_{L^p}, every tensor component computed literally."""
    grid = f.grid
    fx = to_physical(f)
    gx = to_physical(g)
    fg = to_spectral(fx * gx, grid)
    comps = []
    for a, cnt in multi_indices(m):
        sym = (1j * grid.k[0]) ** a[0] * (1j * grid.k[1]) ** a[1] * (1j * grid.k[2]) ** a[2]
        d_fg = to_physical(SpectralField(grid, sym * fg.coeffs))
        d_g = to_physical(SpectralField(grid, sym * g.coeffs))
        comps.append((d_fg - fx * d_g, cnt))
    return _tensor_lp(comps, grid, p)


def _holder(p, p1, p2, p3, p4):
    for name, v in (("p", p), ("p2", p2), ("p3", p3)):
        if not (1 < v < math.inf):
            raise ValueError(f"{name} must lie in (1, infinity), got {v}")
    for name, v in (("p1", p1), ("p4", p4)):
        if not v >= 1:
            raise ValueError(f"{name} must be >= 1")
    if abs(_inv(p) - _inv(p1) - _inv(p2)) > 1e-12 or abs(_inv(p) - _inv(p3) - _inv(p4)) > 1e-12:
        raise ValueError("exponents violate 1/p = 1/p1 + 1/p2 = 1/p3 + 1/p4")


def commutator_check(ensemble: FieldEnsemble, m: int, p: float = 2.0, p1: float = math.inf, p2: float = 2.0,
                     p3: float = 2.0, p4: float = math.inf, f_const: Optional[float] = None) -> LemmaResult:
    """max ||[nabla^m, f] g||_p / (||nabla f||_p1 ||nabla^(m-1) g||_p2 + ||nabla^m f||_p3 ||g||_p4).

    f and g come from two independent streams of the ensemble. With ``f_const``
    the first factor is that constant instead, and the result records the
    commutator norms themselves (the bound is then 0 / 0).
    """
    if m < 1 or int(m) != m:
        raise ValueError("m must be an integer >= 1")
    _holder(p, p1, p2, p3, p4)
    ratios = []
    gs = ensemble.fields(stream=1)
    for f, g in zip(ensemble.fields(stream=0), gs):
        if f_const is not None:
            c = np.zeros(f.grid.shape, dtype=complex)
            c[0, 0, 0] = f_const
            f = SpectralField(f.grid, c)
            ratios.append(commutator_norm(f, g, m, p))
            continue
        lhs = commutator_norm(f, g, m, p)
        rhs = _lp(f, 1, p1) * _lp(g, m - 1, p2) + _lp(f, m, p3) * _lp(g, 0, p4)
        ratios.append(lhs / rhs)
    ratios = np.array(ratios)
    name = "commutator_const" if f_const is not None else "commutator"
    return LemmaResult(name, float(ratios.max()), ratios, dict(m=m, p=p, p1=p1, p2=p2, p3=p3, p4=p4))


# --- composition -----------------------------------------------------------------------


def _resolve_g(g, params: PhysParams) -> Tuple[str, Callable[[np.ndarray], np.ndarray]]:
    if callable(g):
        return getattr(g, "__name__", "custom"), g
    if g == "h":
        return "h", closure_h
    if g == "f":
        return "f", lambda x: closure_f(x, params)
    if g == "identity":
        return "identity", lambda x: x
    raise ValueError(f"unknown composition function {g!r}")


def _pad(f: SpectralField, factor: int) -> SpectralField:
    """Exact trigonometric interpolation of f onto a grid ``factor`` times finer."""
    g = f.grid
    fine = Grid(g.n * factor, g.L)
    c = np.zeros(fine.shape, dtype=complex)
    i = g.index_1d.astype(int)
    idx = np.where(i < 0, i + fine.n, i)
    c[np.ix_(idx, idx, idx)] = f.coeffs
    return SpectralField(fine, c)


def composition_ratio(rho: SpectralField, g: Callable[[np.ndarray], np.ndarray], m: int, pad: int = 2) -> float:
    """||nabla^m g(rho)||_inf / ||nabla^m rho||_inf on a refined grid; requires ||rho||_inf <= 1."""
    fine = _pad(rho, pad) if pad > 1 else rho
    x = to_physical(fine)
    if float(np.max(np.abs(x))) > 1.0 + 1e-12:
        raise ValueError(f"||rho||_inf = {np.max(np.abs(x)):.6g} exceeds 1")
    gx = to_spectral(g(x), fine.grid)
    lhs = float(np.max(derivative_tensor_magnitude(gx, m)))
    rhs = float(np.max(derivative_tensor_magnitude(fine, m)))
    return lhs / rhs


def composition_check(ensemble: FieldEnsemble, g: Union[str, Callable] = "h", m: int = 1,
                      amplitude: float = 0.5, pad: int = 2, params: PhysParams = PhysParams()) -> LemmaResult:
    """max ||nabla^m g(rho)||_inf / ||nabla^m rho||_inf with fields scaled to ||rho||_inf = amplitude."""
    if m < 1 or int(m) != m:
        raise ValueError("m must be an integer >= 1")
    if not 0 < amplitude <= 1:
        raise ValueError(f"||rho||_inf must not exceed 1 (requested amplitude {amplitude})")
    name, fn = _resolve_g(g, params)
    ratios = []
    for f in ensemble.fields():
        fine = _pad(f, pad) if pad > 1 else f
        scale = amplitude / float(np.max(np.abs(to_physical(fine))))
        ratios.append(composition_ratio(f * scale, fn, m, pad))
    ratios = np.array(ratios)
    return LemmaResult(f"composition_{name}", float(ratios.max()), ratios,
                       dict(g=name, m=m, amplitude=amplitude, pad=pad))


def stability(check: Callable[..., LemmaResult], ensemble: FieldEnsemble, **kwargs):
    """Doubling rule: (result, doubled result, relative change, passed with change < 10%)."""
    a = check(ensemble, **kwargs)
    b = check(ensemble.doubled(), **kwargs)
    if a.max_ratio == 0:
        change = 0.0 if b.max_ratio == 0 else math.inf
    else:
        change = abs(b.max_ratio - a.max_ratio) / a.max_ratio
    return a, b, change, change < 0.1
