"""
Periodic-box spectral core.

The box [0, L)^3 sampled on n points per axis stands in for R^3. Fourier
coefficients follow the convention

    f(x) = sum_k c_k exp(i k.x),      c_k = fftn(f) / n^3,

with angular wavevectors k in (2 pi / L) * {-n/2, ..., n/2 - 1}^3. A constant
field c therefore has c_0 = c, and cos(2 pi x_1 / L) has two coefficients of
1/2. Integrals over the box are

    int |f|^2 dx = L^3 sum_k |c_k|^2 = (L/n)^3 sum_x |f(x)|^2,

so every norm below is the continuous norm on the box, not a per-sample mean.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Tuple, Union

import numpy as np
import scipy.fft as sfft

from .exceptions import GridMismatchError, NonFiniteError, NormUndefinedError

__all__ = [
    "Grid",
    "SpectralField",
    "NormRequest",
    "to_spectral",
    "to_physical",
    "apply_multiplier",
    "lambda_power",
    "norm",
    "hdot_inner",
    "helmholtz_split",
    "dealias",
    "gradient",
    "divergence",
    "derivative_tensor_magnitude",
    "multi_indices",
]

_WORKERS = -1


@dataclass(frozen=True)
class Grid:
    """Cubic periodic grid with ``n`` points per axis and edge length ``L``."""

    n: int
    L: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {self.n!r}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"L must be positive and finite, got {self.L!r}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def dx(self) -> float:
        return self.L / self.n

    @property
    def volume(self) -> float:
        return self.L ** 3

    @property
    def k_min(self) -> float:
        """Smallest nonzero wavenumber magnitude, 2 pi / L."""
        return 2.0 * math.pi / self.L

    @cached_property
    def index_1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavevectors, shape (3, n, n, n)."""
        k1 = self.k_min * self.index_1d
        kk = np.stack(np.meshgrid(k1, k1, k1, indexing="ij"))
        kk.setflags(write=False)
        return kk

    @cached_property
    def k2(self) -> np.ndarray:
        out = np.sum(self.k ** 2, axis=0)
        out.setflags(write=False)
        return out

    @cached_property
    def kmag(self) -> np.ndarray:
        out = np.sqrt(self.k2)
        out.setflags(write=False)
        return out

    @cached_property
    def khat(self) -> np.ndarray:
        """Unit wavevectors; zero at k = 0."""
        safe = np.where(self.kmag == 0.0, 1.0, self.kmag)
        out = self.k / safe
        out[:, 0, 0, 0] = 0.0
        out.setflags(write=False)
        return out

    @cached_property
    def nonzero(self) -> np.ndarray:
        out = self.k2 > 0.0
        out.setflags(write=False)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Spherical 2/3 rule: keep |k| < (2/3)(n/2) in index units."""
        i = self.index_1d
        ii = i[:, None, None] ** 2 + i[None, :, None] ** 2 + i[None, None, :] ** 2
        out = np.sqrt(ii) < self.n / 3.0
        out.setflags(write=False)
        return out

    @property
    def k_dealias(self) -> float:
        """Largest retained wavenumber magnitude after dealiasing."""
        return self.k_min * self.n / 3.0

    def coordinates(self) -> np.ndarray:
        """Physical sample positions, shape (3, n, n, n)."""
        x1 = np.arange(self.n) * self.dx
        return np.stack(np.meshgrid(x1, x1, x1, indexing="ij"))

    def t_max(self) -> float:
        """End of the window in which the box mimics algebraic whole-space decay.

        The slowest nonzero mode relaxes like exp(-c (2 pi / L)^2 t), so
        measurements are restricted to t <= (L / 2 pi)^2 / 4.
        """
        return (self.L / (2.0 * math.pi)) ** 2 / 4.0


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real scalar or 3-vector field.

    ``coeffs`` has shape (n, n, n) for scalars and (3, n, n, n) for vectors and is
    stored read-only.
    """

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape not in (self.grid.shape, (3,) + self.grid.shape):
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        if c is self.coeffs and c.flags.writeable:
            c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def rank(self) -> str:
        return "scalar" if self.coeffs.ndim == 3 else "vector"

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 4

    @property
    def mean(self):
        """Zero-mode coefficient(s) (the box average)."""
        return self.coeffs[..., 0, 0, 0]

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def hermitian_defect(self) -> float:
        """max |c(-k) - conj(c(k))|, zero for a real physical field."""
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
        return float(np.max(np.abs(flipped - np.conj(c)))) if c.size else 0.0

    def physical(self) -> np.ndarray:
        return to_physical(self)

    @classmethod
    def zeros(cls, grid: Grid, rank: str = "scalar") -> "SpectralField":
        shape = grid.shape if rank == "scalar" else (3,) + grid.shape
        return cls(grid, np.zeros(shape, dtype=complex))


def _same_grid(*fields: SpectralField) -> None:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grid mismatch: {g} vs {f.grid}")


def to_spectral(samples, grid: Grid) -> SpectralField:
    """Forward transform of real samples (shape n^3 or 3 x n^3)."""
    x = np.asarray(samples)
    if np.iscomplexobj(x):
        if np.max(np.abs(x.imag), initial=0.0) > 0.0:
            raise ValueError("physical samples must be real")
        x = x.real
    x = x.astype(float, copy=False)
    if x.shape not in (grid.shape, (3,) + grid.shape):
        raise ValueError(f"sample shape {x.shape} does not match grid {grid.shape}")
    bad = ~np.isfinite(x)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteError(f"non-finite physical sample at index {idx}")
    c = sfft.fftn(x, axes=(-3, -2, -1), workers=_WORKERS) / grid.n ** 3
    return SpectralField(grid, c)


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform; returns real samples.

    Only the half spectrum is used (``irfftn``), which assumes Hermitian symmetry.
    """
    n = f.grid.n
    half = f.coeffs[..., : n // 2 + 1]
    return sfft.irfftn(half, s=f.grid.shape, axes=(-3, -2, -1), workers=_WORKERS) * n ** 3


Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


def apply_multiplier(f: SpectralField, m: Multiplier, k0_value=None) -> SpectralField:
    """Coefficient-wise product with the symbol ``m``.

    ``m`` is either a callable taking the wavevector array of shape (3, n, n, n) or
    an already evaluated array. Scalar symbols have shape (n, n, n); matrix symbols
    (vector fields only) have shape (3, 3, n, n, n). The k = 0 value of the symbol
    must be supplied by the caller through ``k0_value`` when the symbol is not
    defined there (e.g. |k|^s with s < 0); a symbol that is finite at k = 0 may
    omit it.
    """
    g = f.grid
    if callable(m):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            sym = np.array(m(g.k), dtype=complex)
    else:
        sym = np.array(m, dtype=complex)
    if sym.ndim == 0:
        sym = np.full(g.shape, sym)
    matrix = sym.shape == (3, 3) + g.shape
    if not matrix and sym.shape != g.shape:
        raise ValueError(f"multiplier shape {sym.shape} incompatible with grid {g.shape}")
    if matrix and not f.is_vector:
        raise ValueError("matrix multiplier requires a vector field")
    if k0_value is not None:
        sym[..., 0, 0, 0] = k0_value
    finite = np.isfinite(sym)
    if matrix:
        finite = finite.all(axis=(0, 1))
    if not finite.all():
        bad = tuple(int(i) for i in np.argwhere(~finite)[0])
        kvec = tuple(float(g.k[j][bad]) for j in range(3))
        if bad == (0, 0, 0):
            raise NonFiniteError("multiplier not finite at k = 0; pass k0_value explicitly")
        raise NonFiniteError(f"multiplier not finite at wavevector k = {kvec}")
    if matrix:
        out = np.einsum("ij...,j...->i...", sym, f.coeffs)
    else:
        out = sym * f.coeffs
    return SpectralField(g, out)


def lambda_power(s: float) -> Callable[[np.ndarray], np.ndarray]:
    """Symbol |k|^s of the operator Lambda^s."""

    def m(k):
        return np.sqrt(np.sum(k ** 2, axis=0)) ** s

    return m


@dataclass(frozen=True)
class NormRequest:
    """Which norm to compute.

    kind is ``"Lp"`` (parameter ``p`` in [1, inf]), ``"Hdot"`` (real index ``s``)
    or ``"Hk"`` (integer ``k``). The zero mode is always excluded for Hdot with
    s < 0.
    """

    kind: str
    p: float = 2.0
    s: float = 0.0
    k: int = 0
    zero_mode_policy: str = "include"

    def __post_init__(self):
        if self.kind not in ("Lp", "Hdot", "Hk"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.zero_mode_policy not in ("include", "exclude"):
            raise ValueError(f"zero_mode_policy must be include|exclude, got {self.zero_mode_policy!r}")
        if self.kind == "Lp" and not (self.p >= 1.0):
            raise ValueError(f"p must be in [1, inf], got {self.p}")
        if self.kind == "Hk" and (int(self.k) != self.k or self.k < 0):
            raise ValueError(f"Hk needs a nonnegative integer k, got {self.k}")
        if self.kind == "Hdot" and self.s < 0 and self.zero_mode_policy != "exclude":
            raise NormUndefinedError("Hdot with s < 0 requires zero_mode_policy='exclude'")

    @classmethod
    def lp(cls, p: float) -> "NormRequest":
        return cls("Lp", p=p)

    @classmethod
    def hdot(cls, s: float, zero_mode_policy: str | None = None) -> "NormRequest":
        if zero_mode_policy is None:
            zero_mode_policy = "exclude" if s < 0 else "include"
        return cls("Hdot", s=s, zero_mode_policy=zero_mode_policy)

    @classmethod
    def hk(cls, k: int) -> "NormRequest":
        return cls("Hk", k=k)


def _power_spectrum(f: SpectralField) -> np.ndarray:
    c = f.coeffs
    ps = c.real ** 2 + c.imag ** 2
    return ps.sum(axis=0) if f.is_vector else ps


def _weight(grid: Grid, s: float) -> np.ndarray:
    """|k|^{2s} with the k = 0 entry set to zero for s != 0 (and 1 for s == 0)."""
    if s == 0:
        return np.ones(grid.shape)
    with np.errstate(divide="ignore"):
        w = grid.k2 ** s
    w = np.where(grid.nonzero, w, 0.0)
    return w


def _hdot_sq(f: SpectralField, s: float, policy: str) -> float:
    ps = _power_spectrum(f)
    w = _weight(f.grid, s)
    total = float(np.sum(w * ps))
    if policy == "exclude" and s == 0:
        total -= float(ps[0, 0, 0])
    return f.grid.volume * total


def norm(f: SpectralField, req: NormRequest) -> float:
    """Norm of ``f`` on the box.

    Hdot uses the Parseval sum L^3 sum |k|^{2s} |c_k|^2; Lp(2) uses the same sum;
    other Lp are Riemann sums of |f|^p on the grid (spectrally accurate for
    band-limited fields); Hk is sqrt(sum_{j<=k} ||f||_{Hdot^j}^2). Vector fields
    use the pointwise Euclidean magnitude.
    """
    if req.kind == "Hdot":
        if req.s < 0:
            if req.zero_mode_policy != "exclude":
                raise NormUndefinedError("Hdot(s<0) is undefined with the zero mode retained")
        return math.sqrt(max(_hdot_sq(f, req.s, req.zero_mode_policy), 0.0))
    if req.kind == "Hk":
        tot = sum(_hdot_sq(f, j, "include") for j in range(int(req.k) + 1))
        return math.sqrt(tot)
    p = req.p
    if p == 2:
        return math.sqrt(_hdot_sq(f, 0.0, "include"))
    x = to_physical(f)
    mag = np.sqrt(np.sum(x ** 2, axis=0)) if f.is_vector else np.abs(x)
    return lp_norm_samples(mag, f.grid, p)


def lp_norm_samples(mag: np.ndarray, grid: Grid, p: float) -> float:
    """Riemann-sum L^p norm of nonnegative samples on ``grid``."""
    if math.isinf(p):
        return float(np.max(mag))
    scale = float(np.max(mag))
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum((mag / scale) ** p) * grid.dx ** 3) ** (1.0 / p)


def hdot_inner(f: SpectralField, g: SpectralField, s: float = 0.0) -> float:
    """Real inner product L^3 sum |k|^{2s} Re(conj(f_k) . g_k), zero mode dropped for s != 0."""
    _same_grid(f, g)
    prod = (np.conj(f.coeffs) * g.coeffs).real
    if f.is_vector:
        prod = prod.sum(axis=0)
    return f.grid.volume * float(np.sum(_weight(f.grid, s) * prod))


def helmholtz_split(f: SpectralField) -> Tuple[SpectralField, SpectralField]:
    """Split a vector field into gradient (compressible) and solenoidal parts.

    The compressible part is k (k.c)/|k|^2 mode by mode; the mean flow (k = 0) is
    assigned to the solenoidal part.
    """
    if not f.is_vector:
        raise ValueError("helmholtz_split needs a vector field")
    kh = f.grid.khat
    longi = np.sum(kh * f.coeffs, axis=0)
    comp = kh * longi
    return SpectralField(f.grid, comp), SpectralField(f.grid, f.coeffs - comp)


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def gradient(f: SpectralField) -> SpectralField:
    if f.is_vector:
        raise ValueError("gradient of a vector field is not a SpectralField; use derivative_tensor_magnitude")
    return SpectralField(f.grid, 1j * f.grid.k * f.coeffs)


def divergence(f: SpectralField) -> SpectralField:
    if not f.is_vector:
        raise ValueError("divergence needs a vector field")
    return SpectralField(f.grid, np.sum(1j * f.grid.k * f.coeffs, axis=0))


def multi_indices(order: int):
    """Multi-indices of ``order`` in three variables with their multinomial counts.

    The count is the number of ordered index tuples (i_1..i_order) that produce the
    multi-index, so sum over multi-indices of count * |d^a f|^2 equals the squared
    Euclidean magnitude of the full derivative tensor.
    """
    out = []
    for combo in itertools.combinations_with_replacement(range(3), order):
        a = tuple(combo.count(j) for j in range(3))
        count = math.factorial(order) // (math.factorial(a[0]) * math.factorial(a[1]) * math.factorial(a[2]))
        out.append((a, count))
    return out


def derivative_tensor_magnitude(f: SpectralField, order: float) -> np.ndarray:
    """Pointwise Euclidean magnitude of nabla^order f in physical space.

    Integer orders use the full derivative tensor; non-integer orders fall back
    to |Lambda^order f| as in the usual convention for fractional derivatives.
    """
    g = f.grid
    comps = f.coeffs if f.is_vector else f.coeffs[None]
    if order != int(order):
        sym = g.kmag ** order
        sq = sum(to_physical(SpectralField(g, sym * c)) ** 2 for c in comps)
        return np.sqrt(sq)
    order = int(order)
    sq = np.zeros(g.shape)
    for a, count in multi_indices(order):
        sym = (1j * g.k[0]) ** a[0] * (1j * g.k[1]) ** a[1] * (1j * g.k[2]) ** a[2]
        for c in comps:
            sq += count * to_physical(SpectralField(g, sym * c)) ** 2
    return np.sqrt(sq)
