"""
Time stepping for the perturbation system with the linear part handled per mode.

Every scalar function F of the linear operator is applied exactly: on the
solenoidal subspace it is F(-h mu |k|^2); on the compressible block it is

    F(hA) = even * I + odd * (A - alpha I),
    even = (F(z+) + F(z-)) / 2,   odd = h * F[z+, z-]   (divided difference),

with z+- = h (alpha +- beta) the scaled block eigenvalues. When |h beta| < 0.5 the
divided difference is taken as a contour integral around h alpha, which stays
accurate through the coalescing-eigenvalue point.
"""

from __future__ import annotations

import json
import math
import time as _time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .exceptions import ConfigError, IntegrationAborted, NspError, RegimeError, VacuumError
from .model import NspState, PhysParams, linear_tendency_arrays, nonlinear_tendency_arrays
from .spectral import Grid, SpectralField, to_physical
from .symbol import block_eigenvalues

__all__ = [
    "IntegratorConfig",
    "phi",
    "BlockOperator",
    "Stepper",
    "Trajectory",
    "max_stable_dt",
    "step",
    "integrate",
    "save_checkpoint",
    "load_checkpoint",
]

SCHEMES = ("etdrk4", "cnab2")
_ALIASES = {"etd-rk4": "etdrk4", "etdrk4": "etdrk4", "imex-cnab2": "cnab2", "cnab2": "cnab2"}
_SERIES_SWITCH = 0.5
_CONTOUR_POINTS = 64
CHECKPOINT_FORMAT = "nsplab-checkpoint"
CHECKPOINT_VERSION = 1


def phi(k: int, z) -> np.ndarray:
    """phi_k(z) = sum_j z^j / (j + k)!, with a series branch for |z| < 0.5."""
    z = np.asarray(z, dtype=complex)
    if k == 0:
        return np.exp(z)
    small = np.abs(z) < _SERIES_SWITCH
    zs = np.where(small, z, 0.0)
    term = np.full(z.shape, 1.0 / math.factorial(k), dtype=complex)
    acc = term.copy()
    for j in range(1, 20):
        term = term * zs / (j + k)
        acc = acc + term
    zb = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.exp(zb)
        for j in range(k):
            tail = tail - zb ** j / math.factorial(j)
        closed = tail / zb ** k
    return np.where(small, acc, closed)


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "etdrk4"
    dt: Optional[float] = None
    t_end: float = 1.0
    output_stride: int = 1
    safety: float = 0.8
    nonlinear: bool = True

    def __post_init__(self):
        problems = {}
        scheme = _ALIASES.get(str(self.scheme).lower())
        if scheme is None:
            problems["scheme"] = f"unknown scheme {self.scheme!r}; choose ETD-RK4 or IMEX-CNAB2"
        else:
            object.__setattr__(self, "scheme", scheme)
        if self.dt is not None and not (self.dt > 0):
            problems["dt"] = "must be positive"
        if not (self.t_end >= 0):
            problems["t_end"] = "must be nonnegative"
        if int(self.output_stride) < 1:
            problems["output_stride"] = "must be >= 1"
        if not (0 < self.safety <= 1):
            problems["safety"] = "must lie in (0, 1]"
        if problems:
            raise ConfigError({f"integrator.{k}": v for k, v in problems.items()})


def max_stable_dt(grid: Grid, params: PhysParams, state: Optional[NspState] = None,
                  safety: float = 0.8) -> float:
    """safety * min(advective CFL dx / max|u|, 2 pi / (10 max |Im lambda|))."""
    r = grid.kmag[grid.nonzero & grid.dealias_mask]
    lp, _ = block_eigenvalues(r, params.nu)
    im = float(np.max(np.abs(lp.imag))) if r.size else 0.0
    limits = [2.0 * math.pi / (10.0 * im) if im > 0 else math.inf]
    if state is not None:
        u = to_physical(state.velocity)
        umax = float(np.max(np.sqrt(np.sum(u ** 2, axis=0))))
        if umax > 0:
            limits.append(grid.dx / umax)
    lim = min(limits)
    return safety * lim if math.isfinite(lim) else math.inf


class BlockOperator:
    """A scalar function F applied exactly to the per-mode linear operator times h."""

    def __init__(self, grid: Grid, params: PhysParams, h: float, fn: Callable[[np.ndarray], np.ndarray]):
        self.grid = grid
        r = np.where(grid.nonzero, grid.kmag, 1.0)
        self.r = r
        self.half = 0.5 * params.nu * r ** 2
        self.coup = r + 1.0 / r
        alpha = -self.half
        beta = np.sqrt(alpha ** 2 - (r ** 2 + 1.0) + 0j)
        zp = h * (alpha + beta)
        zm = h * (alpha - beta)
        fp = fn(zp)
        fm = fn(zm)
        self.even = 0.5 * (fp + fm)
        small = np.abs(h * beta) < _SERIES_SWITCH
        safe_beta = np.where(small, 1.0, beta)
        odd = 0.5 * (fp - fm) / safe_beta
        if small.any():
            center = h * alpha[small]
            a = zp[small][:, None]
            b = zm[small][:, None]
            theta = 2.0 * math.pi * np.arange(_CONTOUR_POINTS) / _CONTOUR_POINTS
            w = np.exp(1j * theta)[None, :]
            z = center[:, None] + w
            dd = np.mean(fn(z) * w / ((z - a) * (z - b)), axis=1)
            odd = odd.copy()
            odd[small] = h * dd
        self.odd = odd
        self.heat = fn(-h * params.mu * grid.k2 + 0j)
        nz = grid.nonzero
        self.even = np.where(nz, self.even, 0.0)
        self.odd = np.where(nz, self.odd, 0.0)

    def apply(self, rho_c: np.ndarray, u_c: np.ndarray):
        kh = self.grid.khat
        w = np.sum(kh * u_c, axis=0)
        sol = u_c - kh * w
        v = 1j * w
        rho_n = self.even * rho_c + self.odd * (self.half * rho_c - self.r * v)
        v_n = self.even * v + self.odd * (self.coup * rho_c - self.half * v)
        u_n = kh * (-1j * v_n) + self.heat * sol
        return rho_n, u_n


@dataclass
class Trajectory:
    """Final state, sample times, and whatever the monitor returned at each sample."""

    final: NspState
    times: List[float] = field(default_factory=list)
    samples: list = field(default_factory=list)
    steps: int = 0
    dt: float = 0.0
    wall_time: float = 0.0


def save_checkpoint(path, state: NspState, params: PhysParams, extra: Optional[dict] = None) -> Path:
    """Write grid metadata and coefficient arrays to an .npz file with a JSON header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n": state.grid.n,
        "L": state.grid.L,
        "time": state.time,
        "params": params.as_dict(),
    }
    if extra:
        header.update(extra)
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), rho=state.rho.coeffs, velocity=state.velocity.coeffs)
    return path


def load_checkpoint(path):
    """Inverse of save_checkpoint: returns (state, params, header)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a checkpoint file")
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        grid = Grid(int(header["n"]), float(header["L"]))
        rho = SpectralField(grid, data["rho"])
        vel = SpectralField(grid, data["velocity"])
    p = dict(header["params"])
    params = PhysParams(**p)
    return NspState(rho, vel, float(header["time"]), validate=False), params, header


class Stepper:
    """Fixed-step integrator for one grid, parameter set and step size."""

    def __init__(self, grid: Grid, params: PhysParams, dt: float, scheme: str = "etdrk4",
                 nonlinear: bool = True):
        if not dt > 0:
            raise ConfigError({"integrator.dt": "must be positive"})
        scheme = _ALIASES.get(scheme.lower(), scheme)
        if scheme not in SCHEMES:
            raise ConfigError({"integrator.scheme": f"unknown scheme {scheme!r}"})
        self.grid = grid
        self.params = params
        self.dt = dt
        self.scheme = scheme
        self.nonlinear = nonlinear
        self._prev_n = None
        h = dt
        if scheme == "etdrk4":
            self.E = BlockOperator(grid, params, h, np.exp)
            self.E2 = BlockOperator(grid, params, h, lambda z: np.exp(z / 2))
            self.Q = BlockOperator(grid, params, h, lambda z: 0.5 * h * phi(1, z / 2))
            self.f1 = BlockOperator(grid, params, h, lambda z: h * (phi(1, z) - 3 * phi(2, z) + 4 * phi(3, z)))
            self.f2 = BlockOperator(grid, params, h, lambda z: h * (phi(2, z) - 2 * phi(3, z)))
            self.f3 = BlockOperator(grid, params, h, lambda z: h * (-phi(2, z) + 4 * phi(3, z)))
        else:
            self.R = BlockOperator(grid, params, h, lambda z: (1 + z / 2) / (1 - z / 2))
            self.S = BlockOperator(grid, params, h, lambda z: h / (1 - z / 2))

    def _n(self, rho_c, u_c):
        if not self.nonlinear:
            return np.zeros_like(rho_c), np.zeros_like(u_c)
        return nonlinear_tendency_arrays(self.grid, rho_c, u_c, self.params)

    def reset(self):
        """Forget multistep history (call before integrating a new trajectory)."""
        self._prev_n = None

    def step_arrays(self, rho, u):
        if self.scheme == "etdrk4":
            return self._etdrk4(rho, u)
        return self._cnab2(rho, u)

    def _etdrk4(self, rho, u):
        n0 = self._n(rho, u)
        e2 = self.E2.apply(rho, u)
        q = self.Q.apply(*n0)
        a = (e2[0] + q[0], e2[1] + q[1])
        na = self._n(*a)
        q = self.Q.apply(*na)
        b = (e2[0] + q[0], e2[1] + q[1])
        nb = self._n(*b)
        e2a = self.E2.apply(*a)
        q = self.Q.apply(2 * nb[0] - n0[0], 2 * nb[1] - n0[1])
        c = (e2a[0] + q[0], e2a[1] + q[1])
        nc = self._n(*c)
        out = self.E.apply(rho, u)
        t1 = self.f1.apply(*n0)
        t2 = self.f2.apply(na[0] + nb[0], na[1] + nb[1])
        t3 = self.f3.apply(*nc)
        rho_n = out[0] + t1[0] + 2 * t2[0] + t3[0]
        u_n = out[1] + t1[1] + 2 * t2[1] + t3[1]
        return rho_n, u_n

    def _cnab2(self, rho, u):
        n0 = self._n(rho, u)
        if self._prev_n is None:
            force = n0
        else:
            force = (1.5 * n0[0] - 0.5 * self._prev_n[0], 1.5 * n0[1] - 0.5 * self._prev_n[1])
        self._prev_n = n0
        out = self.R.apply(rho, u)
        f = self.S.apply(*force)
        return out[0] + f[0], out[1] + f[1]

    def step(self, state: NspState) -> NspState:
        """Advance one step; neutrality is re-imposed and the result validated."""
        rho, u = self.step_arrays(state.rho.coeffs, state.velocity.coeffs)
        mask = self.grid.dealias_mask
        rho = rho * mask
        rho[0, 0, 0] = 0.0
        u = u * mask
        return NspState(SpectralField(self.grid, rho), SpectralField(self.grid, u), state.time + self.dt)

    def integrate(self, state0: NspState, n_steps: int, monitor: Optional[Callable] = None,
                  output_stride: int = 1, checkpoint_dir=None) -> Trajectory:
        """Take ``n_steps`` steps, calling ``monitor(state)`` every ``output_stride`` steps.

        The monitor also sees the initial and final states. On a vacuum breach,
        regime violation or non-finite value the last good state is written to
        ``checkpoint_dir/checkpoint.npz`` and IntegrationAborted is raised.
        """
        self.reset()
        start = _time.perf_counter()
        traj = Trajectory(final=state0, dt=self.dt)

        def _sample(s):
            traj.times.append(s.time)
            traj.samples.append(monitor(s) if monitor is not None else None)

        _sample(state0)
        state = state0
        for i in range(1, n_steps + 1):
            try:
                new = self.step(state)
            except (VacuumError, RegimeError, NspError, FloatingPointError) as exc:
                path = None
                if checkpoint_dir is not None:
                    path = save_checkpoint(Path(checkpoint_dir) / "checkpoint.npz", state, self.params,
                                           {"reason": str(exc), "step": i - 1})
                raise IntegrationAborted(f"{type(exc).__name__}: {exc}", path, state.time) from exc
            state = new
            traj.steps = i
            if i % output_stride == 0 or i == n_steps:
                _sample(state)
        traj.final = state
        traj.wall_time = _time.perf_counter() - start
        return traj


def _resolve(state0: NspState, cfg: IntegratorConfig, params: PhysParams):
    limit = max_stable_dt(state0.grid, params, state0, cfg.safety)
    dt = cfg.dt if cfg.dt is not None else limit
    if dt > limit * (1 + 1e-12):
        raise ConfigError({"integrator.dt": f"dt={dt:g} exceeds the stability limit {limit:g}"})
    if cfg.t_end == 0:
        return 0, dt
    n_steps = max(1, math.ceil(cfg.t_end / dt - 1e-9))
    return n_steps, cfg.t_end / n_steps


def step(state: NspState, cfg: IntegratorConfig, params: PhysParams) -> NspState:
    """One step of size cfg.dt (CNAB2 uses its Euler start)."""
    if cfg.dt is None:
        raise ConfigError({"integrator.dt": "step() needs an explicit dt"})
    limit = max_stable_dt(state.grid, params, state, cfg.safety)
    if cfg.dt > limit * (1 + 1e-12):
        raise ConfigError({"integrator.dt": f"dt={cfg.dt:g} exceeds the stability limit {limit:g}"})
    return Stepper(state.grid, params, cfg.dt, cfg.scheme, cfg.nonlinear).step(state)


def integrate(state0: NspState, cfg: IntegratorConfig, params: PhysParams,
              monitor: Optional[Callable] = None, checkpoint_dir=None) -> Trajectory:
    """Integrate from state0 to cfg.t_end with a uniform step no larger than cfg.dt."""
    n_steps, dt = _resolve(state0, cfg, params)
    if n_steps == 0:
        traj = Trajectory(final=state0, dt=dt)
        traj.times.append(state0.time)
        traj.samples.append(monitor(state0) if monitor is not None else None)
        return traj
    stepper = Stepper(state0.grid, params, dt, cfg.scheme, cfg.nonlinear)
    return stepper.integrate(state0, n_steps, monitor, int(cfg.output_stride), checkpoint_dir)
