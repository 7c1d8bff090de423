"""Scalar conservation laws on the finite stage.

The semidiscrete system is ``du/dt = -div_h Phi(t, u)`` where
``Phi_j = F_j(t, cell centre, u)`` cellwise and ``div_h`` is the antisymmetric
centred divergence.  Integrated against the characteristic of any region it
reproduces the discrete Gauss identity, so the total ``Q = integral of u`` is
constant as long as the flux vanishes at the box boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import parallel
from .calculus import VectorUltrafunction, divergence_array, flux_through_boundary, gauss_scale, region_integral
from .grid import Grid, Region, check_same_grid
from .ultraspace import Ultrafunction

FluxComponent = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


class SolverError(RuntimeError):
    pass


class MarginViolation(SolverError):
    """The support of the solution reached the margin band at the box boundary."""

    def __init__(self, message: str, t: float, cell: tuple):
        super().__init__(message)
        self.t = t
        self.cell = cell


class NonFiniteState(SolverError):
    """The flux or the state became NaN/Inf."""


@dataclass(frozen=True)
class FluxModel:
    """Flux ``F(t, x, u)``, one component per axis.

    ``c1``/``c2`` are the constants of the linear growth bound
    ``|F| <= c1 + c2 |u|``; they are checked by sampling, not assumed.
    """

    components: tuple
    zero_at_zero: bool = True
    c1: float = 0.0
    c2: float = math.inf
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def dim(self) -> int:
        return len(self.components)

    def evaluate(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Flux components stacked on a leading axis."""
        out = np.stack([np.broadcast_to(np.asarray(F(t, x, u), dtype=float), np.shape(u)) for F in self.components])
        if not np.all(np.isfinite(out)):
            raise NonFiniteState(f"flux {self.name} is not finite at t={t}")
        return out

    def wave_speed(self, t: float, x: np.ndarray, u: np.ndarray, eps: float = 1e-6) -> float:
        """Largest ``|dF_j/du|`` over the samples (centred finite difference)."""
        du = eps * np.maximum(1.0, np.abs(u))
        hi = self.evaluate(t, x, u + du)
        lo = self.evaluate(t, x, u - du)
        return float(np.max(np.abs(hi - lo) / (2 * du))) if np.size(u) else 0.0

    def growth_violations(self, t: float, x: np.ndarray, u: np.ndarray) -> int:
        norm = np.sqrt(np.sum(self.evaluate(t, x, u) ** 2, axis=0))
        au = np.abs(u)
        bound = self.c1 + np.where(au > 0, self.c2 * np.where(au > 0, au, 1.0), 0.0)
        return int(np.count_nonzero(norm > bound + 1e-12 * (1 + norm)))

    def vanishes_at_zero(self, t: float, x: np.ndarray) -> bool:
        return bool(np.all(self.evaluate(t, x, np.zeros(x.shape[:-1])) == 0.0))


def burgers(dim: int = 1) -> FluxModel:
    """``F_j(u) = u**2 / 2`` on every axis."""
    comp = lambda t, x, u: 0.5 * u * u
    return FluxModel((comp,) * dim, zero_at_zero=True, c1=0.0, c2=math.inf, name="burgers")


def advection(velocity: Sequence[float]) -> FluxModel:
    """Linear transport ``F_j(u) = a_j u``."""
    velocity = tuple(float(a) for a in velocity)
    comps = tuple((lambda a: (lambda t, x, u: a * u))(a) for a in velocity)
    return FluxModel(comps, zero_at_zero=True, c1=0.0, c2=math.sqrt(sum(a * a for a in velocity)),
                     name="advection:" + ",".join(repr(a) for a in velocity))


@dataclass(frozen=True)
class SolverConfig:
    T: float
    dt: float | None = None
    snap_every: float | None = None
    support_margin: int = 2
    support_tol: float = 1e-12
    cfl: float = 0.2

    def __post_init__(self):
        if not self.T >= 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.support_margin < 1:
            raise ValueError("support_margin must be >= 1")
        if self.snap_every is not None and not self.snap_every > 0:
            raise ValueError("snap_every must be > 0")


@dataclass
class SolutionTrace:
    grid: Grid
    flux: FluxModel
    config: SolverConfig
    dt: float
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    q: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)  # region name -> per-step integrals
    growth_violations: int = 0  # snapshot samples breaking |F| <= c1 + c2 |u|; flagged, not fatal

    @property
    def q_drift(self) -> float:
        q = np.asarray(self.q)
        return float(np.max(np.abs(q - q[0]))) if q.size else 0.0


def total_mass(u: Ultrafunction) -> float:
    # contiguous np.sum is a fixed-order pairwise reduction
    return u.grid.cell_volume * float(np.sum(np.ascontiguousarray(u.coeffs).ravel()))


def _flux_array(t: float, coeffs: np.ndarray, grid: Grid, F: FluxModel) -> np.ndarray:
    dim = grid.dim
    data = np.concatenate([grid.centers.reshape(-1, dim), coeffs.reshape(-1, 1)], axis=1)

    def block(rows: np.ndarray) -> np.ndarray:
        return F.evaluate(t, rows[:, :dim], rows[:, dim]).T

    flat = parallel.chunked_apply(block, data)
    return flat.T.reshape((dim,) + grid.shape)


def _rhs_array(t: float, coeffs: np.ndarray, grid: Grid, F: FluxModel) -> np.ndarray:
    return -divergence_array(grid, _flux_array(t, coeffs, grid, F))


def cell_flux(t: float, u: Ultrafunction, F: FluxModel) -> VectorUltrafunction:
    """Cellwise flux ``Phi_j = F_j(t, centre, u_c)``."""
    if F.dim != u.grid.dim:
        raise ValueError(f"{F.dim}-component flux on a {u.grid.dim}-d grid")
    return VectorUltrafunction.from_arrays(u.grid, _flux_array(t, u.coeffs, u.grid, F))


def semidiscrete_rhs(t: float, u: Ultrafunction, F: FluxModel) -> Ultrafunction:
    """``-div_h Phi``: the time derivative of the semidiscrete system."""
    if F.dim != u.grid.dim:
        raise ValueError(f"{F.dim}-component flux on a {u.grid.dim}-d grid")
    return Ultrafunction(u.grid, _rhs_array(t, u.coeffs, u.grid, F))


def _rk4_array(t: float, c: np.ndarray, dt: float, grid: Grid, F: FluxModel) -> np.ndarray:
    k1 = _rhs_array(t, c, grid, F)
    k2 = _rhs_array(t + 0.5 * dt, c + 0.5 * dt * k1, grid, F)
    k3 = _rhs_array(t + 0.5 * dt, c + 0.5 * dt * k2, grid, F)
    k4 = _rhs_array(t + dt, c + dt * k3, grid, F)
    out = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"state became non-finite in the step from t={t}")
    return out


def step_rk4(t: float, u: Ultrafunction, dt: float, F: FluxModel) -> Ultrafunction:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return Ultrafunction(u.grid, _rk4_array(t, u.coeffs, dt, u.grid, F))


def margin_band(grid: Grid, margin: int) -> np.ndarray:
    band = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[a] = slice(0, margin)
        band[tuple(sl)] = True
        sl[a] = slice(grid.extent[a] - margin, None)
        band[tuple(sl)] = True
    return band


def _check_margin(coeffs: np.ndarray, band: np.ndarray, threshold: float, t: float) -> None:
    hits = band & (np.abs(coeffs) > threshold)
    if np.any(hits):
        cell = tuple(int(i) for i in np.argwhere(hits)[0])
        raise MarginViolation(f"support reached the boundary margin at t={t:g}, cell {cell}", t, cell)


def default_dt(u0: Ultrafunction, F: FluxModel, cfl: float = 0.2) -> float:
    """``cfl * h / max |F'(u)|`` over the initial value range."""
    samples = np.linspace(float(u0.coeffs.min()), float(u0.coeffs.max()), 65)
    x = np.broadcast_to(u0.grid.centers.reshape(-1, u0.grid.dim).mean(axis=0), (samples.size, u0.grid.dim))
    speed = max(F.wave_speed(0.0, x, samples), F.wave_speed(0.0, u0.grid.centers, u0.coeffs))
    return cfl * u0.grid.h / speed if speed > 0 else cfl * u0.grid.h


def margin_limited_time(u0: Ultrafunction, F: FluxModel, margin: int = 2, support_tol: float = 1e-12) -> float:
    """Time for the support to reach the margin band travelling at the initial maximal wave speed."""
    grid = u0.grid
    scale = float(np.max(np.abs(u0.coeffs)))
    support = np.abs(u0.coeffs) > support_tol * scale
    if not support.any():
        return math.inf
    gap = math.inf
    for a in range(grid.dim):
        idx = np.flatnonzero(support.any(axis=tuple(b for b in range(grid.dim) if b != a)))
        gap = min(gap, idx[0] - margin, grid.extent[a] - margin - 1 - idx[-1])
    speed = F.wave_speed(0.0, grid.centers, u0.coeffs)
    return math.inf if speed == 0 else max(gap, 0) * grid.h / speed


def solve(u0: Ultrafunction, F: FluxModel, config: SolverConfig,
          regions: dict[str, Region] | None = None) -> SolutionTrace:
    """Integrate from ``u0`` to ``config.T`` with fixed-step RK4.

    The step is ``T / ceil(T / dt)`` so that ``T`` is hit exactly.  ``Q`` is
    recorded at every step, as is the integral over every region in
    ``regions``.  Raises :class:`MarginViolation` as soon as a cell in the
    margin band exceeds ``support_tol * max|u0|``.
    """
    grid = u0.grid
    if F.dim != grid.dim:
        raise ValueError(f"{F.dim}-component flux on a {grid.dim}-d grid")
    regions = dict(regions or {})
    for r in regions.values():
        check_same_grid(grid, r.grid)
    dt_target = config.dt if config.dt is not None else default_dt(u0, F, config.cfl)
    nsteps = max(1, math.ceil(config.T / dt_target - 1e-12)) if config.T > 0 else 0
    dt = config.T / nsteps if nsteps else dt_target
    snap_stride = nsteps or 1
    if config.snap_every is not None and nsteps:
        snap_stride = max(1, round(config.snap_every / dt))

    band = margin_band(grid, config.support_margin)
    threshold = config.support_tol * float(np.max(np.abs(u0.coeffs)))
    _check_margin(u0.coeffs, band, threshold, 0.0)

    trace = SolutionTrace(grid, F, config, dt)
    trace.ledger = {name: [] for name in regions}

    def record(k: int, coeffs: np.ndarray, u: Ultrafunction | None = None):
        t = k * dt
        u = u if u is not None else Ultrafunction(grid, coeffs)
        trace.step_times.append(t)
        trace.q.append(total_mass(u))
        for name, region in regions.items():
            trace.ledger[name].append(region_integral(u, region))
        if k % snap_stride == 0 or k == nsteps:
            trace.times.append(t)
            trace.snapshots.append(u)
            trace.growth_violations += F.growth_violations(t, grid.centers, u.coeffs)

    coeffs = np.array(u0.coeffs)
    record(0, coeffs, u0)
    for k in range(1, nsteps + 1):
        coeffs = _rk4_array((k - 1) * dt, coeffs, dt, grid, F)
        _check_margin(coeffs, band, threshold, k * dt)
        record(k, coeffs)
    return trace


@dataclass(frozen=True)
class ConservationRow:
    t: float
    rate: float            # d/dt of the region integral from the semidiscrete rhs
    boundary_flux: float   # minus the pointwise surface integral of Phi . nu
    residual: float        # |rate - boundary_flux|, exact identity up to round-off
    scale: float
    fd_rate: float | None = None      # difference quotient of the recorded region integral
    fd_residual: float | None = None  # |fd_rate - boundary_flux|, O(dt^2)


def conservation_report(trace: SolutionTrace, region: Region, ledger_name: str | None = None) -> list[ConservationRow]:
    """Check ``d/dt int_region u = -int_boundary Phi . nu`` at every snapshot.

    With ``ledger_name`` pointing at a region recorded by :func:`solve`, a
    centred difference quotient of the per-step region integrals is reported
    alongside.
    """
    check_same_grid(trace.grid, region.grid)
    series = trace.ledger.get(ledger_name) if ledger_name else None
    rows = []
    for t, u in zip(trace.times, trace.snapshots):
        rate = region_integral(semidiscrete_rhs(t, u, trace.flux), region)
        phi = cell_flux(t, u, trace.flux)
        outflow = -flux_through_boundary(phi, region, "pointwise")
        fd_rate = fd_res = None
        if series is not None and len(series) > 1:
            k = int(round(t / trace.dt))
            if 0 < k < len(series) - 1:
                fd_rate = (series[k + 1] - series[k - 1]) / (2 * trace.dt)
            elif k == 0:
                fd_rate = (-3 * series[0] + 4 * series[1] - series[2]) / (2 * trace.dt) if len(series) > 2 else None
            else:
                fd_rate = (3 * series[k] - 4 * series[k - 1] + series[k - 2]) / (2 * trace.dt) if k >= 2 else None
            fd_res = None if fd_rate is None else abs(fd_rate - outflow)
        rows.append(ConservationRow(t, rate, outflow, abs(rate - outflow), gauss_scale(phi), fd_rate, fd_res))
    return rows
