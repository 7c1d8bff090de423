"""Ball averages of radius ``eta`` and regularised characteristic functions.

For piecewise-constant integrands on a grid, ``eta < h/2`` guarantees that a
ball crosses at most one face plane per axis.  The ball then splits into
orthant pieces whose volume fractions are computed from the cap formula
(one crossing plane) or by nested one-dimensional quadrature (several).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .grid import Grid, Region
from .quadrature import QuadratureError
from .ultraspace import Ultrafunction


@dataclass(frozen=True)
class EtaRadius:
    eta: float

    def __post_init__(self):
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be positive, got {self.eta}")

    def check(self, grid: Grid) -> None:
        if not self.eta < 0.5 * grid.h:
            raise ValueError(f"eta={self.eta} must be below h/2={0.5 * grid.h}")

    def __float__(self) -> float:
        return float(self.eta)


def ball_volume(dim: int, r: float) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * r**dim


def cap_fraction(dim: int, t: float) -> float:
    """Fraction of the unit ``dim``-ball with first coordinate above ``t``."""
    if t >= 1.0:
        return 0.0
    if t <= -1.0:
        return 1.0
    half = 0.5 * special.betainc(0.5 * (dim + 1), 0.5, 1.0 - t * t)
    return half if t >= 0 else 1.0 - half


def _half_chord_integral(lo: float, hi: float) -> float:
    """Integral of ``sqrt(1 - x**2)`` over ``[lo, hi]`` (clipped to [-1, 1])."""
    lo, hi = max(lo, -1.0), min(hi, 1.0)
    if hi <= lo:
        return 0.0

    def prim(x):
        return 0.5 * (x * math.sqrt(max(1.0 - x * x, 0.0)) + math.asin(x))

    return prim(hi) - prim(lo)


def _quadrant_area(a: float, b: float) -> float:
    """Area of the unit disc intersected with ``{x > a, y > b}``."""
    if b >= 1.0 or a >= 1.0:
        return 0.0
    if b <= -1.0:
        return _half_chord_integral(a, 1.0) * 2.0
    c = math.sqrt(1.0 - b * b)
    lo = max(a, -1.0)
    # where |x| <= c the chord runs from b up to sqrt(1 - x^2)
    inner_lo, inner_hi = max(lo, -c), c
    area = 0.0
    if inner_hi > inner_lo:
        area += _half_chord_integral(inner_lo, inner_hi) - b * (inner_hi - inner_lo)
    if b < 0:
        # |x| > c: the whole chord lies above b
        area += 2.0 * (_half_chord_integral(max(lo, c), 1.0) + _half_chord_integral(lo, -c))
    return area


def _cut_volume(r: float, lows: Sequence[float], free: int) -> float:
    """Volume of the ball of radius ``r`` in ``len(lows) + free`` dimensions
    intersected with ``{y_i > lows[i]}`` for the constrained coordinates."""
    dim = len(lows) + free
    if r <= 0.0:
        return 0.0
    if not lows:
        return ball_volume(dim, r)
    if len(lows) == 1:
        return ball_volume(dim, r) * cap_fraction(dim, lows[0] / r)
    if dim == 2:
        return r * r * _quadrant_area(lows[0] / r, lows[1] / r)
    first, rest = lows[0], list(lows[1:])
    a = max(first, -r)
    if a >= r:
        return 0.0
    value, _ = integrate.quad(lambda y: _cut_volume(math.sqrt(max(r * r - y * y, 0.0)), rest, free),
                              a, r, epsabs=1e-15 * r**dim, epsrel=1e-12, limit=200)
    return value


def orthant_fractions(dim: int, offsets: Sequence[float]) -> dict[tuple[int, ...], float]:
    """Volume fractions of the unit ball in each orthant cut by planes ``y_k = offsets[k]``.

    Keys are tuples of 0/1 (0 = below the plane, 1 = above).  Planes through
    the centre give exactly ``1 / 2**k``.
    """
    k = len(offsets)
    if all(o == 0.0 for o in offsets):
        return {bits: 1.0 / 2**k for bits in itertools.product((0, 1), repeat=k)}
    if k == 1:
        above = cap_fraction(dim, offsets[0])
        return {(0,): 1.0 - above, (1,): above}
    total = ball_volume(dim, 1.0)
    out = {}
    for bits in itertools.product((0, 1), repeat=k):
        # reflect so every constraint reads y > low
        lows = [o if b else -o for o, b in zip(offsets, bits)]
        out[bits] = _cut_volume(1.0, lows, dim - k) / total
    return out


def _face_crossings(grid: Grid, x: np.ndarray, eta: float):
    """Per axis: (containing-or-minus cell index, signed offset of the nearby face or None)."""
    s = (x - np.asarray(grid.origin)) / grid.h
    crossings = []
    for a in range(grid.dim):
        k = int(np.rint(s[a]))
        plane = grid.origin[a] + k * grid.h
        d = x[a] - plane
        if abs(d) < eta:
            crossings.append((k, -d / eta))
        else:
            crossings.append((int(np.floor(s[a])), None))
    return crossings


def _cell_value(u: Ultrafunction, idx: Sequence[int]) -> float:
    if all(0 <= i < n for i, n in zip(idx, u.grid.extent)):
        return float(u.coeffs[tuple(idx)])
    return 0.0


def _average_piecewise(u: Ultrafunction, x: np.ndarray, eta: float) -> float:
    grid = u.grid
    crossings = _face_crossings(grid, x, eta)
    axes = [a for a, (_, off) in enumerate(crossings) if off is not None]
    if not axes:
        return _cell_value(u, [k for k, _ in crossings])
    fractions = orthant_fractions(grid.dim, [crossings[a][1] for a in axes])
    total = 0.0
    for bits, frac in sorted(fractions.items()):
        if frac == 0.0:
            continue
        idx = [k for k, _ in crossings]
        for a, b in zip(axes, bits):
            idx[a] = crossings[a][0] - 1 + b
        total += frac * _cell_value(u, idx)
    return total


def _average_callable(f: Callable, x: np.ndarray, eta: float) -> float:
    dim = x.shape[0]

    def point_value(*ys):
        val = float(np.asarray(f(np.array(ys)[None, :]), dtype=float).reshape(-1)[0])
        if not math.isfinite(val):
            raise QuadratureError(f"integrand is not finite at {list(ys)}")
        return val

    # nquad integrates the first variable innermost; bounds may depend on later ones
    def bounds_for(axis):
        def bounds(*later):
            used = sum((y - x[axis + 1 + i]) ** 2 for i, y in enumerate(later))
            r = math.sqrt(max(eta * eta - used, 0.0))
            return [x[axis] - r, x[axis] + r]
        return bounds

    opts = [{"points": [x[a]], "epsabs": 1e-13, "epsrel": 1e-11, "limit": 200} for a in range(dim)]
    value, _ = integrate.nquad(point_value, [bounds_for(a) for a in range(dim)], opts=opts)
    return value / ball_volume(dim, eta)


def lebesgue_average(f, x, eta: float | EtaRadius) -> float:
    """Average of ``f`` over the ball of radius ``eta`` around ``x``.

    ``f`` may be an :class:`Ultrafunction`, a :class:`Region` (its
    characteristic function) or a callable taking points of shape
    ``(n, dim)``.  Piecewise-constant integrands are averaged from exact
    volume fractions; callables by adaptive quadrature.
    """
    eta = float(eta)
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(f, Region):
        f = Ultrafunction.characteristic(f)
    if isinstance(f, Ultrafunction):
        EtaRadius(eta).check(f.grid)
        if x.shape != (f.grid.dim,):
            raise ValueError(f"point {x.tolist()} does not match a {f.grid.dim}-d grid")
        return _average_piecewise(f, x, eta)
    return _average_callable(f, x, eta)


@dataclass(frozen=True)
class RegularizedCharacteristic:
    """Cell values and face traces of the regularised characteristic function."""

    cells: Ultrafunction
    traces: tuple  # one array per axis, shape extent with extent[axis] + 1

    def trace_at(self, face) -> float:
        return float(self.traces[face.axis][face.plane_position()])


def face_traces(values: np.ndarray) -> tuple:
    """Mean of the two neighbouring cell values on every face, zero-extended."""
    out = []
    for axis in range(values.ndim):
        pad = [(0, 0)] * values.ndim
        pad[axis] = (1, 1)
        padded = np.pad(values, pad)
        n = values.shape[axis] + 1
        out.append(0.5 * (np.take(padded, np.arange(0, n), axis=axis) + np.take(padded, np.arange(1, n + 1), axis=axis)))
    return tuple(out)


def regularized_characteristic(region: Region) -> RegularizedCharacteristic:
    """1 on cells of the region, 0 off it, and 1/2 on its boundary faces."""
    cells = Ultrafunction.characteristic(region)
    return RegularizedCharacteristic(cells, face_traces(cells.coeffs))


def regularize(rc: RegularizedCharacteristic) -> RegularizedCharacteristic:
    """Recompute traces from cell values; a fixed point on regularised data."""
    return RegularizedCharacteristic(rc.cells, face_traces(rc.cells.coeffs))


@dataclass
class IdempotenceReport:
    points: np.ndarray
    single: np.ndarray
    double: np.ndarray
    tol: float
    violations: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.double - self.single))) if len(self.single) else 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def _double_average(u: Ultrafunction, x: np.ndarray, eta: float) -> float:
    grid = u.grid
    near = [a for a, (_, off) in enumerate(_face_crossings(grid, x, 2 * eta)) if off is not None]
    if not near:
        # the inner average is constant on the whole ball
        return _average_piecewise(u, x, eta)
    dim = grid.dim
    if len(near) == 1:
        a = near[0]
        # the inner average depends on the crossing coordinate only: slab integration
        def slab(s):
            y = x.copy()
            y[a] += s
            width = math.sqrt(max(eta * eta - s * s, 0.0))
            return _average_piecewise(u, y, eta) * ball_volume(dim - 1, width) if dim > 1 else _average_piecewise(u, y, eta)
        plane = grid.origin[a] + int(np.rint((x[a] - grid.origin[a]) / grid.h)) * grid.h
        d = plane - x[a]
        breaks = sorted({p for p in (d - eta, d, d + eta) if -eta < p < eta})
        value, _ = integrate.quad(slab, -eta, eta, points=breaks or None, epsabs=1e-14, epsrel=1e-12, limit=400)
        return value / ball_volume(dim, eta)
    return _average_callable(lambda p: np.array([_average_piecewise(u, q, eta) for q in np.atleast_2d(p)]), x, eta)


def check_idempotence(f, points, eta: float, tol: float = 1e-8) -> IdempotenceReport:
    """Compare the ball average with the average of the ball average at ``points``."""
    if isinstance(f, Region):
        f = Ultrafunction.characteristic(f)
    if not isinstance(f, Ultrafunction):
        raise TypeError("idempotence is checked for piecewise-constant grid functions")
    EtaRadius(eta).check(f.grid)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    single = np.array([_average_piecewise(f, p, eta) for p in pts])
    double = np.array([_double_average(f, p, eta) for p in pts])
    bad = np.flatnonzero(np.abs(double - single) > tol)
    violations = [(pts[i].tolist(), float(single[i]), float(double[i])) for i in bad]
    return IdempotenceReport(pts, single, double, tol, violations)
