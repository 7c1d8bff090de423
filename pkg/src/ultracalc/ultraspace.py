"""Piecewise-constant functions on a grid and the projection onto them.

The finite-stage space is spanned by the characteristic functions of the grid
cells, so the mass matrix is ``h**dim`` times the identity.  Point values are
taken in the regularised sense: inside a cell the cell value, on a face the
mean of the cells meeting there (the exterior of the box counts as zero).
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .grid import EXTERIOR, Face, Grid, Region, check_same_grid
from .quadrature import cell_means

PointFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Ultrafunction:
    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.shape != self.grid.shape:
            if coeffs.size == self.grid.ncells:
                coeffs = coeffs.reshape(self.grid.shape)
            else:
                raise ValueError(f"coefficient shape {coeffs.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("ultrafunction coefficients must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, grid: Grid) -> "Ultrafunction":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Ultrafunction":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def characteristic(cls, region: Region) -> "Ultrafunction":
        return cls(region.grid, region.mask.astype(float))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ultrafunction):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None

    def _coerce(self, other):
        if isinstance(other, Ultrafunction):
            check_same_grid(self.grid, other.grid)
            return other.coeffs
        return other

    def __add__(self, other):
        return Ultrafunction(self.grid, self.coeffs + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Ultrafunction(self.grid, self.coeffs - self._coerce(other))

    def __rsub__(self, other):
        return Ultrafunction(self.grid, self._coerce(other) - self.coeffs)

    def __neg__(self):
        return Ultrafunction(self.grid, -self.coeffs)

    def __mul__(self, other):
        return Ultrafunction(self.grid, self.coeffs * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar: float):
        return Ultrafunction(self.grid, self.coeffs / scalar)

    def __call__(self, points) -> np.ndarray:
        return evaluate(self, points)

    def support(self) -> Region:
        return Region.from_mask(self.grid, self.coeffs != 0)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "coeffs": self.coeffs.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Ultrafunction":
        grid = Grid.from_dict(data["grid"])
        return cls(grid, np.asarray(data["coeffs"], dtype=float).reshape(grid.shape))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Ultrafunction":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        """Cell centres and values, one row per cell in row-major order."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{a}" for a in range(self.grid.dim)] + ["value"])
        centers = self.grid.centers.reshape(-1, self.grid.dim)
        for c, value in zip(centers, self.coeffs.ravel()):
            writer.writerow([format_real(x) for x in c] + [format_real(value)])
        return buf.getvalue()


def format_real(value: float) -> str:
    """Round-trippable decimal rendering (17 significant digits)."""
    return format(float(value), ".17g")


@dataclass(frozen=True)
class MassInnerProduct:
    """The L2 pairing of two ultrafunctions on ``grid``."""

    grid: Grid

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    def __call__(self, u: Ultrafunction, v: Ultrafunction) -> float:
        check_same_grid(self.grid, u.grid)
        check_same_grid(self.grid, v.grid)
        return self.cell_volume * float(np.dot(u.coeffs.ravel(), v.coeffs.ravel()))

    def diagonal(self) -> np.ndarray:
        return np.full(self.grid.ncells, self.cell_volume)


def inner_product(u: Ultrafunction, v: Ultrafunction) -> float:
    return MassInnerProduct(u.grid)(u, v)


def norm(u: Ultrafunction) -> float:
    return float(np.sqrt(inner_product(u, u)))


def pointwise_multiply(u: Ultrafunction, v: Ultrafunction) -> Ultrafunction:
    check_same_grid(u.grid, v.grid)
    return Ultrafunction(u.grid, u.coeffs * v.coeffs)


def _corner_cells(grid: Grid, points: np.ndarray):
    """Yield ``(index_arrays, inside)`` for the ``2**dim`` cell choices around each point.

    A coordinate lying exactly on a face plane selects the cell on either side
    (one per choice); other coordinates select the containing cell in every
    choice, so averaging the choices gives the regularised point value.
    """
    origin = np.asarray(grid.origin)
    # face planes are origin + k h, rounded exactly as the grid rounds them
    k = np.rint((points - origin) / grid.h).astype(np.int64)
    plane = origin + k * grid.h
    on_face = points == plane
    base = np.where(points > plane, k, k - 1)
    base = np.where(on_face, k, base)
    for bits in itertools.product((0, 1), repeat=grid.dim):
        idx = []
        inside = np.ones(points.shape[:-1], dtype=bool)
        for a, bit in enumerate(bits):
            ia = np.where(on_face[..., a] & (bit == 0), base[..., a] - 1, base[..., a])
            inside &= (ia >= 0) & (ia < grid.extent[a])
            idx.append(np.clip(ia, 0, grid.extent[a] - 1))
        yield tuple(idx), inside


def evaluate(u: Ultrafunction, points) -> np.ndarray:
    """Regularised point values of ``u`` at ``points`` (shape ``(..., dim)``)."""
    points = np.asarray(points, dtype=float)
    if points.shape[-1] != u.grid.dim:
        points = points[..., None] if u.grid.dim == 1 else points
    total = np.zeros(points.shape[:-1])
    for idx, inside in _corner_cells(u.grid, points):
        total += np.where(inside, u.coeffs[idx], 0.0)
    return total / 2**u.grid.dim


def eval_at_point(u: Ultrafunction, x: Sequence[float] | float) -> float:
    return float(evaluate(u, np.atleast_1d(np.asarray(x, dtype=float))))


@dataclass(frozen=True)
class RadonMeasureSpec:
    """Signed measure = density dx + face-supported part + point masses.

    ``surface`` holds ``(Face, weight)`` pairs (weight is mass per face);
    ``atoms`` holds ``(point, mass)`` pairs.
    """

    density: PointFunction | None = None
    surface: tuple = ()
    atoms: tuple = ()

    def __post_init__(self):
        surface = tuple((face, float(w)) for face, w in self.surface)
        atoms = tuple((tuple(float(c) for c in np.atleast_1d(p)), float(m)) for p, m in self.atoms)
        if not all(np.isfinite(w) for _, w in surface) or not all(np.isfinite(m) for _, m in atoms):
            raise ValueError("measure weights must be finite")
        object.__setattr__(self, "surface", surface)
        object.__setattr__(self, "atoms", atoms)

    def to_dict(self, grid: Grid) -> dict:
        if self.density is not None and not hasattr(self.density, "source"):
            raise ValueError("only expression densities can be serialised")
        return {
            "grid": grid.to_dict(),
            "density": getattr(self.density, "source", None),
            "surface": [
                {"axis": f.axis,
                 "minus": None if f.minus_cell is EXTERIOR else list(f.minus_cell),
                 "plus": None if f.plus_cell is EXTERIOR else list(f.plus_cell),
                 "weight": w}
                for f, w in self.surface
            ],
            "atoms": [{"point": list(p), "mass": m} for p, m in self.atoms],
        }

    @classmethod
    def from_dict(cls, data: dict, compile_density: Callable[[str], PointFunction] | None = None):
        """Returns ``(measure, grid)``; ``compile_density`` turns a density string into a function."""
        grid = Grid.from_dict(data["grid"])
        density = data.get("density")
        if density is not None:
            if compile_density is None:
                raise ValueError("a density expression needs a compiler")
            density = compile_density(density)
        surface = []
        for item in data.get("surface", []):
            minus = EXTERIOR if item.get("minus") is None else tuple(item["minus"])
            plus = EXTERIOR if item.get("plus") is None else tuple(item["plus"])
            surface.append((Face(int(item["axis"]), minus, plus, grid.face_area), item["weight"]))
        atoms = [(item["point"], item["mass"]) for item in data.get("atoms", [])]
        return cls(density, tuple(surface), tuple(atoms)), grid


class MeasureError(ValueError):
    """The measure does not live on the target grid."""


def _validate_measure(mu: RadonMeasureSpec, grid: Grid) -> None:
    for face, _ in mu.surface:
        if not face.is_on(grid):
            raise MeasureError(f"face {face} is not a face of the grid")
    lo, hi = grid.lower, grid.upper
    for point, _ in mu.atoms:
        p = np.asarray(point)
        if p.shape != (grid.dim,) or np.any(p < lo) or np.any(p > hi):
            raise MeasureError(f"atom at {point} lies outside the grid box")


def project_function(f: PointFunction, grid: Grid, rtol: float = 1e-10) -> Ultrafunction:
    """Orthogonal projection: every coefficient is the cell average of ``f``."""
    return Ultrafunction(grid, cell_means(f, grid, rtol=rtol))


def project_measure(mu: RadonMeasureSpec, grid: Grid, rtol: float = 1e-10) -> Ultrafunction:
    """The ultrafunction ``u`` with ``(u, v) = <v, mu>`` for every ``v`` on ``grid``.

    Surface weights are paired with the regularised trace, so a face weight is
    shared half-and-half by the two cells it separates.
    """
    _validate_measure(mu, grid)
    vol = grid.cell_volume
    coeffs = np.zeros(grid.shape)
    if mu.density is not None:
        coeffs += cell_means(mu.density, grid, rtol=rtol)
    for face, w in mu.surface:
        for cell in (face.minus_cell, face.plus_cell):
            if cell is not EXTERIOR:
                coeffs[cell] += 0.5 * w / vol
    share = 1.0 / 2**grid.dim
    for point, m in mu.atoms:
        for idx, inside in _corner_cells(grid, np.asarray(point)[None, :]):
            if inside[0]:
                coeffs[tuple(i[0] for i in idx)] += share * m / vol
    return Ultrafunction(grid, coeffs)


def pair(v: Ultrafunction, mu: RadonMeasureSpec, rtol: float = 1e-10) -> float:
    """``<v, mu>`` with ``v`` taken in its regularised pointwise sense."""
    _validate_measure(mu, v.grid)
    total = 0.0
    if mu.density is not None:
        total += v.grid.cell_volume * float(np.dot(v.coeffs.ravel(), cell_means(mu.density, v.grid, rtol=rtol).ravel()))
    for face, w in mu.surface:
        trace = sum(v.coeffs[c] for c in (face.minus_cell, face.plus_cell) if c is not EXTERIOR)
        total += w * 0.5 * trace
    for point, m in mu.atoms:
        total += m * eval_at_point(v, point)
    return total


def prolong(u: Ultrafunction, factor: int = 2) -> Ultrafunction:
    """Exact embedding into the grid refined by ``factor``."""
    coeffs = u.coeffs
    for a in range(u.grid.dim):
        coeffs = np.repeat(coeffs, factor, axis=a)
    return Ultrafunction(u.grid.refined(factor), coeffs)


def restrict(u: Ultrafunction, coarse: Grid) -> Ultrafunction:
    """Orthogonal projection of a fine-grid ultrafunction onto a nested coarser grid."""
    fine = u.grid
    factor = round(coarse.h / fine.h)
    if coarse.refined(factor) != fine:
        raise ValueError("grids are not nested")
    shape = []
    for n in coarse.extent:
        shape += [n, factor]
    blocks = u.coeffs.reshape(shape)
    return Ultrafunction(coarse, blocks.mean(axis=tuple(range(1, 2 * coarse.dim, 2))))
