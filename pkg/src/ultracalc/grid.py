"""Uniform Cartesian grids, faces and cell regions.

A :class:`Grid` is one finite stage: a box of ``prod(extent)`` cubic cells of
edge ``h``.  A :class:`Region` is a finite set of cells; its topological
boundary is the set of faces separating a member cell from a non-member (or
from the exterior of the box).
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two objects living on different grids are combined."""


class _Exterior(enum.Enum):
    EXTERIOR = "EXTERIOR"

    def __repr__(self) -> str:
        return "EXTERIOR"


#: Marks the missing neighbour of a face lying on the box boundary.
EXTERIOR = _Exterior.EXTERIOR

CellIndex = tuple[int, ...]


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``extent[a]`` cells along axis ``a``."""

    extent: tuple[int, ...]
    origin: tuple[float, ...]
    h: float

    def __post_init__(self):
        extent = tuple(int(n) for n in self.extent)
        origin = tuple(float(o) for o in self.origin)
        if len(extent) < 1:
            raise ValueError("grid needs at least one axis")
        if len(origin) != len(extent):
            raise ValueError(f"origin has {len(origin)} entries, expected {len(extent)}")
        if any(n < 2 for n in extent):
            raise ValueError(f"every extent must be >= 2, got {extent}")
        h = float(self.h)
        if not (h > 0.0 and math.isfinite(h)):
            raise ValueError(f"cell size must be positive and finite, got {self.h}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.extent

    @property
    def ncells(self) -> int:
        return math.prod(self.extent)

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def face_area(self) -> float:
        return self.h ** (self.dim - 1)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.extent) * self.h

    def contains_cell(self, cell: Sequence[int]) -> bool:
        return len(cell) == self.dim and all(0 <= c < n for c, n in zip(cell, self.extent))

    def cells(self) -> Iterable[CellIndex]:
        """All cell indices in row-major order."""
        return itertools.product(*(range(n) for n in self.extent))

    def cell_lower(self, cell: Sequence[int]) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(cell, dtype=float) * self.h

    def cell_center(self, cell: Sequence[int]) -> np.ndarray:
        return self.cell_lower(cell) + 0.5 * self.h

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centres, shape ``extent + (dim,)``."""
        axes = [o + (np.arange(n) + 0.5) * self.h for o, n in zip(self.origin, self.extent)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def refined(self, factor: int = 2) -> "Grid":
        """The grid covering the same box with ``h / factor``."""
        return Grid(tuple(n * factor for n in self.extent), self.origin, self.h / factor)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "extent": list(self.extent), "origin": list(self.origin), "h": self.h}

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        extent = data["extent"]
        origin = data.get("origin", [0.0] * len(extent))
        if isinstance(origin, (int, float)):
            origin = [origin] * len(extent)
        if "dim" in data and int(data["dim"]) != len(extent):
            raise ValueError("'dim' disagrees with 'extent'")
        return cls(tuple(extent), tuple(origin), data["h"])


def build_grid(dim: int, extent: Sequence[int], origin: float | Sequence[float], h: float) -> Grid:
    """Build a ``dim``-dimensional grid; a scalar origin is broadcast."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    extent = tuple(extent)
    if len(extent) != dim:
        raise ValueError(f"extent has {len(extent)} entries, expected {dim}")
    if np.isscalar(origin):
        origin = (float(origin),) * dim
    return Grid(extent, tuple(origin), h)


@dataclass(frozen=True)
class Face:
    """An axis-``axis`` face between ``minus_cell`` and ``plus_cell``."""

    axis: int
    minus_cell: CellIndex | _Exterior
    plus_cell: CellIndex | _Exterior
    area: float

    def __post_init__(self):
        if self.minus_cell is EXTERIOR and self.plus_cell is EXTERIOR:
            raise ValueError("a face needs at least one cell")
        for name in ("minus_cell", "plus_cell"):
            c = getattr(self, name)
            if c is not EXTERIOR:
                object.__setattr__(self, name, tuple(int(i) for i in c))
        if self.minus_cell is not EXTERIOR and self.plus_cell is not EXTERIOR:
            delta = np.subtract(self.plus_cell, self.minus_cell)
            expected = np.zeros_like(delta)
            expected[self.axis] = 1
            if not np.array_equal(delta, expected):
                raise ValueError(f"cells {self.minus_cell} and {self.plus_cell} are not axis-{self.axis} neighbours")

    @classmethod
    def at(cls, grid: Grid, axis: int, position: Sequence[int]) -> "Face":
        """Face at plane index ``position[axis]`` (0..extent) of the given transverse cell row."""
        k = position[axis]
        if not 0 <= k <= grid.extent[axis]:
            raise ValueError(f"face plane {k} outside 0..{grid.extent[axis]}")
        minus = list(position)
        minus[axis] = k - 1
        plus = list(position)
        minus_cell = tuple(minus) if k > 0 else EXTERIOR
        plus_cell = tuple(plus) if k < grid.extent[axis] else EXTERIOR
        return cls(axis, minus_cell, plus_cell, grid.face_area)

    def plane_position(self) -> tuple[int, ...]:
        """Index of the face in the ``extent + 1`` face array of its axis."""
        if self.plus_cell is not EXTERIOR:
            return self.plus_cell
        pos = list(self.minus_cell)
        pos[self.axis] += 1
        return tuple(pos)

    def is_on(self, grid: Grid) -> bool:
        if not 0 <= self.axis < grid.dim:
            return False
        if not math.isclose(self.area, grid.face_area, rel_tol=1e-12):
            return False
        cells = [c for c in (self.minus_cell, self.plus_cell) if c is not EXTERIOR]
        if not all(grid.contains_cell(c) for c in cells):
            return False
        # an EXTERIOR side is only legal on the box boundary
        if self.minus_cell is EXTERIOR and self.plus_cell[self.axis] != 0:
            return False
        if self.plus_cell is EXTERIOR and self.minus_cell[self.axis] != grid.extent[self.axis] - 1:
            return False
        return True


def check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True)
class Region:
    """A finite set of cells of ``grid``, realising a bounded open cell union."""

    grid: Grid
    cells: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        cells = frozenset(tuple(int(i) for i in c) for c in self.cells)
        bad = [c for c in cells if not self.grid.contains_cell(c)]
        if bad:
            raise ValueError(f"cells outside the grid: {sorted(bad)[:5]}")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def from_mask(cls, grid: Grid, mask: np.ndarray) -> "Region":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != grid.shape:
            raise ValueError(f"mask shape {mask.shape} != grid shape {grid.shape}")
        return cls(grid, frozenset(map(tuple, np.argwhere(mask).tolist())))

    @classmethod
    def full(cls, grid: Grid) -> "Region":
        return cls(grid, frozenset(grid.cells()))

    @classmethod
    def box(cls, grid: Grid, lo: Sequence[int], hi: Sequence[int]) -> "Region":
        """Cells with ``lo <= index < hi`` on every axis."""
        return cls(grid, frozenset(itertools.product(*(range(a, b) for a, b in zip(lo, hi)))))

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.shape, dtype=bool)
        if self.cells:
            idx = np.array(sorted(self.cells)).T
            m[tuple(idx)] = True
        m.flags.writeable = False
        return m

    def __len__(self) -> int:
        return len(self.cells)

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self.cells

    def __or__(self, other: "Region") -> "Region":
        return region_union(self, other)

    def __and__(self, other: "Region") -> "Region":
        return region_intersection(self, other)

    def to_dict(self) -> dict:
        return {
            "extent": list(self.grid.extent),
            "h": self.grid.h,
            "origin": list(self.grid.origin),
            "cells": [list(c) for c in sorted(self.cells)],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        grid = Grid.from_dict(data)
        return cls(grid, frozenset(tuple(c) for c in data.get("cells", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Region":
        return cls.from_dict(json.loads(text))


def region_union(a: Region, b: Region) -> Region:
    check_same_grid(a.grid, b.grid)
    return Region(a.grid, a.cells | b.cells)


def region_intersection(a: Region, b: Region) -> Region:
    check_same_grid(a.grid, b.grid)
    return Region(a.grid, a.cells & b.cells)


def region_volume(region: Region) -> float:
    return len(region.cells) * region.grid.cell_volume


def boundary_jumps(mask: np.ndarray, axis: int) -> np.ndarray:
    """``chi(plus) - chi(minus)`` on every axis-``axis`` face plane, zero-extended.

    The result has ``mask.shape[axis] + 1`` entries along ``axis``; entry ``k``
    belongs to the face between cells ``k - 1`` and ``k``.
    """
    pad = [(0, 0)] * mask.ndim
    pad[axis] = (1, 1)
    padded = np.pad(mask.astype(np.int8), pad)
    return np.diff(padded, axis=axis)


def boundary_faces(region: Region) -> list[tuple[Face, int]]:
    """Faces of ``region`` with their outward sign along the face axis."""
    grid = region.grid
    out = []
    for axis in range(grid.dim):
        jumps = boundary_jumps(region.mask, axis)
        for pos in np.argwhere(jumps != 0).tolist():
            face = Face.at(grid, axis, pos)
            # jump -1: inside on the minus side, the normal points along +axis
            sign = 1 if jumps[tuple(pos)] < 0 else -1
            out.append((face, sign))
    return out


def boundary_face_count(region: Region) -> int:
    return sum(int(np.count_nonzero(boundary_jumps(region.mask, a))) for a in range(region.grid.dim))


def region_perimeter(region: Region) -> float:
    """Total area of the boundary faces (the Caccioppoli perimeter of the cell union)."""
    return boundary_face_count(region) * region.grid.face_area
