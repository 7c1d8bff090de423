"""Derivative, gradient/divergence, region and surface integrals, Gauss check.

The derivative along axis ``j`` is the projection of the distributional
derivative.  For a piecewise-constant ``u`` that derivative is the face-jump
measure ``(u_plus - u_minus) * h**(dim-1)`` on every axis-``j`` face, and
pairing it with the regularised trace ``(v_minus + v_plus) / 2`` of a test
function gives the centred stencil::

    (D_j u)_i = (u_{i+1} - u_{i-1}) / (2 h)

with zero values outside the box.  ``h**dim * D_j`` is then an antisymmetric
matrix, which is what makes the discrete Gauss identity exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import Grid, Region, boundary_jumps, check_same_grid
from .ultraspace import Ultrafunction, inner_product


def centred_difference(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Zero-extended centred difference of a cell array along ``axis``."""
    pad = [(0, 0)] * values.ndim
    pad[axis] = (1, 1)
    padded = np.pad(values, pad)
    n = values.shape[axis]
    ahead = np.take(padded, np.arange(2, n + 2), axis=axis)
    behind = np.take(padded, np.arange(0, n), axis=axis)
    return (ahead - behind) / (2.0 * h)


@dataclass(frozen=True)
class DerivOperator:
    grid: Grid
    axis: int

    def __post_init__(self):
        if not 0 <= self.axis < self.grid.dim:
            raise ValueError(f"axis {self.axis} out of range for a {self.grid.dim}-d grid")

    def __call__(self, u: Ultrafunction) -> Ultrafunction:
        check_same_grid(self.grid, u.grid)
        return Ultrafunction(self.grid, self.apply_array(u.coeffs))

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        return centred_difference(values, self.axis, self.grid.h)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Row = output cell, column = input cell, both in row-major order."""
        shape = self.grid.shape
        n = self.grid.ncells
        index = np.arange(n).reshape(shape)
        rows, cols, vals = [], [], []
        c = 1.0 / (2.0 * self.grid.h)
        for shift, coeff in ((1, c), (-1, -c)):
            src = np.roll(index, -shift, axis=self.axis)
            valid = np.ones(shape, dtype=bool)
            sl = [slice(None)] * len(shape)
            sl[self.axis] = slice(-1, None) if shift == 1 else slice(0, 1)
            valid[tuple(sl)] = False
            rows.append(index[valid])
            cols.append(src[valid])
            vals.append(np.full(int(valid.sum()), coeff))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))

    def coefficients(self) -> dict:
        """Sparse table ``(row_cell, column_cell) -> value``."""
        coo = self.matrix.tocoo()
        shape = self.grid.shape
        return {
            (tuple(int(i) for i in np.unravel_index(r, shape)), tuple(int(i) for i in np.unravel_index(c, shape))): float(v)
            for r, c, v in zip(coo.row, coo.col, coo.data)
        }


@lru_cache(maxsize=64)
def assemble_derivative(grid: Grid, axis: int) -> DerivOperator:
    return DerivOperator(grid, axis)


@dataclass(frozen=True)
class VectorUltrafunction:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a vector ultrafunction needs components")
        for c in comps[1:]:
            check_same_grid(comps[0].grid, c.grid)
        if len(comps) != comps[0].grid.dim:
            raise ValueError(f"{len(comps)} components for a {comps[0].grid.dim}-d grid")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, grid: Grid, arrays) -> "VectorUltrafunction":
        return cls(tuple(Ultrafunction(grid, a) for a in arrays))

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def __getitem__(self, j: int) -> Ultrafunction:
        return self.components[j]

    def __len__(self) -> int:
        return len(self.components)

    def stacked(self) -> np.ndarray:
        return np.stack([c.coeffs for c in self.components])

    def dot(self, other: "VectorUltrafunction") -> Ultrafunction:
        check_same_grid(self.grid, other.grid)
        return Ultrafunction(self.grid, np.sum(self.stacked() * other.stacked(), axis=0))

    def magnitude(self) -> Ultrafunction:
        """Cellwise Euclidean norm."""
        return Ultrafunction(self.grid, np.sqrt(np.sum(self.stacked() ** 2, axis=0)))

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "components": [c.coeffs.ravel().tolist() for c in self.components]}

    @classmethod
    def from_dict(cls, data: dict) -> "VectorUltrafunction":
        grid = Grid.from_dict(data["grid"])
        return cls.from_arrays(grid, [np.asarray(c, dtype=float).reshape(grid.shape) for c in data["components"]])

    @classmethod
    def from_json(cls, text: str) -> "VectorUltrafunction":
        return cls.from_dict(json.loads(text))


def gradient(u: Ultrafunction) -> VectorUltrafunction:
    return VectorUltrafunction(tuple(assemble_derivative(u.grid, j)(u) for j in range(u.grid.dim)))


def divergence_array(grid: Grid, components) -> np.ndarray:
    out = np.zeros(grid.shape)
    for j, comp in enumerate(components):
        out += assemble_derivative(grid, j).apply_array(comp)
    return out


def divergence(phi: VectorUltrafunction) -> Ultrafunction:
    return Ultrafunction(phi.grid, divergence_array(phi.grid, [c.coeffs for c in phi.components]))


def _check_region(u_grid: Grid, region: Region) -> None:
    check_same_grid(u_grid, region.grid)


def region_integral(u: Ultrafunction, region: Region) -> float:
    """Integral of ``u`` over ``region``, i.e. ``(u, chi_region)``."""
    _check_region(u.grid, region)
    return inner_product(u, Ultrafunction.characteristic(region))


def boundary_face_counts(region: Region) -> np.ndarray:
    """Number of boundary faces of ``region`` touching each cell (from either side)."""
    counts = np.zeros(region.grid.shape, dtype=np.int64)
    for axis in range(region.grid.dim):
        jumps = np.abs(boundary_jumps(region.mask, axis))
        n = region.grid.extent[axis]
        counts += np.take(jumps, np.arange(0, n), axis=axis) + np.take(jumps, np.arange(1, n + 1), axis=axis)
    return counts


def surface_density(region: Region) -> Ultrafunction:
    """Projection of the total-variation measure of ``grad chi_region``.

    Every boundary face carries weight ``h**(dim-1)``, shared equally between
    the two cells it separates.
    """
    grid = region.grid
    counts = boundary_face_counts(region)
    return Ultrafunction(grid, counts * grid.face_area / (2.0 * grid.cell_volume))


def characteristic_gradient(region: Region) -> VectorUltrafunction:
    return gradient(Ultrafunction.characteristic(region))


def normal_field(region: Region) -> VectorUltrafunction:
    """``-grad chi / |grad chi|`` cellwise, zero where the gradient vanishes."""
    g = characteristic_gradient(region).stacked()
    mag = np.sqrt(np.sum(g**2, axis=0))
    nonzero = mag > 0
    nu = np.zeros_like(g)
    nu[:, nonzero] = -g[:, nonzero] / mag[nonzero]
    return VectorUltrafunction.from_arrays(region.grid, nu)


def surface_integral(u: Ultrafunction, region: Region) -> float:
    """Surface integral through the projected total-variation density."""
    _check_region(u.grid, region)
    return inner_product(u, surface_density(region))


def pointwise_surface_weight(region: Region) -> Ultrafunction:
    """Cellwise Euclidean norm of ``grad chi_region``."""
    return characteristic_gradient(region).magnitude()


def flux_through_boundary(phi: VectorUltrafunction, region: Region, pairing: str = "pointwise") -> float:
    """``integral over the boundary of phi . nu``.

    ``pairing="pointwise"`` weights cells by ``|grad chi|`` (exact Gauss
    identity); ``pairing="tv"`` weights them by :func:`surface_density`.
    """
    _check_region(phi.grid, region)
    flux_density = phi.dot(normal_field(region))
    if pairing == "pointwise":
        return inner_product(flux_density, pointwise_surface_weight(region))
    if pairing == "tv":
        return inner_product(flux_density, surface_density(region))
    raise ValueError(f"unknown pairing {pairing!r}")


def tv_discrepancy(phi: VectorUltrafunction, region: Region) -> Ultrafunction:
    """Cellwise difference of the two surface pairings (nonzero only where they disagree)."""
    flux_density = phi.dot(normal_field(region))
    weight = surface_density(region) - pointwise_surface_weight(region)
    return flux_density * weight * region.grid.cell_volume


def gauss_scale(phi: VectorUltrafunction) -> float:
    """Magnitude bound for the terms of the Gauss identity, used to scale residuals."""
    grid = phi.grid
    return grid.face_area * float(np.sum(np.abs(phi.stacked())))


@dataclass(frozen=True)
class GaussReport:
    lhs: float
    mid: float
    rhs_tv: float
    rhs_pointwise: float
    scale: float
    tol: float = 1e-12

    @property
    def residual_lemma(self) -> float:
        return abs(self.lhs - self.mid)

    @property
    def residual_pointwise(self) -> float:
        return abs(self.lhs - self.rhs_pointwise)

    @property
    def residual_tv(self) -> float:
        return abs(self.lhs - self.rhs_tv)

    @property
    def tv_discrepancy(self) -> float:
        return self.rhs_tv - self.rhs_pointwise

    @property
    def passed(self) -> bool:
        bound = self.tol * self.scale
        return self.residual_lemma <= bound and self.residual_pointwise <= bound

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "mid": self.mid,
            "rhs_tv": self.rhs_tv,
            "rhs_pointwise": self.rhs_pointwise,
            "scale": self.scale,
            "residuals": {
                "lemma": self.residual_lemma,
                "pointwise": self.residual_pointwise,
                "tv": self.residual_tv,
                "tv_minus_pointwise": self.tv_discrepancy,
            },
            "tolerance": self.tol,
            "passed": self.passed,
        }


def gauss_check(phi: VectorUltrafunction, region: Region, tol: float = 1e-12) -> GaussReport:
    """Evaluate both sides of the discrete divergence theorem on ``region``.

    ``lhs`` is the region integral of the divergence, ``mid`` is
    ``-(phi . grad chi)`` integrated over the box, and the two right-hand
    sides use the pointwise and total-variation surface pairings.
    """
    _check_region(phi.grid, region)
    lhs = region_integral(divergence(phi), region)
    grad_chi = characteristic_gradient(region)
    mid = -inner_product(phi.dot(grad_chi), Ultrafunction.constant(phi.grid, 1.0))
    return GaussReport(
        lhs=lhs,
        mid=mid,
        rhs_tv=flux_through_boundary(phi, region, "tv"),
        rhs_pointwise=flux_through_boundary(phi, region, "pointwise"),
        scale=gauss_scale(phi),
        tol=tol,
    )
