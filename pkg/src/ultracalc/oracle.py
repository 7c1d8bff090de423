"""Slow dense reference implementations for tiny grids.

Nothing here calls the fast paths in :mod:`ultracalc.ultraspace` or
:mod:`ultracalc.calculus`: basis functions are enumerated explicitly, faces
are enumerated one by one, quadrature uses its own Gauss-Legendre nodes and
linear systems are solved by Gaussian elimination with partial pivoting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import EXTERIOR, Grid

MAX_CELLS = 4096


def legendre_nodes(n: int, iterations: int = 100) -> tuple[list[float], list[float]]:
    """Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration."""
    nodes, weights = [], []
    for i in range(1, n + 1):
        x = math.cos(math.pi * (i - 0.25) / (n + 0.5))
        for _ in range(iterations):
            p0, p1 = 1.0, x
            for k in range(2, n + 1):
                p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
            dp = n * (x * p1 - p0) / (x * x - 1.0)
            dx = p1 / dp
            x -= dx
            if abs(dx) < 1e-16:
                break
        p0, p1 = 1.0, x
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        nodes.append(x)
        weights.append(2.0 / ((1.0 - x * x) * dp * dp))
    return nodes, weights


def box_integral(f, lo, size: float, n: int = 6, pieces: int = 2) -> float:
    """Composite tensor Gauss-Legendre integral of ``f`` over a cube."""
    nodes, weights = legendre_nodes(n)
    dim = len(lo)
    sub = size / pieces
    one_d = []
    for p in range(pieces):
        for x, w in zip(nodes, weights):
            one_d.append((p * sub + 0.5 * sub * (x + 1.0), 0.5 * sub * w))
    combos = list(itertools.product(one_d, repeat=dim))
    points = np.array([[lo[a] + c[a][0] for a in range(dim)] for c in combos])
    w = [math.prod(c[a][1] for a in range(dim)) for c in combos]
    values = np.asarray(f(points), dtype=float).reshape(-1)
    return math.fsum(wi * vi for wi, vi in zip(w, values))


def solve_dense(A, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting; ``b`` may hold several columns."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    n = A.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        assert A[p, k] != 0.0, "singular mass matrix"
        if p != k:
            A[[k, p]] = A[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            m = A[i, k] / A[k, k]
            if m != 0.0:
                A[i, k:] -= m * A[k, k:]
                b[i] -= m * b[k]
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - A[k, k + 1:] @ x[k + 1:]) / A[k, k]
    return x[:, 0] if vector else x


@dataclass(frozen=True)
class DenseOperator:
    grid: Grid
    matrix: np.ndarray

    def __post_init__(self):
        n = self.grid.ncells
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} != ({n}, {n})")


def _basis(grid: Grid) -> list[tuple[int, ...]]:
    if grid.ncells > MAX_CELLS:
        raise ValueError(f"dense oracle limited to {MAX_CELLS} cells, got {grid.ncells}")
    return list(itertools.product(*(range(n) for n in grid.extent)))


def mass_matrix(grid: Grid) -> np.ndarray:
    """``int chi_a chi_b dx`` from the overlap of the two cell boxes."""
    cells = _basis(grid)
    n = len(cells)
    M = np.zeros((n, n))
    for i, a in enumerate(cells):
        for j, b in enumerate(cells):
            overlap = 1.0
            for ax in range(grid.dim):
                lo = max(a[ax], b[ax]) * grid.h
                hi = min(a[ax] + 1, b[ax] + 1) * grid.h
                overlap *= max(0.0, hi - lo)
            M[i, j] = overlap
    return M


def _faces(grid: Grid, axis: int):
    """Every axis-``axis`` face as ``(minus, plus)`` with EXTERIOR at the box boundary."""
    transverse = [range(n) if a != axis else [0] for a, n in enumerate(grid.extent)]
    for row in itertools.product(*transverse):
        for k in range(grid.extent[axis] + 1):
            minus = list(row)
            minus[axis] = k - 1
            plus = list(row)
            plus[axis] = k
            yield (tuple(minus) if k > 0 else EXTERIOR,
                   tuple(plus) if k < grid.extent[axis] else EXTERIOR)


def _indicator(cell, side) -> float:
    return 1.0 if side is not EXTERIOR and tuple(side) == tuple(cell) else 0.0


def _regularised_indicator_at(grid: Grid, cell, point) -> float:
    """Value of the regularised characteristic of ``cell`` at ``point``."""
    value = 1.0
    for a in range(grid.dim):
        lo = grid.origin[a] + cell[a] * grid.h
        hi = grid.origin[a] + (cell[a] + 1) * grid.h
        p = point[a]
        if lo < p < hi:
            continue
        if p == lo or p == hi:
            value *= 0.5
        else:
            return 0.0
    return value


def basis_pairing(grid: Grid, cell, mu) -> float:
    """``<chi_cell, mu>`` with the regularised characteristic of one cell."""
    total = 0.0
    if mu.density is not None:
        lo = [grid.origin[a] + cell[a] * grid.h for a in range(grid.dim)]
        total += box_integral(mu.density, lo, grid.h)
    for face, w in mu.surface:
        trace = 0.5 * (_indicator(cell, face.minus_cell) + _indicator(cell, face.plus_cell))
        total += w * trace
    for point, m in mu.atoms:
        total += m * _regularised_indicator_at(grid, cell, point)
    return total


def dense_project_measure(mu, grid: Grid):
    """Ultrafunction whose coefficients solve ``M c = b`` with ``b_v = <chi_v, mu>``."""
    from .ultraspace import Ultrafunction  # container only; no fast-path arithmetic

    cells = _basis(grid)
    M = mass_matrix(grid)
    b = np.array([basis_pairing(grid, c, mu) for c in cells])
    return Ultrafunction(grid, solve_dense(M, b).reshape(grid.shape))


def derivative_pairing_matrix(grid: Grid, axis: int) -> np.ndarray:
    """``B[v, u] = <chi_v, d_axis chi_u>``: face jumps of ``chi_u`` against the trace of ``chi_v``."""
    cells = _basis(grid)
    faces = list(_faces(grid, axis))
    area = grid.h ** (grid.dim - 1)
    n = len(cells)
    B = np.zeros((n, n))
    for j, u in enumerate(cells):
        for i, v in enumerate(cells):
            s = 0.0
            for minus, plus in faces:
                jump = _indicator(u, plus) - _indicator(u, minus)
                if jump == 0.0:
                    continue
                trace = 0.5 * (_indicator(v, minus) + _indicator(v, plus))
                s += jump * area * trace
            B[i, j] = s
    return B


def dense_derivative(grid: Grid, axis: int) -> DenseOperator:
    M = mass_matrix(grid)
    return DenseOperator(grid, solve_dense(M, derivative_pairing_matrix(grid, axis)))


@dataclass(frozen=True)
class CompareReport:
    max_abs: float
    max_rel: float
    index: tuple | None
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_abs <= self.tolerance

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        where = "" if self.passed else f" at {self.index}"
        return f"{status}: max|diff|={self.max_abs:.3e} (rel {self.max_rel:.3e}, tol {self.tolerance:.1e}){where}"


def _as_array(x) -> np.ndarray:
    if hasattr(x, "coeffs"):
        return np.asarray(x.coeffs, dtype=float)
    if isinstance(x, DenseOperator):
        return x.matrix
    if hasattr(x, "toarray"):
        return x.toarray()
    return np.asarray(x, dtype=float)


def compare(fast, dense, tolerance: float) -> CompareReport:
    """Max abs/rel deviation between two arrays, with the location of the worst entry."""
    a, b = _as_array(fast), _as_array(dense)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        return CompareReport(0.0, 0.0, None, tolerance)
    diff = np.abs(a - b)
    idx = tuple(int(i) for i in np.unravel_index(int(np.argmax(diff)), diff.shape))
    scale = float(np.max(np.abs(b)))
    max_abs = float(diff.max())
    return CompareReport(max_abs, max_abs / scale if scale else max_abs, idx, tolerance)
