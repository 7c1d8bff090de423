"""Random instances and fast-vs-dense comparisons behind ``ultracalc verify``."""

from __future__ import annotations

import numpy as np

from .calculus import VectorUltrafunction, assemble_derivative, gauss_check
from .expr import parse
from .grid import Face, Grid, Region
from .oracle import compare, dense_derivative, dense_project_measure
from .ultraspace import RadonMeasureSpec, project_measure

SMALL_GRIDS = [
    Grid((2,), (0.0,), 0.5), Grid((3,), (-0.3,), 0.25), Grid((4,), (0.0,), 0.25),
    Grid((2, 2), (0.0, 0.0), 0.5), Grid((3, 2), (-0.5, 0.1), 0.4),
    Grid((3, 3), (0.0, 0.0), 1 / 3), Grid((4, 4), (-1.0, -1.0), 0.5),
    Grid((2, 3, 2), (0.0, 0.0, 0.0), 0.5),
]


def random_region(grid: Grid, rng: np.random.Generator, density: float = 0.5) -> Region:
    mask = rng.random(grid.shape) < density
    if not mask.any():
        mask[tuple(rng.integers(0, n) for n in grid.extent)] = True
    return Region.from_mask(grid, mask)


def random_box_region(grid: Grid, rng: np.random.Generator) -> Region:
    lo = [int(rng.integers(0, n)) for n in grid.extent]
    hi = [int(rng.integers(a + 1, n + 1)) for a, n in zip(lo, grid.extent)]
    return Region.box(grid, lo, hi)


def random_field(grid: Grid, rng: np.random.Generator) -> VectorUltrafunction:
    return VectorUltrafunction.from_arrays(grid, rng.standard_normal((grid.dim,) + grid.shape))


def _random_polynomial(dim: int, rng: np.random.Generator) -> str:
    names = "xyz"[:dim]
    terms = [f"{rng.normal():.6f}"]
    for v in names:
        terms.append(f"({rng.normal():.6f})*{v}")
    v, w = rng.choice(list(names), 2)
    terms.append(f"({rng.normal():.6f})*{v}*{w}")
    return " + ".join(terms)


def random_measure(grid: Grid, rng: np.random.Generator) -> RadonMeasureSpec:
    """Polynomial density, a few faces (box-boundary ones included) and atoms, some on faces and vertices."""
    density = parse(_random_polynomial(grid.dim, rng)).point_function()
    surface = []
    for _ in range(int(rng.integers(1, 5))):
        axis = int(rng.integers(grid.dim))
        pos = [int(rng.integers(0, n)) for n in grid.extent]
        pos[axis] = int(rng.integers(0, grid.extent[axis] + 1))
        surface.append((Face.at(grid, axis, pos), float(rng.normal())))
    atoms = []
    lo = np.asarray(grid.origin)
    for _ in range(int(rng.integers(1, 4))):
        p = lo + rng.random(grid.dim) * np.asarray(grid.extent) * grid.h
        snap = rng.random(grid.dim) < 0.4
        # snapped coordinates sit exactly on grid planes
        k = np.round((p - lo) / grid.h)
        p = np.where(snap, lo + k * grid.h, p)
        atoms.append((p, float(rng.normal())))
    return RadonMeasureSpec(density, tuple(surface), tuple(atoms))


def check_derivative(tolerance: float = 1e-12):
    out = []
    for grid in SMALL_GRIDS:
        for axis in range(grid.dim):
            fast = assemble_derivative(grid, axis).matrix.toarray()
            rep = compare(fast, dense_derivative(grid, axis), tolerance * max(1.0, 1.0 / grid.h))
            out.append((f"derivative {grid.extent} axis {axis}", rep.passed, str(rep)))
    return out


def check_projection(count: int = 20, seed: int = 0, tolerance: float = 1e-12):
    rng = np.random.default_rng(seed)
    out = []
    for grid in SMALL_GRIDS:
        worst = None
        for _ in range(count):
            mu = random_measure(grid, rng)
            rep = compare(project_measure(mu, grid), dense_project_measure(mu, grid), tolerance)
            if worst is None or rep.max_abs > worst.max_abs:
                worst = rep
        out.append((f"projection {grid.extent} x{count}", worst.passed, str(worst)))
    return out


def check_gauss(count: int = 20, seed: int = 1, tolerance: float = 1e-12):
    rng = np.random.default_rng(seed)
    out = []
    for grid in (Grid((6, 6), (0.0, 0.0), 1 / 6), Grid((4, 4, 4), (0.0, 0.0, 0.0), 0.25)):
        worst = 0.0
        for _ in range(count):
            rep = gauss_check(random_field(grid, rng), random_region(grid, rng), tol=tolerance)
            worst = max(worst, max(rep.residual_lemma, rep.residual_pointwise) / rep.scale)
        ok = worst <= tolerance
        out.append((f"gauss {grid.extent} x{count}", ok, f"max residual/scale {worst:.3e} (tol {tolerance:.0e})"))
    return out


SUITES = {"derivative": check_derivative, "projection": check_projection, "gauss": check_gauss}


def run_suite(name: str = "all"):
    names = list(SUITES) if name == "all" else [name]
    results = []
    for n in names:
        results.extend(SUITES[n]())
    return results
