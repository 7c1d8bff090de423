"""Refinement chains: evaluate a functional on a sequence of ever finer grids.

Each stage is one grid; the table reports the per-stage value, successive
differences and the observed order ``log2`` of successive ratios.  For
functionals that are errors (``kind="error"``) the ratios are taken of the
values themselves, otherwise of the successive differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import VectorUltrafunction, assemble_derivative, gauss_check, region_integral
from .grid import Grid, Region
from .ultraspace import project_function


def nested_grids(base: Grid, levels: int, factor: int = 2) -> list[Grid]:
    if levels < 2:
        raise ValueError("a refinement chain needs at least two stages")
    grids = [base]
    for _ in range(levels - 1):
        grids.append(grids[-1].refined(factor))
    return grids


def centred_grids(dim: int, half_width: float, h0: float, levels: int, factor: int = 2) -> list[Grid]:
    """Grids with an odd number of cells per axis, one cell centred on the origin."""
    if levels < 2:
        raise ValueError("a refinement chain needs at least two stages")
    grids = []
    for k in range(levels):
        h = h0 / factor**k
        n = 2 * max(1, int(round(half_width / h - 0.5))) + 1
        grids.append(Grid((n,) * dim, (-0.5 * n * h,) * dim, h))
    return grids


def shape_region(grid: Grid, shape: dict) -> Region:
    """Cells whose centres lie in ``{"ball": [centre..., radius]}`` or ``{"box": [lo..., hi...]}``."""
    c = grid.centers
    if "ball" in shape:
        *centre, radius = shape["ball"]
        inside = np.sum((c - np.asarray(centre)) ** 2, axis=-1) < radius**2
    elif "box" in shape:
        vals = np.asarray(shape["box"], dtype=float)
        lo, hi = vals[: grid.dim], vals[grid.dim:]
        inside = np.all((c > lo) & (c < hi), axis=-1)
    else:
        raise ValueError(f"unknown region shape {shape}")
    return Region.from_mask(grid, inside)


def origin_cell(grid: Grid) -> tuple[int, ...]:
    idx = np.floor((0.0 - np.asarray(grid.origin)) / grid.h).astype(int)
    return tuple(int(i) for i in idx)


@dataclass
class RefinementTable:
    functional: str
    kind: str  # "value" or "error"
    h: list = field(default_factory=list)
    values: list = field(default_factory=list)

    @property
    def differences(self) -> list:
        return [None] + [b - a for a, b in zip(self.values, self.values[1:])]

    @property
    def orders(self) -> list:
        """Observed convergence order between consecutive stages."""
        out = [None]
        if self.kind == "error":
            seq = [abs(v) for v in self.values]
            for k in range(1, len(seq)):
                ratio = self.h[k - 1] / self.h[k]
                out.append(math.log(seq[k - 1] / seq[k]) / math.log(ratio) if seq[k] > 0 and seq[k - 1] > 0 else None)
            return out
        diffs = self.differences
        for k in range(1, len(diffs)):
            if k < 2 or not diffs[k] or not diffs[k - 1]:
                out.append(None)
                continue
            ratio = self.h[k - 1] / self.h[k]
            out.append(math.log(abs(diffs[k - 1] / diffs[k])) / math.log(ratio))
        return out

    @property
    def growth(self) -> list:
        """Ratio of consecutive values."""
        return [None] + [b / a if a else None for a, b in zip(self.values, self.values[1:])]

    def slope(self) -> float:
        """Least-squares slope of ``log|value|`` against ``log h`` (for error tables)."""
        x = np.log(np.asarray(self.h))
        y = np.log(np.abs(np.asarray(self.values)))
        return float(np.polyfit(x, y, 1)[0])

    def rows(self) -> list[dict]:
        return [
            {"stage": k, "h": h, "value": v, "difference": d, "order": o, "growth": g}
            for k, (h, v, d, o, g) in enumerate(zip(self.h, self.values, self.differences, self.orders, self.growth))
        ]


def run_chain(grids: Sequence[Grid], functional: Callable[[Grid], float], name: str, kind: str = "value") -> RefinementTable:
    table = RefinementTable(name, kind)
    for g in grids:
        table.h.append(g.h)
        table.values.append(float(functional(g)))
    return table


def region_integral_functional(f, shape: dict) -> Callable[[Grid], float]:
    return lambda g: region_integral(project_function(f, g), shape_region(g, shape))


def derivative_error_functional(f, df, axis: int = 0, interior: int = 1) -> Callable[[Grid], float]:
    """Max over interior cells of ``|D_axis P f - df(centre)|``."""
    def functional(g: Grid) -> float:
        d = assemble_derivative(g, axis)(project_function(f, g)).coeffs
        exact = df(g.centers)
        sl = tuple(slice(interior, n - interior) for n in g.extent)
        return float(np.max(np.abs(d[sl] - exact[sl])))
    return functional


def gauss_residual_functional(components: Sequence, shape: dict, variant: str = "pointwise") -> Callable[[Grid], float]:
    def functional(g: Grid) -> float:
        phi = VectorUltrafunction(tuple(project_function(c, g) for c in components))
        report = gauss_check(phi, shape_region(g, shape))
        return {"pointwise": report.residual_pointwise, "lemma": report.residual_lemma,
                "tv": report.residual_tv, "lhs": report.lhs}[variant]
    return functional


def origin_value_functional(f) -> Callable[[Grid], float]:
    return lambda g: float(project_function(f, g).coeffs[origin_cell(g)])
