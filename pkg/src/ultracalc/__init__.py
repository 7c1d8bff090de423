"""Finite-stage calculus on uniform grids.

Piecewise-constant grid functions with an exactly antisymmetric derivative,
projection of measures, a discrete divergence theorem, ball-average
regularisation and a conservative solver for scalar conservation laws.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .calculus import (
    DerivOperator, GaussReport, VectorUltrafunction, assemble_derivative, divergence, gauss_check,
    gradient, normal_field, region_integral, surface_density, surface_integral,
)
from .conservation import (
    FluxModel, MarginViolation, NonFiniteState, SolverConfig, advection, burgers,
    conservation_report, margin_limited_time, solve,
)
from .expr import Expression, ExpressionError, parse
from .grid import EXTERIOR, Face, Grid, GridMismatchError, Region, build_grid, region_perimeter
from .lebesgue import EtaRadius, check_idempotence, lebesgue_average, regularized_characteristic
from .ultraspace import (
    MassInnerProduct, RadonMeasureSpec, Ultrafunction, eval_at_point, inner_product, norm,
    project_function, project_measure,
)

__all__ = [
    "DerivOperator", "EXTERIOR", "EtaRadius", "Expression", "ExpressionError", "Face", "FluxModel",
    "GaussReport", "Grid", "GridMismatchError", "MarginViolation", "MassInnerProduct", "NonFiniteState",
    "RadonMeasureSpec", "Region", "SolverConfig", "Ultrafunction", "VectorUltrafunction", "advection",
    "assemble_derivative", "build_grid", "burgers", "check_idempotence", "conservation_report",
    "divergence", "eval_at_point", "gauss_check", "gradient", "inner_product", "lebesgue_average",
    "margin_limited_time", "norm", "normal_field", "parse", "project_function", "project_measure",
    "region_integral", "region_perimeter", "regularized_characteristic", "solve", "surface_density",
    "surface_integral",
]
