"""Cell and box quadrature for pointwise-evaluable integrands.

Integrands take an array of points of shape ``(..., dim)`` and return values
of shape ``(...)``.
"""

from __future__ import annotations

import heapq
import itertools
import math
import warnings
from functools import lru_cache

import numpy as np

from . import parallel


class QuadratureError(ArithmeticError):
    """The integrand produced non-finite samples."""


class QuadratureWarning(RuntimeWarning):
    """Adaptive refinement stopped before reaching the requested tolerance."""

    def __init__(self, message: str, cells=()):
        super().__init__(message)
        self.cells = list(cells)


@lru_cache(maxsize=None)
def tensor_rule(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre tensor rule on the unit box; weights sum to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes = np.array(list(itertools.product(x, repeat=dim)))
    weights = np.array([math.prod(c) for c in itertools.product(w, repeat=dim)])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def _evaluate(f, points: np.ndarray) -> np.ndarray:
    values = np.asarray(f(points), dtype=float)
    if values.shape != points.shape[:-1]:
        values = np.broadcast_to(values, points.shape[:-1])
    if not np.all(np.isfinite(values)):
        bad = points[~np.isfinite(values)][0]
        raise QuadratureError(f"integrand is not finite at {bad.tolist()}")
    return values


def _box_mean(f, lo: np.ndarray, size: float, n: int) -> float:
    nodes, weights = tensor_rule(lo.shape[-1], n)
    return float(_evaluate(f, lo + size * nodes) @ weights)


def adaptive_box_mean(f, lo, size: float, rtol: float = 1e-10, atol: float = 0.0,
                      n: int = 4, max_boxes: int = 4000) -> tuple[float, bool]:
    """Mean of ``f`` over the cube ``[lo, lo + size]`` by global adaptive bisection.

    Returns ``(mean, converged)``.  The error of a box is estimated as the
    difference between its own rule and the sum over its ``2**dim`` children.
    """
    lo = np.asarray(lo, dtype=float)
    dim = lo.shape[0]
    offsets = np.array(list(itertools.product((0.0, 1.0), repeat=dim)))
    nodes, weights = tensor_rule(dim, n)
    nkids = len(offsets)

    def split(box_lo, box_size, coarse):
        half = 0.5 * box_size
        kid_lo = box_lo + half * offsets
        pts = kid_lo[:, None, :] + half * nodes[None, :, :]
        kid_means = _evaluate(f, pts) @ weights
        fine = float(kid_means.sum()) / nkids
        return fine, abs(fine - coarse), kid_lo, half, kid_means

    counter = itertools.count()
    root = _box_mean(f, lo, size, n)
    fine, err, kid_lo, half, kid_means = split(lo, size, root)
    heap = [(-err, next(counter), 1.0, fine, kid_lo, half, kid_means)]
    total_err = err
    total = fine
    boxes = 1
    while heap and total_err > max(rtol * abs(total), atol) and boxes < max_boxes:
        neg_err, _, share, fine, kid_lo, half, kid_means = heapq.heappop(heap)
        total_err += neg_err
        total -= share * fine
        kid_share = share / nkids
        for klo, kmean in zip(kid_lo, kid_means):
            kfine, kerr, kklo, khalf, kkm = split(klo, half, float(kmean))
            heapq.heappush(heap, (-kerr * kid_share, next(counter), kid_share, kfine, kklo, khalf, kkm))
            total_err += kerr * kid_share
            total += kid_share * kfine
            boxes += 1
    mean = math.fsum(item[2] * item[3] for item in heap)
    converged = total_err <= max(rtol * abs(mean), atol)
    return mean, converged


def cell_means(f, grid, rtol: float = 1e-10, n_low: int = 4, n_high: int = 8) -> np.ndarray:
    """Average of ``f`` over every cell of ``grid``.

    A tensor Gauss-Legendre pair (``n_low``, ``n_high`` points per axis) is
    applied to all cells at once; cells whose two estimates disagree are
    handed to :func:`adaptive_box_mean`.  Cells on which ``f`` is sampled as a
    constant return that constant exactly.
    """
    dim = grid.dim
    index = np.indices(grid.shape).reshape(dim, -1).T
    lows = np.asarray(grid.origin) + index * grid.h
    nodes_lo, w_lo = tensor_rule(dim, n_low)
    nodes_hi, w_hi = tensor_rule(dim, n_high)

    def eval_block(block_lows: np.ndarray) -> np.ndarray:
        s_lo = _evaluate(f, block_lows[:, None, :] + grid.h * nodes_lo[None])
        s_hi = _evaluate(f, block_lows[:, None, :] + grid.h * nodes_hi[None])
        m_lo = s_lo @ w_lo
        m_hi = s_hi @ w_hi
        const = np.all(s_hi == s_hi[:, :1], axis=1) & np.all(s_lo == s_hi[:, :1], axis=1)
        m_hi = np.where(const, s_hi[:, 0], m_hi)
        m_lo = np.where(const, s_hi[:, 0], m_lo)
        return np.stack([m_lo, m_hi], axis=1)

    both = parallel.chunked_apply(eval_block, lows, min_chunk=2048)
    m_lo, m_hi = both[:, 0], both[:, 1]
    scale = float(np.max(np.abs(m_hi))) if m_hi.size else 0.0
    atol = rtol * scale
    suspect = np.flatnonzero(np.abs(m_hi - m_lo) > np.maximum(rtol * np.abs(m_hi), atol))
    means = m_hi.copy()
    if suspect.size:
        results = parallel.map_ordered(
            lambda i: adaptive_box_mean(f, lows[i], grid.h, rtol=rtol, atol=atol), suspect.tolist())
        failed = []
        for i, (mean, ok) in zip(suspect.tolist(), results):
            means[i] = mean
            if not ok:
                failed.append(tuple(int(c) for c in np.unravel_index(i, grid.shape)))
        if failed:
            warnings.warn(QuadratureWarning(
                f"cell quadrature did not reach rtol={rtol:g} on {len(failed)} cell(s), first {failed[0]}",
                failed), stacklevel=3)
    return means.reshape(grid.shape)
