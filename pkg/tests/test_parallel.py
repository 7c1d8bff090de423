from __future__ import annotations

import numpy as np
import pytest

from ultracalc import parallel
from ultracalc.grid import Grid
from ultracalc.quadrature import cell_means


def test_worker_count_from_env(monkeypatch):
    monkeypatch.setenv("UF_THREADS", "3")
    assert parallel.worker_count() == 3
    monkeypatch.setenv("UF_THREADS", "0")
    with pytest.raises(ValueError):
        parallel.worker_count()
    monkeypatch.setenv("UF_THREADS", "many")
    with pytest.raises(ValueError):
        parallel.worker_count()


def test_map_ordered_keeps_order(monkeypatch):
    monkeypatch.setenv("UF_THREADS", "8")
    assert parallel.map_ordered(lambda i: i * i, range(50)) == [i * i for i in range(50)]


def test_chunked_apply_thread_independent(monkeypatch):
    data = np.random.default_rng(0).standard_normal((20000, 3))
    fn = lambda rows: np.sin(rows).sum(axis=1)
    monkeypatch.setenv("UF_THREADS", "1")
    one = parallel.chunked_apply(fn, data)
    monkeypatch.setenv("UF_THREADS", "8")
    many = parallel.chunked_apply(fn, data)
    assert np.array_equal(one, many)


def test_projection_thread_independent(monkeypatch):
    g = Grid((128, 128), (-1.0, -1.0), 1 / 64)
    f = lambda p: 1.0 / (np.sqrt(np.sum(p**2, axis=-1)) + 1e-3)
    monkeypatch.setenv("UF_THREADS", "1")
    one = cell_means(f, g)
    monkeypatch.setenv("UF_THREADS", "8")
    assert np.array_equal(one, cell_means(f, g))
