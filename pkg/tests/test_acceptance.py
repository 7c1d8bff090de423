"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line (also collected into the terminal
summary) before asserting.
"""

from __future__ import annotations

import itertools
import os
import subprocess
import sys
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from ultracalc.calculus import assemble_derivative, flux_through_boundary, gauss_check, region_integral
from ultracalc.conservation import (
    SolverConfig, burgers, cell_flux, margin_limited_time, semidiscrete_rhs, solve,
)
from ultracalc.grid import Face, Grid, Region
from ultracalc.lebesgue import lebesgue_average, regularized_characteristic
from ultracalc.oracle import compare, dense_project_measure
from ultracalc.refine import centred_grids, derivative_error_functional, origin_value_functional, run_chain
from ultracalc.ultraspace import Ultrafunction, eval_at_point, inner_product, norm, project_function, project_measure
from ultracalc.verify import random_box_region, random_field, random_measure, random_region


def report(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{criterion}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def radial_bump(points, width=0.4):
    s2 = np.sum(points**2, axis=-1) / width**2
    return np.where(s2 < 1, (1 - s2) ** 3, 0.0)


GAUSS_GRIDS = [Grid((6, 6), (0.0, 0.0), 1 / 6), Grid((4, 4, 4), (0.0, 0.0, 0.0), 0.25)]


def gauss_instances(seed: int = 7, count: int = 30):
    rng = np.random.default_rng(seed)
    for grid in GAUSS_GRIDS:
        for _ in range(count):
            yield random_field(grid, rng), random_region(grid, rng)


def test_antisymmetry():
    rng = np.random.default_rng(1)
    grids = [Grid((16,), (0.0,), 1 / 16), Grid((8, 8), (0.0, 0.0), 1 / 8), Grid((4, 4, 4), (0.0,) * 3, 1 / 4)]
    start = time.perf_counter()
    worst = 0.0
    for g in grids:
        ops = [assemble_derivative(g, j) for j in range(g.dim)]
        for _ in range(50):
            u = Ultrafunction(g, rng.standard_normal(g.shape))
            v = Ultrafunction(g, rng.standard_normal(g.shape))
            bound = norm(u) * norm(v) / g.h
            for D in ops:
                worst = max(worst, abs(inner_product(D(u), v) + inner_product(u, D(v))) / bound)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-13 and elapsed < 1.0
    report("1 antisymmetry", ok, f"max |(Du,v)+(u,Dv)| / (|u||v|/h) = {worst:.2e} (tol 1e-13), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_gauss_lemma_exact():
    start = time.perf_counter()
    worst = 0.0
    for phi, omega in gauss_instances():
        rep = gauss_check(phi, omega)
        worst = max(worst, rep.residual_lemma / rep.scale)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 1.0
    report("2 divergence lemma", ok, f"max |lhs - mid| / scale = {worst:.2e} (tol 1e-12), {elapsed:.2f} s (< 1 s)")
    assert ok


def test_gauss_theorem_pointwise_pairing():
    worst = 0.0
    corner = 0.0
    for phi, omega in gauss_instances():
        rep = gauss_check(phi, omega)
        worst = max(worst, rep.residual_pointwise / rep.scale)
        corner = max(corner, abs(rep.tv_discrepancy) / rep.scale)
    ok = worst <= 1e-12
    report("3a Gauss, pointwise pairing", ok,
           f"max |lhs - rhs_pointwise| / scale = {worst:.2e} (tol 1e-12); TV-pairing discrepancy reported: max {corner:.2e}")
    assert ok


def test_gauss_theorem_tv_pairing_rectangles():
    rng = np.random.default_rng(11)
    worst = 0.0
    for grid in GAUSS_GRIDS:
        for _ in range(30):
            rep = gauss_check(random_field(grid, rng), random_box_region(grid, rng))
            worst = max(worst, abs(rep.tv_discrepancy) / rep.scale)
    ok = worst <= 1e-12
    report("3b Gauss, TV pairing on rectangles", ok,
           f"max |rhs_tv - rhs_pointwise| / scale = {worst:.2e} (tol 1e-12); nonzero terms sit on corner cells")
    assert ok


def test_regularized_characteristic_exact():
    g = Grid((6, 6), (-1.5, -1.5), 0.5)
    half = Region.box(g, (0, 0), (3, 6))  # x < 0
    rc = regularized_characteristic(half)
    chi = Ultrafunction.characteristic(half)
    checks = []
    for eta in (0.05, 0.2):
        checks += [lebesgue_average(half, [-0.7, 0.3], eta) == 1.0,
                   lebesgue_average(half, [0.7, 0.3], eta) == 0.0,
                   lebesgue_average(half, [0.0, 0.3], eta) == 0.5]
    checks += [eval_at_point(chi, [-0.7, 0.3]) == 1.0, eval_at_point(chi, [0.7, 0.3]) == 0.0,
               eval_at_point(chi, [0.0, 0.3]) == 0.5,
               rc.trace_at(Face.at(g, 0, (3, 2))) == 0.5, rc.trace_at(Face.at(g, 0, (2, 2))) == 1.0,
               rc.trace_at(Face.at(g, 0, (4, 2))) == 0.0]
    ok = all(checks)
    report("4 regularised characteristic", ok, f"{sum(checks)}/{len(checks)} interior/exterior/face values exact")
    assert ok


def test_projection_matches_dense_oracle():
    rng = np.random.default_rng(5)
    extents = [(n,) for n in (2, 3, 4)] + list(itertools.product((2, 3, 4), repeat=2))
    worst = 0.0
    where = ""
    for ext in extents:
        h = float(rng.uniform(0.1, 1.0))
        g = Grid(ext, tuple(rng.uniform(-1, 1, len(ext))), h)
        for _ in range(100):
            mu = random_measure(g, rng)
            rep = compare(project_measure(mu, g), dense_project_measure(mu, g), 1e-12)
            if rep.max_abs > worst:
                worst, where = rep.max_abs, f"{ext}"
    ok = worst <= 1e-12
    report("5 projection vs dense oracle", ok,
           f"{len(extents)} grids x 100 measures, max deviation {worst:.2e} on {where} (tol 1e-12)")
    assert ok


def _burgers_run(grid, u0):
    F = burgers(grid.dim)
    T = 0.5 * margin_limited_time(u0, F)
    start = time.perf_counter()
    trace = solve(u0, F, SolverConfig(T=T, snap_every=T / 5))
    return trace, T, time.perf_counter() - start


def test_conservation_burgers_1d_2d():
    g1 = Grid((256,), (-1.0,), 2 / 256)
    trace1, T1, t1 = _burgers_run(g1, project_function(radial_bump, g1))
    rel1 = trace1.q_drift / abs(trace1.q[0])
    g2 = Grid((64, 64), (-1.0, -1.0), 2 / 64)
    trace2, T2, _ = _burgers_run(g2, project_function(radial_bump, g2))
    rel2 = trace2.q_drift / abs(trace2.q[0])
    ok = rel1 <= 1e-10 and t1 < 10.0 and rel2 <= 1e-9
    report("6 total mass, Burgers", ok,
           f"1d 256 cells T={T1:.4f}: {rel1:.2e} (tol 1e-10, {t1:.2f} s < 10 s); 2d 64x64 T={T2:.4f}: {rel2:.2e} (tol 1e-9)")
    assert ok


def test_region_flux_balance():
    rng = np.random.default_rng(3)
    worst = 0.0
    nsnap = 0
    for grid in (Grid((256,), (-1.0,), 2 / 256), Grid((64, 64), (-1.0, -1.0), 2 / 64)):
        trace, _, _ = _burgers_run(grid, project_function(radial_bump, grid))
        regions = [random_box_region(grid, rng) for _ in range(5)]
        for t, u in zip(trace.times, trace.snapshots):
            nsnap += 1
            rhs = semidiscrete_rhs(t, u, trace.flux)
            phi = cell_flux(t, u, trace.flux)
            scale = grid.face_area * float(np.sum(np.abs(phi.stacked())))
            for omega in regions:
                res = abs(region_integral(rhs, omega) + flux_through_boundary(phi, omega))
                worst = max(worst, res / scale)
    ok = worst <= 1e-12
    report("7 region flux balance", ok, f"{nsnap} snapshots x 5 regions, max residual/scale {worst:.2e} (tol 1e-12)")
    assert ok


def test_derivative_consistency_slope():
    f = lambda p: np.sin(p[..., 0])
    df = lambda p: np.cos(p[..., 0])
    grids = [Grid((n,), (0.0,), 1.0 / n) for n in (16, 32, 64)]
    table = run_chain(grids, derivative_error_functional(f, df), "derivative-error", kind="error")
    slope = table.slope()
    ok = abs(slope - 2.0) <= 0.1
    report("8 derivative consistency", ok, f"errors {[f'{e:.3e}' for e in table.values]}, slope {slope:.4f} (2.0 +- 0.1)")
    assert ok


def test_inverse_distance_origin_growth():
    f = lambda p: 1.0 / np.sqrt(np.sum(p**2, axis=-1))
    table = run_chain(centred_grids(2, 0.5, 0.2, 4), origin_value_functional(f), "origin-value")
    growth = table.growth[1:]
    ok = all(abs(g - 2.0) <= 0.2 for g in growth)
    report("9 origin value of 1/|x|", ok,
           f"values {[f'{v:.4f}' for v in table.values]}, growth per halving {[f'{g:.4f}' for g in growth]} (2.0 +- 0.2)")
    assert ok


def test_solve_thread_count_determinism(tmp_path):
    g = Grid((128, 128), (-1.0, -1.0), 2 / 128)
    u0 = project_function(radial_bump, g)
    (tmp_path / "u0.json").write_text(u0.to_json())
    outputs = []
    for threads in (1, 8):
        env = dict(os.environ, UF_THREADS=str(threads))
        out = tmp_path / f"run{threads}"
        cmd = [sys.executable, "-m", "ultracalc.cli", "solve", "--flux", "burgers", "--u0", str(tmp_path / "u0.json"),
               "--T", "0.05", "--snap-every", "0.01", "--out", str(out)]
        subprocess.run(cmd, env=env, check=True, capture_output=True)
        outputs.append((out / "conservation.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    report("10 thread-count determinism", ok,
           f"conservation.csv with UF_THREADS=1 and 8: {'byte-identical' if ok else 'DIFFER'} ({len(outputs[0])} bytes)")
    assert ok
