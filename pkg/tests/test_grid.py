from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultracalc.grid import (
    EXTERIOR, Face, Grid, GridMismatchError, Region, boundary_face_count, boundary_faces, build_grid,
    check_same_grid, region_intersection, region_perimeter, region_union, region_volume,
)


def test_grid_basic_geometry():
    g = Grid((4, 2), (0.0, -1.0), 0.5)
    assert g.dim == 2
    assert g.ncells == 8
    assert g.cell_volume == 0.25
    assert g.face_area == 0.5
    np.testing.assert_array_equal(g.upper, [2.0, 0.0])
    np.testing.assert_allclose(g.cell_center((1, 0)), [0.75, -0.75])
    assert g.centers.shape == (4, 2, 2)


@pytest.mark.parametrize("kwargs", [
    dict(extent=(1,), origin=(0.0,), h=0.1),
    dict(extent=(4,), origin=(0.0,), h=0.0),
    dict(extent=(4,), origin=(0.0, 1.0), h=0.1),
    dict(extent=(4,), origin=(0.0,), h=float("inf")),
])
def test_grid_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        Grid(**kwargs)


def test_build_grid_broadcasts_origin():
    g = build_grid(3, (4, 4, 4), -1.0, 0.5)
    assert g.origin == (-1.0, -1.0, -1.0)


def test_grid_round_trip_and_refine():
    g = Grid((3, 5), (0.1, 0.2), 0.25)
    assert Grid.from_dict(json.loads(json.dumps(g.to_dict()))) == g
    r = g.refined(2)
    assert r.extent == (6, 10) and r.h == 0.125 and r.origin == g.origin


def test_face_adjacency_and_exterior():
    g = Grid((3, 3), (0.0, 0.0), 1.0)
    f = Face.at(g, 0, (0, 1))
    assert f.minus_cell is EXTERIOR and f.plus_cell == (0, 1)
    f = Face.at(g, 1, (2, 3))
    assert f.plus_cell is EXTERIOR and f.minus_cell == (2, 2)
    with pytest.raises(ValueError):
        Face(0, (0, 0), (0, 1), 1.0)
    with pytest.raises(ValueError):
        Face(0, EXTERIOR, EXTERIOR, 1.0)
    with pytest.raises(ValueError):
        Face.at(g, 0, (4, 0))


def test_region_outside_grid_rejected():
    g = Grid((2, 2), (0.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        Region(g, frozenset({(2, 0)}))


def test_grid_mismatch():
    a = Region.full(Grid((2,), (0.0,), 1.0))
    b = Region.full(Grid((2,), (0.0,), 0.5))
    with pytest.raises(GridMismatchError):
        region_union(a, b)
    with pytest.raises(GridMismatchError):
        check_same_grid(a.grid, b.grid)


def test_perimeter_of_rectangle():
    # 3 x 2 cells of h = 0.5 -> 1.5 x 1.0 rectangle
    g = Grid((6, 6), (0.0, 0.0), 0.5)
    r = Region.box(g, (1, 2), (4, 4))
    assert region_perimeter(r) == pytest.approx(5.0, abs=1e-15)
    assert boundary_face_count(r) == 10
    assert region_volume(r) == pytest.approx(1.5)


def test_perimeter_of_cube_touching_box():
    g = Grid((2, 2, 2), (0.0, 0.0, 0.0), 1.0)
    assert region_perimeter(Region.full(g)) == 24.0


def test_boundary_faces_outward_sign():
    g = Grid((4,), (0.0,), 1.0)
    faces = dict((f.plane_position(), s) for f, s in boundary_faces(Region.box(g, (1,), (3,))))
    assert faces == {(1,): -1, (3,): 1}


def test_region_json_round_trip():
    g = Grid((3, 4), (0.0, -0.5), 0.25)
    r = Region(g, frozenset({(0, 0), (2, 3), (1, 1)}))
    back = Region.from_json(r.to_json())
    assert back == r
    assert back.mask.sum() == 3


masks_2d = st.lists(st.booleans(), min_size=16, max_size=16).map(lambda v: np.array(v).reshape(4, 4))


@settings(max_examples=100, deadline=None)
@given(masks_2d, masks_2d)
def test_perimeter_submodular(ma, mb):
    g = Grid((4, 4), (0.0, 0.0), 0.25)
    a, b = Region.from_mask(g, ma), Region.from_mask(g, mb)
    lhs = region_perimeter(region_union(a, b)) + region_perimeter(region_intersection(a, b))
    assert lhs <= region_perimeter(a) + region_perimeter(b) + 1e-15


@settings(max_examples=100, deadline=None)
@given(masks_2d, masks_2d)
def test_volume_inclusion_exclusion(ma, mb):
    g = Grid((4, 4), (0.0, 0.0), 0.25)
    a, b = Region.from_mask(g, ma), Region.from_mask(g, mb)
    assert region_volume(a | b) + region_volume(a & b) == pytest.approx(region_volume(a) + region_volume(b))


def test_tiling_examples():
    g = build_grid(1, (4,), 0.0, 0.25)
    assert g.ncells == 4 and g.upper[0] == 1.0
    g = build_grid(2, (3, 3), (0.0, 0.0), 1.0)
    assert g.ncells == 9 and g.cell_volume == 1.0
    g = build_grid(3, (2, 2, 2), -1.0, 1.0)
    np.testing.assert_array_equal(g.upper, [1.0, 1.0, 1.0])


def test_face_count_examples():
    g = Grid((4, 4), (0.0, 0.0), 1.0)
    assert boundary_face_count(Region(g, frozenset({(1, 1)}))) == 4
    assert boundary_face_count(Region(g, frozenset({(1, 1), (2, 1)}))) == 6
    full = Region.full(g)
    assert all(f.minus_cell is EXTERIOR or f.plus_cell is EXTERIOR for f, _ in boundary_faces(full))
    assert region_perimeter(Region(g, frozenset({(0, 0), (1, 0), (0, 1)}))) == 8.0


def test_region_set_examples():
    g = Grid((3, 3), (0.0, 0.0), 0.5)
    a = Region(g, frozenset({(0, 0)}))
    b = Region(g, frozenset({(2, 1)}))
    empty = Region(g, frozenset())
    assert region_union(a, b).cells == {(0, 0), (2, 1)}
    assert region_intersection(a, a) == a
    assert region_intersection(a, empty) == empty
    assert region_volume(Region.box(g, (0, 0), (2, 2))) == 1.0
    assert region_volume(empty) == 0.0
