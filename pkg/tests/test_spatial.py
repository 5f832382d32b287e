import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from watter.domain import Worker
from watter.scenarios import load_scenario
from watter.spatial import (EARTH_RADIUS_M, GeodesicModel, GraphModel, GridIndex, UnreachableError, bbox_of,
                            haversine_m, nearest_idle_worker, route_cost)

A, B, C, D, E, F = range(6)


def chord_distance_m(a, b):
    # independent route: angle between unit vectors via atan2(|u x v|, u . v)
    def unit(p):
        lon, lat = map(math.radians, p)
        return np.array([math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)])

    u, v = unit(a), unit(b)
    return EARTH_RADIUS_M * math.atan2(np.linalg.norm(np.cross(u, v)), float(u @ v))


lonlat = st.tuples(st.floats(103.5, 104.5), st.floats(30.2, 31.0))


@given(lonlat, lonlat)
def test_haversine_matches_vector_angle(a, b):
    assert haversine_m(a, b) == pytest.approx(chord_distance_m(a, b), abs=1e-6)


def test_one_degree_on_equator():
    assert haversine_m((0.0, 0.0), (1.0, 0.0)) == pytest.approx(2 * math.pi * EARTH_RADIUS_M / 360)


def test_geodesic_cost_is_rounded_ms_and_symmetric():
    m = GeodesicModel(10.0)
    a, b = (104.0, 30.6), (104.01, 30.61)
    assert m.cost(a, b) == round(haversine_m(a, b) / 10.0 * 1000)
    assert m.cost(a, b) == m.cost(b, a)
    assert m.cost(a, a) == 0


def test_geodesic_validation():
    m = GeodesicModel(10.0, bbox=(104.0, 30.0, 105.0, 31.0))
    m.validate((104.5, 30.5))
    with pytest.raises(ValueError):
        m.validate((106.0, 30.5))
    with pytest.raises(TypeError):
        m.validate(3)
    with pytest.raises(ValueError):
        GeodesicModel(0)


def test_example_graph_costs():
    model = load_scenario().model
    assert model.cost(A, C) == 120_000
    assert route_cost(model, [D, F, E, F]) == 240_000
    assert route_cost(model, [A, C, D, C]) == 480_000


@given(st.integers(2, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11), st.integers(1, 500)),
                                      min_size=1, max_size=40))
def test_dijkstra_matches_scipy(n, raw):
    edges = [(u % n, v % n, w) for u, v, w in raw if u % n != v % n]
    if not edges:
        return
    g = GraphModel(n, edges)
    dense = np.zeros((n, n))
    for u, v, w in edges:
        w_ms = w * 1000
        for x, y in ((u, v), (v, u)):
            if dense[x, y] == 0 or w_ms < dense[x, y]:
                dense[x, y] = w_ms
    ref = shortest_path(csr_matrix(dense), directed=False)
    for s in range(n):
        for t in range(n):
            if math.isinf(ref[s, t]):
                with pytest.raises(UnreachableError):
                    g.cost(s, t)
            else:
                assert g.cost(s, t) == int(ref[s, t])


def test_graph_file_and_errors(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# comment\n3 2\n0 1 5\n1 2 7\n")
    g = GraphModel.from_file(p)
    assert g.cost(0, 2) == 12_000
    p.write_text("3 3\n0 1 5\n")
    with pytest.raises(ValueError):
        GraphModel.from_file(p)
    with pytest.raises(ValueError):
        GraphModel(2, [(0, 5, 1)])
    with pytest.raises(ValueError):
        GraphModel(2, [(0, 1, 0)])
    with pytest.raises(ValueError):
        g.validate(7)


def test_bbox_contains_points():
    pts = [(104.0, 30.5), (104.2, 30.7), (104.1, 30.6)]
    lon0, lat0, lon1, lat1 = bbox_of(pts)
    assert all(lon0 < x < lon1 and lat0 < y < lat1 for x, y in pts)
    with pytest.raises(ValueError):
        bbox_of([])


@given(st.integers(1, 8), st.integers(0, 7), st.integers(0, 7), st.integers(0, 8))
def test_rings_tile_the_chebyshev_ball(n, cx, cy, radius):
    g = GridIndex((0.0, 0.0, 1.0, 1.0), n)
    cx, cy = cx % n, cy % n
    got = [c for r in range(radius + 1) for c in g.ring_cells(cx, cy, r)]
    want = {(x, y) for x in range(n) for y in range(n) if max(abs(x - cx), abs(y - cy)) <= radius}
    assert len(got) == len(set(got))
    assert set(got) == want


@given(st.lists(lonlat, min_size=1, max_size=40), lonlat, st.integers(1, 12), st.integers(0, 3))
def test_grid_nearest_matches_linear_scan(points, q, n, skip_mod):
    model = GeodesicModel(10.0)
    g = GridIndex(bbox_of(points + [q]), n)
    for i, p in enumerate(points):
        g.add(i, p)

    def accept(i):
        return skip_mod == 0 or i % (skip_mod + 1) != 0

    got = g.nearest(q, lambda i: model.cost(points[i], q), accept, speed_mps=10.0)
    cands = [(model.cost(points[i], q), i) for i in range(len(points)) if accept(i)]
    assert got == (min(cands)[1] if cands else None)


def test_grid_add_remove_and_clamp():
    g = GridIndex((0.0, 0.0, 1.0, 1.0), 4)
    g.add("x", (0.1, 0.1))
    g.add("x", (0.9, 0.9))
    assert len(g) == 1 and "x" in g
    assert g.cell_of((5.0, 5.0)) == 15
    g.remove("x")
    assert "x" not in g


def test_nearest_idle_worker_index_agrees_with_scan():
    rng = np.random.default_rng(4)
    model = GeodesicModel(10.0)
    for _ in range(50):
        workers = {i: Worker(i, (104.0 + rng.uniform(0, .1), 30.6 + rng.uniform(0, .1)), 3) for i in range(30)}
        for w in workers.values():
            w.idle = bool(rng.random() < 0.6)
        q = (104.0 + rng.uniform(0, .1), 30.6 + rng.uniform(0, .1))
        idx = GridIndex(bbox_of([w.location for w in workers.values()] + [q]), 10)
        for w in workers.values():
            if w.idle:
                idx.add(w.id, w.location)
        scan = nearest_idle_worker(None, q, workers, model)
        assert nearest_idle_worker(idx, q, workers, model) == scan
        idle = [(model.cost(w.location, q), w.id) for w in workers.values() if w.idle]
        assert scan == (min(idle)[1] if idle else None)
