"""Travel-cost models and the uniform grid index.

All costs are integer milliseconds. A location is either an integer node id
(graph mode) or a ``(lon, lat)`` tuple in degrees (geodesic mode).
"""
from __future__ import annotations

import heapq
import logging
import math
from collections import defaultdict
from typing import Callable, Iterable, Sequence

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_008.8

Location = "int | tuple[float, float]"


class UnreachableError(ValueError):
    """Raised when two graph locations are not connected."""


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    lon1, lat1 = math.radians(a[0]), math.radians(a[1])
    lon2, lat2 = math.radians(b[0]), math.radians(b[1])
    h = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


class TravelModel:
    mode: str

    def cost(self, a, b) -> int:
        raise NotImplementedError

    def validate(self, loc) -> None:
        raise NotImplementedError


class GeodesicModel(TravelModel):
    """Great-circle distance at a constant speed."""

    mode = "geodesic"

    def __init__(self, speed_mps: float = 10.0, bbox: tuple[float, float, float, float] | None = None,
                 cache_size: int = 2_000_000):
        if speed_mps <= 0:
            raise ValueError("speed_mps must be positive")
        self.speed_mps = float(speed_mps)
        self.bbox = bbox
        self._cache: dict = {}
        self._cache_size = cache_size

    def validate(self, loc) -> None:
        if not (isinstance(loc, tuple) and len(loc) == 2):
            raise TypeError(f"geodesic location must be (lon, lat), got {loc!r}")
        if self.bbox is not None:
            lon0, lat0, lon1, lat1 = self.bbox
            if not (lon0 <= loc[0] <= lon1 and lat0 <= loc[1] <= lat1):
                raise ValueError(f"location {loc!r} outside bounding box {self.bbox}")

    def cost(self, a, b) -> int:
        if a == b:
            return 0
        key = (a, b) if a <= b else (b, a)
        c = self._cache.get(key)
        if c is None:
            if len(self._cache) >= self._cache_size:
                self._cache.clear()
            c = round(haversine_m(a, b) / self.speed_mps * 1000.0)
            self._cache[key] = c
        return c


class GraphModel(TravelModel):
    """Undirected weighted graph; shortest paths by Dijkstra, cached per source."""

    mode = "graph"

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int, float]]):
        self.n_nodes = int(n_nodes)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_nodes)]
        for u, v, w in edges:
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"edge ({u}, {v}) references a missing node")
            if w <= 0:
                raise ValueError("edge weights must be positive")
            w_ms = round(w * 1000)
            self.adj[u].append((v, w_ms))
            self.adj[v].append((u, w_ms))
        self._dist: dict[int, list[float]] = {}

    @classmethod
    def from_file(cls, path) -> "GraphModel":
        """Read ``node_count edge_count`` followed by ``u v weight_seconds`` lines."""
        with open(path) as fh:
            rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = [(int(r[0]), int(r[1]), float(r[2])) for r in rows[1:1 + m]]
        if len(edges) != m:
            raise ValueError(f"expected {m} edges, found {len(edges)}")
        return cls(n, edges)

    def validate(self, loc) -> None:
        if isinstance(loc, bool) or not isinstance(loc, int) or not 0 <= loc < self.n_nodes:
            raise ValueError(f"unknown graph node {loc!r}")

    def _dijkstra(self, src: int) -> list[float]:
        dist = [math.inf] * self.n_nodes
        dist[src] = 0
        heap = [(0, src)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, w in self.adj[u]:
                nd = d + w
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        return dist

    def cost(self, a, b) -> int:
        if a == b:
            return 0
        row = self._dist.get(a)
        if row is None:
            row = self._dist[a] = self._dijkstra(a)
        d = row[b]
        if d == math.inf:
            raise UnreachableError(f"node {b} unreachable from {a}")
        return int(d)


def travel_cost(model: TravelModel, a, b) -> int:
    return model.cost(a, b)


def route_cost(model: TravelModel, stops: Sequence) -> int:
    if len(stops) < 1:
        raise ValueError("a route needs at least one location")
    return sum(model.cost(stops[k], stops[k + 1]) for k in range(len(stops) - 1))


def bbox_of(points: Iterable[tuple[float, float]], margin: float = 0.01):
    """Bounding box of ``points`` widened by ``margin`` of its extent on each side."""
    pts = list(points)
    if not pts:
        raise ValueError("cannot build a bounding box from no points")
    lons = [p[0] for p in pts]
    lats = [p[1] for p in pts]
    lon0, lon1, lat0, lat1 = min(lons), max(lons), min(lats), max(lats)
    dx = max(lon1 - lon0, 1e-6) * margin
    dy = max(lat1 - lat0, 1e-6) * margin
    return (lon0 - dx, lat0 - dy, lon1 + dx, lat1 + dy)


class GridIndex:
    """``n x n`` uniform grid over a lon/lat bounding box with per-cell buckets."""

    def __init__(self, bbox: tuple[float, float, float, float], n: int = 10):
        if n < 1:
            raise ValueError("grid needs at least one cell per side")
        self.bbox = bbox
        self.n = n
        lon0, lat0, lon1, lat1 = bbox
        self.step_lon = (lon1 - lon0) / n
        self.step_lat = (lat1 - lat0) / n
        self.buckets: defaultdict[int, dict] = defaultdict(dict)
        self._where: dict = {}

    def cell_xy(self, loc) -> tuple[int, int]:
        lon0, lat0, _, _ = self.bbox
        x = math.floor((loc[0] - lon0) / self.step_lon)
        y = math.floor((loc[1] - lat0) / self.step_lat)
        cx, cy = min(max(x, 0), self.n - 1), min(max(y, 0), self.n - 1)
        if (cx, cy) != (x, y):
            logger.debug("location %r outside grid, clamped to cell (%d, %d)", loc, cx, cy)
        return cx, cy

    def cell_of(self, loc) -> int:
        x, y = self.cell_xy(loc)
        return y * self.n + x

    @property
    def n_cells(self) -> int:
        return self.n * self.n

    def add(self, key, loc) -> None:
        if key in self._where:
            self.remove(key)
        c = self.cell_of(loc)
        self.buckets[c][key] = loc
        self._where[key] = c

    def remove(self, key) -> None:
        c = self._where.pop(key)
        del self.buckets[c][key]

    def __contains__(self, key) -> bool:
        return key in self._where

    def __len__(self) -> int:
        return len(self._where)

    def ring_cells(self, cx: int, cy: int, r: int):
        """Cells at Chebyshev distance exactly ``r`` from ``(cx, cy)``."""
        if r == 0:
            yield cx, cy
            return
        for x in range(cx - r, cx + r + 1):
            for y in (cy - r, cy + r):
                if 0 <= x < self.n and 0 <= y < self.n:
                    yield x, y
        for y in range(cy - r + 1, cy + r):
            for x in (cx - r, cx + r):
                if 0 <= x < self.n and 0 <= y < self.n:
                    yield x, y

    def within_ring(self, loc, radius: int):
        """Keys of entities whose cell is within ``radius`` cells of ``loc``'s cell."""
        cx, cy = self.cell_xy(loc)
        for r in range(radius + 1):
            for x, y in self.ring_cells(cx, cy, r):
                yield from self.buckets.get(y * self.n + x, {})

    def _cell_lower_bound_m(self, loc, x: int, y: int) -> float:
        lon0, lat0, _, _ = self.bbox
        lo_lon, lo_lat = lon0 + x * self.step_lon, lat0 + y * self.step_lat
        # clamping is exact for the latitude edges and slightly optimistic for
        # meridian edges, hence the safety factor
        p = (min(max(loc[0], lo_lon), lo_lon + self.step_lon),
             min(max(loc[1], lo_lat), lo_lat + self.step_lat))
        return 0.99 * haversine_m(loc, p)

    def nearest(self, loc, cost: Callable[[object], float], accept: Callable[[object], bool] | None = None,
                speed_mps: float | None = None):
        """Key minimising ``cost(key)``; ties to the smallest key.

        Rings are searched outward and the search stops once no unvisited cell
        can hold anything cheaper. ``speed_mps`` converts the metre lower bound
        into the millisecond cost scale; without it every ring is searched.
        """
        cx, cy = self.cell_xy(loc)
        best_key, best_cost = None, math.inf
        for r in range(self.n):
            cells = list(self.ring_cells(cx, cy, r))
            if not cells:
                break
            if speed_mps is not None and best_key is not None:
                lb = min(self._cell_lower_bound_m(loc, x, y) for x, y in cells) / speed_mps * 1000.0
                if lb > best_cost:
                    break
            for x, y in cells:
                for key in self.buckets.get(y * self.n + x, {}):
                    if accept is not None and not accept(key):
                        continue
                    c = cost(key)
                    if c < best_cost or (c == best_cost and key < best_key):
                        best_key, best_cost = key, c
        return best_key


def nearest_idle_worker(index: GridIndex | None, loc, workers, model: TravelModel,
                        accept: Callable[[object], bool] | None = None):
    """Idle worker closest to ``loc`` (lowest id on ties), or ``None``.

    ``workers`` maps id to an object with ``location`` and ``idle``. With a
    grid index only indexed ids are considered, so the index must hold exactly
    the idle workers; without one the scan is linear.
    """
    def ok(wid):
        w = workers[wid]
        return w.idle and (accept is None or accept(wid))

    def cost(wid):
        return model.cost(workers[wid].location, loc)

    if index is not None and model.mode == "geodesic":
        return index.nearest(loc, cost, ok, speed_mps=model.speed_mps)
    best, best_c = None, math.inf
    for wid in sorted(workers):
        if not ok(wid):
            continue
        c = cost(wid)
        if c < best_c:
            best, best_c = wid, c
    return best
