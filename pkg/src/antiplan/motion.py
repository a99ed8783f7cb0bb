"""Move-action costs from a Lazy PRM over the 2D workspace.

Region footprints are obstacles, inflated by the robot radius (disc robot).
Edge collision checks are deferred until an edge lies on a candidate
shortest path; invalid edges are dropped and the query repeats.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .blockworld import Environment, Rect

UNKNOWN, VALID, INVALID = 0, 1, 2

Point = tuple[float, float]
SegmentCheck = Callable[[Point, Point], bool]


class NoPath(Exception):
    pass


class UnreachableLocation(Exception):
    pass


def segment_hits_rect(p: Point, q: Point, rect: Rect) -> bool:
    """Liang-Barsky clip of segment pq against a closed rectangle."""
    x0, y0 = p
    dx, dy = q[0] - x0, q[1] - y0
    t0, t1 = 0.0, 1.0
    for pk, qk in ((-dx, x0 - rect.xmin), (dx, rect.xmax - x0),
                   (-dy, y0 - rect.ymin), (dy, rect.ymax - y0)):
        if pk == 0.0:
            if qk < 0.0:
                return False
        else:
            t = qk / pk
            if pk < 0.0:
                if t > t1:
                    return False
                t0 = max(t0, t)
            else:
                if t < t0:
                    return False
                t1 = min(t1, t)
    return t0 <= t1


def segment_checker(obstacles: Iterable[Rect], inflation: float) -> SegmentCheck:
    """Return ``valid(p, q)``: True when pq misses every inflated obstacle."""
    rects = [r.inflate(inflation) for r in obstacles]

    def valid(p: Point, q: Point) -> bool:
        return not any(segment_hits_rect(p, q, r) for r in rects)

    return valid


def point_free(x: float, y: float, rects: Sequence[Rect]) -> bool:
    return not any(r.contains(x, y) for r in rects)


@dataclass
class Roadmap:
    """Undirected k-nearest-neighbour roadmap.

    The first ``len(labels)`` vertices are the named navigation locations.
    ``status`` caches lazy collision results per edge and persists across
    queries made with the same checker.
    """

    vertices: np.ndarray
    labels: list[str]
    adjacency: list[dict[int, float]]
    status: dict[tuple[int, int], int] = field(default_factory=dict)
    checks: int = 0

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted({(min(u, v), max(u, v)) for u, nb in enumerate(self.adjacency) for v in nb})

    @property
    def validated(self) -> set[tuple[int, int]]:
        return {e for e, st in self.status.items() if st == VALID}

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def reset(self):
        self.status.clear()
        self.checks = 0


def build_roadmap(env: Environment, n_samples: int = 500, k: int = 10,
                  rng: np.random.Generator | None = None, inflation: float | None = None,
                  obstacles: Sequence[Rect] | None = None) -> Roadmap:
    """Sample ``n_samples`` free vertices and join each to its ``k`` nearest."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    rng = rng if rng is not None else np.random.default_rng(env.seed)
    r = env.robot_radius if inflation is None else inflation
    obstacles = env.obstacles() if obstacles is None else list(obstacles)
    rects = [o.inflate(r) for o in obstacles]
    labels = env.locations
    pts = [env.location_point(loc) for loc in labels]
    samples = []
    lo_x, hi_x = r, env.width - r
    lo_y, hi_y = r, env.height - r
    while len(samples) < n_samples:
        batch = rng.uniform((lo_x, lo_y), (hi_x, hi_y), size=(2 * n_samples, 2))
        for x, y in batch:
            if point_free(x, y, rects):
                samples.append((float(x), float(y)))
                if len(samples) == n_samples:
                    break
    verts = np.array(pts + samples, dtype=float)
    tree = cKDTree(verts)
    kk = min(k + 1, len(verts))
    dist, nbr = tree.query(verts, k=kk)
    adjacency: list[dict[int, float]] = [dict() for _ in range(len(verts))]
    for u in range(len(verts)):
        for d, v in zip(np.atleast_1d(dist[u]), np.atleast_1d(nbr[u])):
            v = int(v)
            if v == u or v >= len(verts):
                continue
            length = math.hypot(*(verts[u] - verts[v]))
            adjacency[u][v] = length
            adjacency[v][u] = length
    return Roadmap(verts, labels, adjacency)


def _dijkstra(rm: Roadmap, src: int, dst: int, usable) -> tuple[list[int], float] | None:
    dist = {src: 0.0}
    prev: dict[int, int] = {}
    heap = [(0.0, src)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        if u == dst:
            path = [u]
            while path[-1] != src:
                path.append(prev[path[-1]])
            return path[::-1], d
        done.add(u)
        for v, w in rm.adjacency[u].items():
            if v in done or not usable(u, v):
                continue
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return None


def _key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass
class QueryResult:
    path: list[int]
    length: float
    # edges checked during this query, and edges on the candidate paths examined
    checked: int
    candidate_edges: int


def lazy_query(rm: Roadmap, a: int | str, b: int | str, collide: SegmentCheck) -> QueryResult:
    """Shortest collision-free roadmap path from ``a`` to ``b``.

    Only edges on candidate shortest paths are checked with ``collide``;
    results are cached on the roadmap.  Raises :class:`NoPath` when the
    endpoints are disconnected once invalid edges are removed.
    """
    a = rm.index(a) if isinstance(a, str) else a
    b = rm.index(b) if isinstance(b, str) else b
    if a == b:
        return QueryResult([a], 0.0, 0, 0)

    def usable(u, v):
        return rm.status.get(_key(u, v), UNKNOWN) != INVALID

    checked = candidate_edges = 0
    while True:
        found = _dijkstra(rm, a, b, usable)
        if found is None:
            raise NoPath(f"no collision-free path between vertices {a} and {b}")
        path, _ = found
        candidate_edges += len(path) - 1
        ok = True
        for u, v in zip(path[:-1], path[1:]):
            key = _key(u, v)
            st = rm.status.get(key, UNKNOWN)
            if st == UNKNOWN:
                checked += 1
                rm.checks += 1
                st = VALID if collide(tuple(rm.vertices[u]), tuple(rm.vertices[v])) else INVALID
                rm.status[key] = st
            if st == INVALID:
                ok = False
                break
        if ok:
            length = sum(rm.adjacency[u][v] for u, v in zip(path[:-1], path[1:]))
            return QueryResult(path, length, checked, candidate_edges)


def eager_query(rm: Roadmap, a: int | str, b: int | str, collide: SegmentCheck) -> QueryResult:
    """Reference PRM query: validate every edge first, then one Dijkstra."""
    a = rm.index(a) if isinstance(a, str) else a
    b = rm.index(b) if isinstance(b, str) else b
    valid = {}
    for u, v in rm.edges:
        valid[(u, v)] = collide(tuple(rm.vertices[u]), tuple(rm.vertices[v]))
    if a == b:
        return QueryResult([a], 0.0, len(valid), 0)
    found = _dijkstra(rm, a, b, lambda u, v: valid[_key(u, v)])
    if found is None:
        raise NoPath(f"no collision-free path between vertices {a} and {b}")
    path, length = found
    return QueryResult(path, length, len(valid), len(path) - 1)


class MoveCostTable:
    """Symmetric location-pair costs with ``cost(a, a) == 0``."""

    def __init__(self, locations: Sequence[str], matrix: np.ndarray):
        self.locations = list(locations)
        self.matrix = np.asarray(matrix, dtype=float)
        self._index = {loc: i for i, loc in enumerate(self.locations)}

    def __call__(self, a: str, b: str) -> float:
        try:
            return float(self.matrix[self._index[a], self._index[b]])
        except KeyError as exc:
            raise KeyError(f"missing move cost for {a!r} -> {b!r}") from exc

    def __contains__(self, pair) -> bool:
        a, b = pair
        return a in self._index and b in self._index

    def to_dict(self) -> dict:
        return {"locations": self.locations,
                "matrix": [[float(x) for x in row] for row in self.matrix]}

    @classmethod
    def from_dict(cls, d) -> "MoveCostTable":
        return cls(d["locations"], np.array(d["matrix"], dtype=float))


def compute_move_costs(env: Environment, scale: float = 25.0, n_samples: int = 500, k: int = 10,
                       seed: int | None = None, retries: int = 3,
                       obstacles: Sequence[Rect] | None = None,
                       inflation: float | None = None) -> MoveCostTable:
    """Cost ``scale * path length`` for every pair of navigation locations.

    The roadmap is rebuilt with twice the samples (up to ``retries`` times)
    when some location pair is disconnected.  ``obstacles=[]`` disables
    footprint collisions.
    """
    rng = np.random.default_rng(env.seed if seed is None else seed)
    obstacles = env.obstacles() if obstacles is None else list(obstacles)
    r = env.robot_radius if inflation is None else inflation
    collide = segment_checker(obstacles, r)
    n = n_samples
    for _ in range(retries + 1):
        rm = build_roadmap(env, n, k, rng, inflation=r, obstacles=obstacles)
        try:
            return MoveCostTable(rm.labels, metric_closure(scale * pairwise_lengths(rm, collide)))
        except NoPath:
            n *= 2
    raise UnreachableLocation(f"locations stay disconnected after {retries} roadmap rebuilds")


def pairwise_lengths(rm: Roadmap, collide: SegmentCheck) -> np.ndarray:
    m = len(rm.labels)
    out = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            out[i, j] = out[j, i] = lazy_query(rm, i, j, collide).length
    return out


def metric_closure(matrix: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths over a cost matrix (Floyd-Warshall).

    Roadmap query lengths are already shortest paths, so this only removes
    floating-point triangle violations; it guarantees that chaining two
    moves is never cheaper than the direct one.
    """
    d = np.array(matrix, dtype=float)
    for k in range(d.shape[0]):
        np.minimum(d, d[:, k:k + 1] + d[k:k + 1, :], out=d)
    return d
