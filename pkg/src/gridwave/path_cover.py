"""Path families from defect boundaries to the window border.

For an unbounded defect, every boundary vertex of degree at most three
needs a simple infinite path, and paths of different origins should
overlap as little as possible. On a finite window a path "to infinity"
is a path to the window border. The router here gives an upper bound on
the best achievable overlap; :func:`staircase_counting_bound` gives the
matching lower bound on the staircase grid.

Example::

    from gridwave.path_cover import boundary_origins, route_paths

    [defect] = identify_defects(grid)
    family = route_paths(grid, boundary_origins(grid, defect), seed=3)
    print(family.max_congestion)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from gridwave.config import RouterConfig
from gridwave.defect_zoo import GeneratorSpec, make_grid
from gridwave.errors import GridSpecError, UnreachableOriginError, WindowTooSmallError
from gridwave.grid_core import (
    Defect,
    DefectedGrid,
    EdgeId,
    GridPath,
    Orientation,
    Vertex,
    Window,
    identify_defects,
)
from gridwave.parallel import ordered_map

logger = logging.getLogger(__name__)

STRATEGIES = ("router", "vertical")


def boundary_origins(g: DefectedGrid, d: Defect) -> list[Vertex]:
    """Vertices on the boundary of *d* with ambient degree at most 3, sorted."""
    layout = g.layout
    return sorted(v for v in d.boundary_vertices() if layout.degree_of(v) <= 3)


@dataclass(frozen=True)
class PathFamily:
    """One path per origin, each ending on the window border.

    Attributes:
        paths: Origin to vertex sequence, origin first.
        congestion: Origin to the number of other paths meeting its path.
        history: Best maximum congestion after the initial routing and
            after each rip-up round; non-increasing.
        strategy: ``"router"`` or ``"vertical"``.
        seed: Seed of the routing order.
        edge_only: Whether only shared edges count as meeting.
    """

    paths: dict[Vertex, tuple[Vertex, ...]]
    congestion: dict[Vertex, int]
    history: tuple[int, ...] = ()
    strategy: str = "router"
    seed: int = 0
    edge_only: bool = False

    @property
    def max_congestion(self) -> int:
        return max(self.congestion.values(), default=0)

    def edges_of(self, origin: Vertex) -> list[EdgeId]:
        return GridPath(self.paths[origin], float(len(self.paths[origin]) - 1)).edges()

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "edge_only": self.edge_only,
            "max_congestion": self.max_congestion,
            "history": list(self.history),
            # counts cover the window only; unbounded overlaps beyond it are invisible
            "truncated": True,
            "paths": [
                {
                    "origin": list(origin),
                    "edges": [e.to_list() for e in self.edges_of(origin)],
                    "congestion": self.congestion[origin],
                }
                for origin in sorted(self.paths)
            ],
        }


def congestion_of(
    g: DefectedGrid, paths: dict[Vertex, tuple[Vertex, ...]], edge_only: bool = False
) -> dict[Vertex, int]:
    """For each origin, how many other paths share a vertex (or an edge) with its path."""
    if not paths:
        return {}
    layout = g.layout
    origins = sorted(paths)
    rows: list[int] = []
    cols: list[int] = []
    for r, origin in enumerate(origins):
        path = paths[origin]
        if edge_only:
            items = [layout.edge_position[e] for e in GridPath(path, 0.0).edges()]
        else:
            items = [layout.vertex_id(v) for v in path]
        rows.extend([r] * len(items))
        cols.extend(items)
    width = layout.n_edges if edge_only else layout.n_vertices
    incidence = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(len(origins), width)
    )
    incidence.data[:] = 1.0
    overlap = (incidence @ incidence.T).tocsr()
    overlap = (overlap - sparse.diags(overlap.diagonal())).tocsr()
    overlap.eliminate_zeros()
    counts = np.diff(overlap.indptr)
    return {origin: int(counts[r]) for r, origin in enumerate(origins)}


class _Router:
    """Congestion-penalized shortest paths to the nearest border vertex."""

    def __init__(self, g: DefectedGrid, cfg: RouterConfig) -> None:
        self.g = g
        self.cfg = cfg
        layout = g.layout
        self.layout = layout
        self.rows = np.concatenate([layout.edge_start, layout.edge_end])
        self.cols = np.concatenate([layout.edge_end, layout.edge_start])
        self.edge_ids = np.concatenate([np.arange(layout.n_edges)] * 2)
        self.vertex_use = np.zeros(layout.n_vertices)
        self.edge_use = np.zeros(layout.n_edges)
        self.border_ids = np.nonzero(layout.border)[0]

    def _vertex_ids(self, path: Sequence[Vertex]) -> list[int]:
        return [self.layout.vertex_id(v) for v in path]

    def _edge_ids(self, path: Sequence[Vertex]) -> list[int]:
        return [self.layout.edge_position[e] for e in GridPath(tuple(path), 0.0).edges()]

    def occupy(self, path: Sequence[Vertex], sign: float) -> None:
        np.add.at(self.vertex_use, self._vertex_ids(path), sign)
        np.add.at(self.edge_use, self._edge_ids(path), sign)

    def route(self, origin: Vertex) -> tuple[Vertex, ...]:
        src = self.layout.vertex_id(origin)
        if src < 0:
            raise UnreachableOriginError(origin)
        if self.layout.border[src]:
            return (origin,)
        if self.cfg.edge_only:
            weights = 1.0 + self.cfg.penalty * self.edge_use[self.edge_ids]
        else:
            weights = 1.0 + self.cfg.penalty * self.vertex_use[self.cols]
        n = self.layout.n_vertices
        graph = sparse.csr_matrix((weights, (self.rows, self.cols)), shape=(n, n))
        dist, pred = csgraph.dijkstra(graph, directed=True, indices=src, return_predecessors=True)
        reach = dist[self.border_ids]
        if not np.isfinite(reach).any():
            raise UnreachableOriginError(origin)
        target = int(self.border_ids[int(np.argmin(reach))])
        chain = [target]
        while chain[-1] != src:
            chain.append(int(pred[chain[-1]]))
        return tuple(self.layout.vertex_at(k) for k in reversed(chain))


def _vertical_ray(g: DefectedGrid, origin: Vertex, step: int) -> tuple[Vertex, ...] | None:
    layout = g.layout
    x, y = origin
    limit = g.window.ymax if step > 0 else g.window.ymin
    path = [origin]
    while y != limit:
        low = y if step > 0 else y - 1
        if not layout.is_surviving(EdgeId(Orientation.V, x, low)):
            return None
        y += step
        path.append((x, y))
    return tuple(path)


def route_paths(
    g: DefectedGrid,
    origins: Iterable[Vertex],
    strategy: str = "router",
    seed: int = 0,
    cfg: RouterConfig | None = None,
) -> PathFamily:
    """Build one simple path per origin to the window border.

    ``"router"`` routes sequentially in a seeded order, then rips up and
    reroutes every path ``cfg.rounds`` times, keeping the best family.
    ``"vertical"`` sends the top origin of each column straight up and the
    bottom one straight down, falling back to the router for the rest.

    Raises:
        UnreachableOriginError: If an origin cannot reach the border.
        GridSpecError: For an unknown strategy.
    """
    cfg = cfg or RouterConfig()
    if strategy not in STRATEGIES:
        raise GridSpecError.unknown("routing strategy", strategy, STRATEGIES)
    order = sorted(set(origins))
    if not order:
        return PathFamily({}, {}, (0,), strategy, seed, cfg.edge_only)
    rng = np.random.default_rng(seed)
    router = _Router(g, cfg)
    paths: dict[Vertex, tuple[Vertex, ...]] = {}

    pending = list(order)
    if strategy == "vertical":
        by_column: dict[int, list[Vertex]] = {}
        for v in order:
            by_column.setdefault(v[0], []).append(v)
        pending = []
        for column in by_column.values():
            column.sort(key=lambda v: v[1])
            top, bottom = column[-1], column[0]
            for v in column:
                ray = None
                if v == top:
                    ray = _vertical_ray(g, v, +1)
                if ray is None and v == bottom:
                    ray = _vertical_ray(g, v, -1)
                if ray is None:
                    pending.append(v)
                else:
                    paths[v] = ray
                    router.occupy(ray, +1.0)

    for idx in rng.permutation(len(pending)):
        v = pending[int(idx)]
        paths[v] = router.route(v)
        router.occupy(paths[v], +1.0)

    congestion = congestion_of(g, paths, cfg.edge_only)
    best_paths, best_congestion = dict(paths), congestion
    history = [max(congestion.values(), default=0)]
    reroutable = pending if strategy == "vertical" else order
    for round_no in range(cfg.rounds):
        for idx in rng.permutation(len(reroutable)):
            v = reroutable[int(idx)]
            router.occupy(paths[v], -1.0)
            paths[v] = router.route(v)
            router.occupy(paths[v], +1.0)
        congestion = congestion_of(g, paths, cfg.edge_only)
        current = max(congestion.values(), default=0)
        if current < history[-1]:
            best_paths, best_congestion = dict(paths), congestion
        history.append(min(history[-1], current))
        logger.debug("rip-up round %d: congestion %d (best %d)", round_no + 1, current, history[-1])

    logger.info(
        "routed %d origins with %s strategy: max congestion %d",
        len(order), strategy, history[-1],
    )
    return PathFamily(best_paths, best_congestion, tuple(history), strategy, seed, cfg.edge_only)


# ---------------------------------------------------------------------------
# Staircase counting bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StaircaseBound:
    """Vertical-edge counting under bump ``i`` of the staircase grid.

    Attributes:
        i: Bump index.
        origins: Boundary vertices of the bump with ``y >= 1``.
        required: Vertical edges the paths of those origins must traverse.
        available: Distinct vertical edges under the bump.
        repetitions: ``required - available``, a lower bound on reuse.
        mean: ``repetitions / len(origins)``.
    """

    i: int
    origins: tuple[Vertex, ...]
    required: int
    available: int
    repetitions: int
    mean: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "i": self.i,
            "n_origins": len(self.origins),
            "required": self.required,
            "available": self.available,
            "repetitions": self.repetitions,
            "mean": self.mean,
        }


def staircase_counting_bound(i: int, g: DefectedGrid) -> StaircaseBound:
    """Measure the counting argument for bump *i* on the materialized graph.

    Raises:
        WindowTooSmallError: If bump *i* does not fit inside the window.
    """
    if i < 1:
        raise ValueError(f"bump index must be >= 1, got {i}")
    left, right, height = (i + 1) ** 2, (i + 1) * (i + 2), i + 1
    w = g.window
    if not (w.xmin <= left and right <= w.xmax and w.ymin <= 0 and height < w.ymax):
        raise WindowTooSmallError(f"Bump {i} spans x in [{left},{right}]; window is {w}")
    layout = g.layout
    origins = tuple(
        (x, y)
        for x in range(left, right + 1)
        for y in range(1, height + 1)
        if layout.vertex_id((x, y)) >= 0 and layout.degree_of((x, y)) < 4
    )
    required = sum(y for _, y in origins)
    available = sum(
        layout.is_surviving(EdgeId(Orientation.V, x, y))
        for x in range(left, right + 1)
        for y in range(0, height)
    )
    repetitions = required - available
    mean = repetitions / len(origins) if origins else 0.0
    return StaircaseBound(i, origins, required, available, repetitions, mean)


# ---------------------------------------------------------------------------
# Unbounded defect census
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DefectCensus:
    """Classification of the defects of a window.

    Attributes:
        n_unbounded_truncated: Truncated defects still growing in both
            enlarged windows.
        n_bounded: Defects of finite size, including truncated ones that
            stopped growing.
        max_bounded_size: Largest finite defect size.
        candidate_sizes: Sizes of each unbounded candidate in the three windows.
        windows: The three nested windows.
    """

    n_unbounded_truncated: int
    n_bounded: int
    max_bounded_size: int
    candidate_sizes: tuple[tuple[int, int, int], ...]
    windows: tuple[Window, Window, Window]
    note: str = field(
        default="paths sharing infinitely many edges cannot be told apart on a window"
    )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_unbounded_truncated": self.n_unbounded_truncated,
            "n_bounded": self.n_bounded,
            "max_bounded_size": self.max_bounded_size,
            "candidate_sizes": [list(s) for s in self.candidate_sizes],
            "windows": [str(w) for w in self.windows],
            "note": self.note,
        }


def _defect_lookup(defects: list[Defect]) -> dict[EdgeId, int]:
    return {e: k for k, d in enumerate(defects) for e in d.edges}


def unbounded_defect_census(g: DefectedGrid, growth: int = 6) -> DefectCensus:
    """Classify the defects of *g* by re-identifying them in two enlarged windows.

    A truncated defect is an unbounded candidate when the defect holding
    its edges is strictly larger in each enlarged window. Pieces of one
    defect cut apart by the window are merged through the largest window.
    """
    windows = (g.window, g.window.expand(growth), g.window.expand(2 * growth))
    levels = [identify_defects(g.with_window(w)) for w in windows]
    lookups = [_defect_lookup(defects) for defects in levels]

    candidates: dict[int, tuple[int, int, int]] = {}
    bounded_sizes: list[int] = []
    finished: set[int] = set()
    for d in levels[0]:
        if not d.truncated:
            bounded_sizes.append(d.size)
            continue
        probe = min(d.edges)
        mid = levels[1][lookups[1][probe]]
        far_idx = lookups[2][probe]
        far = levels[2][far_idx]
        sizes = (d.size, mid.size, far.size)
        if far.truncated and sizes[0] < sizes[1] < sizes[2]:
            candidates.setdefault(far_idx, sizes)
        elif far_idx not in finished:
            finished.add(far_idx)
            bounded_sizes.append(far.size)
    census = DefectCensus(
        n_unbounded_truncated=len(candidates),
        n_bounded=len(bounded_sizes),
        max_bounded_size=max(bounded_sizes, default=0),
        candidate_sizes=tuple(candidates[k] for k in sorted(candidates)),
        windows=windows,
    )
    logger.info(
        "census of %s: %d unbounded candidates, %d bounded (max size %d)",
        g.window, census.n_unbounded_truncated, census.n_bounded, census.max_bounded_size,
    )
    return census


def congestion_series(
    spec: GeneratorSpec,
    windows: Sequence[Window],
    seed: int = 0,
    cfg: RouterConfig | None = None,
    *,
    jobs: int = 1,
) -> list[dict[str, Any]]:
    """Router congestion for the truncated defects of *spec* over growing windows."""

    def row(window: Window) -> dict[str, Any]:
        grid = make_grid(spec, window)
        origins = sorted({
            v for d in identify_defects(grid) if d.truncated for v in boundary_origins(grid, d)
        })
        family = route_paths(grid, origins, "router", seed, cfg)
        return {
            "window": str(window),
            "n_origins": len(origins),
            "congestion": family.max_congestion,
        }

    return ordered_map(row, windows, jobs)
