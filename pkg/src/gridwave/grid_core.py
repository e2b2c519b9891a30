"""Square grid, defected grids, defects, regions and metric balls.

The infinite grid Q has a vertex at every integer point and a unit edge
between horizontal or vertical neighbours. A defected grid removes edges
from Q. Removal is decided lazily: a :class:`DefectedGrid` holds a finite
window, an explicit set of removed edges inside it, and optionally a
removal rule (see :mod:`gridwave.defect_zoo`) that decides for any edge.
All computations materialize the window into a :class:`GridLayout`.

Example::

    from gridwave.grid_core import DefectedGrid, EdgeId, Window, identify_defects

    g = DefectedGrid(Window(-3, 3, -3, 3), removed=frozenset({EdgeId.parse("H@(0,0)")}))
    [defect] = identify_defects(g)
    assert len(defect.boundary) == 6
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, Protocol, runtime_checkable

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from gridwave.errors import DisconnectedGridError, GridSpecError, WindowTooSmallError
from gridwave.unionfind import UnionFind

logger = logging.getLogger(__name__)

Vertex = tuple[int, int]


class Orientation(str, Enum):
    """Direction of a lattice edge."""

    H = "H"
    V = "V"


_EDGE_RE = re.compile(r"^\s*([HV])\s*@\s*\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)\s*$")


@dataclass(frozen=True, order=True)
class EdgeId:
    """Canonical name of a unit edge.

    ``H@(i,j)`` is the segment from ``(i,j)`` to ``(i+1,j)``; ``V@(i,j)`` is
    the segment from ``(i,j)`` to ``(i,j+1)``. The anchor ``(i,j)`` is the
    low endpoint.
    """

    orientation: Orientation
    i: int
    j: int

    @property
    def anchor(self) -> Vertex:
        return (self.i, self.j)

    @property
    def endpoints(self) -> tuple[Vertex, Vertex]:
        if self.orientation is Orientation.H:
            return (self.i, self.j), (self.i + 1, self.j)
        return (self.i, self.j), (self.i, self.j + 1)

    @property
    def midpoint(self) -> tuple[float, float]:
        if self.orientation is Orientation.H:
            return (self.i + 0.5, float(self.j))
        return (float(self.i), self.j + 0.5)

    def point_at(self, s: float) -> tuple[float, float]:
        """Coordinates of the point at arclength *s* from the anchor."""
        if self.orientation is Orientation.H:
            return (self.i + s, float(self.j))
        return (float(self.i), self.j + s)

    def other_end(self, v: Vertex) -> Vertex:
        low, high = self.endpoints
        if v == low:
            return high
        if v == high:
            return low
        raise ValueError(f"{v} is not an endpoint of {self}")

    def shifted(self, dx: int, dy: int) -> "EdgeId":
        return EdgeId(self.orientation, self.i + dx, self.j + dy)

    def to_list(self) -> list[Any]:
        return [self.orientation.value, self.i, self.j]

    @classmethod
    def from_list(cls, data: Iterable[Any]) -> "EdgeId":
        orient, i, j = list(data)
        if orient not in ("H", "V"):
            raise GridSpecError(f"Edge orientation must be 'H' or 'V', got {orient!r}")
        return cls(Orientation(orient), int(i), int(j))

    @classmethod
    def parse(cls, text: str) -> "EdgeId":
        """Parse the ``H@(i,j)`` notation."""
        match = _EDGE_RE.match(text)
        if match is None:
            raise GridSpecError(f"Cannot parse edge {text!r}; expected e.g. 'H@(0,0)'")
        return cls(Orientation(match.group(1)), int(match.group(2)), int(match.group(3)))

    def __str__(self) -> str:
        return f"{self.orientation.value}@({self.i},{self.j})"


def edges_at(v: Vertex) -> tuple[EdgeId, EdgeId, EdgeId, EdgeId]:
    """The four lattice edges incident to vertex *v* (left, right, down, up)."""
    x, y = v
    return (
        EdgeId(Orientation.H, x - 1, y),
        EdgeId(Orientation.H, x, y),
        EdgeId(Orientation.V, x, y - 1),
        EdgeId(Orientation.V, x, y),
    )


@dataclass(frozen=True, order=True)
class Cell:
    """The unit square with lower-left corner ``(i, j)``."""

    i: int
    j: int

    def edges(self) -> tuple[EdgeId, EdgeId, EdgeId, EdgeId]:
        return (
            EdgeId(Orientation.H, self.i, self.j),
            EdgeId(Orientation.H, self.i, self.j + 1),
            EdgeId(Orientation.V, self.i, self.j),
            EdgeId(Orientation.V, self.i + 1, self.j),
        )


def cell_pair(e: EdgeId) -> tuple[Cell, Cell]:
    """Return the two cells containing *e*, lower/left one first."""
    if e.orientation is Orientation.H:
        return Cell(e.i, e.j - 1), Cell(e.i, e.j)
    return Cell(e.i - 1, e.j), Cell(e.i, e.j)


_WINDOW_RE = re.compile(r"^(-?\d+):(-?\d+)x(-?\d+):(-?\d+)$")


@dataclass(frozen=True)
class Window:
    """Integer rectangle ``[xmin, xmax] x [ymin, ymax]`` of the lattice."""

    xmin: int
    xmax: int
    ymin: int
    ymax: int

    def __post_init__(self) -> None:
        if self.xmax <= self.xmin or self.ymax <= self.ymin:
            raise GridSpecError(
                f"Window must have xmin < xmax and ymin < ymax, got "
                f"[{self.xmin},{self.xmax}]x[{self.ymin},{self.ymax}]"
            )

    @classmethod
    def centered(cls, radius: int, center: Vertex = (0, 0)) -> "Window":
        cx, cy = center
        return cls(cx - radius, cx + radius, cy - radius, cy + radius)

    @classmethod
    def parse(cls, text: str) -> "Window":
        """Parse ``xmin:xmax x ymin:ymax`` (spaces optional), e.g. ``-19:19x-1:2``."""
        match = _WINDOW_RE.match(text.replace(" ", ""))
        if match is None:
            raise GridSpecError(
                f"Cannot parse window {text!r}; expected 'xmin:xmax x ymin:ymax'"
            )
        return cls(*(int(g) for g in match.groups()))

    @property
    def nx(self) -> int:
        return self.xmax - self.xmin

    @property
    def ny(self) -> int:
        return self.ymax - self.ymin

    @property
    def n_edges(self) -> int:
        return self.nx * (self.ny + 1) + (self.nx + 1) * self.ny

    def expand(self, k: int) -> "Window":
        return Window(self.xmin - k, self.xmax + k, self.ymin - k, self.ymax + k)

    def contains_vertex(self, v: Vertex) -> bool:
        return self.xmin <= v[0] <= self.xmax and self.ymin <= v[1] <= self.ymax

    def contains_edge(self, e: EdgeId) -> bool:
        low, high = e.endpoints
        return self.contains_vertex(low) and self.contains_vertex(high)

    def contains_window(self, other: "Window") -> bool:
        return (self.xmin <= other.xmin and other.xmax <= self.xmax
                and self.ymin <= other.ymin and other.ymax <= self.ymax)

    def on_border(self, v: Vertex) -> bool:
        return v[0] in (self.xmin, self.xmax) or v[1] in (self.ymin, self.ymax)

    def edge_on_border(self, e: EdgeId) -> bool:
        """True when *e* lies along the window border."""
        low, high = e.endpoints
        if e.orientation is Orientation.H:
            return low[1] in (self.ymin, self.ymax)
        return low[0] in (self.xmin, self.xmax)

    def edges(self) -> Iterator[EdgeId]:
        for i in range(self.xmin, self.xmax):
            for j in range(self.ymin, self.ymax + 1):
                yield EdgeId(Orientation.H, i, j)
        for i in range(self.xmin, self.xmax + 1):
            for j in range(self.ymin, self.ymax):
                yield EdgeId(Orientation.V, i, j)

    def edge_grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Anchor coordinate arrays ``(hi, hj, vi, vj)`` in mask layout.

        H masks have shape ``(nx, ny + 1)``, V masks ``(nx + 1, ny)``.
        """
        hi, hj = np.meshgrid(
            np.arange(self.xmin, self.xmax), np.arange(self.ymin, self.ymax + 1), indexing="ij"
        )
        vi, vj = np.meshgrid(
            np.arange(self.xmin, self.xmax + 1), np.arange(self.ymin, self.ymax), indexing="ij"
        )
        return hi, hj, vi, vj

    def to_dict(self) -> dict[str, int]:
        return {"xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin, "ymax": self.ymax}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Window":
        try:
            return cls(int(data["xmin"]), int(data["xmax"]), int(data["ymin"]), int(data["ymax"]))
        except KeyError as exc:
            raise GridSpecError(f"Window is missing key {exc}") from exc

    def __str__(self) -> str:
        return f"{self.xmin}:{self.xmax}x{self.ymin}:{self.ymax}"


@runtime_checkable
class RemovalRule(Protocol):
    """Decides which lattice edges are removed, for any window.

    Implementations must be deterministic and consistent under window
    enlargement: the mask of a sub-window equals the restriction of the
    mask of any window containing it.
    """

    @property
    def kind(self) -> str: ...

    @property
    def periods(self) -> tuple[tuple[int, int], ...]: ...

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]: ...

    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True)
class DefectedGrid:
    """A window of a defected grid.

    Attributes:
        window: The materialized rectangle.
        removed: Explicitly removed edges, all inside *window*.
        generator: Optional rule removing further edges anywhere.
        name: Free-form label used in reports.
        keep_largest: Keep only the largest connected piece of every window;
            pieces cut off by the window border are dropped.
        trimmed: Edges dropped by ``keep_largest`` for this window.
    """

    window: Window
    removed: frozenset[EdgeId] = frozenset()
    generator: RemovalRule | None = None
    name: str = "custom"
    keep_largest: bool = False
    trimmed: frozenset[EdgeId] = frozenset()

    def __post_init__(self) -> None:
        outside = [str(e) for e in sorted(self.removed) if not self.window.contains_edge(e)]
        if outside:
            raise GridSpecError(
                f"Removed edges outside window {self.window}: {', '.join(outside[:5])}"
            )

    def removal_masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        """Boolean removal masks ``(H, V)`` for any *window*."""
        if self.generator is not None:
            h_mask, v_mask = self.generator.masks(window)
            h_mask, v_mask = h_mask.copy(), v_mask.copy()
        else:
            h_mask = np.zeros((window.nx, window.ny + 1), dtype=bool)
            v_mask = np.zeros((window.nx + 1, window.ny), dtype=bool)
        for e in self.removed | self.trimmed:
            if not window.contains_edge(e):
                continue
            if e.orientation is Orientation.H:
                h_mask[e.i - window.xmin, e.j - window.ymin] = True
            else:
                v_mask[e.i - window.xmin, e.j - window.ymin] = True
        return h_mask, v_mask

    def is_removed(self, e: EdgeId) -> bool:
        if e in self.removed or e in self.trimmed:
            return True
        if self.generator is None:
            return False
        low, _ = e.endpoints
        cell = Window(low[0], low[0] + 1, low[1], low[1] + 1)
        h_mask, v_mask = self.generator.masks(cell)
        if e.orientation is Orientation.H:
            return bool(h_mask[0, 0])
        return bool(v_mask[0, 0])

    def with_window(self, window: Window) -> "DefectedGrid":
        """Same removal pattern seen through another window."""
        kept = frozenset(e for e in self.removed if window.contains_edge(e))
        out = DefectedGrid(window, kept, self.generator, self.name, self.keep_largest)
        return out.largest_piece() if self.keep_largest else out

    def largest_piece(self) -> "DefectedGrid":
        """This window with every edge outside its largest connected piece trimmed.

        Pieces are compared by surviving edge count; ties go to the piece
        holding the lowest-numbered vertex.
        """
        whole = DefectedGrid(self.window, self.removed, self.generator, self.name, self.keep_largest)
        layout = whole.layout
        if layout.n_components <= 1:
            return whole
        labels = layout.component[layout.edge_start]
        keep = int(np.argmax(np.bincount(labels, minlength=layout.n_components)))
        cut = frozenset(e for e, label in zip(layout.edges, labels.tolist()) if label != keep)
        logger.info(
            "%s on %s: kept the largest of %d pieces, trimmed %d edges",
            self.name, self.window, layout.n_components, len(cut),
        )
        return DefectedGrid(
            self.window, self.removed, self.generator, self.name, self.keep_largest, cut
        )

    def undefected(self) -> "DefectedGrid":
        """The grid Q seen through the same window."""
        return DefectedGrid(self.window, name="q")

    @cached_property
    def layout(self) -> "GridLayout":
        return GridLayout(self)

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "window": self.window.to_dict(),
            "removed": [e.to_list() for e in sorted(self.removed)],
        }
        if self.generator is not None:
            data["generator"] = self.generator.to_dict()
        if self.keep_largest:
            data["keep_largest"] = True
        return data


class GridLayout:
    """Array view of a materialized window.

    Holds the removal masks, ambient vertex degrees (edges just outside the
    window are consulted through the grid's rule), the surviving edge
    list, vertex numbering and the sparse adjacency of surviving vertices.
    """

    def __init__(self, grid: DefectedGrid) -> None:
        w = grid.window
        self.grid = grid
        self.window = w
        h_ext, v_ext = grid.removal_masks(w.expand(1))
        self.h_removed = h_ext[1:-1, 1:-1]
        self.v_removed = v_ext[1:-1, 1:-1]
        hs, vs = ~h_ext, ~v_ext
        nx, ny = w.nx, w.ny
        self.degree = (
            hs[0:nx + 1, 1:ny + 2].astype(np.int64)
            + hs[1:nx + 2, 1:ny + 2]
            + vs[1:nx + 2, 0:ny + 1]
            + vs[1:nx + 2, 1:ny + 2]
        )
        hw = np.pad(~self.h_removed, ((1, 1), (0, 0)))
        vw = np.pad(~self.v_removed, ((0, 0), (1, 1)))
        self.window_degree = (
            hw[0:nx + 1].astype(np.int64) + hw[1:nx + 2] + vw[:, 0:ny + 1] + vw[:, 1:ny + 2]
        )

        alive = self.window_degree > 0
        self.vertex_index = np.full((nx + 1, ny + 1), -1, dtype=np.int64)
        self.vertex_index[alive] = np.arange(int(alive.sum()))
        va, vb = np.nonzero(alive)
        self.vertex_xy = np.stack([va + w.xmin, vb + w.ymin], axis=1)
        self.n_vertices = len(self.vertex_xy)
        self.border = (
            (self.vertex_xy[:, 0] == w.xmin) | (self.vertex_xy[:, 0] == w.xmax)
            | (self.vertex_xy[:, 1] == w.ymin) | (self.vertex_xy[:, 1] == w.ymax)
        )

        ha, hb = np.nonzero(~self.h_removed)
        vaa, vbb = np.nonzero(~self.v_removed)
        self.edge_orient = np.concatenate(
            [np.zeros(len(ha), dtype=np.int8), np.ones(len(vaa), dtype=np.int8)]
        )
        self.edge_i = np.concatenate([ha, vaa]) + w.xmin
        self.edge_j = np.concatenate([hb, vbb]) + w.ymin
        self.edge_start = np.concatenate(
            [self.vertex_index[ha, hb], self.vertex_index[vaa, vbb]]
        )
        self.edge_end = np.concatenate(
            [self.vertex_index[ha + 1, hb], self.vertex_index[vaa, vbb + 1]]
        )
        self.n_edges = len(self.edge_orient)

        n = self.n_vertices
        rows = np.concatenate([self.edge_start, self.edge_end])
        cols = np.concatenate([self.edge_end, self.edge_start])
        self.adjacency = sparse.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(n, n)
        )
        if n:
            self.n_components, self.component = csgraph.connected_components(
                self.adjacency, directed=False
            )
        else:
            self.n_components, self.component = 0, np.zeros(0, dtype=np.int64)
        logger.debug(
            "materialized %s: %d vertices, %d edges, %d components",
            w, n, self.n_edges, self.n_components,
        )

    def require_connected(self) -> None:
        if self.n_components != 1:
            raise DisconnectedGridError(self.n_components)

    @cached_property
    def edges(self) -> list[EdgeId]:
        """Surviving edges in layout order (H edges first)."""
        return [
            EdgeId(Orientation.H if o == 0 else Orientation.V, int(i), int(j))
            for o, i, j in zip(self.edge_orient, self.edge_i, self.edge_j)
        ]

    @cached_property
    def edge_position(self) -> dict[EdgeId, int]:
        return {e: k for k, e in enumerate(self.edges)}

    def vertex_id(self, v: Vertex) -> int:
        """Index of surviving vertex *v*, or ``-1``."""
        if not self.window.contains_vertex(v):
            return -1
        return int(self.vertex_index[v[0] - self.window.xmin, v[1] - self.window.ymin])

    def vertex_at(self, idx: int) -> Vertex:
        x, y = self.vertex_xy[idx]
        return (int(x), int(y))

    def degree_of(self, v: Vertex) -> int:
        """Ambient degree of *v*, counting surviving edges just outside the window."""
        if not self.window.contains_vertex(v):
            raise WindowTooSmallError(f"Vertex {v} lies outside window {self.window}")
        return int(self.degree[v[0] - self.window.xmin, v[1] - self.window.ymin])

    def is_surviving(self, e: EdgeId) -> bool:
        """Whether in-window edge *e* survives."""
        w = self.window
        if not w.contains_edge(e):
            return False
        if e.orientation is Orientation.H:
            return not bool(self.h_removed[e.i - w.xmin, e.j - w.ymin])
        return not bool(self.v_removed[e.i - w.xmin, e.j - w.ymin])

    def is_removed(self, e: EdgeId) -> bool:
        return self.window.contains_edge(e) and not self.is_surviving(e)

    def removed_edges(self) -> list[EdgeId]:
        w = self.window
        ha, hb = np.nonzero(self.h_removed)
        va, vb = np.nonzero(self.v_removed)
        return (
            [EdgeId(Orientation.H, int(a) + w.xmin, int(b) + w.ymin) for a, b in zip(ha, hb)]
            + [EdgeId(Orientation.V, int(a) + w.xmin, int(b) + w.ymin) for a, b in zip(va, vb)]
        )

    def incident(self, v: Vertex) -> list[EdgeId]:
        """Surviving in-window edges at *v*."""
        return [e for e in edges_at(v) if self.is_surviving(e)]

    def distances_from(self, v: Vertex) -> np.ndarray:
        """Graph distance from *v* to every surviving vertex (``inf`` if unreachable)."""
        src = self.vertex_id(v)
        if src < 0:
            raise ValueError(f"Vertex {v} is not a surviving vertex of {self.window}")
        dist: np.ndarray = csgraph.shortest_path(
            self.adjacency, directed=False, unweighted=True, indices=src
        )
        return dist

    @cached_property
    def graph(self) -> nx.Graph:
        """networkx view: nodes are vertex tuples, edges carry their ``EdgeId``."""
        graph = nx.Graph()
        graph.add_nodes_from(self.vertex_at(k) for k in range(self.n_vertices))
        for e in self.edges:
            a, b = e.endpoints
            graph.add_edge(a, b, edge=e)
        return graph


# ---------------------------------------------------------------------------
# Defects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Defect:
    """One class of removed edges chained through shared cells.

    Attributes:
        edges: Removed edges of the defect inside the window.
        boundary: Surviving in-window edges of the cells touching the defect.
        truncated: The defect reaches the window border and may continue outside.
    """

    edges: frozenset[EdgeId]
    boundary: frozenset[EdgeId]
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.edges)

    def boundary_vertices(self) -> set[Vertex]:
        return {v for e in self.boundary for v in e.endpoints}

    def to_dict(self) -> dict[str, Any]:
        return {
            "edge_count": len(self.edges),
            "boundary_edge_count": len(self.boundary),
            "truncated": self.truncated,
        }


def identify_defects(g: DefectedGrid) -> list[Defect]:
    """Partition the removed edges of *g* into defects.

    Two removed edges belong to the same defect when a chain of cells
    links them, consecutive cells sharing a removed edge. Unioning all
    removed edges of every cell yields exactly these classes.

    Raises:
        DisconnectedGridError: If the surviving part of the window is disconnected.
    """
    layout = g.layout
    layout.require_connected()
    removed = layout.removed_edges()
    index = {e: k for k, e in enumerate(removed)}
    uf = UnionFind(len(removed))
    for k, e in enumerate(removed):
        for cell in cell_pair(e):
            for f in cell.edges():
                other = index.get(f)
                if other is not None:
                    uf.union(k, other)

    defects = []
    for members in uf.groups():
        edges = frozenset(removed[k] for k in members)
        boundary = frozenset(
            f
            for e in edges
            for cell in cell_pair(e)
            for f in cell.edges()
            if layout.is_surviving(f)
        )
        truncated = any(g.window.edge_on_border(e) for e in edges)
        defects.append(Defect(edges, boundary, truncated))
    logger.info("identified %d defects in %s", len(defects), g.window)
    return defects


def boundary_is_connected(defect: Defect) -> bool:
    """Whether the boundary edges of *defect* form a connected subgraph."""
    if not defect.boundary:
        return False
    graph = nx.Graph()
    for e in defect.boundary:
        graph.add_edge(*e.endpoints)
    return bool(nx.is_connected(graph))


# ---------------------------------------------------------------------------
# Regions, area and perimeter
# ---------------------------------------------------------------------------


class Coverage(str, Enum):
    """How much of an edge a region holds."""

    FULL = "full"
    HALF_LOW = "half-low"
    HALF_HIGH = "half-high"

    @property
    def length(self) -> float:
        return 1.0 if self is Coverage.FULL else 0.5

    def covers_near(self, e: EdgeId, v: Vertex) -> bool:
        """Whether the covered part of *e* touches its endpoint *v*."""
        if self is Coverage.FULL:
            return True
        low, high = e.endpoints
        return v == (low if self is Coverage.HALF_LOW else high)


@dataclass(frozen=True)
class Region:
    """A union of whole edges and half edges of a grid.

    ``HALF_LOW`` is the half adjacent to the anchor endpoint.
    """

    coverage: Mapping[EdgeId, Coverage] = field(default_factory=dict)

    @classmethod
    def from_edges(cls, edges: Iterable[EdgeId]) -> "Region":
        return cls({e: Coverage.FULL for e in edges})

    @property
    def edges(self) -> list[EdgeId]:
        return sorted(self.coverage)

    def __len__(self) -> int:
        return len(self.coverage)

    def vertices(self) -> set[Vertex]:
        """Lattice vertices lying in the closed region."""
        out: set[Vertex] = set()
        for e, cov in self.coverage.items():
            for v in e.endpoints:
                if cov.covers_near(e, v):
                    out.add(v)
        return out

    def union(self, other: "Region") -> "Region":
        """Disjoint union; overlapping edges are rejected."""
        shared = set(self.coverage) & set(other.coverage)
        for e in shared:
            a, b = self.coverage[e], other.coverage[e]
            if a is Coverage.FULL or b is Coverage.FULL or a is b:
                raise ValueError(f"Regions overlap on {e}")
        merged = dict(self.coverage)
        for e, cov in other.coverage.items():
            merged[e] = Coverage.FULL if e in shared else cov
        return Region(merged)

    def to_dict(self) -> dict[str, Any]:
        return {"coverage": [[*e.to_list(), cov.value] for e, cov in sorted(self.coverage.items())]}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Region":
        return cls({
            EdgeId.from_list(item[:3]): Coverage(item[3]) for item in data.get("coverage", [])
        })


@dataclass(frozen=True)
class PerimeterReport:
    """Perimeter of a region with its boundary points.

    Attributes:
        perimeter: ``sum of p(x)`` over boundary points.
        boundary_points: Number of boundary points.
        points: Map boundary point to ``p(x)``; midpoints appear as float pairs.
    """

    perimeter: int
    boundary_points: int
    points: dict[tuple[float, float], int]


def area(r: Region) -> float:
    """Length of *r*: whole edges count 1, half edges 1/2."""
    return float(sum(cov.length for cov in r.coverage.values()))


def perimeter(r: Region, g: DefectedGrid) -> PerimeterReport:
    """Perimeter of *r* in *g*.

    A vertex of the region is a boundary point when some incident
    surviving edge is not covered next to it; the midpoint of every half
    edge is a boundary point too. ``p(x)`` counts the surviving edges at
    ``x`` that are not wholly inside the region, including surviving
    edges just outside the window.
    """
    layout = g.layout
    for e in r.coverage:
        if not layout.is_surviving(e):
            raise ValueError(f"Region covers {e}, which is not a surviving edge of the window")

    full_at: dict[Vertex, int] = {}
    near_at: dict[Vertex, int] = {}
    for e, cov in r.coverage.items():
        for v in e.endpoints:
            if cov.covers_near(e, v):
                near_at[v] = near_at.get(v, 0) + 1
                if cov is Coverage.FULL:
                    full_at[v] = full_at.get(v, 0) + 1

    points: dict[tuple[float, float], int] = {}
    for v, near in near_at.items():
        deg = layout.degree_of(v)
        if deg - near > 0:
            points[(float(v[0]), float(v[1]))] = deg - full_at.get(v, 0)
    for e, cov in r.coverage.items():
        if cov is not Coverage.FULL:
            points[e.midpoint] = 1
    return PerimeterReport(sum(points.values()), len(points), points)


# ---------------------------------------------------------------------------
# Paths and balls
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPath:
    """A path of surviving edges, or the explicit absence of one."""

    vertices: tuple[Vertex, ...]
    length: float

    @property
    def found(self) -> bool:
        return math.isfinite(self.length)

    def edges(self) -> list[EdgeId]:
        out = []
        for a, b in zip(self.vertices, self.vertices[1:]):
            low = min(a, b)
            orient = Orientation.H if a[1] == b[1] else Orientation.V
            out.append(EdgeId(orient, *low))
        return out


def shortest_path(g: DefectedGrid, a: Vertex, b: Vertex) -> GridPath:
    """Shortest path from *a* to *b* through surviving edges of the window."""
    layout = g.layout
    for v in (a, b):
        if layout.vertex_id(v) < 0:
            raise ValueError(f"{v} is not a surviving vertex of window {g.window}")
    try:
        nodes = nx.shortest_path(layout.graph, a, b)
    except nx.NetworkXNoPath:
        return GridPath((), math.inf)
    return GridPath(tuple(nodes), float(len(nodes) - 1))


def metric_ball(g: DefectedGrid, center: Vertex, radius: float) -> Region:
    """Open metric ball of *radius* around vertex *center*.

    The radius must be a multiple of 1/2. Neighbouring vertices sit at
    distances differing by exactly one, so each edge is covered whole,
    by the half next to its nearer endpoint, or not at all.

    Raises:
        WindowTooSmallError: If the ball reaches the window border.
    """
    if radius < 0 or not float(2 * radius).is_integer():
        raise ValueError(f"radius must be a non-negative multiple of 1/2, got {radius}")
    layout = g.layout
    dist = layout.distances_from(center)
    inside = dist < radius
    if np.any(inside & layout.border):
        raise WindowTooSmallError(
            f"Ball of radius {radius} around {center} reaches the border of {g.window}; "
            "use a larger window"
        )
    coverage: dict[EdgeId, Coverage] = {}
    d_start = dist[layout.edge_start]
    d_end = dist[layout.edge_end]
    near = np.minimum(d_start, d_end)
    covered = np.clip(radius - near, 0.0, 1.0)
    for k in np.nonzero(covered > 0)[0]:
        e = layout.edges[k]
        if covered[k] >= 1.0:
            coverage[e] = Coverage.FULL
        else:
            coverage[e] = Coverage.HALF_LOW if d_start[k] <= d_end[k] else Coverage.HALF_HIGH
    return Region(coverage)


def ball_growth_ratio(g: DefectedGrid, center: Vertex) -> tuple[int, float]:
    """Area ratio ``|B_n(v,G)| / |B_n(v,Q)|`` at the largest radius fitting the window.

    ``|B_n(v,Q)| = 4 n^2`` for integer ``n``. Returns ``(n, ratio)``.
    """
    layout = g.layout
    dist = layout.distances_from(center)
    border_dist = dist[layout.border]
    reach = border_dist[np.isfinite(border_dist)]
    if reach.size == 0:
        raise WindowTooSmallError(f"No border vertex reachable from {center}")
    n = int(reach.min())
    if n < 1:
        raise WindowTooSmallError(f"{center} lies on the border of {g.window}")
    return n, area(metric_ball(g, center, n)) / (4 * n * n)
