"""Piecewise-linear fields on the surviving edges of a window.

Every surviving edge is split into ``m`` equal intervals. Vertex nodes are
shared by the edges meeting there (continuity); the ``m - 1`` interior
nodes belong to one edge. Vertices on the window border are Dirichlet
nodes where fields vanish.

Example::

    from gridwave.fields import EdgeMesh, Field

    mesh = EdgeMesh(grid.layout, m=16)
    u = Field.from_function(mesh, lambda x, y: np.exp(-abs(x) - abs(y)))
    print(u.mass(), u.grad_sq())
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable

import numpy as np
from scipy import sparse

from gridwave.errors import FieldError
from gridwave.grid_core import EdgeId, GridLayout


QUADRATURES = ("trapezoid", "simpson")


class EdgeMesh:
    """Node numbering, lumped mass and stiffness for one layout.

    Args:
        layout: Materialized window.
        m: Intervals per unit edge; must be even so midpoints are nodes.
        quadrature: Nodal weights for ``||u||^2`` and ``||u||_p^p``:
            composite ``"trapezoid"`` or composite ``"simpson"`` per edge.
    """

    def __init__(self, layout: GridLayout, m: int, quadrature: str = "trapezoid") -> None:
        if m < 2 or m % 2:
            raise ValueError(f"m must be even and >= 2, got {m}")
        if quadrature not in QUADRATURES:
            raise ValueError(
                f"Unknown quadrature '{quadrature}'; known: {', '.join(QUADRATURES)}"
            )
        self.layout = layout
        self.m = m
        self.h = 1.0 / m
        self.quadrature = quadrature
        n_v, n_e = layout.n_vertices, layout.n_edges
        self.n_nodes = n_v + n_e * (m - 1)

        table = np.empty((n_e, m + 1), dtype=np.int64)
        table[:, 0] = layout.edge_start
        table[:, m] = layout.edge_end
        if m > 1:
            table[:, 1:m] = n_v + np.arange(n_e * (m - 1)).reshape(n_e, m - 1)
        self.edge_nodes = table
        self.seg_a = table[:, :-1].ravel()
        self.seg_b = table[:, 1:].ravel()

        s = np.arange(m + 1) * self.h
        horizontal = (layout.edge_orient == 0)[:, None]
        ex = layout.edge_i[:, None] + np.where(horizontal, s[None, :], 0.0)
        ey = layout.edge_j[:, None] + np.where(horizontal, 0.0, s[None, :])
        self.x = np.empty(self.n_nodes)
        self.y = np.empty(self.n_nodes)
        self.x[table] = ex
        self.y[table] = ey

        self.is_vertex = np.zeros(self.n_nodes, dtype=bool)
        self.is_vertex[:n_v] = True
        self.dirichlet = np.zeros(self.n_nodes, dtype=bool)
        self.dirichlet[:n_v] = layout.border
        self.free = ~self.dirichlet

        w = layout.window
        wdeg = layout.window_degree[layout.vertex_xy[:, 0] - w.xmin, layout.vertex_xy[:, 1] - w.ymin]
        weights = self.edge_weights()
        self.mass_diag = np.empty(self.n_nodes)
        self.mass_diag[:n_v] = weights[0] * wdeg
        self.mass_diag[n_v:] = np.tile(weights[1:m], n_e)

    def edge_weights(self, quadrature: str | None = None) -> np.ndarray:
        """Weights of the ``m + 1`` samples of one edge; they sum to 1."""
        scheme = quadrature or self.quadrature
        h = self.h
        if scheme == "trapezoid":
            out = np.full(self.m + 1, h)
            out[[0, -1]] = 0.5 * h
        elif scheme == "simpson":
            out = np.where(np.arange(self.m + 1) % 2 == 1, 4.0, 2.0) * (h / 3.0)
            out[[0, -1]] = h / 3.0
        else:
            raise ValueError(f"Unknown quadrature '{scheme}'; known: {', '.join(QUADRATURES)}")
        return out

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        """Sparse ``K`` with ``u @ K @ u = integral of |u'|^2``."""
        a, b = self.seg_a, self.seg_b
        inv_h = 1.0 / self.h
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([
            np.full(len(a), inv_h), np.full(len(a), inv_h),
            np.full(len(a), -inv_h), np.full(len(a), -inv_h),
        ])
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_nodes, self.n_nodes))

    @cached_property
    def mass(self) -> sparse.csr_matrix:
        """Lumped mass as a sparse diagonal."""
        return sparse.diags(self.mass_diag).tocsr()

    def edge_index(self, e: EdgeId) -> int:
        try:
            return self.layout.edge_position[e]
        except KeyError:
            raise FieldError(f"{e} is not a surviving edge of {self.layout.window}") from None

    def node_at(self, e: EdgeId, k: int) -> int:
        """Node number of the ``k``-th sample (``0 <= k <= m``) on edge *e*."""
        return int(self.edge_nodes[self.edge_index(e), k])


@dataclass
class Field:
    """Nodal values of a continuous piecewise-linear function."""

    mesh: EdgeMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise FieldError(
                f"Field needs {self.mesh.n_nodes} nodal values, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise FieldError("Field values must be finite")

    @classmethod
    def zeros(cls, mesh: EdgeMesh) -> "Field":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_function(cls, mesh: EdgeMesh, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "Field":
        """Sample *fn* at every node; *fn* receives coordinate arrays."""
        values = np.asarray(fn(mesh.x, mesh.y), dtype=float)
        if values.shape == ():
            values = np.full(mesh.n_nodes, float(values))
        return cls(mesh, values)

    def edge_samples(self) -> np.ndarray:
        """Values on every edge, shape ``(n_edges, m + 1)``, anchor first."""
        return self.values[self.mesh.edge_nodes]

    def _segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.values[self.mesh.seg_a], self.values[self.mesh.seg_b]

    def mass(self, quadrature: str | None = None) -> float:
        """``||u||_2^2``.

        By default the mesh's own scheme is used. ``"trapezoid"`` and
        ``"simpson"`` pick a composite rule explicitly; ``"linear"`` is
        exact for the piecewise-linear interpolant.
        """
        if quadrature is None or quadrature == self.mesh.quadrature:
            return float(self.mesh.mass_diag @ self.values**2)
        if quadrature == "linear":
            a, b = self._segments()
            return float(self.mesh.h / 3.0 * np.sum(a * a + a * b + b * b))
        return float(np.sum(self.edge_samples() ** 2 @ self.mesh.edge_weights(quadrature)))

    def l2(self, quadrature: str | None = None) -> float:
        return float(np.sqrt(self.mass(quadrature)))

    def lp_power(self, p: float) -> float:
        """``||u||_p^p`` with the mesh's quadrature."""
        return float(self.mesh.mass_diag @ np.abs(self.values) ** p)

    def grad_sq(self) -> float:
        """``||u'||_2^2``."""
        a, b = self._segments()
        return float(np.sum((b - a) ** 2) / self.mesh.h)

    def grad_l1(self) -> float:
        """``||u'||_1``."""
        a, b = self._segments()
        return float(np.sum(np.abs(b - a)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def border_sup(self) -> float:
        """Largest value on Dirichlet nodes."""
        border = self.values[self.mesh.dirichlet]
        return float(np.max(np.abs(border))) if border.size else 0.0

    def energy(self, p: float) -> float:
        """``1/2 ||u'||^2 - 1/p ||u||_p^p``."""
        return 0.5 * self.grad_sq() - self.lp_power(p) / p

    def edge_energies(self, p: float) -> np.ndarray:
        """Energy carried by each surviving edge, in layout order."""
        samples = self.edge_samples()
        h = self.mesh.h
        kinetic = 0.5 * np.sum(np.diff(samples, axis=1) ** 2, axis=1) / h
        potential = (np.abs(samples) ** p) @ self.mesh.edge_weights() / p
        out: np.ndarray = kinetic - potential
        return out

    def scaled(self, factor: float) -> "Field":
        return Field(self.mesh, self.values * factor)

    def transfer(self, mesh: EdgeMesh) -> "Field":
        """The same function on *mesh*, another window or defect set at equal ``m``.

        Vertices and edges are matched by position. Nodes of *mesh* with no
        counterpart here, and its border nodes, get 0; edges present here
        but missing from *mesh* are dropped, which restricts the field.

        Raises:
            FieldError: If the two meshes have a different resolution.
        """
        if mesh.m != self.mesh.m:
            raise FieldError(
                f"Cannot transfer a field to a different mesh resolution "
                f"(m={self.mesh.m} vs m={mesh.m})"
            )
        src, dst = self.mesh.layout, mesh.layout
        sw = src.window
        out = np.zeros(mesh.n_nodes)

        ix = dst.vertex_xy[:, 0] - sw.xmin
        iy = dst.vertex_xy[:, 1] - sw.ymin
        inside = (ix >= 0) & (ix <= sw.nx) & (iy >= 0) & (iy <= sw.ny)
        source = np.full(dst.n_vertices, -1, dtype=np.int64)
        source[inside] = src.vertex_index[ix[inside], iy[inside]]
        found = source >= 0
        out[: dst.n_vertices][found] = self.values[source[found]]

        pairs = [(k, src.edge_position[e]) for k, e in enumerate(dst.edges)
                 if e in src.edge_position]
        if pairs and mesh.m > 1:
            rows, cols = (np.array(side, dtype=np.int64) for side in zip(*pairs))
            out[mesh.edge_nodes[rows, 1:-1]] = self.values[self.mesh.edge_nodes[cols, 1:-1]]
        out[mesh.dirichlet] = 0.0
        return Field(mesh, out)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mesh_m": self.mesh.m,
            "window": self.mesh.layout.window.to_dict(),
            "edges": [e.to_list() for e in self.mesh.layout.edges],
            "samples": self.edge_samples().tolist(),
        }
