"""Functional-inequality probes, the hole-filling extension and exponential trials.

Each probe evaluates one ratio (left side over the structural product on
the right) across a seeded family of fields and keeps the maximum. The
maxima are lower bounds on the sharp constants, nothing more.

Example::

    from gridwave.inequality_lab import FamilySpec, probe_inequality

    report = probe_inequality("s2d", grid, FamilySpec("tent", size=200), seed=3)
    print(report.best_ratio, report.witness_id)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator, Sequence

import networkx as nx
import numpy as np

from gridwave.config import SolverConfig, SweepConfig
from gridwave.defect_zoo import GeneratorSpec, make_grid
from gridwave.errors import BudgetExhaustedError, FieldError, WindowTooSmallError
from gridwave.fields import EdgeMesh, Field
from gridwave.grid_core import (
    DefectedGrid,
    EdgeId,
    Region,
    Vertex,
    Window,
    identify_defects,
)
from gridwave.isoperimetry import tent_function, thin_regions
from gridwave.nls_solver import solve_ground_state
from gridwave.parallel import ordered_map

logger = logging.getLogger(__name__)


class InequalityId(str, Enum):
    """Ratios the lab can probe."""

    S1D = "s1d"
    S2D = "s2d"
    GN1D = "gn1d"
    GN2D = "gn2d"
    GN_INT = "gn_int"


class FamilyKind(str, Enum):
    TENT = "tent"
    EXPONENTIAL = "exponential"
    BUMP = "bump"
    ITERATES = "iterates"


def ratio_of(ineq: InequalityId | str, u: Field, p: float = 4.0) -> float:
    """Left side over right-side product for one field; 0 when the product vanishes.

    - ``s1d``: ``||u||_inf / ||u'||_1``
    - ``s2d``: ``||u||_2 / ||u'||_1``
    - ``gn1d``: ``||u||_p^p / (||u||^(p/2+1) ||u'||^(p/2-1))``
    - ``gn2d``: ``||u||_p^p / (||u||^2 ||u'||^(p-2))``
    - ``gn_int``: ``||u||_p^p / (||u||^(p-2) ||u'||^2)``
    """
    ineq = InequalityId(ineq)
    if ineq is InequalityId.S1D or ineq is InequalityId.S2D:
        grad_l1 = u.grad_l1()
        if grad_l1 <= 0:
            return 0.0
        top = u.sup() if ineq is InequalityId.S1D else u.l2()
        return top / grad_l1
    l2 = u.l2()
    d2 = math.sqrt(u.grad_sq())
    if l2 <= 0 or d2 <= 0:
        return 0.0
    n = u.lp_power(p)
    if ineq is InequalityId.GN1D:
        return n / (l2 ** (p / 2 + 1) * d2 ** (p / 2 - 1))
    if ineq is InequalityId.GN2D:
        return n / (l2**2 * d2 ** (p - 2))
    return n / (l2 ** (p - 2) * d2**2)


@dataclass(frozen=True)
class FamilySpec:
    """A seeded family of test fields.

    Attributes:
        kind: ``tent``, ``exponential``, ``bump`` or ``iterates``.
        size: Number of members drawn.
        mesh_m: Mesh intervals per edge.
        max_region_edges: Largest random tent region.
        tent_eps: Ramp width of the tents.
        solver_p: Exponent of the ground-state flow feeding ``iterates``.
    """

    kind: FamilyKind | str
    size: int = 50
    mesh_m: int = 8
    max_region_edges: int = 12
    tent_eps: float = 0.25
    solver_p: float = 3.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.size < 1:
            raise ValueError(f"family size must be >= 1, got {self.size}")

    def describe(self) -> str:
        return f"{FamilyKind(self.kind).value}(size={self.size}, m={self.mesh_m})"


def _interior_vertices(g: DefectedGrid) -> list[Vertex]:
    layout = g.layout
    return [layout.vertex_at(k) for k in range(layout.n_vertices) if not layout.border[k]]


def _random_regions(g: DefectedGrid, n: int, max_edges: int,
                    rng: np.random.Generator) -> list[Region]:
    layout = g.layout
    border = layout.border
    ok = ~border[layout.edge_start] & ~border[layout.edge_end]
    interior = np.flatnonzero(ok).tolist()
    if not interior:
        return []
    allowed = set(interior)
    incident: list[list[int]] = [[] for _ in range(layout.n_vertices)]
    for k in interior:
        incident[layout.edge_start[k]].append(k)
        incident[layout.edge_end[k]].append(k)
    regions = []
    for _ in range(n):
        members = {interior[int(rng.integers(len(interior)))]}
        target = int(rng.integers(1, max_edges + 1))
        while len(members) < target:
            frontier = sorted(
                {o for k in members
                 for v in (layout.edge_start[k], layout.edge_end[k])
                 for o in incident[v]
                 if o in allowed and o not in members}
            )
            if not frontier:
                break
            members.add(frontier[int(rng.integers(len(frontier)))])
        regions.append(Region.from_edges(layout.edges[k] for k in sorted(members)))
    return regions


def _tents(g: DefectedGrid, spec: FamilySpec, rng: np.random.Generator) -> Iterator[tuple[str, Field]]:
    window = g.window
    corridors = [
        r for r in thin_regions(g)
        if not any(window.on_border(v) for v in r.vertices())
    ][: max(1, spec.size // 4)]
    regions = corridors + _random_regions(g, spec.size - len(corridors), spec.max_region_edges, rng)
    for k, region in enumerate(regions):
        try:
            tent = tent_function(g, region, spec.tent_eps, spec.mesh_m)
        except FieldError as exc:
            logger.debug("skipping tent %d: %s", k, exc)
            continue
        yield f"tent:{k}", tent.field


def _exponentials(g: DefectedGrid, spec: FamilySpec,
                  rng: np.random.Generator) -> Iterator[tuple[str, Field]]:
    centers = _interior_vertices(g)
    if not centers:
        return
    mesh = EdgeMesh(g.layout, spec.mesh_m)
    for k in range(spec.size):
        cx, cy = centers[int(rng.integers(len(centers)))]
        rate = float(rng.uniform(0.3, 2.0))
        values = np.exp(-rate * (np.abs(mesh.x - cx) + np.abs(mesh.y - cy)))
        values[mesh.dirichlet] = 0.0
        yield f"exponential:{k}", Field(mesh, values)


def _bumps(g: DefectedGrid, spec: FamilySpec, rng: np.random.Generator) -> Iterator[tuple[str, Field]]:
    centers = _interior_vertices(g)
    if not centers:
        return
    mesh = EdgeMesh(g.layout, spec.mesh_m)
    for k in range(spec.size):
        values = np.zeros(mesh.n_nodes)
        for _ in range(int(rng.integers(1, 4))):
            cx, cy = centers[int(rng.integers(len(centers)))]
            amp = float(rng.uniform(0.2, 1.0))
            width = float(rng.uniform(0.5, 3.0))
            values += amp * np.exp(-(np.abs(mesh.x - cx) + np.abs(mesh.y - cy)) / width)
        values[mesh.dirichlet] = 0.0
        yield f"bump:{k}", Field(mesh, values)


def _iterates(g: DefectedGrid, spec: FamilySpec, seed: int) -> Iterator[tuple[str, Field]]:
    collected: list[Field] = []

    def keep(u: Field) -> None:
        if len(collected) < spec.size:
            collected.append(u)

    cfg = SolverConfig(p=spec.solver_p, mesh_m=spec.mesh_m, n_starts=1, seed=seed,
                       max_iters=spec.size)
    solve_ground_state(g, cfg=cfg, on_iterate=keep)
    for k, u in enumerate(collected):
        yield f"iterate:{k}", u


def family_members(g: DefectedGrid, spec: FamilySpec, seed: int = 0) -> list[tuple[str, Field]]:
    """Materialize the family as ``(member id, field)`` pairs."""
    rng = np.random.default_rng(seed)
    kind = FamilyKind(spec.kind)
    if kind is FamilyKind.TENT:
        return list(_tents(g, spec, rng))
    if kind is FamilyKind.EXPONENTIAL:
        return list(_exponentials(g, spec, rng))
    if kind is FamilyKind.BUMP:
        return list(_bumps(g, spec, rng))
    return list(_iterates(g, spec, seed))


@dataclass(frozen=True)
class RatioReport:
    """Best ratio of one inequality over a family.

    Attributes:
        inequality: Which ratio was probed.
        p: Exponent (ignored by the Sobolev ratios).
        best_ratio: Largest ratio over the family.
        witness_id: Member attaining it.
        witness: The witness field itself.
        family: Family description.
        n_members: Members evaluated.
        window: Window of the grid.
    """

    inequality: InequalityId
    p: float
    best_ratio: float
    witness_id: str
    witness: Field = field(repr=False)
    family: str
    n_members: int
    window: Window

    def recompute(self) -> float:
        return ratio_of(self.inequality, self.witness, self.p)

    def to_dict(self, include_field: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "inequality": self.inequality.value,
            "p": self.p,
            "best_ratio": self.best_ratio,
            "witness_id": self.witness_id,
            "family": self.family,
            "n_members": self.n_members,
            "window": str(self.window),
        }
        if include_field:
            data["witness"] = self.witness.to_dict()
        return data


def probe_inequality(
    ineq: InequalityId | str,
    g: DefectedGrid,
    family: FamilySpec,
    seed: int = 0,
    p: float = 4.0,
) -> RatioReport:
    """Largest ratio of *ineq* over the seeded *family* on *g*.

    Members are evaluated in order and merged by maximum, first member
    winning ties, so equal seeds give equal reports.

    Raises:
        ValueError: If the family turns out empty.
    """
    ineq = InequalityId(ineq)
    members = family_members(g, family, seed)
    if not members:
        raise ValueError(f"Family {family.describe()} is empty on {g.window}")
    ratios = [ratio_of(ineq, u, p) for _, u in members]
    best = int(np.argmax(ratios))
    report = RatioReport(
        inequality=ineq,
        p=p,
        best_ratio=ratios[best],
        witness_id=members[best][0],
        witness=members[best][1],
        family=family.describe(),
        n_members=len(members),
        window=g.window,
    )
    logger.info("%s on %s over %s: best ratio %.6f (%s)",
                ineq.value, g.window, report.family, report.best_ratio, report.witness_id)
    return report


def inequality_series(
    ineq: InequalityId | str,
    spec: GeneratorSpec,
    windows: Sequence[Window],
    family: FamilySpec,
    seed: int = 0,
    p: float = 4.0,
    *,
    jobs: int = 1,
) -> list[dict[str, Any]]:
    """Best ratio per window, for CSV output."""

    def row(window: Window) -> dict[str, Any]:
        report = probe_inequality(ineq, make_grid(spec, window), family, seed, p)
        return {"window": str(window), "best_ratio": report.best_ratio,
                "witness_id": report.witness_id}

    return ordered_map(row, windows, jobs)


def gn_interpolation_bound(gn2d_p4: float, gn1d_p6: float, p: float) -> float:
    """Hölder bound on the ``gn_int`` ratio at *p* in ``[4, 6]``.

    With ``p = 4 theta + 6 (1 - theta)``, every field satisfies
    ``gn_int(p) <= gn2d(4)^theta * gn1d(6)^(1 - theta)``.
    """
    if not 4.0 <= p <= 6.0:
        raise ValueError(f"p must lie in [4, 6], got {p}")
    theta = (6.0 - p) / 2.0
    return float(gn2d_p4**theta * gn1d_p6 ** (1.0 - theta))


def interpolation_check(
    g: DefectedGrid, family: FamilySpec, p: float, seed: int = 0
) -> tuple[RatioReport, float]:
    """The ``gn_int`` probe at *p* and its Hölder bound over the same family."""
    gn_int = probe_inequality(InequalityId.GN_INT, g, family, seed, p)
    gn2d = probe_inequality(InequalityId.GN2D, g, family, seed, 4.0)
    gn1d = probe_inequality(InequalityId.GN1D, g, family, seed, 6.0)
    return gn_int, gn_interpolation_bound(gn2d.best_ratio, gn1d.best_ratio, p)


# ---------------------------------------------------------------------------
# Extension over bounded defects
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Leg:
    edge: int
    start: float
    direction: float
    length: float


class _PathSampler:
    """``u`` along a path of edges, parametrized by arclength."""

    def __init__(self, u: Field, legs: list[_Leg]) -> None:
        self.samples = u.edge_samples()
        self.grid = np.linspace(0.0, 1.0, u.mesh.m + 1)
        self.legs = legs
        self.length = sum(leg.length for leg in legs)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        out = np.empty_like(t)
        offset = 0.0
        for k, leg in enumerate(self.legs):
            last = k == len(self.legs) - 1
            hit = (t >= offset) & ((t <= offset + leg.length) if last else (t < offset + leg.length))
            s = leg.start + leg.direction * (t[hit] - offset)
            out[hit] = np.interp(s, self.grid, self.samples[leg.edge])
            offset += leg.length
        return out


@dataclass(frozen=True)
class ExtensionResult:
    """Extended field on Q and its norm report.

    Attributes:
        v: Extension living on the undefected window.
        u_grad_l1: ``||u'||_1`` on the defected grid.
        v_grad_l1: ``||v'||_1`` on Q.
        ratio: ``v_grad_l1 / u_grad_l1``; ``None`` when ``u`` is constant.
        constant: Geometric bound ``1 + 3 max #U_k * overlap``.
        u_l2: ``||u||_2``.
        v_l2: ``||v||_2``.
        continuity_gap: Largest mismatch at vertex and midpoint joins.
        n_defects: Defects filled.
        max_anchor_count: Largest ``#U_k``.
        overlap: Most defect boundaries sharing one edge.
    """

    v: Field
    u_grad_l1: float
    v_grad_l1: float
    ratio: float | None
    constant: float
    u_l2: float
    v_l2: float
    continuity_gap: float
    n_defects: int
    max_anchor_count: int
    overlap: int

    def to_dict(self, include_field: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "u_grad_l1": self.u_grad_l1,
            "v_grad_l1": self.v_grad_l1,
            "ratio": self.ratio,
            "constant": self.constant,
            "u_l2": self.u_l2,
            "v_l2": self.v_l2,
            "continuity_gap": self.continuity_gap,
            "n_defects": self.n_defects,
            "max_anchor_count": self.max_anchor_count,
            "overlap": self.overlap,
        }
        if include_field:
            data["field"] = self.v.to_dict()
        return data


def _geodesic(u: Field, graph: nx.Graph, v: Vertex, anchor: EdgeId) -> _PathSampler:
    """Shortest path in the defect boundary from *v* to the midpoint of *anchor*."""
    position = u.mesh.layout.edge_position
    low, high = anchor.endpoints
    best: list[Vertex] | None = None
    for end in (low, high):
        route = nx.shortest_path(graph, v, end)
        if best is None or len(route) < len(best):
            best = route
    assert best is not None
    legs = []
    for a, b in zip(best, best[1:]):
        e = graph[a][b]["edge"]
        forward = a == e.endpoints[0]
        legs.append(_Leg(position[e], 0.0 if forward else 1.0, 1.0 if forward else -1.0, 1.0))
    end = best[-1]
    forward = end == low
    legs.append(_Leg(position[anchor], 0.0 if forward else 1.0, 1.0 if forward else -1.0, 0.5))
    return _PathSampler(u, legs)


def extend_field(u: Field) -> ExtensionResult:
    """Fill every bounded defect of ``u``'s grid and return the field on Q.

    ``v = u`` on surviving edges. On the half of a removed edge next to a
    boundary vertex ``v`` the values run along the boundary geodesic from
    ``v`` to the defect's anchor midpoint, compressed to length 1/2; every
    other removed piece takes the anchor value.

    Raises:
        WindowTooSmallError: If a defect is truncated or touches the window border.
    """
    layout = u.mesh.layout
    g = layout.grid
    m = u.mesh.m
    defects = identify_defects(g)
    for d in defects:
        touches = any(g.window.on_border(x) for e in d.edges for x in e.endpoints)
        if d.truncated or touches:
            raise WindowTooSmallError(
                f"A defect of {g.window} reaches the window border; extension needs bounded defects"
            )

    q = g.undefected()
    q_mesh = EdgeMesh(q.layout, m, u.mesh.quadrature)
    values = np.zeros(q_mesh.n_nodes)
    g_samples = u.edge_samples()
    position = layout.edge_position
    for k, e in enumerate(q.layout.edges):
        g_index = position.get(e)
        if g_index is not None:
            values[q_mesh.edge_nodes[k]] = g_samples[g_index]

    s = np.arange(m + 1) / m
    half = m // 2
    gap = 0.0
    anchor_counts = []
    counts: dict[EdgeId, int] = {}
    for d in defects:
        for e in d.boundary:
            counts[e] = counts.get(e, 0) + 1
        anchor = min(d.boundary)
        anchor_value = float(u.values[u.mesh.node_at(anchor, half)])
        graph = nx.Graph()
        for e in d.boundary:
            graph.add_edge(*e.endpoints, edge=e)
        anchors: set[Vertex] = set()
        samplers: dict[Vertex, _PathSampler] = {}
        for e in sorted(d.edges):
            nodes = q_mesh.edge_nodes[q.layout.edge_position[e]]
            low, high = e.endpoints
            for end, piece, dist in ((low, slice(0, half + 1), s[: half + 1]),
                                     (high, slice(half, m + 1), 1.0 - s[half:])):
                vid = layout.vertex_id(end)
                if vid < 0:
                    values[nodes[piece]] = anchor_value
                    continue
                anchors.add(end)
                if end not in samplers:
                    samplers[end] = _geodesic(u, graph, end, anchor)
                walk = samplers[end]
                piece_vals = walk(2.0 * walk.length * dist)
                at_vertex = piece_vals[0] if end == low else piece_vals[-1]
                at_mid = piece_vals[-1] if end == low else piece_vals[0]
                gap = max(gap, abs(at_vertex - u.values[vid]), abs(at_mid - anchor_value))
                values[nodes[piece]] = piece_vals
            values[nodes[half]] = anchor_value
        anchor_counts.append(len(anchors))

    v = Field(q_mesh, values)
    max_anchor = max(anchor_counts, default=0)
    overlap = max(counts.values(), default=0)
    u_grad, v_grad = u.grad_l1(), v.grad_l1()
    result = ExtensionResult(
        v=v,
        u_grad_l1=u_grad,
        v_grad_l1=v_grad,
        ratio=v_grad / u_grad if u_grad > 0 else None,
        constant=1.0 + 3.0 * max_anchor * overlap,
        u_l2=u.l2(),
        v_l2=v.l2(),
        continuity_gap=gap,
        n_defects=len(defects),
        max_anchor_count=max_anchor,
        overlap=overlap,
    )
    logger.info("extended over %d defects: ||v'||_1/||u'||_1 = %s (C = %g)",
                len(defects), result.ratio, result.constant)
    return result


# ---------------------------------------------------------------------------
# Exponential trial functions
# ---------------------------------------------------------------------------


def exp_kappa(eps: float, mu: float) -> float:
    """Amplitude giving ``exp(-eps |x|_1)`` mass *mu* on Q: ``sqrt(eps mu tanh(eps) / 2)``."""
    if eps <= 0 or mu <= 0:
        raise ValueError(f"eps and mu must be > 0, got eps={eps}, mu={mu}")
    return math.sqrt(eps * mu / 2.0 * math.tanh(eps))


def _edge_power_integrals(g: DefectedGrid, eps: float, q: float) -> np.ndarray:
    """``integral of exp(-q eps |x|_1)`` over every surviving edge, in layout order."""
    layout = g.layout
    horizontal = layout.edge_orient == 0
    along = np.where(horizontal, layout.edge_i, layout.edge_j).astype(float)
    across = np.abs(np.where(horizontal, layout.edge_j, layout.edge_i)).astype(float)
    near = np.minimum(np.abs(along), np.abs(along + 1.0))
    far = np.maximum(np.abs(along), np.abs(along + 1.0))
    rate = q * eps
    out: np.ndarray = np.exp(-rate * across) * (np.exp(-rate * near) - np.exp(-rate * far)) / rate
    return out


def exp_trial_norms(g: DefectedGrid, eps: float, mu: float, p: float) -> dict[str, float]:
    """Exact ``||phi||^2``, ``||phi'||^2`` and ``||phi||_p^p`` over the surviving edges."""
    kappa = exp_kappa(eps, mu)
    mass = kappa**2 * float(np.sum(_edge_power_integrals(g, eps, 2.0)))
    return {
        "kappa": kappa,
        "mass": mass,
        "grad_sq": eps**2 * mass,
        "lp_power": kappa**p * float(np.sum(_edge_power_integrals(g, eps, p))),
    }


@dataclass(frozen=True)
class ExpTrial:
    """The restricted exponential and its exact norms."""

    field: Field
    eps: float
    mu: float
    kappa: float
    mass: float
    grad_sq: float

    def lp_power(self, p: float) -> float:
        grid = self.field.mesh.layout.grid
        return self.kappa**p * float(np.sum(_edge_power_integrals(grid, self.eps, p)))

    def to_dict(self) -> dict[str, Any]:
        return {"eps": self.eps, "mu": self.mu, "kappa": self.kappa,
                "mass": self.mass, "grad_sq": self.grad_sq}


def _border_decay(window: Window) -> int:
    """Smallest ``|x| + |y|`` over the window border; 0 if the origin is outside."""
    if not (window.xmin < 0 < window.xmax and window.ymin < 0 < window.ymax):
        return 0
    return min(-window.xmin, window.xmax, -window.ymin, window.ymax)


def exp_trial_field(g: DefectedGrid, eps: float, mu: float, m: int = 16) -> ExpTrial:
    """``kappa exp(-eps (|x| + |y|))`` restricted to the surviving edges of *g*.

    Raises:
        WindowTooSmallError: If the border value is not below ``1e-10 kappa``.
    """
    kappa = exp_kappa(eps, mu)
    if math.exp(-eps * _border_decay(g.window)) >= 1e-10:
        raise WindowTooSmallError(
            f"Window {g.window} too small for eps={eps}: need radius > {math.log(1e10) / eps:.1f}"
        )
    mesh = EdgeMesh(g.layout, m)
    values = kappa * np.exp(-eps * (np.abs(mesh.x) + np.abs(mesh.y)))
    values[mesh.dirichlet] = 0.0
    mass = kappa**2 * float(np.sum(_edge_power_integrals(g, eps, 2.0)))
    return ExpTrial(Field(mesh, values), eps, mu, kappa, mass, eps**2 * mass)


@dataclass(frozen=True)
class NegativityProbe:
    """Outcome of the decreasing-eps sweep.

    Attributes:
        p: Exponent.
        mu: Mass.
        eps_star: First eps with negative energy, ``None`` if none was found.
        energy: Energy at ``eps_star``.
        history: ``(eps, energy, window radius)`` per step.
    """

    p: float
    mu: float
    eps_star: float | None
    energy: float | None
    history: tuple[tuple[float, float, int], ...]

    @property
    def found(self) -> bool:
        return self.eps_star is not None

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "mu": self.mu,
            "eps_star": self.eps_star,
            "energy": self.energy,
            "found": self.found,
            "history": [list(row) for row in self.history],
        }


def z2_negativity_probe(
    g: DefectedGrid,
    p: float,
    mu: float,
    cfg: SweepConfig | None = None,
    on_step: Callable[[float, float], None] | None = None,
) -> NegativityProbe:
    """Sweep eps downward until the renormalized exponential has negative energy.

    At each eps the grid is re-windowed so the border value falls below
    ``border_ratio``; the restriction is rescaled to mass *mu* and its
    energy ``eps^2 mu / 2 - c^p / p ||phi||_p^p`` is evaluated exactly.

    Raises:
        ValueError: If *g* is not periodic in two directions or p is outside (2, 4).
        BudgetExhaustedError: If no eps in the sweep gives negative energy;
            ``.result`` holds the probe.
    """
    cfg = cfg or SweepConfig()
    if not 2.0 < p < 4.0:
        raise ValueError(f"The negativity probe needs 2 < p < 4, got {p}")
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if g.generator is None or len(g.generator.periods) < 2:
        raise ValueError("The negativity probe needs a grid periodic in two directions")
    history = []
    eps = cfg.eps_start
    for _ in range(cfg.n_steps):
        radius = math.ceil(math.log(1.0 / cfg.border_ratio) / eps) + 1
        grid = g.with_window(Window.centered(radius))
        norms = exp_trial_norms(grid, eps, mu, p)
        scale_sq = mu / norms["mass"]
        e = 0.5 * eps**2 * mu - scale_sq ** (p / 2) * norms["lp_power"] / p
        history.append((eps, e, radius))
        logger.debug("eps %.4f (radius %d): energy %.6e", eps, radius, e)
        if on_step is not None:
            on_step(eps, e)
        if e < 0:
            probe = NegativityProbe(p, mu, eps, e, tuple(history))
            logger.info("negative energy %.3e at eps %.4f (p=%g, mu=%g)", e, eps, p, mu)
            return probe
        eps *= cfg.eps_factor
    probe = NegativityProbe(p, mu, None, None, tuple(history))
    raise BudgetExhaustedError(
        f"No negative energy within {cfg.n_steps} eps steps; the window is likely too small",
        result=probe,
    )
