"""Removal rules for the named families of defected grids.

Every family is a small frozen dataclass implementing
:class:`gridwave.grid_core.RemovalRule`: it produces boolean H/V removal
masks for any window, consistently under window enlargement. Rules are
registered by ``kind`` so that grid-spec files and the CLI can name them::

    from gridwave.defect_zoo import GeneratorSpec, make_grid
    from gridwave.grid_core import Window

    g = make_grid(GeneratorSpec("block_sequence"), Window(-19, 19, -1, 2))

The block-sequence family is built from binary blocks ``B_n``;
:func:`make_block` and :func:`contains_pattern` expose them directly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping

import numpy as np

from gridwave.errors import BudgetExhaustedError, GridSpecError
from gridwave.grid_core import DefectedGrid, EdgeId, Orientation, RemovalRule, Window, edges_at

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Binary blocks
# ---------------------------------------------------------------------------


def make_sigma(n: int) -> str:
    """``"010"`` repeated *n* times."""
    if n < 1:
        raise ValueError(f"sigma index must be >= 1, got {n}")
    return "010" * n


@lru_cache(maxsize=None)
def make_block(n: int) -> str:
    """Return block ``B_n``.

    ``B_1 = s1 111 s1`` and ``B_2 = B_1 s2 B_1 s2 B_1``. For ``m >= 3`` and
    ``1 <= k <= 2**(m-2)``, ``B_{2**(m-2)+k}`` is the palindrome
    ``B_k sm B_{k-1} sm ... sm B_1 sm B_{2**(m-2)} sm B_1 sm ... sm B_k``,
    writing ``sm`` for ``make_sigma(m)``.

    Raises:
        ValueError: If *n* < 1.
    """
    if n < 1:
        raise ValueError(f"block index must be >= 1, got {n}")
    if n == 1:
        s1 = make_sigma(1)
        return s1 + "111" + s1
    if n == 2:
        b1, s2 = make_block(1), make_sigma(2)
        return b1 + s2 + b1 + s2 + b1
    m = 3
    while n > 2 ** (m - 1):
        m += 1
    half = 2 ** (m - 2)
    k = n - half
    descending = [make_block(k - t) for t in range(k)]
    parts = descending + [make_block(half)] + descending[::-1]
    return make_sigma(m).join(parts)


def block_radius(n: int) -> int:
    """``(|B_n| - 1) / 2``, the reach of the centered block."""
    return (len(make_block(n)) - 1) // 2


def covering_block(reach: int) -> int:
    """Smallest block index whose centered copy covers ``[-reach, reach]``."""
    n = 1
    while block_radius(n) < reach:
        n += 1
    return n


def block_values(ks: np.ndarray) -> np.ndarray:
    """``F(k)`` for every integer in *ks*, read from the smallest covering block."""
    ks = np.asarray(ks, dtype=np.int64)
    if ks.size == 0:
        return np.zeros(0, dtype=np.int8)
    n = covering_block(int(np.abs(ks).max()))
    digits = np.frombuffer(make_block(n).encode("ascii"), dtype=np.uint8) - ord("0")
    return digits[ks + block_radius(n)].astype(np.int8)


def contains_pattern(i: int, big_n: int, max_index: int = 16) -> int:
    """Smallest ``j`` such that ``B_j`` contains ``s_N B_i s_N``.

    Args:
        i: Index of the inner block.
        big_n: Repetition count ``N`` of the flanking ``010`` blocks.
        max_index: Largest block index searched.

    Raises:
        BudgetExhaustedError: If no block up to *max_index* contains the
            pattern; ``result`` holds the searched range and pattern length.
    """
    pattern = make_sigma(big_n) + make_block(i) + make_sigma(big_n)
    for j in range(1, max_index + 1):
        if pattern in make_block(j):
            logger.debug("pattern (i=%d, N=%d) first found in B_%d", i, big_n, j)
            return j
    raise BudgetExhaustedError(
        f"s_{big_n} B_{i} s_{big_n} not found in B_1..B_{max_index}",
        result={"i": i, "N": big_n, "max_index": max_index, "pattern_length": len(pattern)},
    )


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def _empty_masks(window: Window) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.zeros((window.nx, window.ny + 1), dtype=bool),
        np.zeros((window.nx + 1, window.ny), dtype=bool),
    )


def _edge_list(data: Any) -> tuple[EdgeId, ...]:
    return tuple(sorted(EdgeId.from_list(item) for item in data))


def _vertex_edges(vertices: Any) -> tuple[EdgeId, ...]:
    out: set[EdgeId] = set()
    for v in vertices:
        x, y = (int(c) for c in v)
        out.update(edges_at((x, y)))
    return tuple(sorted(out))


def _motif_from_params(params: Mapping[str, Any]) -> tuple[EdgeId, ...]:
    motif = set(_edge_list(params.get("edges", ())))
    motif.update(_vertex_edges(params.get("vertices", ())))
    return tuple(sorted(motif))


def _vector(value: Any, name: str) -> tuple[int, int]:
    try:
        a, b = (int(c) for c in value)
    except (TypeError, ValueError) as exc:
        raise GridSpecError(f"{name} must be an integer pair, got {value!r}") from exc
    return (a, b)


@dataclass(frozen=True)
class NoRemoval:
    """The undefected grid Q."""

    kind: str = field(default="q", init=False)

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ((1, 0), (0, 1))

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        return _empty_masks(window)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {}}


COMPACT_PRESETS: dict[str, tuple[EdgeId, ...]] = {
    "vertex": _vertex_edges([(0, 0)]),
    "edge": (EdgeId(Orientation.H, 0, 0),),
    "adjacent_pair": _vertex_edges([(0, 0), (2, 0)]),
}


@dataclass(frozen=True)
class CompactRule:
    """A finite set of removed edges anywhere in the plane."""

    edges: tuple[EdgeId, ...]
    kind: str = field(default="compact", init=False)

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        h_mask, v_mask = _empty_masks(window)
        for e in self.edges:
            if not window.contains_edge(e):
                continue
            target = h_mask if e.orientation is Orientation.H else v_mask
            target[e.i - window.xmin, e.j - window.ymin] = True
        return h_mask, v_mask

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {"edges": [e.to_list() for e in self.edges]}}


def _lattice_hits(di: np.ndarray, dj: np.ndarray, vectors: tuple[tuple[int, int], ...]) -> np.ndarray:
    """Whether each offset ``(di, dj)`` lies in the integer span of *vectors*."""
    if len(vectors) == 1:
        (a, b), = vectors
        if a != 0:
            k, rem = np.divmod(di, a)
            return (rem == 0) & (dj == k * b)
        k, rem = np.divmod(dj, b)
        return (rem == 0) & (di == 0)
    (a1, b1), (a2, b2) = vectors
    det = a1 * b2 - a2 * b1
    n1 = di * b2 - dj * a2
    n2 = a1 * dj - b1 * di
    return (n1 % det == 0) & (n2 % det == 0)


@dataclass(frozen=True)
class PeriodicRule:
    """A motif of removed edges repeated along one or two lattice vectors."""

    motif: tuple[EdgeId, ...]
    vectors: tuple[tuple[int, int], ...]
    kind: str = "z_periodic"

    def __post_init__(self) -> None:
        if len(self.vectors) not in (1, 2):
            raise GridSpecError("A periodic rule needs one or two translation vectors")
        if any(v == (0, 0) for v in self.vectors):
            raise GridSpecError("Translation vectors must be nonzero")
        if len(self.vectors) == 2:
            (a1, b1), (a2, b2) = self.vectors
            if a1 * b2 - a2 * b1 == 0:
                raise GridSpecError(f"Vectors {self.vectors} are linearly dependent")
        if not self.motif:
            raise GridSpecError("A periodic rule needs a nonempty motif")

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return self.vectors

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        h_mask, v_mask = _empty_masks(window)
        hi, hj, vi, vj = window.edge_grids()
        for e in self.motif:
            if e.orientation is Orientation.H:
                h_mask |= _lattice_hits(hi - e.i, hj - e.j, self.vectors)
            else:
                v_mask |= _lattice_hits(vi - e.i, vj - e.j, self.vectors)
        return h_mask, v_mask

    def to_dict(self) -> dict[str, Any]:
        params: dict[str, Any] = {"edges": [e.to_list() for e in self.motif]}
        if self.kind == "z_periodic":
            params["v"] = list(self.vectors[0])
        else:
            params["v1"], params["v2"] = list(self.vectors[0]), list(self.vectors[1])
        return {"kind": self.kind, "params": params}


@dataclass(frozen=True)
class LengthTwoRule:
    """Remove every H edge on an odd row and every V edge on an odd column.

    The surviving vertices of degree > 0 form a square grid of mesh 2 whose
    odd-coordinate vertices subdivide its edges.
    """

    kind: str = field(default="length_two_grid", init=False)

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ((2, 0), (0, 2))

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        _, hj, vi, _ = window.edge_grids()
        return (hj % 2 == 1), (vi % 2 == 1)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {}}


@dataclass(frozen=True)
class BlockSequenceRule:
    """Remove ``V@(k, y)`` whenever ``F(k) = 0`` on the selected rows.

    With ``stacked=False`` only the strip ``y in [0, 1]`` carries defects;
    stacked copies repeat it on every strip ``[2l, 2l + 1]``.
    """

    stacked: bool = False

    @property
    def kind(self) -> str:
        return "block_sequence_stacked" if self.stacked else "block_sequence"

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ((0, 2),) if self.stacked else ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        h_mask, _ = _empty_masks(window)
        _, _, vi, vj = window.edge_grids()
        zero = block_values(np.arange(window.xmin, window.xmax + 1)) == 0
        rows = (vj % 2 == 0) if self.stacked else (vj == 0)
        return h_mask, rows & zero[vi - window.xmin]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {}}


@dataclass(frozen=True)
class ParallelSlitsRule:
    """Two parallel half-infinite slits along ``y = 0`` for ``x >= start``.

    ``V@(x, 0)`` and ``V@(x, -1)`` are removed, leaving a corridor of
    degree-two vertices between two separate defects.
    """

    start: int = 1
    kind: str = field(default="parallel_slits", init=False)

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        h_mask, _ = _empty_masks(window)
        _, _, vi, vj = window.edge_grids()
        return h_mask, (vi >= self.start) & ((vj == 0) | (vj == -1))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {"start": self.start}}


@dataclass(frozen=True)
class GrowingSlitsRule:
    """Slit ``k >= 1`` is the wall ``H@(spacing*k, j)``, ``0 <= j < k``.

    With ``spacing=1`` the column ``x = c`` between slits ``c - 1`` and ``c``
    is a corridor whose vertices on rows ``0..c-2`` have degree two.
    """

    spacing: int = 1
    kind: str = field(default="growing_slits", init=False)

    def __post_init__(self) -> None:
        if self.spacing < 1:
            raise GridSpecError(f"spacing must be >= 1, got {self.spacing}")

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        _, v_mask = _empty_masks(window)
        hi, hj, _, _ = window.edge_grids()
        k, rem = np.divmod(hi, self.spacing)
        h_mask = (rem == 0) & (k >= 1) & (hj >= 0) & (hj < k)
        return h_mask, v_mask

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {"spacing": self.spacing}}


@lru_cache(maxsize=32)
def _spiral_edges(gap: int, reach: int) -> frozenset[EdgeId]:
    """Edges cut by a square dual spiral from cell (0, 0) out to *reach*."""
    steps = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    cx, cy = 0, 0
    cut: set[EdgeId] = set()
    turn = 0
    while max(abs(cx), abs(cy)) <= reach + gap + 1:
        dx, dy = steps[turn % 4]
        for _ in range(gap * (turn // 2 + 1)):
            if dx == 1:
                cut.add(EdgeId(Orientation.V, cx + 1, cy))
            elif dx == -1:
                cut.add(EdgeId(Orientation.V, cx, cy))
            elif dy == 1:
                cut.add(EdgeId(Orientation.H, cx, cy + 1))
            else:
                cut.add(EdgeId(Orientation.H, cx, cy))
            cx, cy = cx + dx, cy + dy
        turn += 1
    return frozenset(cut)


@dataclass(frozen=True)
class SpiralRule:
    """One infinite defect winding outwards as a square spiral.

    The dual walk starts in cell ``(0, 0)`` and moves right, up, left and
    down with run lengths ``gap * (1, 1, 2, 2, 3, 3, ...)``; each step removes
    the edge shared by consecutive cells. Consecutive turns of the spiral
    are ``gap`` cells apart.

    Near the window border a corridor between two turns may have both ends
    outside the window; :func:`make_grid` trims such pieces.
    """

    gap: int = 3
    kind: str = field(default="spiral", init=False)

    def __post_init__(self) -> None:
        if self.gap < 2:
            raise GridSpecError(f"spiral gap must be >= 2, got {self.gap}")

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        h_mask, v_mask = _empty_masks(window)
        reach = max(abs(window.xmin), abs(window.xmax), abs(window.ymin), abs(window.ymax))
        for e in _spiral_edges(self.gap, reach):
            if not window.contains_edge(e):
                continue
            target = h_mask if e.orientation is Orientation.H else v_mask
            target[e.i - window.xmin, e.j - window.ymin] = True
        return h_mask, v_mask

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {"gap": self.gap}}


def _isqrt(values: np.ndarray) -> np.ndarray:
    values = np.maximum(values, 0)
    r = np.floor(np.sqrt(values)).astype(np.int64)
    r -= (r * r > values).astype(np.int64)
    r += ((r + 1) * (r + 1) <= values).astype(np.int64)
    return r


def staircase_floor(cols: np.ndarray) -> np.ndarray:
    """Height of the lower staircase path over the open interval ``(i, i + 1)``.

    Bump ``q`` occupies ``[(q+1)^2, (q+1)(q+2)]`` with height ``q + 1``.
    """
    cols = np.asarray(cols, dtype=np.int64)
    r = _isqrt(cols)
    on_bump = (r >= 1) & (cols < r * (r + 1)) & (cols >= 0)
    return np.where(on_bump, r, 0)


def staircase_ceiling(cols: np.ndarray) -> np.ndarray:
    """Height of the upper staircase path over ``(i, i + 1)``: ``4 + s`` on ``[s(s+1), (s+1)(s+2))``."""
    cols = np.maximum(np.asarray(cols, dtype=np.int64), 0)
    s = np.floor((np.sqrt(1.0 + 4.0 * cols) - 1.0) / 2.0).astype(np.int64)
    s -= (s * (s + 1) > cols).astype(np.int64)
    s += ((s + 1) * (s + 2) <= cols).astype(np.int64)
    return 4 + s


@dataclass(frozen=True)
class StaircaseRule:
    """Remove the open region between two staircase paths.

    The boundary path goes up ``{0} x [0, 4]``, then right along a lower
    path carrying square bumps of growing size and an upper staircase
    rising by one every ``2(s + 1)`` columns. An edge is removed when its
    midpoint has ``x > 0`` and lies strictly between the two paths.
    """

    kind: str = field(default="staircase", init=False)

    @property
    def periods(self) -> tuple[tuple[int, int], ...]:
        return ()

    def masks(self, window: Window) -> tuple[np.ndarray, np.ndarray]:
        hi, hj, vi, vj = window.edge_grids()
        low = staircase_floor(hi)
        high = staircase_ceiling(hi)
        h_mask = (hi >= 0) & (hj > low) & (hj < high)
        v_low = np.maximum(staircase_floor(vi - 1), staircase_floor(vi))
        v_high = np.minimum(staircase_ceiling(vi - 1), staircase_ceiling(vi))
        v_mask = (vi >= 1) & (vj >= v_low) & (vj + 1 <= v_high)
        return h_mask, v_mask

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": {}}


def staircase_window(last_bump: int) -> Window:
    """Window holding the start of the staircase and bumps ``0..last_bump``."""
    if last_bump < 0:
        raise GridSpecError(f"last_bump must be >= 0, got {last_bump}")
    i = last_bump
    return Window(-2, (i + 1) * (i + 2) + 2, -2, i + 6)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Named generator plus its parameters, as stored under ``"generator"``."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GeneratorSpec":
        if "kind" not in data:
            raise GridSpecError("Generator spec needs a 'kind'")
        return cls(str(data["kind"]), dict(data.get("params", {})))


def _compact(params: Mapping[str, Any]) -> RemovalRule:
    preset = params.get("preset")
    if preset is not None:
        if preset not in COMPACT_PRESETS:
            raise GridSpecError.unknown("compact preset", str(preset), COMPACT_PRESETS)
        return CompactRule(COMPACT_PRESETS[preset])
    edges = _motif_from_params(params)
    if not edges:
        return CompactRule(COMPACT_PRESETS["vertex"])
    return CompactRule(edges)


_DEFAULT_MOTIF = {"vertices": [[0, 0]]}


def _z_periodic(params: Mapping[str, Any]) -> RemovalRule:
    motif = _motif_from_params(params) or _motif_from_params(_DEFAULT_MOTIF)
    return PeriodicRule(motif, (_vector(params.get("v", (3, 0)), "v"),), "z_periodic")


def _z2_periodic(params: Mapping[str, Any]) -> RemovalRule:
    motif = _motif_from_params(params) or _motif_from_params(_DEFAULT_MOTIF)
    vectors = (_vector(params.get("v1", (3, 0)), "v1"), _vector(params.get("v2", (0, 3)), "v2"))
    return PeriodicRule(motif, vectors, "z2_periodic")


_BUILDERS: dict[str, Callable[[Mapping[str, Any]], RemovalRule]] = {
    "q": lambda params: NoRemoval(),
    "compact": _compact,
    "z_periodic": _z_periodic,
    "z2_periodic": _z2_periodic,
    "spiral": lambda params: SpiralRule(int(params.get("gap", 3))),
    "parallel_slits": lambda params: ParallelSlitsRule(int(params.get("start", 1))),
    "staircase": lambda params: StaircaseRule(),
    "growing_slits": lambda params: GrowingSlitsRule(int(params.get("spacing", 1))),
    "block_sequence": lambda params: BlockSequenceRule(stacked=False),
    "block_sequence_stacked": lambda params: BlockSequenceRule(stacked=True),
    "length_two_grid": lambda params: LengthTwoRule(),
}

GENERATOR_KINDS = tuple(sorted(_BUILDERS))


def build_rule(spec: GeneratorSpec) -> RemovalRule:
    """Instantiate the removal rule named by *spec*.

    Raises:
        GridSpecError: For unknown kinds (with close-match suggestions) or
            invalid parameters.
    """
    builder = _BUILDERS.get(spec.kind)
    if builder is None:
        raise GridSpecError.unknown("generator kind", spec.kind, _BUILDERS)
    try:
        return builder(spec.params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GridSpecError):
            raise
        raise GridSpecError(f"Invalid parameters for '{spec.kind}': {exc}") from exc


def make_grid(spec: GeneratorSpec, window: Window) -> DefectedGrid:
    """Materialize generator *spec* on *window* and check connectivity.

    A spiral window can cut a corridor between two turns into a separate
    piece; spiral grids keep only their largest piece, see
    :meth:`DefectedGrid.largest_piece`.

    Raises:
        GridSpecError: See :func:`build_rule`.
        DisconnectedGridError: If the window's surviving graph is disconnected.
    """
    rule = build_rule(spec)
    if spec.kind == "staircase":
        for v in ((0, 0), (0, 4)):
            if not window.contains_vertex(v):
                raise GridSpecError(
                    f"Window {window} must contain the segment from (0,0) to (0,4)"
                )
    if spec.kind in ("block_sequence", "block_sequence_stacked"):
        if window.ymin > 0 or window.ymax < 1:
            raise GridSpecError(f"Window {window} must span the strip y in [0, 1]")
    grid = DefectedGrid(
        window, generator=rule, name=spec.kind, keep_largest=isinstance(rule, SpiralRule)
    )
    if grid.keep_largest:
        grid = grid.largest_piece()
    grid.layout.require_connected()
    logger.info(
        "built %s grid on %s: %d surviving edges", spec.kind, window, grid.layout.n_edges
    )
    return grid


def grid_from_dict(data: Mapping[str, Any]) -> DefectedGrid:
    """Build a grid from the grid-spec JSON shape.

    ``{"window": {...}, "removed": [["H", i, j], ...], "generator": {...}}``
    """
    if "window" not in data:
        raise GridSpecError("Grid spec needs a 'window'")
    window = Window.from_dict(data["window"])
    removed = frozenset(EdgeId.from_list(item) for item in data.get("removed", []))
    rule = None
    name = "custom"
    if data.get("generator"):
        spec = GeneratorSpec.from_dict(data["generator"])
        rule = build_rule(spec)
        name = spec.kind
    grid = DefectedGrid(window, removed, rule, name, bool(data.get("keep_largest", isinstance(rule, SpiralRule))))
    if grid.keep_largest:
        grid = grid.largest_piece()
    grid.layout.require_connected()
    return grid


def uniform_random_grid(
    window: Window, rate: float, seed: int = 0, margin: int = 1
) -> DefectedGrid:
    """Remove each edge at least *margin* away from the border with probability *rate*.

    The result is not checked for connectivity; callers filter with
    ``grid.layout.n_components``.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must lie in [0, 1], got {rate}")
    inner = Window(
        window.xmin + margin, window.xmax - margin, window.ymin + margin, window.ymax - margin
    )
    rng = np.random.default_rng(seed)
    candidates = list(inner.edges())
    picks = rng.random(len(candidates)) < rate
    removed = frozenset(e for e, hit in zip(candidates, picks) if hit)
    return DefectedGrid(window, removed, name=f"uniform({rate}, seed={seed})")
