"""Tests for the isoperimetric search, tent functions and coarea check."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gridwave.config import AnnealConfig
from gridwave.defect_zoo import GeneratorSpec, make_grid
from gridwave.errors import FieldError
from gridwave.fields import EdgeMesh, Field
from gridwave.grid_core import (
    DefectedGrid,
    EdgeId,
    Region,
    Window,
    edges_at,
    metric_ball,
    perimeter,
)
from gridwave.isoperimetry import (
    SearchMode,
    coarea_check,
    ratio_series,
    search_violation,
    tent_function,
    thin_regions,
)


def _q(radius: int) -> DefectedGrid:
    return DefectedGrid(Window.centered(radius), name="q")


def _random_region(g: DefectedGrid, rng: np.random.Generator, size: int, reach: int) -> Region:
    """Connected whole-edge region grown from the origin inside ``[-reach, reach]^2``."""
    inner = Window.centered(reach)
    layout = g.layout
    start = [e for e in edges_at((0, 0)) if layout.is_surviving(e)]
    chosen = {start[int(rng.integers(len(start)))]}
    while len(chosen) < size:
        frontier = sorted({
            f
            for e in chosen
            for v in e.endpoints
            for f in edges_at(v)
            if f not in chosen and inner.contains_edge(f) and layout.is_surviving(f)
        })
        if not frontier:
            break
        chosen.add(frontier[int(rng.integers(len(frontier)))])
    return Region.from_edges(chosen)


def _block(k: int) -> Region:
    return Region.from_edges(Window(0, k, 0, k).edges())


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


class TestSearchViolation:
    def test_tiny_window_is_exhaustive(self) -> None:
        g = DefectedGrid(Window(0, 2, 0, 1))
        report = search_violation(g)
        assert report.search_mode is SearchMode.EXHAUSTIVE
        assert report.visited > g.layout.n_edges
        assert report.best_ratio == pytest.approx(
            math.sqrt(report.area) / report.perimeter
        )

    def test_exhaustive_beats_every_single_edge(self) -> None:
        g = DefectedGrid(Window(0, 2, 0, 1))
        report = search_violation(g)
        for e in g.layout.edges:
            single = Region.from_edges([e])
            assert report.best_ratio >= 1.0 / perimeter(single, g).perimeter

    @pytest.mark.parametrize("radius", [2, 3, 4, 5])
    def test_q_stays_below_one_half(self, radius: int) -> None:
        report = search_violation(_q(radius), AnnealConfig(n_restarts=3), budget=600, seed=1)
        assert 0 < report.best_ratio <= 0.5
        assert report.empirical_constant >= 2.0

    def test_seeded_searches_repeat(self) -> None:
        g = make_grid(GeneratorSpec("spiral", {"gap": 3}), Window.centered(6))
        cfg = AnnealConfig(n_restarts=4)
        a = search_violation(g, cfg, budget=400, seed=11)
        b = search_violation(g, cfg, budget=400, seed=11)
        assert a.to_dict() == b.to_dict()

    def test_worker_count_does_not_change_the_report(self) -> None:
        g = make_grid(GeneratorSpec("spiral", {"gap": 3}), Window.centered(6))
        cfg = AnnealConfig(n_restarts=4)
        serial = search_violation(g, cfg, budget=400, seed=5, jobs=1)
        pooled = search_violation(g, cfg, budget=400, seed=5, jobs=4)
        assert serial.to_dict() == pooled.to_dict()

    def test_witness_is_recomputed(self) -> None:
        g = make_grid(GeneratorSpec("parallel_slits"), Window.centered(6))
        report = search_violation(g, AnnealConfig(n_restarts=2), budget=300)
        check = perimeter(report.witness, g)
        assert check.perimeter == report.perimeter
        assert report.to_dict()["witness"]

    def test_growing_slits_series_increases(self) -> None:
        windows = [Window(-1, n, -1, n) for n in (8, 12, 16)]
        rows = ratio_series(
            GeneratorSpec("growing_slits"), windows, AnnealConfig(n_restarts=4), budget=800
        )
        ratios = [row["best_ratio"] for row in rows]
        for n, ratio in zip((8, 12, 16), ratios):
            assert ratio >= math.sqrt(n - 2) / 2 - 1e-12
        assert ratios[1] >= 1.05 * ratios[0]
        assert ratios[2] >= 1.05 * ratios[1]

    def test_parallel_slits_series_increases(self) -> None:
        windows = [Window.centered(r) for r in (4, 8, 12)]
        rows = ratio_series(
            GeneratorSpec("parallel_slits"), windows, AnnealConfig(n_restarts=4), budget=800
        )
        ratios = [row["best_ratio"] for row in rows]
        assert ratios[1] >= 1.05 * ratios[0]
        assert ratios[2] >= 1.05 * ratios[1]

    def test_thin_regions_find_the_corridor(self) -> None:
        g = make_grid(GeneratorSpec("parallel_slits"), Window.centered(6))
        (corridor, *_) = thin_regions(g)
        assert len(corridor) == 5
        assert perimeter(corridor, g).perimeter == 2

    def test_thin_regions_empty_on_q(self) -> None:
        assert thin_regions(_q(3)) == []


# ---------------------------------------------------------------------------
# Tent functions
# ---------------------------------------------------------------------------


class TestTentFunction:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_block_closed_forms(self, k: int) -> None:
        g = _q(6)
        tent = tent_function(g, _block(k), eps=0.25)
        assert tent.ramps == tent.perimeter == 4 * k + 4
        assert tent.field.mass("linear") == pytest.approx(tent.mass_closed_form, abs=1e-10)
        assert tent.field.grad_l1() == pytest.approx(tent.perimeter, abs=1e-10)

    def test_random_regions_closed_forms(self) -> None:
        g = _q(7)
        rng = np.random.default_rng(5)
        for _ in range(200):
            region = _random_region(g, rng, int(rng.integers(1, 16)), reach=5)
            tent = tent_function(g, region, eps=0.25, m=8)
            assert tent.ramps == tent.perimeter
            assert abs(tent.field.mass("linear") - (tent.area + 0.25 * tent.perimeter / 3)) < 1e-10
            assert abs(tent.field.grad_l1() - tent.perimeter) < 1e-10

    def test_half_edge_ball(self) -> None:
        g = _q(4)
        ball = metric_ball(g, (0, 0), 0.5)
        tent = tent_function(g, ball, eps=0.25)
        assert tent.admissible_bound == 0.5
        assert tent.ramps == 4
        assert tent.field.mass("linear") == pytest.approx(2.0 + 0.25 * 4 / 3, abs=1e-10)

    def test_eps_outside_admissible_range(self) -> None:
        with pytest.raises(FieldError, match="eps must lie"):
            tent_function(_q(4), _block(1), eps=1.0)

    def test_eps_must_align_with_mesh(self) -> None:
        with pytest.raises(FieldError, match="integer"):
            tent_function(_q(4), _block(1), eps=0.23)

    def test_region_on_border_rejected(self) -> None:
        g = _q(2)
        region = Region.from_edges([EdgeId.parse("H@(1,2)")])
        with pytest.raises(FieldError, match="border"):
            tent_function(g, region, eps=0.25)

    def test_empty_region_rejected(self) -> None:
        with pytest.raises(FieldError, match="nonempty"):
            tent_function(_q(3), Region(), eps=0.25)


# ---------------------------------------------------------------------------
# Coarea
# ---------------------------------------------------------------------------


class TestCoarea:
    def test_tent_satisfies_coarea_and_layer_cake(self) -> None:
        tent = tent_function(_q(6), _block(2), eps=0.5, m=8)
        report = coarea_check(tent.field)
        assert report.max_gap < 1e-12
        assert report.layer_cake == pytest.approx(report.mass, rel=1e-9)

    def test_random_pyramid(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window.centered(5))
        mesh = EdgeMesh(g.layout, 6)
        u = Field.from_function(mesh, lambda x, y: np.maximum(0.0, 4.0 - np.abs(x) - np.abs(y)))
        report = coarea_check(u)
        assert report.lhs == pytest.approx(report.rhs, abs=1e-10)
        assert report.layer_cake == pytest.approx(report.mass, rel=1e-9)
        assert report.chain_ratio > 0

    def test_zero_field(self) -> None:
        report = coarea_check(Field.zeros(EdgeMesh(_q(2).layout, 2)))
        assert report.lhs == report.rhs == 0.0

    def test_rejects_negative_field(self) -> None:
        mesh = EdgeMesh(_q(2).layout, 2)
        u = Field.from_function(mesh, lambda x, y: np.where(mesh.dirichlet, 0.0, -1.0))
        with pytest.raises(FieldError, match="nonnegative"):
            coarea_check(u)

    def test_rejects_border_mass(self) -> None:
        u = Field.from_function(EdgeMesh(_q(2).layout, 2), lambda x, y: 1.0)
        with pytest.raises(FieldError, match="vanishing"):
            coarea_check(u)
