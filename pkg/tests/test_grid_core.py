"""Tests for windows, layouts, defects, regions and metric balls (grid_core.py)."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gridwave.defect_zoo import GeneratorSpec, make_grid, uniform_random_grid
from gridwave.errors import DisconnectedGridError, GridSpecError, WindowTooSmallError
from gridwave.grid_core import (
    Coverage,
    DefectedGrid,
    EdgeId,
    Orientation,
    Region,
    Window,
    area,
    ball_growth_ratio,
    boundary_is_connected,
    edges_at,
    identify_defects,
    metric_ball,
    perimeter,
    shortest_path,
)


def _q(radius: int = 6) -> DefectedGrid:
    return DefectedGrid(Window.centered(radius), name="q")


def _block(k: int, corner: tuple[int, int] = (0, 0)) -> Region:
    x0, y0 = corner
    window = Window(x0, x0 + k, y0, y0 + k)
    return Region.from_edges(window.edges())


H = Orientation.H
V = Orientation.V


# ---------------------------------------------------------------------------
# Edge ids and windows
# ---------------------------------------------------------------------------


class TestEdgeId:
    def test_endpoints_and_midpoint(self) -> None:
        e = EdgeId(H, 2, -1)
        assert e.endpoints == ((2, -1), (3, -1))
        assert e.midpoint == (2.5, -1.0)
        assert EdgeId(V, 0, 0).point_at(0.25) == (0.0, 0.25)

    def test_parse_and_str(self) -> None:
        e = EdgeId.parse("V@(3, -2)")
        assert e == EdgeId(V, 3, -2)
        assert str(e) == "V@(3,-2)"

    def test_parse_rejects_garbage(self) -> None:
        with pytest.raises(GridSpecError, match="Cannot parse edge"):
            EdgeId.parse("D@(0,0)")

    def test_other_end(self) -> None:
        e = EdgeId(V, 1, 1)
        assert e.other_end((1, 1)) == (1, 2)
        with pytest.raises(ValueError):
            e.other_end((0, 0))

    def test_edges_at_vertex(self) -> None:
        assert set(edges_at((0, 0))) == {
            EdgeId(H, -1, 0), EdgeId(H, 0, 0), EdgeId(V, 0, -1), EdgeId(V, 0, 0)
        }

    def test_ordering_is_lexicographic(self) -> None:
        edges = [EdgeId(V, 0, 0), EdgeId(H, 1, 0), EdgeId(H, 0, 5)]
        assert min(edges) == EdgeId(H, 0, 5)


class TestWindow:
    def test_parse_round_trip(self) -> None:
        w = Window.parse("-19:19x-1:2")
        assert (w.xmin, w.xmax, w.ymin, w.ymax) == (-19, 19, -1, 2)
        assert Window.parse(str(w)) == w

    def test_parse_accepts_spaces(self) -> None:
        assert Window.parse("0:4 x 0:3") == Window(0, 4, 0, 3)

    def test_rejects_empty_window(self) -> None:
        with pytest.raises(GridSpecError):
            Window(0, 0, 0, 3)

    def test_edge_count(self) -> None:
        w = Window(0, 3, 0, 2)
        assert w.n_edges == len(list(w.edges())) == 3 * 3 + 4 * 2

    def test_border_predicates(self) -> None:
        w = Window.centered(2)
        assert w.on_border((2, 0))
        assert not w.on_border((1, 1))
        assert w.edge_on_border(EdgeId(H, 0, 2))
        assert not w.edge_on_border(EdgeId(V, 0, 1))


# ---------------------------------------------------------------------------
# Layout
# ---------------------------------------------------------------------------


class TestLayout:
    def test_q_degrees_are_four_everywhere(self) -> None:
        layout = _q(3).layout
        assert np.all(layout.degree == 4)
        assert layout.n_components == 1

    def test_window_degree_drops_on_border(self) -> None:
        layout = _q(3).layout
        assert layout.window_degree[0, 0] == 2
        assert layout.window_degree[0, 3] == 3

    def test_removed_vertex_has_no_node(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window.centered(3))
        assert g.layout.vertex_id((0, 0)) == -1
        assert g.layout.degree_of((1, 0)) == 3

    def test_ambient_degree_sees_outside_the_window(self) -> None:
        rule_grid = make_grid(GeneratorSpec("compact", {"edges": [["H", 3, 0]]}),
                              Window.centered(3))
        assert rule_grid.layout.degree_of((3, 0)) == 3

    def test_disconnected_window_rejected(self) -> None:
        w = Window(0, 2, 0, 2)
        cut = frozenset(EdgeId(V, x, 0) for x in range(3))
        with pytest.raises(DisconnectedGridError):
            DefectedGrid(w, cut).layout.require_connected()

    def test_removed_edge_outside_window_rejected(self) -> None:
        with pytest.raises(GridSpecError, match="outside window"):
            DefectedGrid(Window(0, 2, 0, 2), frozenset({EdgeId(H, 5, 5)}))


# ---------------------------------------------------------------------------
# Defects
# ---------------------------------------------------------------------------


class TestDefects:
    def test_singleton_defect_boundary_has_six_edges(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "edge"}), Window.centered(4))
        (d,) = identify_defects(g)
        assert d.size == 1
        assert len(d.boundary) == 6
        assert not d.truncated
        assert boundary_is_connected(d)

    def test_removed_vertex_is_one_defect(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window.centered(4))
        (d,) = identify_defects(g)
        assert d.size == 4
        assert len(d.boundary) == 8

    def test_adjacent_pair_defects_stay_separate(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "adjacent_pair"}), Window.centered(5))
        defects = identify_defects(g)
        assert len(defects) == 2
        a, b = defects
        assert a.boundary & b.boundary

    def test_border_defect_is_truncated(self) -> None:
        w = Window.centered(3)
        g = DefectedGrid(w, frozenset({EdgeId(H, 0, 3)}))
        (d,) = identify_defects(g)
        assert d.truncated

    def test_random_bounded_defects_have_connected_boundaries(self) -> None:
        failures = 0
        checked = 0
        for seed in range(400):
            g = uniform_random_grid(Window.centered(7), 0.1, seed=seed, margin=2)
            if g.layout.n_components != 1:
                continue
            for d in identify_defects(g):
                if d.truncated:
                    continue
                checked += 1
                failures += not boundary_is_connected(d)
        assert checked >= 1000
        assert failures == 0


# ---------------------------------------------------------------------------
# Regions and perimeter
# ---------------------------------------------------------------------------


class TestPerimeter:
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_block_area_and_perimeter(self, k: int) -> None:
        g = _q(8)
        block = _block(k, (-k // 2, -k // 2))
        assert area(block) == 2 * k * (k + 1)
        assert perimeter(block, g).perimeter == 4 * k + 4

    def test_single_edge(self) -> None:
        report = perimeter(Region.from_edges([EdgeId(H, 0, 0)]), _q(3))
        assert report.perimeter == 6
        assert report.boundary_points == 2

    def test_half_edge_midpoint_counts_once(self) -> None:
        r = Region({EdgeId(H, 0, 0): Coverage.HALF_LOW})
        report = perimeter(r, _q(3))
        assert report.points[(0.5, 0.0)] == 1
        assert report.points[(0.0, 0.0)] == 4
        assert area(r) == 0.5

    def test_removed_edge_lowers_endpoint_weight(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "edge"}), Window.centered(4))
        r = Region.from_edges([EdgeId(V, 0, 0)])
        assert perimeter(r, g).perimeter == 5

    def test_rejects_removed_edge(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "edge"}), Window.centered(4))
        with pytest.raises(ValueError, match="not a surviving edge"):
            perimeter(Region.from_edges([EdgeId(H, 0, 0)]), g)

    def test_union_rejects_overlap(self) -> None:
        r = Region.from_edges([EdgeId(H, 0, 0)])
        with pytest.raises(ValueError, match="overlap"):
            r.union(r)

    def test_union_of_two_halves_is_full(self) -> None:
        e = EdgeId(H, 0, 0)
        merged = Region({e: Coverage.HALF_LOW}).union(Region({e: Coverage.HALF_HIGH}))
        assert merged.coverage[e] is Coverage.FULL

    def test_region_dict_round_trip(self) -> None:
        r = Region({EdgeId(H, 0, 0): Coverage.HALF_HIGH, EdgeId(V, 1, 0): Coverage.FULL})
        assert Region.from_dict(r.to_dict()) == r


# ---------------------------------------------------------------------------
# Paths and balls
# ---------------------------------------------------------------------------


class TestPathsAndBalls:
    def test_shortest_path_detours_around_vertex(self) -> None:
        g = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window.centered(4))
        path = shortest_path(g, (-1, 0), (1, 0))
        assert path.found
        assert path.length == 4

    def test_shortest_path_in_q(self) -> None:
        path = shortest_path(_q(4), (0, 0), (2, 1))
        assert path.length == 3
        assert len(path.edges()) == 3

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_ball_area_on_q(self, n: int) -> None:
        ball = metric_ball(_q(6), (0, 0), n)
        assert area(ball) == 4 * n * n

    def test_half_radius_ball(self) -> None:
        ball = metric_ball(_q(4), (0, 0), 0.5)
        assert area(ball) == 2.0
        assert all(cov is not Coverage.FULL for cov in ball.coverage.values())
        assert perimeter(ball, _q(4)).perimeter == 4

    def test_ball_reaching_border_rejected(self) -> None:
        with pytest.raises(WindowTooSmallError):
            metric_ball(_q(3), (0, 0), 4)

    def test_radius_must_be_half_integer(self) -> None:
        with pytest.raises(ValueError):
            metric_ball(_q(3), (0, 0), 0.3)

    def test_growth_ratio_on_q_is_one(self) -> None:
        n, ratio = ball_growth_ratio(_q(5), (0, 0))
        assert n == 5
        assert ratio == pytest.approx(1.0)

    def test_defects_shrink_balls(self) -> None:
        g = make_grid(GeneratorSpec("length_two_grid"), Window.centered(8))
        _, ratio = ball_growth_ratio(g, (0, 0))
        assert 0 < ratio < 1
        assert math.isfinite(ratio)
