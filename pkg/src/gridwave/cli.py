"""Command-line interface for gridwave.

Subcommands build grids, run the isoperimetric search, the path-cover
checks, the ground-state solver, the edge ODE checks and the inequality
probes. Each writes a JSON (and, for series, a CSV) artifact under the
output directory, prints a one-line summary and exits with 0 on success,
2 on invalid input and 3 when a search or solve does not succeed within
its budget. Requires the ``cli`` extra (``pip install gridwave[cli]``).
"""

from __future__ import annotations

import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Sequence

if TYPE_CHECKING:
    import click

    from gridwave.grid_core import DefectedGrid

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_FOUND = 3
DEFAULT_WINDOW = "-8:8x-8:8"
MAX_SHOW = 60


def _check_click() -> None:
    """Verify that click is installed, exiting with a helpful message if not."""
    try:
        import click  # noqa: F401
    except ImportError:
        print("CLI requires click. Install with: pip install gridwave[cli]", file=sys.stderr)
        sys.exit(1)


@dataclass
class RunConfig:
    """Everything needed to repeat a run: command, grid, parameters and seed.

    ``jobs`` caps the worker count. Results do not depend on it, so the
    copy embedded in artifacts leaves it out.
    """

    command: str
    grid: dict[str, Any] | None
    params: dict[str, Any]
    seed: int | None = None
    outputs: list[str] = field(default_factory=list)
    jobs: int = 1

    def to_dict(self, include_jobs: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "command": self.command,
            "grid": self.grid,
            "params": self.params,
            "seed": self.seed,
            "outputs": list(self.outputs),
        }
        if include_jobs:
            data["jobs"] = self.jobs
        return data


class _Run:
    """Collects artifacts and the summary of one subcommand."""

    def __init__(self, out_dir: Path, config: RunConfig) -> None:
        self.out_dir = out_dir
        self.config = config
        self.summary: dict[str, Any] = {}
        self.exit_code = EXIT_OK

    def path(self, explicit: str | None, default_name: str) -> Path:
        return Path(explicit) if explicit else self.out_dir / default_name

    def write_json(self, path: Path, payload: dict[str, Any]) -> None:
        from gridwave.artifacts import write_json

        self.config.outputs.append(str(path))
        write_json(path, {**payload, "run_config": self.config.to_dict(include_jobs=False)})

    def write_csv(self, path: Path, header: Sequence[str], rows: list[dict[str, Any]]) -> None:
        from gridwave.artifacts import write_csv

        self.config.outputs.append(str(path))
        write_csv(path, header, rows)


def _parse_params(items: Sequence[str]) -> dict[str, Any]:
    """``KEY=VALUE`` pairs; values are read as JSON when they parse."""
    import click

    params: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected KEY=VALUE, got '{item}'", param_hint="--param")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def _resolve_grids(generator: str | None, params: dict[str, Any], grid_spec: str | None,
                   windows: Sequence[str]) -> list["DefectedGrid"]:
    from gridwave.artifacts import read_json
    from gridwave.defect_zoo import GeneratorSpec, grid_from_dict, make_grid
    from gridwave.grid_core import Window

    parsed = [Window.parse(w) for w in windows]
    if grid_spec is not None:
        base = grid_from_dict(read_json(grid_spec))
        if not parsed:
            return [base]
        out = []
        for w in parsed:
            g = base.with_window(w)
            g.layout.require_connected()
            out.append(g)
        return out
    spec = GeneratorSpec(generator or "q", params)
    return [make_grid(spec, w) for w in (parsed or [Window.parse(DEFAULT_WINDOW)])]


def _single(grids: list["DefectedGrid"]) -> "DefectedGrid":
    if len(grids) != 1:
        raise ValueError(f"this command takes one --window, got {len(grids)}")
    return grids[0]


def render_grid(g: "DefectedGrid") -> str:
    """Plain-text picture: ``+`` vertices, ``---`` and ``|`` surviving edges."""
    from gridwave.grid_core import EdgeId, Orientation

    layout = g.layout
    w = g.window
    lines = []
    for y in range(w.ymax, w.ymin - 1, -1):
        row = []
        for x in range(w.xmin, w.xmax + 1):
            row.append("+" if layout.vertex_id((x, y)) >= 0 else " ")
            if x < w.xmax:
                row.append("---" if layout.is_surviving(EdgeId(Orientation.H, x, y)) else "   ")
        lines.append("".join(row).rstrip())
        if y > w.ymin:
            row = []
            for x in range(w.xmin, w.xmax + 1):
                row.append("|" if layout.is_surviving(EdgeId(Orientation.V, x, y - 1)) else " ")
                row.append("   ")
            lines.append("".join(row).rstrip())
    return "\n".join(lines)


def _make_cli() -> "click.Group":
    """Build and return the click CLI group.

    Separated from :func:`main` so that tests can invoke the CLI via
    ``CliRunner`` without going through a subprocess.
    """
    import click

    from gridwave import __version__
    from gridwave.errors import BudgetExhaustedError, GridwaveError, UnreachableOriginError

    def grid_options(fn: Callable[..., Any]) -> Callable[..., Any]:
        fn = click.option("--window", "windows", multiple=True,
                          help=f"Window as xmin:xmax x ymin:ymax, e.g. {DEFAULT_WINDOW}")(fn)
        fn = click.option("--grid-spec", type=click.Path(exists=True, dir_okay=False),
                          default=None, help="Grid JSON written by 'grid build'")(fn)
        fn = click.option("--param", "params", multiple=True,
                          help="Generator parameter KEY=VALUE (repeatable)")(fn)
        fn = click.option("--generator", "--grid", "generator", default=None,
                          help="Generator kind (default q)")(fn)
        return fn

    def out_option(fn: Callable[..., Any]) -> Callable[..., Any]:
        return click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
                            help="JSON output path (default under --out-dir)")(fn)

    def execute(ctx: click.Context, command: str, params: dict[str, Any], seed: int | None,
                grids: Callable[[], list["DefectedGrid"]] | None,
                body: Callable[[_Run, list["DefectedGrid"]], None]) -> None:
        """Run *body*, map failures to exit codes and append to the run log."""
        obj = ctx.obj
        config = RunConfig(command, None, params, seed, jobs=obj["jobs"])
        run = _Run(Path(obj["out_dir"]), config)
        start = time.perf_counter()
        status = "ok"
        try:
            resolved = grids() if grids is not None else []
            if len(resolved) == 1:
                config.grid = resolved[0].to_dict()
            body(run, resolved)
            if run.exit_code == EXIT_NOT_FOUND:
                status = "not_converged"
        except (BudgetExhaustedError, UnreachableOriginError) as exc:
            click.secho(f"Not found: {exc}", fg="yellow", err=True)
            run.exit_code, status = EXIT_NOT_FOUND, "not_converged"
        except (GridwaveError, ValueError, FileNotFoundError) as exc:
            click.secho(f"Error: {exc}", fg="red", err=True)
            run.exit_code, status = EXIT_INVALID, "invalid"
        latency = (time.perf_counter() - start) * 1000.0
        if obj.get("run_log"):
            from gridwave.runlog import RunLogger, build_record

            RunLogger(obj["run_log"]).log(build_record(
                command, {**params, "jobs": config.jobs}, seed, status, run.exit_code, latency,
                run.summary, config.outputs,
            ))
        if run.exit_code:
            sys.exit(run.exit_code)

    @click.group()
    @click.version_option(version=__version__, prog_name="gridwave")
    @click.option("--out-dir", type=click.Path(file_okay=False), default="out",
                  show_default=True, help="Directory for artifacts")
    @click.option("--run-log", type=click.Path(dir_okay=False), default=None,
                  help="Append one JSONL record per run to this file")
    @click.option("--jobs", "-j", type=click.IntRange(min=1), default=1, show_default=True,
                  help="Worker limit for independent windows, restarts, starts and masses")
    @click.option("--verbose", "-v", count=True, help="Log to stderr (-v info, -vv debug)")
    @click.pass_context
    def cli(ctx: click.Context, out_dir: str, run_log: str | None, jobs: int,
            verbose: int) -> None:
        """gridwave: defected grids, isoperimetry and NLS ground states."""
        ctx.ensure_object(dict)
        ctx.obj["out_dir"] = out_dir
        ctx.obj["run_log"] = run_log
        ctx.obj["jobs"] = jobs
        if verbose:
            logging.basicConfig(
                level=logging.DEBUG if verbose > 1 else logging.INFO,
                format="%(asctime)s %(name)s %(levelname)s %(message)s",
                stream=sys.stderr,
            )

    # ---------------------------------------------------------------- grid

    @cli.group()
    def grid() -> None:
        """Build, classify and show defected grids."""

    @grid.command("build")
    @grid_options
    @out_option
    @click.pass_context
    def grid_build(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                   grid_spec: str | None, windows: tuple[str, ...], out: str | None) -> None:
        """Materialize a grid and write its JSON description."""
        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            layout = g.layout
            run.summary = {"n_vertices": layout.n_vertices, "n_edges": layout.n_edges,
                           "n_removed": len(layout.removed_edges())}
            payload = {**g.to_dict(), **run.summary, "name": g.name}
            run.write_json(run.path(out, "grid.json"), payload)
            click.echo(f"{g.name} on {g.window}: {layout.n_edges} edges, "
                       f"{run.summary['n_removed']} removed")

        execute(ctx, "grid build", {"generator": generator, "params": kw, "windows": windows},
                None, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @grid.command("classify")
    @grid_options
    @out_option
    @click.pass_context
    def grid_classify(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                      grid_spec: str | None, windows: tuple[str, ...], out: str | None) -> None:
        """Identify defects and check their boundaries."""
        from gridwave.grid_core import boundary_is_connected, identify_defects

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            defects = identify_defects(g)
            rows = []
            for d in defects:
                row = d.to_dict()
                row["boundary_connected"] = boundary_is_connected(d) if not d.truncated else None
                rows.append(row)
            bounded = [d.size for d in defects if not d.truncated]
            run.summary = {
                "n_defects": len(defects),
                "n_truncated": len(defects) - len(bounded),
                "max_defect_size": max((d.size for d in defects), default=0),
                "max_bounded_size": max(bounded, default=0),
            }
            run.write_json(run.path(out, "classify.json"), {**run.summary, "defects": rows})
            click.echo(f"{len(defects)} defects on {g.window}, "
                       f"max size {run.summary['max_defect_size']}")

        execute(ctx, "grid classify",
                {"generator": generator, "params": kw, "windows": windows},
                None, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @grid.command("show")
    @grid_options
    @click.pass_context
    def grid_show(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                  grid_spec: str | None, windows: tuple[str, ...]) -> None:
        """Print a small window as text."""
        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            if max(g.window.nx, g.window.ny) > MAX_SHOW:
                raise ValueError(f"window {g.window} is too large to show (limit {MAX_SHOW})")
            click.echo(render_grid(g))

        execute(ctx, "grid show", {"generator": generator, "params": kw, "windows": windows},
                None, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    # ----------------------------------------------------------------- iso

    @cli.group()
    def iso() -> None:
        """Isoperimetric search."""

    @iso.command("search")
    @grid_options
    @click.option("--budget", type=int, default=5000, show_default=True,
                  help="Annealing moves per restart")
    @click.option("--restarts", type=int, default=None, help="Annealing restarts")
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None,
                  help="Series CSV path when several windows are given")
    @click.pass_context
    def iso_search(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                   grid_spec: str | None, windows: tuple[str, ...], budget: int,
                   restarts: int | None, seed: int, out: str | None,
                   csv_out: str | None) -> None:
        """Maximize sqrt(A)/P over connected regions, per window."""
        from gridwave.config import AnnealConfig
        from gridwave.isoperimetry import search_violation
        from gridwave.parallel import ordered_map

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            cfg = AnnealConfig() if restarts is None else AnnealConfig(n_restarts=restarts)
            jobs = ctx.obj["jobs"]
            if len(grids) == 1:
                reports = [search_violation(grids[0], cfg, budget, seed, jobs=jobs)]
            else:
                reports = ordered_map(lambda g: search_violation(g, cfg, budget, seed), grids, jobs)
            rows = [{"window": str(r.window), "window_size": max(r.window.nx, r.window.ny),
                     "best_ratio": r.best_ratio, "area": r.area, "perimeter": r.perimeter}
                    for r in reports]
            run.summary = {"best_ratios": [r.best_ratio for r in reports]}
            run.write_json(run.path(out, "iso_search.json"),
                           {"reports": [r.to_dict() for r in reports]})
            if len(reports) > 1:
                run.write_csv(run.path(csv_out, "iso_series.csv"),
                              ("window", "window_size", "best_ratio", "area", "perimeter"), rows)
            click.echo("best sqrt(A)/P: " + ", ".join(
                f"{r.window}={r.best_ratio:.6f}" for r in reports))

        execute(ctx, "iso search",
                {"generator": generator, "params": kw, "windows": windows, "budget": budget,
                 "restarts": restarts},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    # ------------------------------------------------------------- pcheck

    @cli.group()
    def pcheck() -> None:
        """Path-cover checks for unbounded defects."""

    @pcheck.command("route")
    @grid_options
    @click.option("--strategy", default="router", show_default=True, help="router or vertical")
    @click.option("--all-defects", is_flag=True, default=False,
                  help="Route from bounded defects too, not only truncated ones")
    @click.option("--edge-only", is_flag=True, default=False,
                  help="Count only shared edges as congestion")
    @click.option("--rounds", type=int, default=None, help="Rip-up rounds")
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.pass_context
    def pcheck_route(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                     grid_spec: str | None, windows: tuple[str, ...], strategy: str,
                     all_defects: bool, edge_only: bool, rounds: int | None, seed: int,
                     out: str | None) -> None:
        """Route one path per defect-boundary origin to the window border."""
        from gridwave.config import RouterConfig
        from gridwave.grid_core import identify_defects
        from gridwave.path_cover import boundary_origins, route_paths

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            cfg = RouterConfig(edge_only=edge_only, **({} if rounds is None else {"rounds": rounds}))
            origins = sorted({
                v for d in identify_defects(g) if all_defects or d.truncated
                for v in boundary_origins(g, d)
            })
            family = route_paths(g, origins, strategy, seed, cfg)
            run.summary = {"n_origins": len(origins), "max_congestion": family.max_congestion}
            run.write_json(run.path(out, "paths.json"), family.to_dict())
            click.echo(f"{len(origins)} origins, max congestion {family.max_congestion}")

        execute(ctx, "pcheck route",
                {"generator": generator, "params": kw, "windows": windows, "strategy": strategy,
                 "all_defects": all_defects, "edge_only": edge_only, "rounds": rounds},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @pcheck.command("census")
    @grid_options
    @click.option("--growth", type=int, default=6, show_default=True,
                  help="Window growth between the three census windows")
    @out_option
    @click.pass_context
    def pcheck_census(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                      grid_spec: str | None, windows: tuple[str, ...], growth: int,
                      out: str | None) -> None:
        """Classify defects as bounded or unbounded candidates."""
        from gridwave.path_cover import unbounded_defect_census

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            census = unbounded_defect_census(_single(grids), growth)
            run.summary = {"n_unbounded_truncated": census.n_unbounded_truncated,
                           "n_bounded": census.n_bounded,
                           "max_bounded_size": census.max_bounded_size}
            run.write_json(run.path(out, "census.json"), census.to_dict())
            click.echo(f"{census.n_unbounded_truncated} unbounded candidates, "
                       f"{census.n_bounded} bounded (max size {census.max_bounded_size})")

        execute(ctx, "pcheck census",
                {"generator": generator, "params": kw, "windows": windows, "growth": growth},
                None, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @pcheck.command("staircase-bound")
    @click.option("--bump", "bumps", type=int, multiple=True, required=True,
                  help="Bump index i >= 1 (repeatable)")
    @click.option("--route/--no-route", "do_route", default=True,
                  help="Also route the bump origins and report congestion")
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
    @click.pass_context
    def pcheck_staircase(ctx: click.Context, bumps: tuple[int, ...], do_route: bool,
                         seed: int, out: str | None, csv_out: str | None) -> None:
        """Counting bound for the staircase bumps."""
        from gridwave.defect_zoo import GeneratorSpec, make_grid, staircase_window
        from gridwave.path_cover import route_paths, staircase_counting_bound

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            rows = []
            for i in bumps:
                g = make_grid(GeneratorSpec("staircase"), staircase_window(i))
                bound = staircase_counting_bound(i, g)
                row = {**bound.to_dict(), "lower_bound": i * (i + 1) / (3 * i + 2)}
                if do_route:
                    family = route_paths(g, bound.origins, "router", seed)
                    row["congestion"] = family.max_congestion
                rows.append(row)
            run.summary = {"bumps": list(bumps), "means": [r["mean"] for r in rows]}
            run.write_json(run.path(out, "staircase.json"), {"bumps": rows})
            run.write_csv(run.path(csv_out, "staircase.csv"),
                          ("i", "required", "available", "repetitions", "mean", "lower_bound",
                           "congestion"), rows)
            for r in rows:
                click.echo(f"bump {r['i']}: available {r['available']}, mean repetition "
                           f"{r['mean']:.3f} (>= {r['lower_bound']:.3f})")

        execute(ctx, "pcheck staircase-bound", {"bumps": list(bumps), "route": do_route},
                seed, None, body)

    # ----------------------------------------------------------------- nls

    @cli.group()
    def nls() -> None:
        """Mass-constrained NLS ground states."""

    def solver_options(fn: Callable[..., Any]) -> Callable[..., Any]:
        fn = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                          default=None, help="SolverConfig JSON")(fn)
        fn = click.option("--seed", type=int, default=None)(fn)
        fn = click.option("--starts", type=int, default=None, help="Seeded starts")(fn)
        fn = click.option("--max-iters", type=int, default=None)(fn)
        fn = click.option("--mesh-m", type=int, default=None, help="Intervals per edge")(fn)
        fn = click.option("--quadrature", type=click.Choice(["trapezoid", "simpson"]),
                          default=None, help="Per-edge quadrature for mass and L^p terms")(fn)
        return fn

    def growth_options(default_grow: int) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
        def decorate(fn: Callable[..., Any]) -> Callable[..., Any]:
            fn = click.option("--max-grows", type=click.IntRange(min=0), default=4,
                              show_default=True, help="Window enlargements before giving up")(fn)
            fn = click.option("--grow", type=click.IntRange(min=0), default=default_grow,
                              show_default=True,
                              help="Enlarge the window by this much while the border "
                                   "carries mass (0 disables)")(fn)
            return fn
        return decorate

    def solver_config(config_path: str | None, **overrides: Any) -> Any:
        from gridwave.config import SolverConfig, load_config

        cfg = load_config(config_path, SolverConfig) if config_path else SolverConfig()
        names = {"mesh_m": "mesh_m", "max_iters": "max_iters", "starts": "n_starts",
                 "seed": "seed", "p": "p", "mu": "mu", "quadrature": "quadrature"}
        changes = {names[k]: v for k, v in overrides.items() if v is not None}
        return cfg.replace(**changes) if changes else cfg

    @nls.command("solve")
    @grid_options
    @solver_options
    @growth_options(0)
    @click.option("--p", "p", type=float, default=None, help="Exponent, 2 < p < 6")
    @click.option("--mu", type=float, default=None, help="Mass")
    @click.option("--dump-field", is_flag=True, default=False,
                  help="Include the per-edge samples of the minimizer")
    @out_option
    @click.pass_context
    def nls_solve(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                  grid_spec: str | None, windows: tuple[str, ...], config_path: str | None,
                  seed: int | None, starts: int | None, max_iters: int | None,
                  mesh_m: int | None, quadrature: str | None, grow: int, max_grows: int,
                  p: float | None, mu: float | None, dump_field: bool,
                  out: str | None) -> None:
        """Minimize the energy at fixed mass.

        Exits with 3 when the solve does not converge or, after any window
        growth, the border still carries mass.
        """
        from gridwave.nls_solver import (
            edge_energy_profile,
            lambda_identity_check,
            solve_adequate,
            solve_ground_state,
        )

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            cfg = solver_config(config_path, mesh_m=mesh_m, max_iters=max_iters,
                                starts=starts, seed=seed, p=p, mu=mu, quadrature=quadrature)
            run.config.params["solver"] = cfg.to_dict()
            g = _single(grids)
            jobs = ctx.obj["jobs"]
            if grow:
                res = solve_adequate(g, cfg=cfg, grow=grow, max_grows=max_grows, jobs=jobs)
            else:
                res = solve_ground_state(g, cfg=cfg, jobs=jobs)
            payload = res.to_dict(include_field=dump_field)
            payload["lambda_identity_gap"] = lambda_identity_check(res, cfg.p, cfg.mu)
            payload["edge_energy"] = edge_energy_profile(res).to_dict()
            run.summary = {"energy": res.energy, "lambda": res.lam, "converged": res.converged,
                           "window_adequate": res.window_adequate}
            run.write_json(run.path(out, "ground_state.json"), payload)
            click.echo(f"energy {res.energy:.8f}, lambda {res.lam:.6f}, "
                       f"converged={res.converged}, iterations {res.iterations}, "
                       f"window {res.window} adequate={res.window_adequate}")
            if not (res.converged and res.window_adequate):
                run.exit_code = EXIT_NOT_FOUND

        execute(ctx, "nls solve",
                {"generator": generator, "params": kw, "windows": windows, "grow": grow,
                 "max_grows": max_grows},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @nls.command("compare")
    @grid_options
    @solver_options
    @growth_options(4)
    @click.option("--p", "p", type=float, default=None, help="Exponent, 2 < p < 6")
    @click.option("--mu", type=float, default=None, help="Mass")
    @out_option
    @click.pass_context
    def nls_compare(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                    grid_spec: str | None, windows: tuple[str, ...], config_path: str | None,
                    seed: int | None, starts: int | None, max_iters: int | None,
                    mesh_m: int | None, quadrature: str | None, grow: int, max_grows: int,
                    p: float | None, mu: float | None, out: str | None) -> None:
        """Ground-state energy of the defected grid against Q on the same window.

        Exits with 3 when no window within the growth budget is adequate
        for both solves.
        """
        from gridwave.nls_solver import compare_levels

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            cfg = solver_config(config_path, mesh_m=mesh_m, max_iters=max_iters,
                                starts=starts, seed=seed, p=p, mu=mu, quadrature=quadrature)
            run.config.params["solver"] = cfg.to_dict()
            comparison = compare_levels(_single(grids), cfg=cfg, grow=max(grow, 1),
                                        max_grows=max_grows if grow else 0,
                                        jobs=ctx.obj["jobs"])
            run.summary = {"energy_q": comparison.on_q.energy,
                           "energy_g": comparison.on_g.energy,
                           "gap": comparison.gap, "adequate": comparison.adequate}
            run.write_json(run.path(out, "level_comparison.json"), comparison.to_dict())
            click.echo(f"Q {comparison.on_q.energy:.8f}, defected {comparison.on_g.energy:.8f}, "
                       f"gap {comparison.gap:.3e}, window {comparison.window} "
                       f"adequate={comparison.adequate}")
            if not comparison.adequate:
                run.exit_code = EXIT_NOT_FOUND

        execute(ctx, "nls compare",
                {"generator": generator, "params": kw, "windows": windows, "grow": grow,
                 "max_grows": max_grows},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @nls.command("critical-mass")
    @grid_options
    @solver_options
    @click.option("--p", "p", type=float, required=True, help="Exponent, 4 <= p < 6")
    @click.option("--rel-tol", type=float, default=0.005, show_default=True)
    @out_option
    @click.pass_context
    def nls_critical(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                     grid_spec: str | None, windows: tuple[str, ...], config_path: str | None,
                     seed: int | None, starts: int | None, max_iters: int | None,
                     mesh_m: int | None, quadrature: str | None, p: float, rel_tol: float,
                     out: str | None) -> None:
        """Estimate the critical mass by bisection and from the GN ratio."""
        from gridwave.nls_solver import estimate_critical_mass

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            cfg = solver_config(config_path, mesh_m=mesh_m, max_iters=max_iters,
                                starts=starts, seed=seed, p=p, quadrature=quadrature)
            run.config.params["solver"] = cfg.to_dict()
            est = estimate_critical_mass(_single(grids), p, cfg, rel_tol, jobs=ctx.obj["jobs"])
            run.summary = {"mu_star_bisect": est.mu_star_bisect, "mu_star_gn": est.mu_star_gn}
            run.write_json(run.path(out, "critical_mass.json"), est.to_dict())
            click.echo(f"mu* (bisection) {est.mu_star_bisect:.6f}, "
                       f"mu* (GN) {est.mu_star_gn:.6f}")

        execute(ctx, "nls critical-mass",
                {"generator": generator, "params": kw, "windows": windows, "p": p,
                 "rel_tol": rel_tol},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @nls.command("sweep")
    @grid_options
    @solver_options
    @click.option("--p", "p", type=float, required=True)
    @click.option("--mu", "mus", type=float, multiple=True, required=True,
                  help="Mass (repeatable)")
    @out_option
    @click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
    @click.pass_context
    def nls_sweep(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                  grid_spec: str | None, windows: tuple[str, ...], config_path: str | None,
                  seed: int | None, starts: int | None, max_iters: int | None,
                  mesh_m: int | None, quadrature: str | None, p: float,
                  mus: tuple[float, ...], out: str | None, csv_out: str | None) -> None:
        """Energy as a function of mass."""
        from gridwave.nls_solver import energy_sweep

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            cfg = solver_config(config_path, mesh_m=mesh_m, max_iters=max_iters,
                                starts=starts, seed=seed, p=p, quadrature=quadrature)
            run.config.params["solver"] = cfg.to_dict()
            rows = energy_sweep(_single(grids), p, list(mus), cfg, jobs=ctx.obj["jobs"])
            run.summary = {"energies": [r["energy"] for r in rows]}
            run.write_json(run.path(out, "energy_sweep.json"), {"p": p, "rows": rows})
            run.write_csv(run.path(csv_out, "energy_sweep.csv"),
                          ("mu", "energy", "level", "lambda", "converged", "window_adequate"),
                          rows)
            for r in rows:
                click.echo(f"mu {r['mu']:g}: energy {r['energy']:.8f}")

        execute(ctx, "nls sweep",
                {"generator": generator, "params": kw, "windows": windows, "p": p,
                 "mus": list(mus)},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    # ----------------------------------------------------------------- ode

    @cli.group()
    def ode() -> None:
        """Single-edge Cauchy problem checks."""

    @ode.command("verify")
    @click.option("--p", "p", type=float, default=3.0, show_default=True)
    @click.option("--lam", type=float, default=1.0, show_default=True)
    @click.option("--a", "a", type=float, default=None, help="u(0); defaults to the threshold")
    @click.option("--b", "b", type=float, default=None, help="u'(0); defaults to -a sqrt(lam)")
    @click.option("--n", "n", type=int, default=1000, show_default=True, help="RK4 steps")
    @click.option("--samples", type=int, default=100, show_default=True,
                  help="Random small-data problems")
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.pass_context
    def ode_verify(ctx: click.Context, p: float, lam: float, a: float | None, b: float | None,
                   n: int, samples: int, seed: int, out: str | None) -> None:
        """Envelope bounds, energy identity, discriminant and small-data positivity."""
        import numpy as np

        from gridwave.config import SmallDataConfig
        from gridwave.edge_ode import (
            IvpSpec,
            check_lower_bound,
            check_upper_bound,
            edge_energy_identity,
            f_lambda_positivity,
            integrate_ivp,
            quadrature_energy,
            sample_small_data,
            small_data_edge_positivity,
        )

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            small = SmallDataConfig()
            a0 = a if a is not None else small.threshold(lam, p)
            b0 = b if b is not None else -a0 * math.sqrt(lam)
            spec = IvpSpec(p, lam, a0, b0)
            trace = integrate_ivp(spec, n)
            single: dict[str, Any] = {**spec.to_dict(), "positive": trace.positive,
                                      "error_estimate": trace.error_estimate,
                                      "hamiltonian_drift": trace.hamiltonian_drift}
            if trace.positive:
                single["edge_energy"] = quadrature_energy(trace, p)
                single["upper_violation"] = check_upper_bound(trace, spec)
                single["lower_violation"] = (check_lower_bound(trace, spec)
                                             if trace.delta < lam else None)
                single["energy_identity_gap"] = edge_energy_identity(trace, spec)
            disc = f_lambda_positivity(np.logspace(-2.0, 2.0, 41))
            batch = small_data_edge_positivity(
                sample_small_data(samples, lam, p, seed, small), small, n)
            run.summary = {"discriminant_margin": disc.min_margin,
                           "small_data_min_energy": batch.min_energy}
            run.write_json(run.path(out, "ode_verify.json"),
                           {"ivp": single, "discriminant": disc.to_dict(),
                            "small_data": batch.to_dict()})
            click.echo(f"discriminant margin {disc.min_margin:.3e}, small-data min energy "
                       f"{batch.min_energy:.3e} over {batch.n_checked} problems")

        execute(ctx, "ode verify",
                {"p": p, "lam": lam, "a": a, "b": b, "n": n, "samples": samples}, seed,
                None, body)

    @ode.command("sweep")
    @click.option("--p", "ps", type=float, multiple=True, default=(3.0,), show_default=True)
    @click.option("--lam", "lams", type=float, multiple=True, default=(1.0,), show_default=True)
    @click.option("--a", "as_", type=float, multiple=True, default=(0.01,), show_default=True)
    @click.option("--b", "bs", type=float, multiple=True, default=(0.0,), show_default=True)
    @click.option("--n", "n", type=int, default=1000, show_default=True)
    @click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
    @click.pass_context
    def ode_sweep(ctx: click.Context, ps: tuple[float, ...], lams: tuple[float, ...],
                  as_: tuple[float, ...], bs: tuple[float, ...], n: int,
                  csv_out: str | None) -> None:
        """Edge energy and envelope violations over a parameter grid."""
        from gridwave.edge_ode import IvpSpec, ivp_sweep

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            specs = [IvpSpec(p, lam, a, b) for p in ps for lam in lams for a in as_ for b in bs]
            rows = ivp_sweep(specs, n, jobs=ctx.obj["jobs"])
            run.summary = {"rows": len(rows)}
            run.write_csv(run.path(csv_out, "ode_sweep.csv"),
                          ("p", "lambda", "a", "b", "positive", "edge_energy",
                           "bound_violation", "lower_violation"), rows)
            click.echo(f"{len(rows)} problems integrated")

        execute(ctx, "ode sweep",
                {"p": list(ps), "lam": list(lams), "a": list(as_), "b": list(bs), "n": n},
                None, None, body)

    # ---------------------------------------------------------------- ineq

    @cli.group()
    def ineq() -> None:
        """Functional-inequality probes."""

    @ineq.command("probe")
    @grid_options
    @click.option("--inequality", "inequality", default="s2d", show_default=True,
                  help="s1d, s2d, gn1d, gn2d or gn_int")
    @click.option("--family", default="tent", show_default=True,
                  help="tent, exponential, bump or iterates")
    @click.option("--size", type=int, default=50, show_default=True)
    @click.option("--mesh-m", type=int, default=8, show_default=True)
    @click.option("--p", "p", type=float, default=4.0, show_default=True)
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.option("--csv", "csv_out", type=click.Path(dir_okay=False), default=None)
    @click.pass_context
    def ineq_probe(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                   grid_spec: str | None, windows: tuple[str, ...], inequality: str,
                   family: str, size: int, mesh_m: int, p: float, seed: int,
                   out: str | None, csv_out: str | None) -> None:
        """Best ratio of an inequality over a seeded family, per window."""
        from gridwave.errors import GridSpecError
        from gridwave.inequality_lab import (
            FamilyKind,
            FamilySpec,
            InequalityId,
            probe_inequality,
        )
        from gridwave.parallel import ordered_map

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            known_ineq = [i.value for i in InequalityId]
            if inequality not in known_ineq:
                raise GridSpecError.unknown("inequality", inequality, known_ineq)
            known_family = [f.value for f in FamilyKind]
            if family not in known_family:
                raise GridSpecError.unknown("family", family, known_family)
            spec = FamilySpec(family, size=size, mesh_m=mesh_m)
            reports = ordered_map(lambda g: probe_inequality(inequality, g, spec, seed, p), grids,
                                  ctx.obj["jobs"])
            rows = [{"window": str(r.window), "best_ratio": r.best_ratio,
                     "witness_id": r.witness_id} for r in reports]
            run.summary = {"best_ratios": [r.best_ratio for r in reports]}
            run.write_json(run.path(out, "ineq_probe.json"),
                           {"reports": [r.to_dict() for r in reports]})
            if len(reports) > 1:
                run.write_csv(run.path(csv_out, f"ineq_{inequality}.csv"),
                              ("window", "best_ratio", "witness_id"), rows)
            click.echo(f"{inequality}: " + ", ".join(
                f"{r.window}={r.best_ratio:.6f}" for r in reports))

        execute(ctx, "ineq probe",
                {"generator": generator, "params": kw, "windows": windows,
                 "inequality": inequality, "family": family, "size": size, "mesh_m": mesh_m,
                 "p": p},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @ineq.command("extend")
    @grid_options
    @click.option("--family", default="bump", show_default=True,
                  help="Family the fields are drawn from")
    @click.option("--size", type=int, default=20, show_default=True, help="Fields to extend")
    @click.option("--mesh-m", type=int, default=8, show_default=True)
    @click.option("--seed", type=int, default=0, show_default=True)
    @out_option
    @click.pass_context
    def ineq_extend(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                    grid_spec: str | None, windows: tuple[str, ...], family: str, size: int,
                    mesh_m: int, seed: int, out: str | None) -> None:
        """Fill bounded defects and compare ||v'||_1 with ||u'||_1."""
        from gridwave.inequality_lab import FamilySpec, extend_field, family_members

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            members = family_members(g, FamilySpec(family, size=size, mesh_m=mesh_m), seed)
            if not members:
                raise ValueError(f"family {family} is empty on {g.window}")
            results = [extend_field(u) for _, u in members]
            ratios = [r.ratio for r in results if r.ratio is not None]
            constant = results[0].constant
            run.summary = {"constant": constant, "max_ratio": max(ratios, default=None),
                           "max_continuity_gap": max(r.continuity_gap for r in results)}
            run.write_json(run.path(out, "extension.json"),
                           {**run.summary, "fields": [r.to_dict() for r in results]})
            click.echo(f"{len(results)} fields: max ratio {run.summary['max_ratio']}, "
                       f"C = {constant:g}")

        execute(ctx, "ineq extend",
                {"generator": generator, "params": kw, "windows": windows, "family": family,
                 "size": size, "mesh_m": mesh_m},
                seed, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    @ineq.command("exp-trial")
    @grid_options
    @click.option("--eps", type=float, default=0.5, show_default=True)
    @click.option("--mu", type=float, default=1.0, show_default=True)
    @click.option("--p", "p", type=float, default=3.0, show_default=True)
    @click.option("--probe/--no-probe", default=False,
                  help="Also sweep eps down until the energy turns negative")
    @out_option
    @click.pass_context
    def ineq_exp_trial(ctx: click.Context, generator: str | None, params: tuple[str, ...],
                       grid_spec: str | None, windows: tuple[str, ...], eps: float, mu: float,
                       p: float, probe: bool, out: str | None) -> None:
        """Exact norms of the exponential trial field, optionally the negativity sweep."""
        from gridwave.inequality_lab import exp_trial_norms, z2_negativity_probe

        kw = _parse_params(params)

        def body(run: _Run, grids: list["DefectedGrid"]) -> None:
            g = _single(grids)
            payload: dict[str, Any] = {"eps": eps, "mu": mu, "p": p,
                                       "norms": exp_trial_norms(g, eps, mu, p)}
            run.summary = {"mass": payload["norms"]["mass"]}
            if probe:
                try:
                    result = z2_negativity_probe(g, p, mu)
                except BudgetExhaustedError as exc:
                    payload["probe"] = exc.result.to_dict() if exc.result else None
                    run.write_json(run.path(out, "exp_trial.json"), payload)
                    raise
                payload["probe"] = result.to_dict()
                run.summary["eps_star"] = result.eps_star
            run.write_json(run.path(out, "exp_trial.json"), payload)
            line = f"mass {payload['norms']['mass']:.12f}"
            if probe:
                line += f", eps* {run.summary['eps_star']:.4f}"
            click.echo(line)

        execute(ctx, "ineq exp-trial",
                {"generator": generator, "params": kw, "windows": windows, "eps": eps,
                 "mu": mu, "p": p, "probe": probe},
                None, lambda: _resolve_grids(generator, kw, grid_spec, windows), body)

    # ---------------------------------------------------------------- runs

    @cli.command("runs")
    @click.argument("log_file", type=click.Path(exists=True))
    @click.option("--json-output", is_flag=True, default=False, help="Output the summary as JSON")
    @click.option("--tail", "tail_n", type=int, default=None,
                  help="Show the last N runs instead of the summary")
    def runs_cmd(log_file: str, json_output: bool, tail_n: int | None) -> None:
        """Summarize a JSONL run log written with --run-log."""
        from gridwave.runlog import iter_records, summarize

        records = list(iter_records(log_file))
        if not records:
            click.echo("Run log is empty.")
            return

        if tail_n is not None:
            for record in records[-tail_n:]:
                click.echo(
                    f"{record.timestamp}  {record.command:<22} {record.status:<14}"
                    f"{record.latency_ms:>10.2f}ms  exit {record.exit_code}"
                )
            return

        stats = summarize(records)
        if json_output:
            click.echo(json.dumps(stats, indent=2))
            return

        click.secho("Run log summary", bold=True)
        click.echo(f"  Runs:        {stats['total_runs']}")
        click.echo(f"  Failed:      {stats['failed']}")
        for command, count in sorted(stats["by_command"].items()):
            click.echo(f"    {command}: {count}")
        click.echo(
            f"  Latency:     avg {stats['avg_latency_ms']}ms, max {stats['max_latency_ms']}ms"
        )

    return cli


def main() -> None:
    """Entry point for the gridwave CLI."""
    _check_click()
    cli = _make_cli()
    cli()


if __name__ == "__main__":
    main()
