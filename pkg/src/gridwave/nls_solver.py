"""Mass-constrained NLS ground states on a window of a defected grid.

Minimizes ``E(u) = 1/2 ||u'||^2 - 1/p ||u||_p^p`` over piecewise-linear
fields of mass ``||u||^2 = mu`` that vanish on the window border. Each
iteration takes a Sobolev-preconditioned gradient step projected onto the
tangent space of the mass sphere, backtracks until the energy decreases
enough, and rescales back to mass ``mu``.

Example::

    from gridwave.config import SolverConfig
    from gridwave.nls_solver import solve_ground_state

    res = solve_ground_state(grid, p=3.0, mu=1.0, cfg=SolverConfig(mesh_m=8))
    print(res.energy, res.lam, res.converged)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import factorized

from gridwave.config import SolverConfig
from gridwave.errors import BudgetExhaustedError, FieldError
from gridwave.fields import EdgeMesh, Field
from gridwave.grid_core import DefectedGrid, EdgeId, Vertex, Window
from gridwave.parallel import check_jobs, ordered_map

logger = logging.getLogger(__name__)

Callback = Callable[[Field], None]


def energy(u: Field, p: float) -> float:
    """``1/2 ||u'||^2 - 1/p ||u||_p^p`` by lumped quadrature.

    Raises:
        ValueError: If ``p <= 2``.
    """
    if p <= 2:
        raise ValueError(f"p must be > 2, got {p}")
    return u.energy(p)


def energy_gradient(u: Field, p: float) -> np.ndarray:
    """Euclidean gradient ``K u - M |u|^(p-2) u`` of :func:`energy` in nodal values."""
    mesh = u.mesh
    nonlinear = np.abs(u.values) ** (p - 2) * u.values
    out: np.ndarray = mesh.stiffness @ u.values - mesh.mass_diag * nonlinear
    return out


def gn_ratio(u: Field, p: float) -> float:
    """``||u||_p^p / (||u||^(p-2) ||u'||^2)``, the quantity bounded by the GN constant."""
    grad = u.grad_sq()
    mass = u.mass()
    if grad <= 0 or mass <= 0:
        return 0.0
    return u.lp_power(p) / (mass ** ((p - 2) / 2) * grad)


def bump_field(mesh: EdgeMesh, center: Vertex, width: float) -> Field:
    """``exp(-|x - c|_1 / width)``, zero on the border."""
    cx, cy = center
    values = np.exp(-(np.abs(mesh.x - cx) + np.abs(mesh.y - cy)) / width)
    values[mesh.dirichlet] = 0.0
    return Field(mesh, values)


@dataclass
class GroundStateResult:
    """Best minimizer found, with its diagnostics.

    Attributes:
        u: Nonnegative minimizer.
        energy: ``E(u)`` on the window.
        lam: Multiplier from interior nodes, ``sum w u (u'' + |u|^(p-2) u) / sum w u^2``
            with the quadrature weights ``w``.
        el_residual: Largest ``|u'' + |u|^(p-2) u - lam u|`` over interior nodes.
        kirchhoff_residual: Largest flux imbalance over free vertices.
        iterations: Iterations of the best start.
        converged: Both residuals fell below ``tol_grad``.
        p: Nonlinearity exponent.
        mu: Prescribed mass.
        level: ``energy`` clipped to 0 when above ``-level_tol``.
        vanishing: The energy is not negative within ``level_tol``.
        border_mass: Mass within distance 1 of the window border.
        window_adequate: ``border_mass`` is below ``border_mass_tol``.
        gn_ratio_max: Largest :func:`gn_ratio` over all iterates of all starts.
        start_energies: Final energy of each start.
        gn_witness: Iterate attaining ``gn_ratio_max``.
    """

    u: Field
    energy: float
    lam: float
    el_residual: float
    kirchhoff_residual: float
    iterations: int
    converged: bool
    p: float
    mu: float
    level: float = 0.0
    vanishing: bool = False
    border_mass: float = 0.0
    window_adequate: bool = True
    gn_ratio_max: float = 0.0
    start_energies: tuple[float, ...] = ()
    gn_witness: Field | None = field(default=None, repr=False)

    @property
    def window(self) -> Window:
        return self.u.mesh.layout.window

    @property
    def spread(self) -> float:
        if not self.start_energies:
            return 0.0
        return max(self.start_energies) - min(self.start_energies)

    def to_dict(self, include_field: bool = False) -> dict[str, Any]:
        data: dict[str, Any] = {
            "p": self.p,
            "mu": self.mu,
            "window": self.window.to_dict(),
            "energy": self.energy,
            "lambda": self.lam,
            "el_residual": self.el_residual,
            "kirchhoff_residual": self.kirchhoff_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "level": self.level,
            "vanishing": self.vanishing,
            "border_mass": self.border_mass,
            "window_adequate": self.window_adequate,
            "gn_ratio_max": self.gn_ratio_max,
            "start_energies": list(self.start_energies),
            "spread": self.spread,
            "mass": self.u.mass(),
        }
        if include_field:
            data["field"] = self.u.to_dict()
        return data


def _border_band(mesh: EdgeMesh) -> np.ndarray:
    w = mesh.layout.window
    gap = np.minimum.reduce([mesh.x - w.xmin, w.xmax - mesh.x, mesh.y - w.ymin, w.ymax - mesh.y])
    band: np.ndarray = gap <= 1.0
    return band


def diagnose(u: Field, p: float, mu: float, cfg: SolverConfig | None = None,
             iterations: int = 0) -> GroundStateResult:
    """Residuals, multiplier and flags of an arbitrary field.

    Used for solver output, and for checking fields that did not come
    from the solver.
    """
    cfg = cfg or SolverConfig(p=p, mu=mu)
    mesh = u.mesh
    vals = u.values
    nonlinear = np.abs(vals) ** (p - 2) * vals
    ku = mesh.stiffness @ vals
    mu_vals = mesh.mass_diag * vals
    grad = ku - mesh.mass_diag * nonlinear
    denom = float(vals @ mu_vals)
    lam_proj = -float(vals @ grad) / denom if denom > 0 else 0.0
    residual = grad + lam_proj * mu_vals

    interior = mesh.free & ~mesh.is_vertex
    vertex = mesh.free & mesh.is_vertex
    weights = mesh.mass_diag[interior]
    weight = float(np.sum(weights * vals[interior] ** 2))
    if weight > 0:
        lam = float(np.sum(vals[interior] * (-ku[interior] + weights * nonlinear[interior])))
        lam /= weight
    else:
        lam = 0.0
    el = float(np.max(np.abs(residual[interior]) / weights)) if interior.any() else 0.0
    kirch = float(np.max(np.abs(residual[vertex]))) if vertex.any() else 0.0

    e = u.energy(p)
    border_mass = float(mesh.mass_diag[_border_band(mesh)] @ vals[_border_band(mesh)] ** 2)
    vanishing = e > -cfg.level_tol
    return GroundStateResult(
        u=u,
        energy=e,
        lam=lam,
        el_residual=el,
        kirchhoff_residual=kirch,
        iterations=iterations,
        converged=el < cfg.tol_grad and kirch < cfg.tol_grad,
        p=p,
        mu=mu,
        level=0.0 if vanishing else e,
        vanishing=vanishing,
        border_mass=border_mass,
        window_adequate=border_mass < cfg.border_mass_tol,
        gn_ratio_max=gn_ratio(u, p),
    )


class _Flow:
    """Projected Sobolev-gradient descent on one mesh."""

    def __init__(self, mesh: EdgeMesh, cfg: SolverConfig) -> None:
        self.mesh = mesh
        self.cfg = cfg
        free = mesh.free
        self.free = free
        k = mesh.stiffness.tocsr()[free][:, free]
        self.k = k.tocsr()
        self.m = mesh.mass_diag[free]
        precond = (k + cfg.preconditioner_shift * sparse.diags(self.m)).tocsc()
        self.solve = factorized(precond)
        self.best_gn = 0.0
        self.best_gn_values: np.ndarray | None = None

    def field(self, u: np.ndarray) -> Field:
        full = np.zeros(self.mesh.n_nodes)
        full[self.free] = u
        return Field(self.mesh, full)

    def normalize(self, u: np.ndarray) -> np.ndarray:
        mass = float(self.m @ (u * u))
        if mass <= 0:
            raise FieldError("Cannot normalize a field with zero mass")
        out: np.ndarray = u * math.sqrt(self.cfg.mu / mass)
        return out

    def energy(self, u: np.ndarray) -> float:
        p = self.cfg.p
        return 0.5 * float(u @ (self.k @ u)) - float(self.m @ np.abs(u) ** p) / p

    def gradient(self, u: np.ndarray) -> np.ndarray:
        p = self.cfg.p
        out: np.ndarray = self.k @ u - self.m * (np.abs(u) ** (p - 2) * u)
        return out

    def _track_gn(self, u: np.ndarray) -> None:
        p = self.cfg.p
        grad = float(u @ (self.k @ u))
        if grad <= 0:
            return
        ratio = float(self.m @ np.abs(u) ** p) / (self.cfg.mu ** ((p - 2) / 2) * grad)
        if ratio > self.best_gn:
            self.best_gn = ratio
            self.best_gn_values = u.copy()

    def run(self, u0: np.ndarray, stop_below: float | None = None,
            on_iterate: Callback | None = None) -> tuple[np.ndarray, int]:
        cfg = self.cfg
        interior = ~self.mesh.is_vertex[self.free]
        weights = self.m[interior]
        u = self.normalize(u0)
        e = self.energy(u)
        tau = 1.0
        it = 0
        for it in range(1, cfg.max_iters + 1):
            self._track_gn(u)
            if on_iterate is not None:
                on_iterate(self.field(u))
            g = self.gradient(u)
            mu_u = self.m * u
            lam = -float(u @ g) / float(u @ mu_u)
            r = g + lam * mu_u
            el = float(np.max(np.abs(r[interior]) / weights)) if interior.any() else 0.0
            kirch = float(np.max(np.abs(r[~interior]))) if (~interior).any() else 0.0
            if el < cfg.tol_grad and kirch < cfg.tol_grad:
                break
            if stop_below is not None and e < stop_below:
                break
            z = self.solve(g)
            w = self.solve(mu_u)
            d = -(z - (float(mu_u @ z) / float(mu_u @ w)) * w)
            slope = float(g @ d)
            if slope >= 0:
                logger.debug("iteration %d: no descent direction", it)
                break
            accepted = False
            for _ in range(40):
                trial = self.normalize(u + tau * d)
                e_trial = self.energy(trial)
                if e_trial <= e + cfg.armijo * tau * slope:
                    accepted = True
                    break
                tau *= 0.5
            if not accepted:
                logger.debug("iteration %d: line search stalled at energy %.3e", it, e)
                break
            u, e = trial, e_trial
            tau = min(2.0 * tau, 4.0)
            if it % 200 == 0:
                logger.debug("iteration %d: energy %.10f el %.2e kirchhoff %.2e", it, e, el, kirch)
        self._track_gn(u)
        return u, it


def _start_centers(g: DefectedGrid, n: int, seed: int) -> list[Vertex]:
    layout = g.layout
    w = g.window
    cx, cy = (w.xmin + w.xmax) // 2, (w.ymin + w.ymax) // 2
    spread = max(1, min(w.nx, w.ny) // 4)
    rng = np.random.default_rng(seed)
    interior = np.nonzero(~layout.border)[0]
    if interior.size == 0:
        raise FieldError(f"Window {w} has no interior vertex to start from")
    xy = layout.vertex_xy[interior]
    centers = []
    for k in range(n):
        tx, ty = (cx, cy) if k == 0 else (
            cx + int(rng.integers(-spread, spread + 1)), cy + int(rng.integers(-spread, spread + 1))
        )
        nearest = int(np.argmin(np.abs(xy[:, 0] - tx) + np.abs(xy[:, 1] - ty)))
        centers.append((int(xy[nearest, 0]), int(xy[nearest, 1])))
    return centers


def solve_ground_state(
    g: DefectedGrid,
    p: float | None = None,
    mu: float | None = None,
    cfg: SolverConfig | None = None,
    *,
    init: Field | None = None,
    stop_below: float | None = None,
    on_iterate: Callback | None = None,
    jobs: int = 1,
) -> GroundStateResult:
    """Minimize the energy at mass *mu* on the window of *g*.

    Args:
        g: Connected grid; its border carries zero boundary values.
        p: Exponent, overriding ``cfg.p``.
        mu: Mass, overriding ``cfg.mu``.
        cfg: Solver settings (mesh, tolerances, starts, seed).
        init: Extra starting field, tried before the seeded bumps. A field
            on another window or defect set is transferred first.
        stop_below: Stop as soon as a start ends below this energy; later
            starts are not taken into account.
        on_iterate: Called with every iterate. Starts then run one after
            another whatever *jobs* says.
        jobs: Starts solved concurrently.

    Returns:
        The lowest-energy result over all starts. ``converged`` is false
        when the iteration budget ran out first.
    """
    check_jobs(jobs)
    cfg = cfg or SolverConfig()
    changes: dict[str, Any] = {}
    if p is not None:
        changes["p"] = p
    if mu is not None:
        changes["mu"] = mu
    if changes:
        cfg = cfg.replace(**changes)
    g.layout.require_connected()
    mesh = EdgeMesh(g.layout, cfg.mesh_m, cfg.quadrature)

    starts: list[np.ndarray] = []
    if init is not None:
        if init.mesh.layout is not mesh.layout:
            init = init.transfer(mesh)
        starts.append(init.values[mesh.free])
    for center in _start_centers(g, cfg.n_starts, cfg.seed):
        starts.append(bump_field(mesh, center, cfg.bump_width).values[mesh.free])

    def run_start(u0: np.ndarray) -> tuple[_Flow, np.ndarray, int]:
        flow = _Flow(mesh, cfg)
        u, iters = flow.run(u0, stop_below, on_iterate)
        if float(np.sum(u)) < 0:
            u = -u
        return flow, u, iters

    if jobs == 1 or on_iterate is not None:
        outcomes: Iterable[tuple[_Flow, np.ndarray, int]] = map(run_start, starts)
    else:
        outcomes = ordered_map(run_start, starts, jobs)

    best: GroundStateResult | None = None
    energies = []
    best_gn = 0.0
    witness: Field | None = None
    for k, (flow, u, iters) in enumerate(outcomes):
        res = diagnose(flow.field(u), cfg.p, cfg.mu, cfg, iters)
        energies.append(res.energy)
        logger.debug(
            "start %d: energy %.10f after %d iterations (converged=%s)",
            k, res.energy, iters, res.converged,
        )
        if flow.best_gn > best_gn and flow.best_gn_values is not None:
            best_gn = flow.best_gn
            witness = flow.field(flow.best_gn_values)
        if best is None or res.energy < best.energy:
            best = res
        if stop_below is not None and res.energy < stop_below:
            break
    assert best is not None
    best.start_energies = tuple(energies)
    best.gn_ratio_max = best_gn
    best.gn_witness = witness
    logger.info(
        "ground state p=%g mu=%g on %s: energy %.8f lambda %.6f converged=%s",
        cfg.p, cfg.mu, g.window, best.energy, best.lam, best.converged,
    )
    if not best.window_adequate:
        logger.info("border mass %.2e exceeds %.0e; enlarge the window",
                    best.border_mass, cfg.border_mass_tol)
    return best


def solve_adequate(
    g: DefectedGrid,
    p: float | None = None,
    mu: float | None = None,
    cfg: SolverConfig | None = None,
    *,
    grow: int = 4,
    max_grows: int = 4,
    init: Field | None = None,
    jobs: int = 1,
) -> GroundStateResult:
    """Solve, then enlarge the window by *grow* until the border carries no mass.

    Each larger window starts from the previous minimizer. The last result
    is returned; its ``window_adequate`` is false only when *max_grows*
    enlargements were not enough.
    """
    if grow < 1:
        raise ValueError(f"grow must be >= 1, got {grow}")
    if max_grows < 0:
        raise ValueError(f"max_grows must be >= 0, got {max_grows}")
    res = solve_ground_state(g, p, mu, cfg, init=init, jobs=jobs)
    for _ in range(max_grows):
        if res.window_adequate:
            break
        g = g.with_window(g.window.expand(grow))
        logger.info("border mass %.2e; solving again on %s", res.border_mass, g.window)
        res = solve_ground_state(g, p, mu, cfg, init=res.u, jobs=jobs)
    return res


def lambda_identity_check(res: GroundStateResult, p: float, mu: float) -> float:
    """``|lam - (-2E/mu + (1 - 2/p) ||u||_p^p / mu)|``."""
    e = energy(res.u, p)
    n = res.u.lp_power(p)
    return abs(res.lam - (-2.0 * e / mu + (1.0 - 2.0 / p) * n / mu))


@dataclass(frozen=True)
class EdgeEnergyProfile:
    """Per-edge energies of a field and the ball holding all non-positive ones.

    Attributes:
        energies: Energy carried by each surviving edge.
        center: Vertex where the field is largest.
        radius: Smallest integer ``R`` such that every edge carrying a
            nonzero field and non-positive energy lies in the graph ball
            of radius ``R`` around *center*.
        window_radius: Graph distance from *center* to the window border.
        n_zero_edges: Edges where the field vanishes identically.
    """

    energies: dict[EdgeId, float]
    center: Vertex
    radius: int
    window_radius: int
    n_zero_edges: int

    @property
    def positive_outside(self) -> bool:
        return self.radius < self.window_radius

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": list(self.center),
            "radius": self.radius,
            "window_radius": self.window_radius,
            "positive_outside": self.positive_outside,
            "n_zero_edges": self.n_zero_edges,
            "min_energy": min(self.energies.values(), default=0.0),
        }


def edge_energy_profile(res: GroundStateResult) -> EdgeEnergyProfile:
    """Per-edge energies of ``res.u`` and the radius of its non-positive region."""
    u = res.u
    mesh = u.mesh
    layout = mesh.layout
    per_edge = u.edge_energies(res.p)
    samples = u.edge_samples()
    zero = ~np.any(samples != 0.0, axis=1)

    vertex_vals = np.abs(u.values[: layout.n_vertices])
    center = layout.vertex_at(int(np.argmax(vertex_vals)))
    dist = layout.distances_from(center)
    far_end = np.maximum(dist[layout.edge_start], dist[layout.edge_end])
    bad = (per_edge <= 0) & ~zero
    radius = int(far_end[bad].max()) if bad.any() else 0
    border = dist[layout.border]
    window_radius = int(border[np.isfinite(border)].min()) if np.isfinite(border).any() else 0
    return EdgeEnergyProfile(
        energies={e: float(val) for e, val in zip(layout.edges, per_edge)},
        center=center,
        radius=radius,
        window_radius=window_radius,
        n_zero_edges=int(zero.sum()),
    )


def energy_sweep(
    g: DefectedGrid,
    p: float,
    mus: Sequence[float],
    cfg: SolverConfig | None = None,
    *,
    jobs: int = 1,
) -> list[dict[str, Any]]:
    """``(mu, energy)`` rows for CSV output, one independent solve per mass."""
    cfg = cfg or SolverConfig(p=p)

    def row(mu: float) -> dict[str, Any]:
        res = solve_ground_state(g, p, mu, cfg)
        return {
            "mu": mu,
            "energy": res.energy,
            "level": res.level,
            "lambda": res.lam,
            "converged": res.converged,
            "window_adequate": res.window_adequate,
        }

    return ordered_map(row, mus, jobs)


@dataclass(frozen=True)
class LevelComparison:
    """Ground states on a defected window and on the same window of Q.

    Attributes:
        on_q: Ground state without defects.
        on_g: Ground state with defects, started from the restricted
            ``on_q.u`` rescaled to mass ``mu``.
        trial_energy: Energy of that rescaled restriction.
        removed_energy: Energy ``on_q.u`` carries on the removed edges. When
            it is positive, ``trial_energy < on_q.energy``.
    """

    on_q: GroundStateResult
    on_g: GroundStateResult
    trial_energy: float
    removed_energy: float

    @property
    def gap(self) -> float:
        return self.on_q.energy - self.on_g.energy

    @property
    def adequate(self) -> bool:
        return self.on_q.window_adequate and self.on_g.window_adequate

    @property
    def window(self) -> Window:
        return self.on_g.window

    def to_dict(self) -> dict[str, Any]:
        return {
            "window": self.window.to_dict(),
            "energy_q": self.on_q.energy,
            "energy_g": self.on_g.energy,
            "gap": self.gap,
            "trial_energy": self.trial_energy,
            "removed_energy": self.removed_energy,
            "adequate": self.adequate,
            "on_q": self.on_q.to_dict(),
            "on_g": self.on_g.to_dict(),
        }


def compare_levels(
    g: DefectedGrid,
    p: float | None = None,
    mu: float | None = None,
    cfg: SolverConfig | None = None,
    *,
    grow: int = 4,
    max_grows: int = 4,
    jobs: int = 1,
) -> LevelComparison:
    """Solve on Q and on *g* over one window, growing it until both are adequate.

    The defected solve starts from the Q minimizer restricted to the
    surviving edges and rescaled back to mass *mu*. Dropping edges that
    carry positive energy and scaling a negative-energy field up both lower
    the energy, so wherever the defects sit in the positive-energy tail the
    defected level comes out strictly below the Q level.

    Raises:
        ValueError: If *grow* or *max_grows* is out of range.
        FieldError: If the Q minimizer has no mass on the surviving edges.
    """
    if grow < 1:
        raise ValueError(f"grow must be >= 1, got {grow}")
    if max_grows < 0:
        raise ValueError(f"max_grows must be >= 0, got {max_grows}")
    cfg = cfg or SolverConfig()
    changes: dict[str, Any] = {}
    if p is not None:
        changes["p"] = p
    if mu is not None:
        changes["mu"] = mu
    if changes:
        cfg = cfg.replace(**changes)

    previous: Field | None = None
    for attempt in range(max_grows + 1):
        if attempt:
            g = g.with_window(g.window.expand(grow))
        on_q = solve_ground_state(g.undefected(), cfg=cfg, init=previous, jobs=jobs)
        restricted = on_q.u.transfer(EdgeMesh(g.layout, cfg.mesh_m, cfg.quadrature))
        mass = restricted.mass()
        if mass <= 0:
            raise FieldError(f"The Q ground state on {g.window} vanishes on every surviving edge")
        trial = restricted.scaled(math.sqrt(cfg.mu / mass))
        on_g = solve_ground_state(g, cfg=cfg, init=trial, jobs=jobs)
        comparison = LevelComparison(
            on_q=on_q,
            on_g=on_g,
            trial_energy=trial.energy(cfg.p),
            removed_energy=on_q.energy - restricted.energy(cfg.p),
        )
        logger.info(
            "levels on %s: Q %.8f, defected %.8f (removed energy %.3e, adequate=%s)",
            g.window, on_q.energy, on_g.energy, comparison.removed_energy, comparison.adequate,
        )
        if comparison.adequate:
            break
        previous = on_q.u
    return comparison


@dataclass(frozen=True)
class CriticalMassEstimate:
    """Two estimates of the critical mass.

    ``mu_star_bisect`` is the largest mass found with level 0;
    ``mu_star_gn`` comes from the largest GN ratio seen, which bounds the
    GN constant from below, so it over-estimates the critical mass. The
    search keeps ``mu_star_bisect <= mu_star_gn < bracket[1]``.
    """

    p: float
    mu_star_bisect: float
    mu_star_gn: float
    k_hat: float
    bracket: tuple[float, float]
    evaluations: tuple[tuple[float, float], ...]

    @property
    def relative_gap(self) -> float:
        return abs(self.mu_star_gn - self.mu_star_bisect) / self.mu_star_bisect

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "mu_star_bisect": self.mu_star_bisect,
            "mu_star_gn": self.mu_star_gn,
            "k_hat": self.k_hat,
            "bracket": list(self.bracket),
            "relative_gap": self.relative_gap,
            "evaluations": [list(ev) for ev in self.evaluations],
            "caveat": "k_hat bounds the GN constant from below; mu_star_gn is an upper estimate",
        }


def estimate_critical_mass(
    g: DefectedGrid,
    p: float,
    cfg: SolverConfig | None = None,
    rel_tol: float = 0.005,
    max_doublings: int = 30,
    *,
    jobs: int = 1,
) -> CriticalMassEstimate:
    """Bisect on the sign of the level and read the GN ratio off the iterates.

    Every solve records the largest GN ratio ``k_hat`` seen so far and the
    iterate attaining it. The ratio is invariant under scaling, so that
    iterate rescaled to any mass above ``mu_gn = (p / (2 k_hat))^(2/(p-2))``
    has negative energy: such masses count as negative without a solve,
    and every other solve starts from the rescaled iterate. Once the
    bracket is narrow enough its lower end is solved again; if the level
    there has turned negative, the bracket moves down and the bisection
    resumes.

    Raises:
        ValueError: If *p* is outside ``[4, 6)``.
        BudgetExhaustedError: If no bracketing mass pair is found, or the
            bracket keeps moving after *max_doublings* rounds.
    """
    if not 4.0 <= p < 6.0:
        raise ValueError(f"critical mass needs 4 <= p < 6, got {p}")
    if rel_tol <= 0:
        raise ValueError(f"rel_tol must be > 0, got {rel_tol}")
    cfg = (cfg or SolverConfig()).replace(p=p)
    threshold = -cfg.level_tol
    evaluations: list[tuple[float, float]] = []
    k_hat = 0.0
    witness: Field | None = None

    def mu_gn() -> float:
        return (p / (2.0 * k_hat)) ** (2.0 / (p - 2.0)) if k_hat > 0 else math.inf

    def negative(mu: float) -> bool:
        nonlocal k_hat, witness
        if witness is not None and mu > mu_gn():
            scaled = witness.scaled(math.sqrt(mu / witness.mass()))
            evaluations.append((mu, scaled.energy(p)))
            logger.debug("mu=%.6g: negative by the rescaled GN witness", mu)
            return True
        res = solve_ground_state(g, p, mu, cfg, init=witness, stop_below=threshold, jobs=jobs)
        evaluations.append((mu, res.energy))
        if res.gn_ratio_max > k_hat:
            k_hat = res.gn_ratio_max
            witness = res.gn_witness
        logger.debug("mu=%.6g: energy %.3e", mu, res.energy)
        return res.energy < threshold or mu > mu_gn()

    def descend(hi: float) -> float:
        lo = hi
        for _ in range(max_doublings):
            lo /= 2
            if not negative(lo):
                return lo
        raise BudgetExhaustedError("no mass with level 0 found", result=list(evaluations))

    if negative(cfg.mu):
        lo = descend(cfg.mu)
        hi = 2 * lo
    else:
        hi = cfg.mu
        for _ in range(max_doublings):
            hi *= 2
            if negative(hi):
                break
        else:
            raise BudgetExhaustedError("no mass with negative level found",
                                       result=list(evaluations))
        lo = hi / 2

    for _ in range(max_doublings):
        while hi / lo > 1.0 + rel_tol:
            mid = math.sqrt(lo * hi)
            if negative(mid):
                hi = mid
            else:
                lo = mid
        if not negative(lo):
            break
        logger.debug("mu=%.6g turned negative; moving the bracket down", lo)
        hi = lo
        lo = descend(hi)
    else:
        raise BudgetExhaustedError("the bracket did not settle", result=list(evaluations))

    logger.info("critical mass p=%g: bisection %.6g, GN route %.6g", p, lo, mu_gn())
    return CriticalMassEstimate(
        p=p,
        mu_star_bisect=lo,
        mu_star_gn=mu_gn(),
        k_hat=k_hat,
        bracket=(lo, hi),
        evaluations=tuple(evaluations),
    )
