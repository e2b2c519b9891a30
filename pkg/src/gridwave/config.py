"""Configuration dataclasses for searches, routers and solvers.

Each config is a frozen dataclass validated on construction. Configs
serialize to plain dicts so that every run can be reproduced from its
JSON dump plus seed::

    from gridwave.config import SolverConfig, load_config

    cfg = SolverConfig(p=3.0, mu=1.0, mesh_m=16)
    same = SolverConfig.from_dict(cfg.to_dict())
    from_file = load_config("solve.json", SolverConfig)
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Type, TypeVar

from gridwave.errors import ConfigError

C = TypeVar("C", bound="_ConfigMixin")


class _ConfigMixin:
    """Shared dict round trip for config dataclasses."""

    def to_dict(self) -> dict[str, Any]:
        """Serialize the config to a plain dictionary."""
        return asdict(self)  # type: ignore[call-overload,no-any-return]

    @classmethod
    def from_dict(cls: Type[C], data: dict[str, Any]) -> C:
        """Build a config from *data*, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}  # type: ignore[arg-type]
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(
                f"Unknown {cls.__name__} keys: {', '.join(unknown)}; "
                f"known: {', '.join(sorted(known))}"
            )
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"Invalid {cls.__name__}: {exc}") from exc


@dataclass(frozen=True)
class SolverConfig(_ConfigMixin):
    """Ground-state solver settings.

    Attributes:
        p: Nonlinearity exponent, ``2 < p < 6``.
        mu: Prescribed mass.
        mesh_m: Intervals per unit edge; must be even so edge midpoints are nodes.
        max_iters: Iteration budget per start.
        tol_grad: Stop when both the Euler-Lagrange and Kirchhoff residuals
            fall below this value.
        n_starts: Number of seeded initial bumps.
        seed: Seed for the initial-bump placement.
        bump_width: Decay length of the initial bumps.
        preconditioner_shift: ``sigma`` in the ``K + sigma M`` preconditioner.
        armijo: Sufficient-decrease constant of the backtracking line search.
        level_tol: Window energies above ``-level_tol`` are reported as level 0.
        border_mass_tol: Mass near the window border above this flags the
            window as inadequate.
        quadrature: Composite rule per edge for the mass and the ``L^p`` term,
            ``"trapezoid"`` or ``"simpson"``. Both are lumped, so the mass
            matrix stays diagonal.
    """

    p: float = 3.0
    mu: float = 1.0
    mesh_m: int = 16
    max_iters: int = 3000
    tol_grad: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    bump_width: float = 2.0
    preconditioner_shift: float = 1.0
    armijo: float = 1e-4
    level_tol: float = 1e-6
    border_mass_tol: float = 1e-8
    quadrature: str = "trapezoid"

    def __post_init__(self) -> None:
        if not 2.0 < self.p < 6.0:
            raise ConfigError(f"p must satisfy 2 < p < 6, got {self.p}")
        if self.mu <= 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if self.mesh_m < 2 or self.mesh_m % 2:
            raise ConfigError(f"mesh_m must be even and >= 2, got {self.mesh_m}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol_grad <= 0:
            raise ConfigError(f"tol_grad must be > 0, got {self.tol_grad}")
        if self.n_starts < 1:
            raise ConfigError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.bump_width <= 0:
            raise ConfigError(f"bump_width must be > 0, got {self.bump_width}")
        if self.preconditioner_shift <= 0:
            raise ConfigError(
                f"preconditioner_shift must be > 0, got {self.preconditioner_shift}"
            )
        if self.quadrature not in ("trapezoid", "simpson"):
            raise ConfigError(
                f"quadrature must be 'trapezoid' or 'simpson', got {self.quadrature}"
            )

    def replace(self, **changes: Any) -> "SolverConfig":
        """Return a copy with *changes* applied (validated again)."""
        data = self.to_dict()
        data.update(changes)
        return SolverConfig.from_dict(data)


@dataclass(frozen=True)
class AnnealConfig(_ConfigMixin):
    """Isoperimetric search settings.

    Attributes:
        n_restarts: Independent annealing restarts; half of them start in the
            thinnest parts of the grid when there are any.
        t_start: Initial temperature on the ``sqrt(A)/P`` scale.
        t_end: Final temperature; the schedule is geometric.
        exhaustive_max_edges: Windows with at most this many surviving edges
            are searched exhaustively.
    """

    n_restarts: int = 8
    t_start: float = 0.05
    t_end: float = 1e-4
    exhaustive_max_edges: int = 18

    def __post_init__(self) -> None:
        if self.n_restarts < 1:
            raise ConfigError(f"n_restarts must be >= 1, got {self.n_restarts}")
        if not 0 < self.t_end <= self.t_start:
            raise ConfigError(
                f"need 0 < t_end <= t_start, got t_start={self.t_start}, t_end={self.t_end}"
            )
        if self.exhaustive_max_edges < 0:
            raise ConfigError("exhaustive_max_edges must be >= 0")


@dataclass(frozen=True)
class RouterConfig(_ConfigMixin):
    """Congestion router settings.

    Attributes:
        penalty: Weight of current usage in the vertex entry cost.
        rounds: Rip-up-and-reroute rounds after the initial routing.
        edge_only: Count two paths as intersecting only when they share an edge.
    """

    penalty: float = 4.0
    rounds: int = 5
    edge_only: bool = False

    def __post_init__(self) -> None:
        if self.penalty < 0:
            raise ConfigError(f"penalty must be >= 0, got {self.penalty}")
        if self.rounds < 0:
            raise ConfigError(f"rounds must be >= 0, got {self.rounds}")


@dataclass(frozen=True)
class SmallDataConfig(_ConfigMixin):
    """Smallness threshold for the single-edge Cauchy problem.

    Data are small when ``a, |b| <= threshold_factor * lambda**(1/(p-2))``.
    """

    threshold_factor: float = 0.05

    def __post_init__(self) -> None:
        if self.threshold_factor <= 0:
            raise ConfigError(f"threshold_factor must be > 0, got {self.threshold_factor}")

    def threshold(self, lam: float, p: float) -> float:
        if p <= 2:
            raise ValueError(f"p must be > 2, got {p}")
        return self.threshold_factor * lam ** (1.0 / (p - 2.0))


@dataclass(frozen=True)
class SweepConfig(_ConfigMixin):
    """Geometric sweep of the exponential trial decay rate."""

    eps_start: float = 1.0
    eps_factor: float = 0.7
    n_steps: int = 12
    border_ratio: float = 1e-10

    def __post_init__(self) -> None:
        if self.eps_start <= 0:
            raise ConfigError(f"eps_start must be > 0, got {self.eps_start}")
        if not 0 < self.eps_factor < 1:
            raise ConfigError(f"eps_factor must lie in (0, 1), got {self.eps_factor}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be >= 1, got {self.n_steps}")
        if not 0 < self.border_ratio < 1:
            raise ConfigError(f"border_ratio must lie in (0, 1), got {self.border_ratio}")


def load_config(path: str | Path, cls: Type[C]) -> C:
    """Read a JSON object from *path* and build a *cls* config from it.

    A ``"schema"`` key, as written by :mod:`gridwave.artifacts`, is ignored.
    """
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file '{config_path}' not found")
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file '{config_path}' is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file '{config_path}' must hold a JSON object")
    data.pop("schema", None)
    return cls.from_dict(data)
