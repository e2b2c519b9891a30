"""gridwave: defected square grids as metric graphs.

Builds windows of the square grid with edges removed by a generator,
measures isoperimetric ratios and path congestion, and computes
mass-constrained NLS ground states on the surviving edges.

Quick start::

    from gridwave import GeneratorSpec, Window, make_grid, solve_ground_state

    grid = make_grid(GeneratorSpec("compact", {"preset": "vertex"}), Window.centered(12))
    res = solve_ground_state(grid, p=3.0, mu=1.0)
    print(res.energy, res.converged)
"""

from __future__ import annotations

__version__ = "0.1.0"

from gridwave.config import (
    AnnealConfig,
    RouterConfig,
    SmallDataConfig,
    SolverConfig,
    SweepConfig,
    load_config,
)
from gridwave.defect_zoo import GeneratorSpec, build_rule, make_block, make_grid
from gridwave.edge_ode import IvpSpec, f_lambda_positivity, integrate_ivp
from gridwave.errors import (
    BudgetExhaustedError,
    ConfigError,
    DisconnectedGridError,
    FieldError,
    GridSpecError,
    GridwaveError,
    IvpBlowUpError,
    UnreachableOriginError,
    WindowTooSmallError,
)
from gridwave.fields import EdgeMesh, Field
from gridwave.grid_core import (
    DefectedGrid,
    EdgeId,
    Region,
    Window,
    area,
    identify_defects,
    metric_ball,
    perimeter,
    shortest_path,
)
from gridwave.inequality_lab import (
    FamilySpec,
    exp_trial_field,
    extend_field,
    probe_inequality,
    z2_negativity_probe,
)
from gridwave.isoperimetry import coarea_check, search_violation, tent_function
from gridwave.nls_solver import estimate_critical_mass, solve_ground_state
from gridwave.path_cover import route_paths, staircase_counting_bound, unbounded_defect_census
from gridwave.runlog import RunLogger, RunRecord, iter_records, summarize

__all__ = [
    "AnnealConfig",
    "RouterConfig",
    "SmallDataConfig",
    "SolverConfig",
    "SweepConfig",
    "load_config",
    "GeneratorSpec",
    "build_rule",
    "make_block",
    "make_grid",
    "IvpSpec",
    "f_lambda_positivity",
    "integrate_ivp",
    "BudgetExhaustedError",
    "ConfigError",
    "DisconnectedGridError",
    "FieldError",
    "GridSpecError",
    "GridwaveError",
    "IvpBlowUpError",
    "UnreachableOriginError",
    "WindowTooSmallError",
    "EdgeMesh",
    "Field",
    "DefectedGrid",
    "EdgeId",
    "Region",
    "Window",
    "area",
    "identify_defects",
    "metric_ball",
    "perimeter",
    "shortest_path",
    "FamilySpec",
    "exp_trial_field",
    "extend_field",
    "probe_inequality",
    "z2_negativity_probe",
    "coarea_check",
    "search_violation",
    "tent_function",
    "estimate_critical_mass",
    "solve_ground_state",
    "route_paths",
    "staircase_counting_bound",
    "unbounded_defect_census",
    "RunLogger",
    "RunRecord",
    "iter_records",
    "summarize",
]
