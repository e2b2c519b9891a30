"""The Cauchy problem on a single unit edge.

``u'' = lam u - |u|^(p-2) u`` on ``[0, 1]`` with ``u(0) = a > 0`` and
``u'(0) = b``. For small data the solution stays positive, sits between
two exponential envelopes, and carries positive energy. This module
integrates the problem, checks those bounds and the energy identity, and
evaluates the discriminant expression behind the positivity argument in
high precision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.integrate import simpson

from gridwave.config import SmallDataConfig
from gridwave.errors import IvpBlowUpError
from gridwave.parallel import ordered_map

logger = logging.getLogger(__name__)

BLOW_UP = 1e6
DECIMAL_DIGITS = 60


@dataclass(frozen=True)
class IvpSpec:
    """Data of the Cauchy problem.

    Raises:
        ValueError: If ``p <= 2``, ``lam <= 0`` or ``a <= 0``.
    """

    p: float
    lam: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if self.p <= 2:
            raise ValueError(f"p must be > 2, got {self.p}")
        if self.lam <= 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if self.a <= 0:
            raise ValueError(f"a = u(0) must be > 0, got {self.a}")

    def is_small(self, cfg: SmallDataConfig | None = None) -> bool:
        thr = (cfg or SmallDataConfig()).threshold(self.lam, self.p)
        return self.a <= thr and abs(self.b) <= thr

    def to_dict(self) -> dict[str, float]:
        return {"p": self.p, "lambda": self.lam, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class IvpTrace:
    """Samples of ``u`` and ``u'`` at ``x = k/n``.

    Attributes:
        x: Sample abscissae.
        u: Solution values.
        du: Derivative values.
        delta: ``max |u|^(p-2)`` on the edge.
        error_estimate: Largest difference against the run with half the step.
        hamiltonian_drift: Largest change of ``u'^2/2 - lam u^2/2 + |u|^p/p``.
    """

    x: np.ndarray
    u: np.ndarray
    du: np.ndarray
    delta: float
    error_estimate: float
    hamiltonian_drift: float

    @property
    def positive(self) -> bool:
        return bool(np.all(self.u > 0))

    @property
    def n(self) -> int:
        return len(self.x) - 1


def _rk4(spec: IvpSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    p, lam = spec.p, spec.lam
    h = 1.0 / n
    u = np.empty(n + 1)
    v = np.empty(n + 1)
    u[0], v[0] = spec.a, spec.b

    def accel(y: float) -> float:
        return lam * y - abs(y) ** (p - 2) * y

    for k in range(n):
        y, z = u[k], v[k]
        k1u, k1v = z, accel(y)
        k2u, k2v = z + 0.5 * h * k1v, accel(y + 0.5 * h * k1u)
        k3u, k3v = z + 0.5 * h * k2v, accel(y + 0.5 * h * k2u)
        k4u, k4v = z + h * k3v, accel(y + h * k3u)
        u[k + 1] = y + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v[k + 1] = z + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not abs(u[k + 1]) <= BLOW_UP:
            raise IvpBlowUpError((k + 1) * h, float(u[k + 1]))
    return u, v


def hamiltonian(spec: IvpSpec, u: np.ndarray, du: np.ndarray) -> np.ndarray:
    out: np.ndarray = 0.5 * du**2 - 0.5 * spec.lam * u**2 + np.abs(u) ** spec.p / spec.p
    return out


def integrate_ivp(spec: IvpSpec, n: int = 1000) -> IvpTrace:
    """Integrate with classical RK4 at step ``1/n`` and again at ``1/(2n)``.

    Raises:
        ValueError: If ``n < 100``.
        IvpBlowUpError: If ``|u|`` exceeds ``1e6``.
    """
    if n < 100:
        raise ValueError(f"n must be >= 100, got {n}")
    u, du = _rk4(spec, n)
    fine, _ = _rk4(spec, 2 * n)
    error = float(np.max(np.abs(u - fine[::2])))
    ham = hamiltonian(spec, u, du)
    trace = IvpTrace(
        x=np.linspace(0.0, 1.0, n + 1),
        u=u,
        du=du,
        delta=float(np.max(np.abs(u)) ** (spec.p - 2)),
        error_estimate=error,
        hamiltonian_drift=float(np.max(np.abs(ham - ham[0]))),
    )
    logger.debug("integrated %s: error %.2e, drift %.2e", spec, error, trace.hamiltonian_drift)
    return trace


def _require_positive(trace: IvpTrace) -> None:
    if not trace.positive:
        raise ValueError("The trace changes sign; the envelope bounds do not apply")


def upper_envelope(spec: IvpSpec, x: np.ndarray) -> np.ndarray:
    """``A0 exp(-sqrt(lam) x) + B0 exp(sqrt(lam) x)``."""
    s = math.sqrt(spec.lam)
    a0 = 0.5 * (spec.a - spec.b / s)
    b0 = 0.5 * (spec.a + spec.b / s)
    out: np.ndarray = a0 * np.exp(-s * x) + b0 * np.exp(s * x)
    return out


def lower_envelope(spec: IvpSpec, x: np.ndarray, delta: float) -> np.ndarray:
    """The upper envelope with ``lam`` replaced by ``lam - delta``.

    Raises:
        ValueError: If ``delta >= lam``.
    """
    if delta >= spec.lam:
        raise ValueError(f"delta={delta:g} must be below lam={spec.lam:g}")
    s = math.sqrt(spec.lam - delta)
    ad = 0.5 * (spec.a - spec.b / s)
    bd = 0.5 * (spec.a + spec.b / s)
    out: np.ndarray = ad * np.exp(-s * x) + bd * np.exp(s * x)
    return out


def check_upper_bound(trace: IvpTrace, spec: IvpSpec) -> float:
    """Largest ``u(x)`` minus the upper envelope; at most the integration error."""
    _require_positive(trace)
    return float(np.max(trace.u - upper_envelope(spec, trace.x)))


def check_lower_bound(trace: IvpTrace, spec: IvpSpec) -> float:
    """Largest lower envelope minus ``u(x)``, with ``delta`` from the trace."""
    _require_positive(trace)
    return float(np.max(lower_envelope(spec, trace.x, trace.delta) - trace.u))


def quadrature_energy(trace: IvpTrace, p: float) -> float:
    """``integral of u'^2/2 - |u|^p/p`` over the edge by Simpson's rule."""
    integrand = 0.5 * trace.du**2 - np.abs(trace.u) ** p / p
    return float(simpson(integrand, x=trace.x))


def closed_form_energy(trace: IvpTrace, spec: IvpSpec) -> float:
    """Energy from the conserved Hamiltonian.

    ``lam/2 ||u||^2 - 2/p ||u||_p^p + b^2/2 + a^p/p - lam a^2/2``.
    """
    p, lam, a, b = spec.p, spec.lam, spec.a, spec.b
    mass = float(simpson(trace.u**2, x=trace.x))
    lp = float(simpson(np.abs(trace.u) ** p, x=trace.x))
    return 0.5 * lam * mass - 2.0 / p * lp + 0.5 * b * b + a**p / p - 0.5 * lam * a * a


def edge_energy_identity(trace: IvpTrace, spec: IvpSpec) -> float:
    """Gap between the quadrature energy and the closed form."""
    _require_positive(trace)
    return abs(quadrature_energy(trace, spec.p) - closed_form_energy(trace, spec))


# ---------------------------------------------------------------------------
# Discriminant positivity
# ---------------------------------------------------------------------------


def f_lambda_lambda_form(lam: float | Decimal) -> Decimal:
    """``4 lam (c - 1/4)(c + 1/4) - [(e^(2s) - 1)^2 / (8 e^(2s))]^2`` with ``s = sqrt(lam)``.

    ``c = (e^(4s) - 1) / (16 e^(2s) s)``.
    """
    with localcontext() as ctx:
        ctx.prec = DECIMAL_DIGITS
        lam_d = Decimal(lam)
        s = lam_d.sqrt()
        e2 = (2 * s).exp()
        e4 = (4 * s).exp()
        c = (e4 - 1) / (16 * e2 * s)
        quarter = Decimal(1) / 4
        tail = (e2 - 1) ** 2 / (8 * e2)
        return +(4 * lam_d * (c - quarter) * (c + quarter) - tail * tail)


def f_lambda_y_form(lam: float | Decimal) -> Decimal:
    """``(y^2/16) [(e^y - 1)^2 / (y^2 e^y) - 1]`` with ``y = 2 sqrt(lam)``."""
    with localcontext() as ctx:
        ctx.prec = DECIMAL_DIGITS
        y = 2 * Decimal(lam).sqrt()
        ey = y.exp()
        return +(y * y / 16 * ((ey - 1) ** 2 / (y * y * ey) - 1))


def monotonicity_terms(y: float | Decimal) -> tuple[Decimal, Decimal]:
    """``1 + (y - 1) e^y`` and ``y (e^y + 1) + 2 (1 - e^y)``; both positive for ``y > 0``."""
    with localcontext() as ctx:
        ctx.prec = DECIMAL_DIGITS
        y_d = Decimal(y)
        ey = y_d.exp()
        return +(1 + (y_d - 1) * ey), +(y_d * (ey + 1) + 2 * (1 - ey))


@dataclass(frozen=True)
class DiscriminantReport:
    """Both forms of the discriminant over a grid of ``lam`` values."""

    lambdas: tuple[float, ...]
    lambda_form: tuple[float, ...]
    y_form: tuple[float, ...]
    max_disagreement: float

    @property
    def min_margin(self) -> float:
        return min(min(self.lambda_form), min(self.y_form))

    @property
    def all_positive(self) -> bool:
        return self.min_margin > 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "lambdas": list(self.lambdas),
            "lambda_form": list(self.lambda_form),
            "y_form": list(self.y_form),
            "min_margin": self.min_margin,
            "max_disagreement": self.max_disagreement,
            "all_positive": self.all_positive,
        }


def f_lambda_positivity(lambda_grid: Iterable[float]) -> DiscriminantReport:
    """Evaluate both discriminant forms at every ``lam`` in *lambda_grid*.

    Raises:
        ValueError: If the grid is empty or holds a non-positive value.
    """
    lams = tuple(float(v) for v in lambda_grid)
    if not lams:
        raise ValueError("lambda_grid must not be empty")
    if min(lams) <= 0:
        raise ValueError("lambda values must be > 0")
    lam_vals = [f_lambda_lambda_form(v) for v in lams]
    y_vals = [f_lambda_y_form(v) for v in lams]
    gap = max(abs(a - b) for a, b in zip(lam_vals, y_vals))
    return DiscriminantReport(
        lambdas=lams,
        lambda_form=tuple(float(v) for v in lam_vals),
        y_form=tuple(float(v) for v in y_vals),
        max_disagreement=float(gap),
    )


# ---------------------------------------------------------------------------
# Small-data positivity
# ---------------------------------------------------------------------------


def sample_small_data(
    n: int, lam: float, p: float, seed: int = 0, cfg: SmallDataConfig | None = None
) -> list[IvpSpec]:
    """*n* seeded specs with ``0 < a <= thr`` and ``|b| <= thr``."""
    thr = (cfg or SmallDataConfig()).threshold(lam, p)
    rng = np.random.default_rng(seed)
    a = thr * (1.0 - rng.random(n))
    b = thr * (2.0 * rng.random(n) - 1.0)
    return [IvpSpec(p, lam, float(ai), float(bi)) for ai, bi in zip(a, b)]


@dataclass(frozen=True)
class SmallDataReport:
    """Worst edge energy over a batch of small-data problems.

    Attributes:
        min_energy: Smallest edge energy among checked specs.
        n_checked: Specs integrated and checked.
        excluded_large: Specs above the smallness threshold.
        excluded_sign_changing: Specs whose solution changed sign.
        threshold_factor: Factor used for the smallness threshold.
    """

    min_energy: float
    n_checked: int
    excluded_large: int
    excluded_sign_changing: int
    threshold_factor: float

    @property
    def all_positive(self) -> bool:
        return self.n_checked > 0 and self.min_energy > 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_energy": self.min_energy,
            "n_checked": self.n_checked,
            "excluded_large": self.excluded_large,
            "excluded_sign_changing": self.excluded_sign_changing,
            "threshold_factor": self.threshold_factor,
            "all_positive": self.all_positive,
        }


def small_data_edge_positivity(
    specs: Sequence[IvpSpec], cfg: SmallDataConfig | None = None, n: int = 1000
) -> SmallDataReport:
    """Integrate every small spec and return the smallest edge energy."""
    cfg = cfg or SmallDataConfig()
    worst = math.inf
    checked = large = sign = 0
    for spec in specs:
        if not spec.is_small(cfg):
            large += 1
            continue
        trace = integrate_ivp(spec, n)
        if not trace.positive:
            sign += 1
            continue
        checked += 1
        worst = min(worst, quadrature_energy(trace, spec.p))
    logger.info(
        "small-data check: %d checked, %d too large, %d sign-changing, min energy %.3e",
        checked, large, sign, worst,
    )
    return SmallDataReport(worst, checked, large, sign, cfg.threshold_factor)


def ivp_sweep(specs: Sequence[IvpSpec], n: int = 1000, *, jobs: int = 1) -> list[dict[str, Any]]:
    """One CSV row per spec: energy and envelope violations."""

    def row(spec: IvpSpec) -> dict[str, Any]:
        trace = integrate_ivp(spec, n)
        out: dict[str, Any] = {**spec.to_dict(), "positive": trace.positive}
        if trace.positive:
            out["edge_energy"] = quadrature_energy(trace, spec.p)
            out["bound_violation"] = check_upper_bound(trace, spec)
            out["lower_violation"] = (
                check_lower_bound(trace, spec) if trace.delta < spec.lam else math.nan
            )
        else:
            out["edge_energy"] = out["bound_violation"] = out["lower_violation"] = math.nan
        return out

    return ordered_map(row, specs, jobs)
