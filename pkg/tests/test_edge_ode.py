"""Tests for the single-edge Cauchy problem (edge_ode.py)."""

from __future__ import annotations

import math

import numpy as np
import pytest

from gridwave.config import SmallDataConfig
from gridwave.edge_ode import (
    IvpSpec,
    check_lower_bound,
    check_upper_bound,
    edge_energy_identity,
    f_lambda_lambda_form,
    f_lambda_positivity,
    f_lambda_y_form,
    integrate_ivp,
    ivp_sweep,
    lower_envelope,
    monotonicity_terms,
    quadrature_energy,
    sample_small_data,
    small_data_edge_positivity,
)
from gridwave.errors import IvpBlowUpError


class TestIvpSpec:
    @pytest.mark.parametrize(
        ("args", "message"),
        [
            ((2.0, 1.0, 0.1, 0.0), "p must be > 2"),
            ((3.0, 0.0, 0.1, 0.0), "lam must be > 0"),
            ((3.0, 1.0, 0.0, 0.0), "must be > 0"),
        ],
    )
    def test_rejects_bad_parameters(self, args: tuple[float, ...], message: str) -> None:
        with pytest.raises(ValueError, match=message):
            IvpSpec(*args)

    def test_smallness_threshold(self) -> None:
        assert IvpSpec(3.0, 1.0, 0.04, -0.05).is_small()
        assert not IvpSpec(3.0, 1.0, 0.06, 0.0).is_small()
        assert IvpSpec(3.0, 1.0, 0.06, 0.0).is_small(SmallDataConfig(threshold_factor=0.1))

    def test_dict_keys(self) -> None:
        assert IvpSpec(3.0, 2.0, 0.1, 0.2).to_dict() == {
            "p": 3.0, "lambda": 2.0, "a": 0.1, "b": 0.2,
        }


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------


class TestIntegrate:
    def test_rejects_coarse_resolution(self) -> None:
        with pytest.raises(ValueError, match="n must be >= 100"):
            integrate_ivp(IvpSpec(3.0, 1.0, 0.01, 0.0), n=50)

    def test_small_data_stays_positive_and_accurate(self) -> None:
        trace = integrate_ivp(IvpSpec(3.0, 1.0, 1e-3, 0.0))
        assert trace.positive
        assert trace.n == 1000
        assert trace.error_estimate < 1e-12
        assert trace.hamiltonian_drift < 1e-12
        assert np.all(np.diff(trace.u) >= 0)

    def test_linearized_limit(self) -> None:
        trace = integrate_ivp(IvpSpec(4.0, 1.0, 1e-3, 0.0))
        expected = 1e-3 * np.cosh(trace.x)
        assert np.max(np.abs(trace.u - expected) / expected) < 1e-3

    def test_blow_up_is_detected(self) -> None:
        with pytest.raises(IvpBlowUpError):
            integrate_ivp(IvpSpec(4.0, 1.0, 2e6, 0.0))

    def test_large_data_changes_sign(self) -> None:
        trace = integrate_ivp(IvpSpec(4.0, 1.0, 5.0, 0.0))
        assert not trace.positive


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


class TestEnvelopes:
    def test_upper_bound_example(self) -> None:
        spec = IvpSpec(3.0, 1.0, 0.01, 0.005)
        assert check_upper_bound(integrate_ivp(spec), spec) <= 1e-8

    def test_upper_bound_with_zero_slope_is_cosh(self) -> None:
        spec = IvpSpec(3.0, 2.0, 0.02, 0.0)
        trace = integrate_ivp(spec)
        assert check_upper_bound(trace, spec) <= 1e-8
        assert np.all(trace.u <= 0.02 * np.cosh(math.sqrt(2.0) * trace.x) + 1e-8)

    def test_lower_bound_on_small_data(self) -> None:
        for spec in sample_small_data(20, 1.0, 3.0, seed=4):
            trace = integrate_ivp(spec)
            assert check_lower_bound(trace, spec) <= 1e-8

    def test_delta_must_stay_below_lambda(self) -> None:
        spec = IvpSpec(3.0, 1.0, 0.01, 0.0)
        with pytest.raises(ValueError, match="must be below lam"):
            lower_envelope(spec, np.linspace(0, 1, 5), 2.0)

    def test_sign_changing_trace_rejected(self) -> None:
        spec = IvpSpec(4.0, 1.0, 5.0, 0.0)
        trace = integrate_ivp(spec)
        with pytest.raises(ValueError, match="changes sign"):
            check_upper_bound(trace, spec)
        with pytest.raises(ValueError, match="changes sign"):
            edge_energy_identity(trace, spec)


# ---------------------------------------------------------------------------
# Edge energy
# ---------------------------------------------------------------------------


class TestEdgeEnergy:
    @pytest.mark.parametrize(
        "spec",
        [IvpSpec(3.0, 1.0, 0.01, 0.0), IvpSpec(3.0, 2.0, 0.02, -0.01), IvpSpec(4.5, 0.5, 0.1, 0.05)],
    )
    def test_identity(self, spec: IvpSpec) -> None:
        assert edge_energy_identity(integrate_ivp(spec), spec) < 1e-8

    def test_small_data_energy_is_positive(self) -> None:
        spec = IvpSpec(3.0, 1.0, 0.01, 0.0)
        assert quadrature_energy(integrate_ivp(spec), 3.0) > 0


# ---------------------------------------------------------------------------
# Discriminant
# ---------------------------------------------------------------------------


class TestDiscriminant:
    def test_value_at_one(self) -> None:
        expected = (math.sinh(1.0) ** 2 - 1.0) / 4.0
        assert float(f_lambda_y_form(1.0)) == pytest.approx(expected, rel=1e-12)
        assert float(f_lambda_lambda_form(1.0)) == pytest.approx(expected, rel=1e-12)
        assert float(f_lambda_y_form(1.0)) == pytest.approx(0.0953, abs=1e-4)

    def test_forms_agree_and_stay_positive(self) -> None:
        report = f_lambda_positivity(np.logspace(-2, 2, 41))
        assert report.all_positive
        assert report.max_disagreement <= 1e-12
        assert report.to_dict()["all_positive"] is True

    def test_small_lambda_limit(self) -> None:
        value = float(f_lambda_y_form(1e-8))
        assert 0 < value < 1e-15

    @pytest.mark.parametrize("y", [0.1, 1.0, 10.0])
    def test_monotonicity_terms(self, y: float) -> None:
        first, second = monotonicity_terms(y)
        assert first > 0
        assert second > 0

    def test_rejects_empty_grid(self) -> None:
        with pytest.raises(ValueError, match="must not be empty"):
            f_lambda_positivity([])

    def test_rejects_non_positive_lambda(self) -> None:
        with pytest.raises(ValueError, match="> 0"):
            f_lambda_positivity([1.0, 0.0])


# ---------------------------------------------------------------------------
# Small data
# ---------------------------------------------------------------------------


class TestSmallData:
    def test_samples_respect_threshold(self) -> None:
        specs = sample_small_data(50, 2.0, 4.0, seed=1)
        assert len(specs) == 50
        assert all(spec.is_small() for spec in specs)
        assert specs == sample_small_data(50, 2.0, 4.0, seed=1)

    def test_hundred_point_grid_is_positive(self) -> None:
        specs = sample_small_data(100, 1.0, 3.0, seed=0)
        report = small_data_edge_positivity(specs)
        assert report.n_checked == 100
        assert report.all_positive
        assert report.min_energy > 0

    def test_large_data_excluded(self) -> None:
        report = small_data_edge_positivity([IvpSpec(3.0, 1.0, 0.5, 0.0)])
        assert report.excluded_large == 1
        assert report.n_checked == 0
        assert not report.all_positive

    def test_sweep_rows(self) -> None:
        rows = ivp_sweep([IvpSpec(3.0, 1.0, 0.01, 0.005), IvpSpec(4.0, 1.0, 5.0, 0.0)])
        assert rows[0]["positive"] is True
        assert rows[0]["bound_violation"] <= 1e-8
        assert rows[0]["edge_energy"] > 0
        assert rows[1]["positive"] is False
        assert math.isnan(rows[1]["edge_energy"])
