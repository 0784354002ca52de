"""First-order MSE expressions and percent relative efficiencies."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .design import DesignSpec, SampleFactors, factors
from .estimators import (
    PAPER_TABLE_IDS,
    EstimatorId,
    alpha_opt,
    k_yz,
    theta as theta_of,
    transform_for,
)
from .population import PopulationSummary


def var_ybar(summary: PopulationSummary, f: SampleFactors) -> float:
    """Variance of the second-phase sample mean, f1 * S_y**2."""
    return summary.mean_y**2 * f.f1 * summary.cv_y**2


def _x_term(s: PopulationSummary, f: SampleFactors) -> float:
    return f.f3 * (s.cv_x**2 - 2.0 * s.rho_xy * s.cv_y * s.cv_x)


def mse_classical_ratio(summary: PopulationSummary, f: SampleFactors) -> float:
    """Single-phase ratio estimator with known X̄ (standard first-order result)."""
    s = summary
    return s.mean_y**2 * f.f1 * (s.cv_y**2 + s.cv_x**2 - 2.0 * s.rho_xy * s.cv_y * s.cv_x)


def mse_two_phase_ratio(summary: PopulationSummary, f: SampleFactors) -> float:
    s = summary
    return s.mean_y**2 * (f.f1 * s.cv_y**2 + _x_term(s, f))


def mse_chain(summary: PopulationSummary, f: SampleFactors, theta: float) -> float:
    """MSE of the chain estimator with z-shrinkage ``theta`` (theta = 1 is t1)."""
    s = summary
    z_term = f.f2 * (theta**2 * s.cv_z**2 - 2.0 * theta * s.rho_yz * s.cv_y * s.cv_z)
    return s.mean_y**2 * (f.f1 * s.cv_y**2 + z_term + _x_term(s, f))


def mse_combined(summary: PopulationSummary, f: SampleFactors, theta: float, alpha: float) -> float:
    """MSE of alpha*t1 + (1 - alpha)*t_i; depends on alpha only via g = alpha + theta - alpha*theta."""
    s = summary
    g = alpha + theta - alpha * theta
    return s.mean_y**2 * (
        f.f1 * s.cv_y**2
        + f.f3 * s.cv_x**2
        + g**2 * f.f2 * s.cv_z**2
        - 2.0 * f.f3 * s.rho_xy * s.cv_y * s.cv_x
        - 2.0 * g * f.f2 * s.rho_yz * s.cv_y * s.cv_z
    )


def min_mse_combined(summary: PopulationSummary, f: SampleFactors) -> float:
    s = summary
    return s.mean_y**2 * (f.f1 * s.cv_y**2 + _x_term(s, f) - f.f2 * s.rho_yz**2 * s.cv_y**2)


def efficiency_gap(summary: PopulationSummary, f: SampleFactors, theta: float) -> float:
    """mse_chain(theta) - min_mse_combined, in closed form; never negative."""
    s = summary
    return f.f2 * (theta * s.cv_z - s.rho_yz * s.cv_y) ** 2 * s.mean_y**2


def ratio_gap(summary: PopulationSummary, f: SampleFactors) -> float:
    """mse_two_phase_ratio - min_mse_combined."""
    s = summary
    return f.f2 * s.rho_yz**2 * s.cv_y**2 * s.mean_y**2


@dataclass(frozen=True)
class TableRow:
    estimator: EstimatorId
    theta: float | None
    mse: float
    pre: float | None


@dataclass(frozen=True)
class EvaluationTable:
    rows: tuple[TableRow, ...]
    base_variance: float
    design: DesignSpec

    def row(self, estimator: EstimatorId | str) -> TableRow:
        if isinstance(estimator, str):
            estimator = EstimatorId.parse(estimator)
        for r in self.rows:
            if r.estimator is estimator:
                return r
        raise KeyError(estimator.value)

    def records(self) -> list[dict]:
        return [
            {"estimator": r.estimator.value, "theta": r.theta, "mse": r.mse, "pre": r.pre}
            for r in self.rows
        ]


def _pre(base: float, mse: float) -> float | None:
    if base == 0.0 or mse == 0.0:
        return None
    return 100.0 * base / mse


def analytic_mse(
    estimator: EstimatorId,
    summary: PopulationSummary,
    f: SampleFactors,
    alpha: float | None = None,
) -> tuple[float | None, float]:
    """(theta, first-order MSE) for one estimator.

    Combined estimators use the optimum weight unless ``alpha`` is given.
    """
    if estimator is EstimatorId.YBAR:
        return None, var_ybar(summary, f)
    if estimator is EstimatorId.CLASSICAL_RATIO:
        return None, mse_classical_ratio(summary, f)
    if estimator is EstimatorId.TWO_PHASE_RATIO:
        return None, mse_two_phase_ratio(summary, f)
    if estimator is EstimatorId.TSTAR:
        return None, min_mse_combined(summary, f)
    th = theta_of(transform_for(EstimatorId(f"t{estimator.chain_index}"), summary), summary.mean_z)
    if estimator.is_chain:
        return th, mse_chain(summary, f, th)
    weight = alpha if alpha is not None else alpha_opt(th, k_yz(summary))
    return th, mse_combined(summary, f, th, weight)


def analytic_table(
    summary: PopulationSummary,
    design: DesignSpec,
    estimators: Sequence[EstimatorId] = PAPER_TABLE_IDS,
    alpha: float | None = None,
) -> EvaluationTable:
    """MSE and PRE (relative to the sample mean) for each estimator.

    PRE is None when the design is a census and both MSEs vanish.
    """
    f = factors(design)
    base = var_ybar(summary, f)
    rows = []
    for eid in estimators:
        th, mse = analytic_mse(eid, summary, f, alpha)
        rows.append(TableRow(eid, th, mse, _pre(base, mse)))
    return EvaluationTable(tuple(rows), base, design)
