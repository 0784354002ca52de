"""Point estimators of the population mean of y.

Every function accepts scalars or numpy arrays of sample means, so the
same code evaluates one sample or a whole batch of replications.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DegenerateSampleError, ValidationError
from .population import PopulationSummary


class EstimatorId(enum.Enum):
    YBAR = "ybar"
    CLASSICAL_RATIO = "ratio"
    TWO_PHASE_RATIO = "rd"
    T1 = "t1"
    T2 = "t2"
    T3 = "t3"
    T4 = "t4"
    T5 = "t5"
    T6 = "t6"
    T7 = "t7"
    # Minimum-MSE combination; the same for every t_i it is paired with.
    TSTAR = "tstar"
    TSTAR_2 = "tstar2"
    TSTAR_3 = "tstar3"
    TSTAR_4 = "tstar4"
    TSTAR_5 = "tstar5"
    TSTAR_6 = "tstar6"
    TSTAR_7 = "tstar7"

    @classmethod
    def parse(cls, name: str) -> EstimatorId:
        try:
            return cls(name.strip().lower())
        except ValueError:
            known = ", ".join(e.value for e in cls)
            raise ValidationError(f"unknown estimator {name!r}; choose from {known}") from None

    @property
    def chain_index(self) -> int | None:
        """i for T_i and TSTAR_i, else None."""
        v = self.value
        if v.startswith("tstar") and len(v) > 5:
            return int(v[5:])
        if v[0] == "t" and v[1:].isdigit():
            return int(v[1:])
        return None

    @property
    def is_chain(self) -> bool:
        return self.value[0] == "t" and self.value[1:].isdigit()

    @property
    def is_combined(self) -> bool:
        return self.value.startswith("tstar")


CHAIN_IDS = tuple(EstimatorId(f"t{i}") for i in range(1, 8))
COMBINED_IDS = tuple(EstimatorId(f"tstar{i}") for i in range(2, 8))
PAPER_TABLE_IDS = (
    EstimatorId.YBAR,
    EstimatorId.TWO_PHASE_RATIO,
    *CHAIN_IDS,
    EstimatorId.TSTAR,
)


@dataclass(frozen=True)
class AuxTransform:
    """Affine transform a*z + b of the second auxiliary variable."""

    a: float
    b: float
    label: str = "custom"

    def __post_init__(self) -> None:
        if self.a == 0:
            raise ValidationError(f"transform {self.label}: a = 0 is not allowed")


CHAIN_RATIO = AuxTransform(1.0, 0.0, "t1")


def transform_for(eid: EstimatorId, summary: PopulationSummary) -> AuxTransform:
    """(a, b) for T1..T7 using the known z constants in ``summary``."""
    s = summary
    table = {
        EstimatorId.T1: (1.0, 0.0),
        EstimatorId.T2: (1.0, s.cv_z),
        EstimatorId.T3: (s.beta2_z, s.cv_z),
        EstimatorId.T4: (s.cv_z, s.beta2_z),
        EstimatorId.T5: (1.0, s.sigma_z),
        EstimatorId.T6: (s.beta1_z, s.sigma_z),
        EstimatorId.T7: (s.beta2_z, s.sigma_z),
    }
    if eid not in table:
        raise ValidationError(f"{eid.value} is not a member of the chain family t1..t7")
    a, b = table[eid]
    return AuxTransform(a, b, eid.value)


def theta(t: AuxTransform, mean_z: float) -> float:
    """Shrinkage factor a*Zbar / (a*Zbar + b); 1 when b = 0."""
    num = t.a * mean_z
    den = num + t.b
    if den == 0:
        raise ValidationError(f"transform {t.label}: a*mean_z + b = 0")
    return num / den


def _require_nonzero(den, what: str) -> None:
    if np.any(np.asarray(den) == 0):
        raise DegenerateSampleError(f"{what} is zero")


def classical_ratio(mean_y, mean_x, pop_mean_x):
    _require_nonzero(mean_x, "second-phase mean of x")
    return mean_y * (pop_mean_x / mean_x)


def two_phase_ratio(mean_y, mean_x, mean_x_first):
    _require_nonzero(mean_x, "second-phase mean of x")
    return mean_y * (mean_x_first / mean_x)


def chain_estimate(sample, pop_mean_z: float, t: AuxTransform):
    """ybar * (xbar'/xbar) * (a*Zbar + b)/(a*zbar' + b)."""
    _require_nonzero(sample.mean_x_second, "second-phase mean of x")
    den = t.a * np.asarray(sample.mean_z_first) + t.b
    _require_nonzero(den, f"transformed first-phase z mean ({t.label})")
    out = sample.mean_y_second * (sample.mean_x_first / sample.mean_x_second) * ((t.a * pop_mean_z + t.b) / den)
    return float(out) if np.ndim(out) == 0 else out


def combined_estimate(sample, pop_mean_z: float, t: AuxTransform, alpha: float):
    """alpha * t1 + (1 - alpha) * t_i on the same sample."""
    t1 = chain_estimate(sample, pop_mean_z, CHAIN_RATIO)
    ti = chain_estimate(sample, pop_mean_z, t)
    if alpha == 1:
        return t1
    if alpha == 0:
        return ti
    # equal inputs give that value back exactly
    return ti + alpha * (t1 - ti)


def k_yz(summary: PopulationSummary) -> float:
    if summary.cv_z == 0:
        raise ValidationError("cv_z = 0; K_yz undefined")
    return summary.rho_yz * summary.cv_y / summary.cv_z


def alpha_opt(theta: float, k_yz: float) -> float:
    """MSE-minimizing weight on t1; undefined when theta = 1."""
    if theta == 1:
        raise ValidationError("theta = 1: t_i coincides with t1, there is no combination to optimize")
    return (k_yz - theta) / (1.0 - theta)


@dataclass(frozen=True)
class EstimatorPlan:
    """An estimator with its constants resolved against known population values."""

    estimator: EstimatorId
    pop_mean_x: float
    pop_mean_z: float
    transform: AuxTransform | None = None
    alpha: float | None = None

    def evaluate(self, sample):
        e = self.estimator
        if e is EstimatorId.YBAR:
            return sample.mean_y_second
        if e is EstimatorId.CLASSICAL_RATIO:
            return classical_ratio(sample.mean_y_second, sample.mean_x_second, self.pop_mean_x)
        if e is EstimatorId.TWO_PHASE_RATIO:
            return two_phase_ratio(sample.mean_y_second, sample.mean_x_second, sample.mean_x_first)
        if e.is_chain:
            return chain_estimate(sample, self.pop_mean_z, self.transform)
        return combined_estimate(sample, self.pop_mean_z, self.transform, self.alpha)

    def degenerate(self, sample) -> np.ndarray:
        """Mask of samples on which a denominator of this estimator vanishes."""
        e = self.estimator
        xs = np.asarray(sample.mean_x_second)
        if e is EstimatorId.YBAR:
            return np.zeros(xs.shape, dtype=bool)
        bad = xs == 0
        zf = np.asarray(sample.mean_z_first)
        if self.transform is not None:
            bad = bad | (self.transform.a * zf + self.transform.b == 0)
        if e.is_combined:
            bad = bad | (zf == 0)
        return bad


def plan_estimators(
    ids: Iterable[EstimatorId],
    summary: PopulationSummary,
    alpha: float | None = None,
) -> list[EstimatorPlan]:
    """Resolve transforms and combination weights from population constants.

    ``alpha=None`` uses the optimum weight for each combined estimator.
    """
    plans = []
    kyz = k_yz(summary)
    for eid in ids:
        if eid is EstimatorId.TSTAR:
            raise ValidationError("tstar is an analytic summary row; sample with tstar2..tstar7")
        transform = None
        weight = None
        idx = eid.chain_index
        if idx is not None:
            transform = transform_for(EstimatorId(f"t{idx}"), summary)
        if eid.is_combined:
            weight = alpha if alpha is not None else alpha_opt(theta(transform, summary.mean_z), kyz)
        plans.append(EstimatorPlan(eid, summary.mean_x, summary.mean_z, transform, weight))
    return plans
