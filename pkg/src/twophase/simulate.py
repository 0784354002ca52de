"""Exact enumeration and Monte Carlo evaluation of two-phase estimators.

Both engines accumulate per-chunk partial sums with numpy's pairwise
summation and merge the partials in a fixed order with ``math.fsum``. Chunk
boundaries depend only on the design, so results are bit-identical for any
number of worker threads.
"""

from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .design import DesignSpec, SampleMeans, draw_indices, sample_means, check_compatible
from .errors import DegenerateSampleError, NumericGuardError, ValidationError
from .estimators import (
    CHAIN_IDS,
    COMBINED_IDS,
    EstimatorId,
    EstimatorPlan,
    plan_estimators,
)
from .mse_theory import EvaluationTable
from .population import FinitePopulation, summarize

DEFAULT_ESTIMATORS = (EstimatorId.YBAR, EstimatorId.TWO_PHASE_RATIO, *CHAIN_IDS, *COMBINED_IDS)
MAX_REJECTION_RATE = 1e-3
DEFAULT_MAX_OUTCOMES = 10**7


class RejectionPolicy(enum.Enum):
    ERROR = "error"
    SKIP_AND_COUNT = "skip"


@dataclass(frozen=True)
class GenSpec:
    """Targets for a synthetic trivariate Gaussian population.

    Means, CVs and correlations are ordered (y, x, z); the correlations are
    (rho_xy, rho_xz, rho_yz).
    """

    n_population: int
    target_means: tuple[float, float, float]
    target_cvs: tuple[float, float, float]
    target_rhos: tuple[float, float, float]
    seed: int = 0
    integer: bool = False

    def __post_init__(self) -> None:
        if self.n_population < 2:
            raise ValidationError("n_population must be >= 2")
        if len(self.target_means) != 3 or len(self.target_cvs) != 3 or len(self.target_rhos) != 3:
            raise ValidationError("means, cvs and rhos each need three values")
        if any(m == 0 for m in self.target_means):
            raise ValidationError("target means must be nonzero")
        if any(c <= 0 for c in self.target_cvs):
            raise ValidationError("target cvs must be > 0")
        if any(abs(r) > 1 for r in self.target_rhos):
            raise ValidationError("target correlations must lie in [-1, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    def correlation_matrix(self) -> np.ndarray:
        rxy, rxz, ryz = self.target_rhos
        return np.array([[1.0, rxy, ryz], [rxy, 1.0, rxz], [ryz, rxz, 1.0]])


def correlation_factor(corr: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == corr; raises if corr is not PSD."""
    eig = np.linalg.eigvalsh(corr)
    if eig[0] < -1e-10:
        raise ValidationError(
            f"target correlation matrix is not positive semi-definite (smallest eigenvalue {eig[0]:.4g})"
        )
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        # singular but PSD: a tiny ridge lets the factorization succeed
        return np.linalg.cholesky(corr + 1e-12 * np.eye(len(corr)))


def generate_population(spec: GenSpec) -> FinitePopulation:
    """Draw N units from the target Gaussian and freeze them as a population.

    Realized parameters differ from the targets; use ``summarize`` on the
    result, never the targets, for analytic work.
    """
    L = correlation_factor(spec.correlation_matrix())
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    std = rng.standard_normal((spec.n_population, 3)) @ L.T
    means = np.asarray(spec.target_means, dtype=float)
    sds = np.asarray(spec.target_cvs, dtype=float) * np.abs(means)
    values = means + std * sds
    if spec.integer:
        values = np.rint(values)
    return FinitePopulation(values[:, 0], values[:, 1], values[:, 2], label=f"generated(seed={spec.seed})")


@dataclass(frozen=True)
class SimConfig:
    replications: int
    seed: int = 0
    rejection_policy: RejectionPolicy = RejectionPolicy.SKIP_AND_COUNT

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ValidationError("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class EstimatorStats:
    estimator: EstimatorId
    alpha: float | None
    empirical_mean: float
    empirical_bias: float
    empirical_mse: float
    empirical_pre: float | None
    rejected_count: int
    mse_se: float | None = None
    probability_mass: float | None = None

    def record(self) -> dict:
        return {
            "estimator": self.estimator.value,
            "alpha": self.alpha,
            "mean": self.empirical_mean,
            "bias": self.empirical_bias,
            "mse": self.empirical_mse,
            "pre": self.empirical_pre,
            "mse_se": self.mse_se,
            "rejected": self.rejected_count,
        }


@dataclass(frozen=True)
class _ResultBase:
    stats: tuple[EstimatorStats, ...]
    design: DesignSpec
    base_empirical_var: float
    population_mean_y: float

    def get(self, estimator: EstimatorId | str) -> EstimatorStats:
        if isinstance(estimator, str):
            estimator = EstimatorId.parse(estimator)
        for s in self.stats:
            if s.estimator is estimator:
                return s
        raise KeyError(estimator.value)

    def records(self) -> list[dict]:
        return [s.record() for s in self.stats]


@dataclass(frozen=True)
class SimResult(_ResultBase):
    replications_used: int = 0
    seed: int = 0


@dataclass(frozen=True)
class ExactResult(_ResultBase):
    outcome_count: int = 0

    def records(self) -> list[dict]:
        out = []
        for s in self.stats:
            r = s.record()
            del r["mse_se"]
            r["probability_mass"] = s.probability_mass
            out.append(r)
        return out


@dataclass
class _Partial:
    count: int = 0
    sum_t: float = 0.0
    sum_e2: float = 0.0
    sum_e4: float = 0.0
    rejected: int = 0


def _evaluate_chunk(
    plans: Sequence[EstimatorPlan],
    means: SampleMeans,
    truth: float,
    policy: RejectionPolicy,
) -> list[_Partial]:
    out = []
    for plan in plans:
        bad = plan.degenerate(means)
        nbad = int(np.count_nonzero(bad))
        if nbad and policy is RejectionPolicy.ERROR:
            raise DegenerateSampleError(f"{plan.estimator.value}: {nbad} sample(s) with a zero denominator")
        m = means
        if nbad:
            m = SampleMeans(
                mean_y_second=means.mean_y_second,
                mean_x_second=np.where(bad, 1.0, means.mean_x_second),
                mean_x_first=means.mean_x_first,
                mean_z_first=np.where(bad, plan.pop_mean_z, means.mean_z_first),
            )
        t = np.asarray(plan.evaluate(m), dtype=float)
        if nbad:
            t = t[~bad]
        e2 = (t - truth) ** 2
        out.append(
            _Partial(
                count=int(t.size),
                sum_t=float(np.sum(t)),
                sum_e2=float(np.sum(e2)),
                sum_e4=float(np.sum(e2 * e2)),
                rejected=nbad,
            )
        )
    return out


def _with_ybar(ids: Sequence[EstimatorId]) -> list[EstimatorId]:
    ids = list(dict.fromkeys(ids))
    if not ids:
        raise ValidationError("no estimators requested")
    return ids if EstimatorId.YBAR in ids else [EstimatorId.YBAR, *ids]


def _merge(
    plans: Sequence[EstimatorPlan],
    partials: Sequence[list[_Partial]],
    total: int,
    truth: float,
    policy: RejectionPolicy,
    with_se: bool,
) -> tuple[list[EstimatorStats], float]:
    merged = []
    for k, plan in enumerate(plans):
        parts = [p[k] for p in partials]
        count = sum(p.count for p in parts)
        rejected = sum(p.rejected for p in parts)
        if policy is RejectionPolicy.SKIP_AND_COUNT and rejected > MAX_REJECTION_RATE * total:
            raise NumericGuardError(
                f"{plan.estimator.value}: {rejected} of {total} samples rejected "
                f"(ceiling {MAX_REJECTION_RATE:.1%})"
            )
        s_t = math.fsum(p.sum_t for p in parts)
        s_e2 = math.fsum(p.sum_e2 for p in parts)
        s_e4 = math.fsum(p.sum_e4 for p in parts)
        mean = s_t / count
        mse = s_e2 / count
        se = None
        if with_se and count > 1:
            var_e2 = max(s_e4 - s_e2 * s_e2 / count, 0.0) / (count - 1)
            se = math.sqrt(var_e2 / count)
        merged.append((plan, mean, mse, rejected, se, count))
    base = next(m[2] for m in merged if m[0].estimator is EstimatorId.YBAR)
    stats = []
    for plan, mean, mse, rejected, se, count in merged:
        pre = None if (base == 0.0 or mse == 0.0) else 100.0 * base / mse
        stats.append(
            EstimatorStats(
                estimator=plan.estimator,
                alpha=plan.alpha,
                empirical_mean=mean,
                empirical_bias=mean - truth,
                empirical_mse=mse,
                empirical_pre=pre,
                rejected_count=rejected,
                mse_se=se,
                probability_mass=None if with_se else math.fsum(itertools.repeat(1.0 / count, count)),
            )
        )
    return stats, base


def _chunks(total: int, size: int) -> list[tuple[int, int]]:
    return [(start, min(size, total - start)) for start in range(0, total, size)]


def block_size(n_population: int) -> int:
    """Replications per Monte Carlo block; a function of N alone."""
    return max(256, min(65536, 2**22 // n_population))


def run_monte_carlo(
    pop: FinitePopulation,
    design: DesignSpec,
    estimators: Sequence[EstimatorId] = DEFAULT_ESTIMATORS,
    cfg: SimConfig = SimConfig(10_000),
    alpha: float | None = None,
    workers: int = 1,
    progress: Callable[[int, int], None] | None = None,
) -> SimResult:
    """Replicate the two-phase draw and estimate bias, MSE and PRE empirically.

    Combined estimators use the population-optimal weight unless ``alpha``
    is given. ``workers`` only affects speed, never the numbers.
    """
    check_compatible(pop, design)
    summary = summarize(pop)
    ids = _with_ybar(estimators)
    plans = plan_estimators(ids, summary, alpha)
    truth = summary.mean_y
    blocks = _chunks(cfg.replications, block_size(design.n_population))

    def work(block):
        start, count = block
        first, second = draw_indices(design, cfg.seed, start, count)
        return _evaluate_chunk(plans, sample_means(pop, first, second), truth, cfg.rejection_policy)

    partials = []
    done = 0
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for block, part in zip(blocks, ex.map(work, blocks)):
                partials.append(part)
                done += block[1]
                if progress:
                    progress(done, cfg.replications)
    else:
        for block in blocks:
            partials.append(work(block))
            done += block[1]
            if progress:
                progress(done, cfg.replications)
    stats, base = _merge(plans, partials, cfg.replications, truth, cfg.rejection_policy, with_se=True)
    keep = [s for s in stats if s.estimator in estimators]
    return SimResult(
        stats=tuple(keep),
        design=design,
        base_empirical_var=base,
        population_mean_y=truth,
        replications_used=cfg.replications,
        seed=cfg.seed,
    )


def outcome_count(design: DesignSpec) -> int:
    return math.comb(design.n_population, design.n_first) * math.comb(design.n_first, design.n_second)


def enumerate_exact(
    pop: FinitePopulation,
    design: DesignSpec,
    estimators: Sequence[EstimatorId] = DEFAULT_ESTIMATORS,
    alpha: float | None = None,
    policy: RejectionPolicy = RejectionPolicy.SKIP_AND_COUNT,
    max_outcomes: int = DEFAULT_MAX_OUTCOMES,
) -> ExactResult:
    """Exact design expectations over every equiprobable two-phase sample.

    First-phase subsets are visited in lexicographic order, and within each
    the second-phase subsets likewise.
    """
    check_compatible(pop, design)
    total = outcome_count(design)
    if total > max_outcomes:
        raise NumericGuardError(f"{total} two-phase outcomes exceed the enumeration limit of {max_outcomes}")
    summary = summarize(pop)
    ids = _with_ybar(estimators)
    plans = plan_estimators(ids, summary, alpha)
    truth = summary.mean_y
    N, n1, n = design.n_population, design.n_first, design.n_second
    inner = np.array(list(itertools.combinations(range(n1), n)), dtype=np.int64)
    per_chunk = max(1, 2**18 // len(inner))
    firsts = itertools.combinations(range(N), n1)
    partials = []
    while True:
        block = list(itertools.islice(firsts, per_chunk))
        if not block:
            break
        first = np.array(block, dtype=np.int64)
        second = first[:, inner]
        first_rep = np.repeat(first[:, None, :], len(inner), axis=1)
        means = sample_means(pop, first_rep.reshape(-1, n1), second.reshape(-1, n))
        partials.append(_evaluate_chunk(plans, means, truth, policy))
    stats, base = _merge(plans, partials, total, truth, policy, with_se=False)
    keep = [s for s in stats if s.estimator in estimators]
    return ExactResult(
        stats=tuple(keep),
        design=design,
        base_empirical_var=base,
        population_mean_y=truth,
        outcome_count=total,
    )


@dataclass(frozen=True)
class ComparisonRow:
    estimator: EstimatorId
    analytic_mse: float
    empirical_mse: float
    mse_ratio: float | None
    mse_deviation: float
    analytic_pre: float | None
    empirical_pre: float | None
    pre_deviation: float | None
    flagged: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]
    tolerance: float
    design: DesignSpec = field(repr=False, default=None)

    def row(self, estimator: EstimatorId | str) -> ComparisonRow:
        if isinstance(estimator, str):
            estimator = EstimatorId.parse(estimator)
        return next(r for r in self.rows if r.estimator is estimator)

    @property
    def any_flagged(self) -> bool:
        return any(r.flagged for r in self.rows)

    def records(self) -> list[dict]:
        return [
            {
                "estimator": r.estimator.value,
                "analytic_mse": r.analytic_mse,
                "empirical_mse": r.empirical_mse,
                "mse_ratio": r.mse_ratio,
                "mse_deviation": r.mse_deviation,
                "analytic_pre": r.analytic_pre,
                "empirical_pre": r.empirical_pre,
                "pre_deviation": r.pre_deviation,
                "flagged": r.flagged,
            }
            for r in self.rows
        ]


def _rel(emp: float, ana: float) -> float:
    if ana == 0.0:
        return 0.0 if emp == 0.0 else math.inf
    return (emp - ana) / ana


def compare(
    analytic: EvaluationTable,
    empirical: SimResult | ExactResult,
    tolerance: float = 0.1,
) -> ComparisonReport:
    """Relative deviation of empirical from analytic MSE and PRE per estimator."""
    if analytic.design != empirical.design:
        raise ValidationError("analytic and empirical results use different designs")
    a_ids = [r.estimator for r in analytic.rows]
    e_ids = [s.estimator for s in empirical.stats]
    if set(a_ids) != set(e_ids):
        missing = sorted(e.value for e in set(a_ids) ^ set(e_ids))
        raise ValidationError(f"estimator sets differ: {', '.join(missing)}")
    rows = []
    for s in empirical.stats:
        a = analytic.row(s.estimator)
        ratio = None if a.mse == 0.0 else s.empirical_mse / a.mse
        mse_dev = _rel(s.empirical_mse, a.mse)
        if a.pre is None or s.empirical_pre is None:
            pre_dev = None if (a.pre is None) != (s.empirical_pre is None) else 0.0
        else:
            pre_dev = _rel(s.empirical_pre, a.pre)
        flagged = abs(mse_dev) > tolerance or pre_dev is None or abs(pre_dev) > tolerance
        rows.append(
            ComparisonRow(s.estimator, a.mse, s.empirical_mse, ratio, mse_dev, a.pre, s.empirical_pre, pre_dev, flagged)
        )
    return ComparisonReport(tuple(rows), tolerance, analytic.design)
