"""Chain-ratio estimators of a population mean under two-phase SRSWOR sampling."""

from .design import DesignSpec, SampleFactors, Substream, TwoPhaseSample, draw_two_phase, factors
from .errors import DataError, DegenerateSampleError, NumericGuardError, TwoPhaseError, ValidationError
from .estimators import (
    AuxTransform,
    EstimatorId,
    alpha_opt,
    chain_estimate,
    classical_ratio,
    combined_estimate,
    k_yz,
    theta,
    transform_for,
    two_phase_ratio,
)
from .mse_theory import (
    EvaluationTable,
    analytic_table,
    efficiency_gap,
    min_mse_combined,
    mse_chain,
    mse_combined,
    mse_two_phase_ratio,
    var_ybar,
)
from .population import (
    FinitePopulation,
    PopulationSummary,
    anderson_summary,
    load_population,
    load_summary,
    summarize,
    write_summary,
)
from .simulate import (
    GenSpec,
    RejectionPolicy,
    SimConfig,
    compare,
    enumerate_exact,
    generate_population,
    run_monte_carlo,
)

__version__ = "0.1.0"
