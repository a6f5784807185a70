"""Win-ratio trial design for prioritized time-to-event endpoints.

Win, loss and tie probabilities come from integrals of copula-based joint
survival functions under accrual and dropout censoring; power and sample
size follow from the closed-form variance of log WR. A Monte Carlo
simulator provides an independent check.
"""

__version__ = "0.1.0"

from .copula import ArmJointModel, GaussianCopula, GumbelHougaard, tau_to_corr, tau_to_kappa
from .design import (
    DesignError,
    DesignResult,
    DesignSpec,
    Stratum,
    correlation_grid,
    design,
    power_at_n,
    required_sample_size,
    stratified_combine,
    stratified_power,
    stratified_sample_size,
    yg_variance_factor,
)
from .simulate import SimConfig, empirical_summary, generate_trial, pairwise_win_ratio
from .survival import CensoringModel, Exponential, PiecewiseExponential, Tabulated
from .winprob import (
    ScenarioSpec,
    WinLossTieTable,
    compute_table,
    exponential_scenario,
    scenario_from_marginals,
    tie_prob,
    win_prob_first,
    win_prob_k,
)

__all__ = [
    "ArmJointModel", "CensoringModel", "DesignError", "DesignResult", "DesignSpec", "Exponential",
    "GaussianCopula", "GumbelHougaard", "PiecewiseExponential", "ScenarioSpec", "SimConfig", "Stratum",
    "Tabulated", "WinLossTieTable", "compute_table", "correlation_grid", "design", "empirical_summary",
    "exponential_scenario", "generate_trial", "pairwise_win_ratio", "power_at_n", "required_sample_size",
    "scenario_from_marginals", "stratified_combine", "stratified_power", "stratified_sample_size",
    "tau_to_corr", "tau_to_kappa", "tie_prob", "win_prob_first", "win_prob_k", "yg_variance_factor",
]
