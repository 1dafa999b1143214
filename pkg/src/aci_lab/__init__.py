"""Numerical laboratory for attention-constrained inference: screen K records,
verify the top B, and compare simulated information gain with its limits."""

__version__ = "0.1.0"

from .bounds import (
    Budgets,
    BoundReport,
    InfoParams,
    achievable_gain_weak,
    converse_gain,
    enrichment_bound,
    jakob_curve,
    oracle_ceiling,
    required_budget,
)
from .models import (
    QuadConfig,
    ScreeningModel,
    StandardizedPareto,
    StandardNormal,
    WindowSample,
    auc,
    eta_from_g,
    prevalence,
    sample_window,
    screening_information,
    screening_information_weak,
)
from .simulator import Policy, SimResult, VerificationChannel, run_experiment, select

__all__ = [
    "BoundReport", "Budgets", "InfoParams", "Policy", "QuadConfig", "ScreeningModel",
    "SimResult", "StandardNormal", "StandardizedPareto", "VerificationChannel", "WindowSample",
    "achievable_gain_weak", "auc", "converse_gain", "enrichment_bound", "eta_from_g",
    "jakob_curve", "oracle_ceiling", "prevalence", "required_budget", "run_experiment", "sample_window",
    "screening_information", "screening_information_weak", "select",
]
