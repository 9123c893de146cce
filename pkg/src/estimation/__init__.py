"""Monte-Carlo estimation over perfect samples with Hoeffding bands."""

from src.estimation.estimators import (
    EstimateReport,
    EtaThetaReport,
    concentration_empirical,
    estimate_dbar_upper,
    estimate_eta_theta,
    estimate_marginal,
    exact_phase_gap,
    estimate_phase_gap,
    estimate_phase_gap_kernel,
)
from src.estimation.hoeffding import hoeffding_band, hoeffding_halfwidth, required_replications

__all__ = [
    "EstimateReport",
    "EtaThetaReport",
    "concentration_empirical",
    "estimate_dbar_upper",
    "estimate_eta_theta",
    "estimate_marginal",
    "exact_phase_gap",
    "hoeffding_band",
    "hoeffding_halfwidth",
    "estimate_phase_gap",
    "estimate_phase_gap_kernel",
    "required_replications",
]
