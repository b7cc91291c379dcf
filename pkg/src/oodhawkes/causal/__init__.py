from .ate import (ATEReport, ConstantIntensity, IntensityProvider, OverlapResult, ScaledIntensity,
                  check_overlap, default_grid_dt, estimate_ate, ipw_weight, naive_ate)
from .propensity import PropensityTable, StratumDurations, default_covariates, estimate_propensity
from .timeline import JointTimeline, joint_timeline

__all__ = [
    "ATEReport", "ConstantIntensity", "IntensityProvider", "JointTimeline", "OverlapResult",
    "PropensityTable", "ScaledIntensity", "StratumDurations", "check_overlap", "default_covariates",
    "default_grid_dt", "estimate_ate", "estimate_propensity", "ipw_weight", "joint_timeline",
    "naive_ate",
]
