"""Nonparametric tests and detection of structural breaks in the
conditional mean and variance of a time-series regression
``Y_t = mu(X_t) + sigma(X_t) eps_t``.
"""

__version__ = "0.1.0"

from .breaktests import (
    ConfidenceBand,
    JointOutcome,
    TestConfig,
    TestOutcome,
    approximate_pvalue,
    confidence_band_mean_diff,
    confidence_band_variance_diff,
    critical_value,
    gumbel_quantile,
    run_test,
    test_joint,
    test_mean,
    test_variance,
)
from .detect import BreakSet, DetectConfig, argmax_single_break, cp_disparity, cpfind
from .estimators import (
    EstimationError,
    EvaluationGrid,
    SegmentEstimate,
    TimeSeriesSample,
    build_grid,
    estimate_nu_epsilon,
    estimate_segment,
)
from .kernels import JACKKNIFE, PARABOLIC, BandwidthConfig, KernelSpec, cv_bandwidth, rule_of_thumb_bandwidth
from .simulate import (
    DgpSpec,
    NoiseSpec,
    SimulationScenario,
    adn,
    amd,
    inject_breaks,
    run_detection_benchmark,
    run_size_power,
    synthesize,
)

__all__ = [
    "BandwidthConfig", "BreakSet", "ConfidenceBand", "DetectConfig", "DgpSpec", "EstimationError",
    "EvaluationGrid", "JACKKNIFE", "JointOutcome", "KernelSpec", "NoiseSpec", "PARABOLIC",
    "SegmentEstimate", "SimulationScenario", "TestConfig", "TestOutcome", "TimeSeriesSample",
    "adn", "amd", "approximate_pvalue", "argmax_single_break", "build_grid",
    "confidence_band_mean_diff", "confidence_band_variance_diff", "cp_disparity", "cpfind",
    "critical_value", "cv_bandwidth", "estimate_nu_epsilon", "estimate_segment", "gumbel_quantile",
    "inject_breaks", "rule_of_thumb_bandwidth", "run_detection_benchmark", "run_size_power",
    "run_test", "synthesize", "test_joint", "test_mean", "test_variance",
]
