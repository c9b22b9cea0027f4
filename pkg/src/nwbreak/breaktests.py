"""Sup-type tests for a break in conditional mean and/or variance.

A window is split in two at ``split``; both halves are estimated on a
common grid spanning the pooled covariate range, and the largest
standardised gap between the two fits is compared with an extreme-value
critical value ``B_m(z)`` whose limit law is ``exp(-2 exp(-z))``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import stats

from .estimators import (
    MIN_SEGMENT_N,
    AllPointsInvalidError,
    EvaluationGrid,
    NuEpsilonEstimate,
    SegmentEstimate,
    TimeSeriesSample,
    build_grid,
    estimate_nu_epsilon,
    estimate_segment,
)
from .kernels import BandwidthConfig, InvalidConfigurationError

__all__ = [
    "TestConfig",
    "TestOutcome",
    "JointOutcome",
    "ConfidenceBand",
    "gumbel_quantile",
    "critical_value",
    "approximate_pvalue",
    "test_mean",
    "test_variance",
    "test_joint",
    "run_test",
    "confidence_band_mean_diff",
    "confidence_band_variance_diff",
]


def gumbel_quantile(alpha: float) -> float:
    """``z`` with ``exp(-2 exp(-z)) = 1 - alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return -math.log(-math.log1p(-alpha) / 2.0)


def critical_value(m: int, z: float) -> float:
    """Extreme-value normalisation ``B_m(z)`` for a maximum over ``m`` grid points.

    ``sqrt(2 log m) - (log log m + log(2 sqrt(pi))) / sqrt(2 log m) + z / sqrt(2 log m)``
    """
    if m < 2:
        raise ValueError(f"critical value needs m >= 2, got {m}")
    a = math.sqrt(2.0 * math.log(m))
    return a - (math.log(math.log(m)) + math.log(2.0 * math.sqrt(math.pi))) / a + z / a


def approximate_pvalue(statistic: float, m: int) -> float:
    """Limit-law p-value ``1 - exp(-2 exp(-z))`` with ``z`` solving ``B_m(z) = statistic``.

    Only an asymptotic approximation; decisions use the critical value.
    """
    a = math.sqrt(2.0 * math.log(m))
    z = a * (statistic - critical_value(m, 0.0))
    return -math.expm1(-2.0 * math.exp(-z)) if z > -700 else 1.0


@dataclass(frozen=True)
class TestConfig:
    """Settings shared by the mean, variance and joint tests.

    ``variance_assumption`` picks the scale of the mean statistic: one
    local variance pooled over both halves (``common``) or each half's own
    (``separate``).
    """

    __test__ = False  # not a pytest class

    alpha: float = 0.05
    variance_assumption: Literal["common", "separate"] = "separate"
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)
    target: Literal["mean", "variance", "joint"] = "mean"
    min_segment_n: int = MIN_SEGMENT_N
    small_sample: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.variance_assumption not in ("common", "separate"):
            raise InvalidConfigurationError(f"unknown variance assumption {self.variance_assumption!r}")
        if self.target not in ("mean", "variance", "joint"):
            raise InvalidConfigurationError(f"unknown target {self.target!r}")

    def replace(self, **changes) -> "TestConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "variance_assumption": self.variance_assumption,
            "bandwidth": self.bandwidth.to_dict(),
            "target": self.target,
            "min_segment_n": self.min_segment_n,
            "small_sample": self.small_sample,
        }


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: float
    m: int
    critical_value: float
    reject: bool
    argmax_x: float
    kind: str = "mean"
    nu_epsilon: NuEpsilonEstimate | None = None

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "statistic": self.statistic,
            "m": self.m,
            "critical_value": self.critical_value,
            "reject": self.reject,
            "argmax_x": self.argmax_x,
        }
        if self.nu_epsilon is not None:
            d["nu_epsilon"] = {"value": self.nu_epsilon.value, "count": self.nu_epsilon.count}
        return d


@dataclass(frozen=True)
class JointOutcome:
    """Holm step-down over the mean and variance tests.

    ``reject_any`` is the family-wise decision; ``reject_mean`` and
    ``reject_variance`` are the individual Holm decisions.
    ``reject_both_printed`` applies the stricter two-sided rule
    ``T_min >= B(z_{alpha/2})`` and ``T_max >= B(z_alpha)``.
    """

    mean: TestOutcome
    variance: TestOutcome
    reject_any: bool
    reject_mean: bool
    reject_variance: bool
    reject_both_printed: bool

    @property
    def reject(self) -> bool:
        return self.reject_any

    def to_dict(self) -> dict:
        return {
            "kind": "joint",
            "mean": self.mean.to_dict(),
            "variance": self.variance.to_dict(),
            "reject_any": self.reject_any,
            "reject_mean": self.reject_mean,
            "reject_variance": self.reject_variance,
            "reject_both_printed": self.reject_both_printed,
        }


@dataclass(frozen=True)
class ConfidenceBand:
    x: np.ndarray
    center: np.ndarray
    half_width: np.ndarray
    level: float

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.half_width

    def excludes_zero(self) -> bool:
        return bool(np.any(np.abs(self.center) > self.half_width))

    def covers(self, values) -> bool:
        values = np.broadcast_to(np.asarray(values, dtype=float), self.center.shape)
        return bool(np.all((self.lower <= values) & (values <= self.upper)))


@dataclass(frozen=True, eq=False)
class _Fit:
    """Everything the statistics and bands need for one split window."""

    grid: EvaluationGrid
    b: float
    est1: SegmentEstimate
    est2: SegmentEstimate
    mask: np.ndarray
    cfg: TestConfig

    @property
    def m(self) -> int:
        return self.grid.m

    def mean_se2(self) -> np.ndarray:
        """Variance of ``mu1* - mu2*`` at each grid point."""
        e1, e2 = self.est1, self.est2
        if self.cfg.variance_assumption == "separate":
            return e1.mean_se2 + e2.mean_se2
        # one local variance shared by both halves
        pooled = (e1.mean_spread + e2.mean_spread) / (e1.weight_sq_sum + e2.weight_sq_sum)
        return pooled * (e1.weight_sq_sum / e1.weight_sum ** 2 + e2.weight_sq_sum / e2.weight_sum ** 2)

    def var_se2(self) -> np.ndarray:
        """Variance of ``sigma1*^2 - sigma2*^2`` at each grid point."""
        return self.est1.var_se2 + self.est2.var_se2


def _check_split(window: TimeSeriesSample, split: int) -> None:
    if not 0 < split < len(window):
        raise ValueError(f"split must lie strictly inside the window (0, {len(window)}), got {split}")


def _fit(window: TimeSeriesSample, split: int, cfg: TestConfig) -> _Fit:
    _check_split(window, split)
    left, right = window[:split], window[split:]
    b = cfg.bandwidth.resolve(window)
    lam1, lam2 = float(window.x.min()), float(window.x.max())
    if lam1 == lam2:
        lam2 = lam1 + 2.0 * b
    grid = build_grid(lam1, lam2, b)
    est1 = estimate_segment(left, grid, b, min_segment_n=cfg.min_segment_n)
    est2 = estimate_segment(right, grid, b, min_segment_n=cfg.min_segment_n)
    mask = est1.valid_mask & est2.valid_mask
    if not mask.any():
        raise AllPointsInvalidError("the two segments share no supported grid point")
    return _Fit(grid, b, est1, est2, mask, cfg)


def _welch_df(v1: np.ndarray, v2: np.ndarray, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Satterthwaite degrees of freedom for ``v1 + v2`` with Kish counts ``k1``, ``k2``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        df = (v1 + v2) ** 2 / (v1 ** 2 / np.maximum(k1 - 1.0, 1.0) + v2 ** 2 / np.maximum(k2 - 1.0, 1.0))
    return np.where(np.isfinite(df), np.maximum(df, 1.0), 1.0)


def _to_normal_scale(t: np.ndarray, df: np.ndarray) -> np.ndarray:
    # same tail probability under N(0, 1) as under Student t(df)
    return stats.norm.isf(stats.t.sf(t, df))


def _ratio(diff: np.ndarray, se2: np.ndarray, mask: np.ndarray, df=None) -> np.ndarray:
    ok = mask & (se2 > 0)
    out = np.zeros_like(diff)
    out[ok] = np.abs(diff[ok]) / np.sqrt(se2[ok])
    if df is not None:
        out[ok] = _to_normal_scale(out[ok], df[ok])
    # a nonzero gap with no sampling spread at all is infinitely significant
    out[mask & (se2 <= 0) & (diff != 0)] = np.inf
    return out


def _sup(values: np.ndarray, fit: _Fit) -> tuple[float, float]:
    vals = np.where(fit.mask, values, -np.inf)
    j = int(np.argmax(vals))  # first maximiser
    return float(vals[j]), float(fit.grid.points[j])


def _outcome(stat: float, x_at: float, fit: _Fit, kind: str, nu=None) -> TestOutcome:
    crit = critical_value(max(fit.m, 2), gumbel_quantile(fit.cfg.alpha))
    return TestOutcome(stat, fit.m, crit, bool(stat > crit), x_at, kind, nu)


def _df(fit: _Fit, v1: np.ndarray, v2: np.ndarray):
    if not fit.cfg.small_sample:
        return None
    return _welch_df(v1, v2, fit.est1.kish_count, fit.est2.kish_count)


def _mean_terms(fit: _Fit) -> np.ndarray:
    df = _df(fit, fit.est1.mean_se2, fit.est2.mean_se2)
    return _ratio(fit.est1.mean_bc - fit.est2.mean_bc, fit.mean_se2(), fit.mask, df)


def _variance_terms(fit: _Fit) -> np.ndarray:
    df = _df(fit, fit.est1.var_se2, fit.est2.var_se2)
    return _ratio(fit.est1.var_bc - fit.est2.var_bc, fit.var_se2(), fit.mask, df)


def _mean_outcome(fit: _Fit) -> TestOutcome:
    stat, x_at = _sup(_mean_terms(fit), fit)
    return _outcome(stat, x_at, fit, "mean")


def _variance_outcome(fit: _Fit) -> TestOutcome:
    nu = estimate_nu_epsilon(fit.est1, fit.est2)
    stat, x_at = _sup(_variance_terms(fit), fit)
    return _outcome(stat, x_at, fit, "variance", nu)


def test_mean(window: TimeSeriesSample, split: int, cfg: TestConfig | None = None) -> TestOutcome:
    """Sup test for a change in the conditional mean at ``split``.

    The statistic is ``max_x |mu1*(x) - mu2*(x)| / se(x)`` over grid points
    supported in both halves, where ``se(x)^2`` is the finite-sample
    variance of the difference. Asymptotically ``se(x)^2`` equals
    ``phi(K*) s(x) / (n b f(x))`` with ``s`` the sum of the two conditional
    variances (or twice a pooled one), so the maximum has the Gumbel limit
    behind :func:`critical_value`.

    Parameters
    ----------
    window : TimeSeriesSample
    split : int
        Observations ``[0, split)`` form the first half.
    cfg : TestConfig, optional

    Returns
    -------
    TestOutcome
    """
    cfg = cfg or TestConfig()
    return _mean_outcome(_fit(window, split, cfg))


def test_variance(window: TimeSeriesSample, split: int, cfg: TestConfig | None = None) -> TestOutcome:
    """Sup test for a change in the conditional variance at ``split``.

    Same construction as :func:`test_mean` applied to squared residuals.
    The local spread ``nu_eps sigma^4(x)`` is estimated directly; the
    global excess kurtosis ``nu_eps`` is reported alongside.
    """
    cfg = cfg or TestConfig(target="variance")
    return _variance_outcome(_fit(window, split, cfg))


def _holm(mean: TestOutcome, var: TestOutcome, alpha: float) -> JointOutcome:
    m = max(mean.m, 2)
    b_half = critical_value(m, gumbel_quantile(alpha / 2.0))
    b_full = critical_value(m, gumbel_quantile(alpha))
    t_mu, t_sig = abs(mean.statistic), abs(var.statistic)
    t_max, t_min = max(t_mu, t_sig), min(t_mu, t_sig)
    reject_any = t_max >= b_half
    reject_other = reject_any and t_min >= b_full
    if t_mu >= t_sig:
        rej_mean, rej_var = reject_any, reject_other
    else:
        rej_mean, rej_var = reject_other, reject_any
    both_printed = t_min >= b_half and t_max >= b_full
    return JointOutcome(mean, var, bool(reject_any), bool(rej_mean), bool(rej_var), bool(both_printed))


def test_joint(window: TimeSeriesSample, split: int, cfg: TestConfig | None = None) -> JointOutcome:
    """Mean and variance tests combined by Holm's step-down procedure."""
    cfg = cfg or TestConfig(target="joint")
    fit = _fit(window, split, cfg)
    return _holm(_mean_outcome(fit), _variance_outcome(fit), cfg.alpha)


def run_test(window: TimeSeriesSample, split: int, cfg: TestConfig):
    """Dispatch on ``cfg.target``."""
    if cfg.target == "mean":
        return test_mean(window, split, cfg)
    if cfg.target == "variance":
        return test_variance(window, split, cfg)
    return test_joint(window, split, cfg)


def _band(fit: _Fit, center: np.ndarray, se2: np.ndarray, df) -> ConfidenceBand:
    crit = critical_value(max(fit.m, 2), gumbel_quantile(fit.cfg.alpha))
    k = fit.mask
    se = np.sqrt(np.maximum(se2[k], 0.0))
    if df is None:
        hw = crit * se
    else:
        # t quantile with the tail mass of crit, the inverse of the test's mapping
        hw = stats.t.isf(stats.norm.sf(crit), df[k]) * se
    return ConfidenceBand(fit.grid.points[k].copy(), center[k].copy(), hw, 1.0 - fit.cfg.alpha)


def confidence_band_mean_diff(window: TimeSeriesSample, split: int,
                              cfg: TestConfig | None = None) -> ConfidenceBand:
    """Simultaneous band for ``mu1 - mu2`` over the supported grid points.

    The half-width is ``B_m(z_alpha) se(x)`` (a Student t quantile with the
    same tail mass under the small-sample correction), so the band excludes
    zero somewhere exactly when :func:`test_mean` rejects.
    """
    cfg = cfg or TestConfig()
    fit = _fit(window, split, cfg)
    df = _df(fit, fit.est1.mean_se2, fit.est2.mean_se2)
    return _band(fit, fit.est1.mean_bc - fit.est2.mean_bc, fit.mean_se2(), df)


def confidence_band_variance_diff(window: TimeSeriesSample, split: int,
                                  cfg: TestConfig | None = None) -> ConfidenceBand:
    """Simultaneous band for ``sigma1^2 - sigma2^2`` over the supported grid points."""
    cfg = cfg or TestConfig(target="variance")
    fit = _fit(window, split, cfg)
    df = _df(fit, fit.est1.var_se2, fit.est2.var_se2)
    return _band(fit, fit.est1.var_bc - fit.est2.var_bc, fit.var_se2(), df)
