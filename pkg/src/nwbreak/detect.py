"""Locating structural breaks at unknown positions.

:func:`cpfind` runs two stages. The first bisects the series at midpoints,
recursing into both halves whenever the split test rejects, until pieces
are shorter than ``l_min``. The second re-tests every candidate against
the window spanned by its neighbours and drops the ones that no longer
reject, sweeping until nothing changes.

:func:`argmax_single_break` instead scans a coarse partition of the time
axis and returns the split with the largest disparity.

A break index ``b`` always means: observations ``<= b`` before the break,
``> b`` after it.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .breaktests import TestConfig, _fit, run_test
from .estimators import MIN_SEGMENT_N, EstimationError, SegmentTooSmallError, TimeSeriesSample
from .kernels import BandwidthConfig, InvalidConfigurationError

__all__ = [
    "DetectConfig",
    "BreakSet",
    "NoAdmissibleCandidateError",
    "cp_disparity",
    "cpfind",
    "argmax_single_break",
    "time_partition",
]

log = logging.getLogger(__name__)


class NoAdmissibleCandidateError(EstimationError):
    """No partition point leaves enough observations on both sides."""


@dataclass(frozen=True)
class DetectConfig:
    """Settings for :func:`cpfind` and :func:`argmax_single_break`.

    ``min_gap`` defaults to ``l_min``. ``target="joint"`` uses the Holm
    reject-any decision.
    """

    l_min: int = 100
    alpha: float = 0.05
    target: Literal["mean", "variance", "joint"] = "mean"
    min_gap: int | None = None
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig)
    min_segment_n: int = MIN_SEGMENT_N
    variance_assumption: Literal["common", "separate"] = "separate"

    def __post_init__(self):
        if self.l_min < 2 * self.min_segment_n:
            raise InvalidConfigurationError(
                f"l_min={self.l_min} must be at least 2 * min_segment_n = {2 * self.min_segment_n}")
        if self.min_gap is None:
            object.__setattr__(self, "min_gap", self.l_min)
        if self.min_gap < 1:
            raise InvalidConfigurationError(f"min_gap must be positive, got {self.min_gap}")
        # delegate alpha / target / assumption checks
        self.test_config()

    def test_config(self) -> TestConfig:
        return TestConfig(alpha=self.alpha, variance_assumption=self.variance_assumption,
                          bandwidth=self.bandwidth, target=self.target,
                          min_segment_n=self.min_segment_n)

    def replace(self, **changes) -> "DetectConfig":
        if "l_min" in changes and "min_gap" not in changes and self.min_gap == self.l_min:
            changes["min_gap"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "l_min": self.l_min,
            "alpha": self.alpha,
            "target": self.target,
            "min_gap": self.min_gap,
            "bandwidth": self.bandwidth.to_dict(),
            "min_segment_n": self.min_segment_n,
            "variance_assumption": self.variance_assumption,
        }


@dataclass(frozen=True)
class BreakSet:
    """Detected breaks in increasing order.

    ``scores`` holds the statistic of each break's final confirmatory test
    (the larger of the two for ``joint``). ``candidates`` lists the
    first-stage breaks before confirmation.
    """

    breaks: tuple[int, ...] = ()
    confirmed: tuple[bool, ...] = ()
    scores: tuple[float, ...] = ()
    candidates: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.breaks)

    def to_dict(self) -> dict:
        return {
            "breaks": list(self.breaks),
            "confirmed": list(self.confirmed),
            "scores": list(self.scores),
            "candidates": list(self.candidates),
        }


def cp_disparity(series: TimeSeriesSample, t: int, cfg: DetectConfig | None = None) -> tuple[float, float]:
    """Largest absolute gap in mean and in variance between ``[0, t]`` and ``(t, n)``.

    Both fits share one grid; only points supported on both sides count.

    Raises
    ------
    SegmentTooSmallError
        If either side has fewer than ``cfg.min_segment_n`` observations.
    """
    cfg = cfg or DetectConfig()
    n = len(series)
    left, right = t + 1, n - t - 1
    if min(left, right) < cfg.min_segment_n:
        raise SegmentTooSmallError(
            f"split after index {t} leaves {left} and {right} observations; need {cfg.min_segment_n} each")
    fit = _fit(series, left, cfg.test_config())
    k = fit.mask
    mu = np.abs(fit.est1.mean_bc - fit.est2.mean_bc)[k]
    var = np.abs(fit.est1.var_bc - fit.est2.var_bc)[k]
    return float(mu.max()), float(var.max())


def _statistic(outcome) -> float:
    if hasattr(outcome, "reject_any"):
        return max(outcome.mean.statistic, outcome.variance.statistic)
    return outcome.statistic


def _split_test(series: TimeSeriesSample, lo: int, hi: int, b: int, tcfg: TestConfig):
    """Test the window ``(lo, hi]`` split after ``b``; ``(reject, statistic)``."""
    window = series[lo + 1:hi + 1]
    try:
        out = run_test(window, b - lo, tcfg)
    except EstimationError as exc:
        # too little data behaves like no evidence of a break
        log.debug("test on (%d, %d] at %d not carried out: %s", lo, hi, b, exc)
        return False, 0.0
    return bool(out.reject), _statistic(out)


def _workers() -> int:
    raw = os.environ.get("CPFIND_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer CPFIND_THREADS=%r", raw)
        return 1


def _stage_one(series: TimeSeriesSample, cfg: DetectConfig, tcfg: TestConfig,
               workers: int) -> list[int]:
    found: list[int] = []
    frontier = [(0, len(series) - 1)]

    def visit(seg):
        start, end = seg
        mid = start + (end - start + 1) // 2
        reject, _ = _split_test(series, start - 1, end, mid, tcfg)
        return seg, mid, reject

    # breadth-first so each level's independent tests can run together
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        while frontier:
            frontier = [s for s in frontier if s[1] - s[0] + 1 >= cfg.l_min]
            results = list(pool.map(visit, frontier)) if pool else [visit(s) for s in frontier]
            frontier = []
            for (start, end), mid, reject in results:
                if reject:
                    found.append(mid)
                    frontier += [(start, mid), (mid + 1, end)]
    finally:
        if pool:
            pool.shutdown()
    return sorted(set(found))


def _stage_two(series: TimeSeriesSample, candidates: list[int], tcfg: TestConfig):
    kept = list(candidates)
    scores = {}
    n = len(series)
    for _ in range(len(candidates) + 1):
        removed = False
        j = 0
        while j < len(kept):
            lo = kept[j - 1] if j > 0 else -1
            hi = kept[j + 1] if j + 1 < len(kept) else n - 1
            reject, stat = _split_test(series, lo, hi, kept[j], tcfg)
            if reject:
                scores[kept[j]] = stat
                j += 1
            else:
                del kept[j]
                removed = True
        if not removed:
            break
    return kept, [scores[b] for b in kept]


def _enforce_gap(breaks: list[int], scores: list[float], min_gap: int):
    out_b: list[int] = []
    out_s: list[float] = []
    for b, s in zip(breaks, scores):
        if out_b and b - out_b[-1] < min_gap:
            if s > out_s[-1]:
                out_b[-1], out_s[-1] = b, s
            continue
        out_b.append(b)
        out_s.append(s)
    return out_b, out_s


def cpfind(series: TimeSeriesSample, cfg: DetectConfig | None = None, *,
           workers: int | None = None) -> BreakSet:
    """Two-stage multiple break detection.

    Parameters
    ----------
    series : TimeSeriesSample
    cfg : DetectConfig, optional
    workers : int, optional
        Threads for first-stage tests; defaults to ``CPFIND_THREADS`` or 1.
        Results do not depend on it.

    Returns
    -------
    BreakSet
        Confirmed breaks at least ``cfg.min_gap`` apart.
    """
    cfg = cfg or DetectConfig()
    tcfg = cfg.test_config()
    if len(series) < cfg.l_min:
        return BreakSet()
    candidates = _stage_one(series, cfg, tcfg, workers or _workers())
    kept, scores = _stage_two(series, candidates, tcfg)
    kept, scores = _enforce_gap(kept, scores, cfg.min_gap)
    return BreakSet(tuple(kept), (True,) * len(kept), tuple(scores), tuple(candidates))


def time_partition(n: int, b: float, resolution: float | None = None) -> np.ndarray:
    """Candidate break indices ``floor(2 j b n)`` for ``j < ceil(1 / (2 b))``.

    ``resolution`` replaces the spacing ``2 b`` (as a fraction of the
    sample) when given.
    """
    step = 2.0 * b if resolution is None else float(resolution)
    if not step > 0:
        raise InvalidConfigurationError(f"partition step must be positive, got {step}")
    k = math.ceil(1.0 / step - 1e-12)
    return np.unique(np.floor(step * np.arange(k) * n).astype(int))


def argmax_single_break(series: TimeSeriesSample, cfg: DetectConfig | None = None, *,
                        resolution: float | None = None) -> tuple[int, float]:
    """Break index maximising the mean (or variance) disparity over the time partition.

    The partition spacing is ``2 b`` with ``b`` the bandwidth resolved on
    the whole series. ``target="variance"`` maximises the variance
    disparity, anything else the mean disparity. Ties go to the earliest
    index.

    Raises
    ------
    NoAdmissibleCandidateError
        If no partition point leaves ``min_segment_n`` observations on both
        sides with a shared supported grid point.
    """
    cfg = cfg or DetectConfig()
    n = len(series)
    b = cfg.bandwidth.resolve(series)
    which = 1 if cfg.target == "variance" else 0
    best_t, best = -1, -np.inf
    for t in time_partition(n, b, resolution):
        if min(t + 1, n - t - 1) < cfg.min_segment_n:
            continue
        try:
            score = cp_disparity(series, int(t), cfg)[which]
        except EstimationError:
            continue
        if score > best:
            best_t, best = int(t), score
    if best_t < 0:
        raise NoAdmissibleCandidateError("no admissible candidate in the time partition")
    return best_t, float(best)
