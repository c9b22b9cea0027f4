"""Grid-based Nadaraya-Watson estimation for one time segment.

All estimates are self-normalised kernel ratios computed on the segment
alone. Means and variances use the jackknife kernel so that the leading
smoothing bias cancels; the covariate density uses the parabolic kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import JACKKNIFE, JACKKNIFE_SQUARED, PARABOLIC, KernelSpec

__all__ = [
    "TimeSeriesSample",
    "EvaluationGrid",
    "SegmentEstimate",
    "NuEpsilonEstimate",
    "EstimationError",
    "SegmentTooSmallError",
    "EmptyWindowError",
    "AllPointsInvalidError",
    "NoValidResidualsError",
    "InvalidRangeError",
    "VARIANCE_FLOOR",
    "MIN_SEGMENT_N",
    "density_floor",
    "build_grid",
    "kernel_sums",
    "density_estimate",
    "nw_mean",
    "nw_variance",
    "estimate_segment",
    "estimate_nu_epsilon",
]

VARIANCE_FLOOR = 1e-8
MIN_SEGMENT_N = 30

# evaluation points x observations per dense block
_BLOCK = 2_000_000


class EstimationError(ValueError):
    """Base class for failures caused by insufficient or degenerate data."""


class SegmentTooSmallError(EstimationError):
    pass


class EmptyWindowError(EstimationError):
    pass


class AllPointsInvalidError(EstimationError):
    pass


class NoValidResidualsError(EstimationError):
    pass


class InvalidRangeError(EstimationError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeriesSample:
    """Paired observations ``(t_i, Y_i, X_i)`` ordered in time.

    ``times`` holds integer sample positions by default. Slicing keeps the
    original positions so break indices stay absolute.
    """

    times: np.ndarray
    y: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times)
        y = np.asarray(self.y, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if not (t.ndim == y.ndim == x.ndim == 1):
            raise ValueError("times, y and x must be one-dimensional")
        if not (len(t) == len(y) == len(x)):
            raise ValueError(f"length mismatch: times={len(t)}, y={len(y)}, x={len(x)}")
        if len(t) < 1:
            raise ValueError("sample must contain at least one observation")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise ValueError("y and x must be finite")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        for name, arr in (("times", t), ("y", y), ("x", x)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, y, x, times=None) -> "TimeSeriesSample":
        y = np.asarray(y, dtype=float)
        if times is None:
            times = np.arange(len(y))
        return cls(np.asarray(times), y, np.asarray(x, dtype=float))

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, key: slice) -> "TimeSeriesSample":
        if not isinstance(key, slice):
            raise TypeError("samples can only be sliced")
        return TimeSeriesSample(self.times[key], self.y[key], self.x[key])

    def normalized_times(self) -> np.ndarray:
        """Time positions rescaled to ``[0, 1]``."""
        t = self.times.astype(float)
        if len(t) == 1:
            return np.zeros(1)
        return (t - t[0]) / (t[-1] - t[0])


@dataclass(frozen=True)
class EvaluationGrid:
    points: np.ndarray
    m: int
    lambda1: float
    lambda2: float
    bandwidth: float

    def cell_index(self, values: np.ndarray) -> np.ndarray:
        """Index of the grid cell ``[x_j - b, x_j + b)`` holding each value, -1 if none."""
        j = np.floor((np.asarray(values, dtype=float) - self.lambda1 + self.bandwidth)
                     / (2.0 * self.bandwidth)).astype(int)
        j[(j < 0) | (j >= self.m)] = -1
        return j


def build_grid(lambda1: float, lambda2: float, b: float) -> EvaluationGrid:
    """Grid ``lambda1 + 2 j b`` for ``j < ceil((lambda2 - lambda1) / (2 b))``."""
    if not lambda1 < lambda2:
        raise InvalidRangeError(f"need lambda1 < lambda2, got {lambda1} and {lambda2}")
    if not b > 0:
        raise InvalidRangeError(f"bandwidth must be positive, got {b}")
    # guard against ceil(2.0000000000000004) style overshoot
    ratio = (lambda2 - lambda1) / (2.0 * b)
    m = max(1, math.ceil(ratio - 1e-12))
    points = lambda1 + 2.0 * b * np.arange(m)
    return EvaluationGrid(points, m, float(lambda1), float(lambda2), float(b))


def density_floor(n: int, b: float) -> float:
    return max(0.01, 5.0 / (n * b))


def kernel_sums(xeval, xs, b: float, kernel: KernelSpec, values=()) -> tuple[np.ndarray, list]:
    """Kernel weight sums at each evaluation point.

    Returns ``(sum_t K((x - X_t)/b), [sum_t v_t K((x - X_t)/b) for v in values])``.
    Work is split into dense blocks so memory stays bounded for long series.
    """
    xeval = np.atleast_1d(np.asarray(xeval, dtype=float))
    xs = np.asarray(xs, dtype=float)
    values = [np.asarray(v, dtype=float) for v in values]
    den = np.empty(xeval.size)
    nums = [np.empty(xeval.size) for _ in values]
    step = max(1, _BLOCK // max(1, xs.size))
    for start in range(0, xeval.size, step):
        stop = min(start + step, xeval.size)
        w = kernel((xeval[start:stop, None] - xs[None, :]) / b)
        den[start:stop] = w.sum(axis=1)
        for out, v in zip(nums, values):
            out[start:stop] = w @ v
    return den, nums


def density_estimate(x, xs, b: float, kernel: KernelSpec = PARABOLIC):
    """Kernel density ``(n b)^-1 sum_t K((x - X_t) / b)``."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise EmptyWindowError("density needs at least one observation")
    den, _ = kernel_sums(x, xs, b, kernel)
    out = den / (xs.size * b)
    return out if np.ndim(x) else float(out[0])


def _in_window(x: np.ndarray, xs: np.ndarray, b: float, kernel: KernelSpec) -> np.ndarray:
    xs_sorted = np.sort(xs)
    reach = b * kernel.support_halfwidth
    lo = np.searchsorted(xs_sorted, x - reach, side="left")
    hi = np.searchsorted(xs_sorted, x + reach, side="right")
    return hi > lo


def nw_mean(x, segment: TimeSeriesSample, b: float, kernel: KernelSpec = PARABOLIC):
    """Nadaraya-Watson mean ``sum Y_t K / sum K`` at ``x``.

    Raises
    ------
    EmptyWindowError
        If no observation lies within the kernel support around ``x`` or the
        kernel weights sum to a non-positive value there.
    """
    xe = np.atleast_1d(np.asarray(x, dtype=float))
    den, (num,) = kernel_sums(xe, segment.x, b, kernel, [segment.y])
    if not np.all(_in_window(xe, segment.x, b, kernel)) or np.any(den <= 0):
        raise EmptyWindowError("no usable observation in the kernel window")
    out = num / den
    return out if np.ndim(x) else float(out[0])


def nw_variance(x, segment: TimeSeriesSample, mean_fn: Callable, b: float,
                kernel: KernelSpec = PARABOLIC):
    """Kernel average of squared residuals ``(Y_t - mean_fn(X_t))^2`` at ``x``.

    The result is clipped below at :data:`VARIANCE_FLOOR`.
    """
    xe = np.atleast_1d(np.asarray(x, dtype=float))
    resid = segment.y - np.asarray(mean_fn(segment.x), dtype=float)
    den, (num,) = kernel_sums(xe, segment.x, b, kernel, [resid * resid])
    if not np.all(_in_window(xe, segment.x, b, kernel)) or np.any(den <= 0):
        raise EmptyWindowError("no usable observation in the kernel window")
    out = np.maximum(num / den, VARIANCE_FLOOR)
    return out if np.ndim(x) else float(out[0])


@dataclass(frozen=True, eq=False)
class SegmentEstimate:
    """Density, bias-corrected mean and variance of one segment on a grid.

    ``fitted_mean`` and ``fitted_var`` hold the jackknife estimates at the
    segment's own covariate values. ``residuals`` are leave-one-out
    residuals about ``fitted_mean``; their squares feed ``var_bc``.

    ``mean_se2`` and ``var_se2`` are the finite-sample variances of
    ``mean_bc`` and ``var_bc`` from the ratio-estimator linearisation
    ``sum w^2 (Z - R)^2 / (sum w)^2`` with ``w = K*((x - X_t) / b)``.
    ``fitted_scale`` is a non-negative local variance at each observation
    (weights ``K*^2``), used to standardise residuals.
    """

    grid: EvaluationGrid
    density: np.ndarray
    mean_bc: np.ndarray
    var_bc: np.ndarray
    n_eff: int
    valid_mask: np.ndarray
    fitted_mean: np.ndarray
    fitted_var: np.ndarray
    segment: TimeSeriesSample
    residuals: np.ndarray
    fitted_scale: np.ndarray
    weight_sum: np.ndarray
    weight_sq_sum: np.ndarray
    mean_spread: np.ndarray
    var_spread: np.ndarray

    @property
    def bandwidth(self) -> float:
        return self.grid.bandwidth

    @property
    def mean_se2(self) -> np.ndarray:
        return self.mean_spread / self.weight_sum ** 2

    @property
    def var_se2(self) -> np.ndarray:
        return self.var_spread / self.weight_sum ** 2

    @property
    def kish_count(self) -> np.ndarray:
        """Effective number of observations ``(sum w)^2 / sum w^2`` behind each grid estimate."""
        return self.weight_sum ** 2 / self.weight_sq_sum


def _fit_at_observations(segment: TimeSeriesSample, b: float, floor: float):
    """Jackknife mean and variance at each ``X_t``, falling back to the
    parabolic kernel where the jackknife weights are unreliable.

    Returns ``(mean, var, loo_mean)``; ``loo_mean`` drops each point's own
    weight where enough weight remains.
    """
    n = len(segment)
    xs, ys = segment.x, segment.y
    den_s, (num_s,) = kernel_sums(xs, xs, b, JACKKNIFE, [ys])
    den_b, (num_b,) = kernel_sums(xs, xs, b, PARABOLIC, [ys])
    # den_b > 0 always: each point sits at the centre of its own window
    use_star = (den_s / (n * b) >= floor) & (den_b / (n * b) >= floor)
    mean = np.where(use_star, num_s / np.where(use_star, den_s, 1.0), num_b / den_b)

    k0s, k0b = JACKKNIFE(0.0), PARABOLIC(0.0)
    rest_s, rest_b = den_s - k0s, den_b - k0b
    ok_s = use_star & (rest_s > 0.5 * den_s)
    ok_b = ~use_star & (rest_b > 0.5 * den_b)
    loo = mean.copy()
    loo[ok_s] = (num_s - k0s * ys)[ok_s] / rest_s[ok_s]
    loo[ok_b] = (num_b - k0b * ys)[ok_b] / rest_b[ok_b]

    r2 = (ys - mean) ** 2
    _, (vs_s,) = kernel_sums(xs, xs, b, JACKKNIFE, [r2])
    _, (vs_b,) = kernel_sums(xs, xs, b, PARABOLIC, [r2])
    var = np.where(use_star, vs_s / np.where(use_star, den_s, 1.0), vs_b / den_b)
    return mean, np.maximum(var, VARIANCE_FLOOR), loo


def estimate_segment(segment: TimeSeriesSample, grid: EvaluationGrid, b: float | None = None,
                     *, min_segment_n: int = MIN_SEGMENT_N) -> SegmentEstimate:
    """Estimate density, mean and variance of ``segment`` on ``grid``.

    Density uses the parabolic kernel; mean and variance use the jackknife
    kernel, the variance being built from leave-one-out residuals about the
    jackknife mean. A grid point is valid when both the parabolic density
    and the jackknife weight density reach ``max(0.01, 5 / (n b))``.

    Raises
    ------
    SegmentTooSmallError
        Fewer than ``min_segment_n`` observations.
    AllPointsInvalidError
        No grid point has enough nearby data.
    """
    n = len(segment)
    if n < min_segment_n:
        raise SegmentTooSmallError(f"segment has {n} observations, need {min_segment_n}")
    b = grid.bandwidth if b is None else float(b)
    floor = density_floor(n, b)
    fitted_mean, fitted_var, loo_mean = _fit_at_observations(segment, b, floor)

    y = segment.y
    resid = y - loo_mean
    r2 = resid * resid
    den_b, _ = kernel_sums(grid.points, segment.x, b, PARABOLIC)
    den_s, (num_y, num_r2) = kernel_sums(grid.points, segment.x, b, JACKKNIFE, [y, r2])
    den_q, (q_y, q_yy, q_r2, q_r4) = kernel_sums(grid.points, segment.x, b, JACKKNIFE_SQUARED,
                                                 [y, y * y, r2, r2 * r2])
    sden, (snum,) = kernel_sums(segment.x, segment.x, b, JACKKNIFE_SQUARED, [r2])
    # sden > 0: every point carries weight K*(0)^2 in its own window
    fitted_scale = np.maximum(snum / sden, VARIANCE_FLOOR)

    density = den_b / (n * b)
    valid = (density >= floor) & (den_s / (n * b) >= floor)
    if not valid.any():
        raise AllPointsInvalidError("no grid point has enough data for estimation")
    safe = np.where(valid, den_s, 1.0)
    mean_bc = np.where(valid, num_y / safe, np.nan)
    var_bc = np.where(valid, np.maximum(num_r2 / safe, VARIANCE_FLOOR), np.nan)
    # sum w^2 (Z - R)^2 expanded; clipped against rounding
    mean_spread = np.where(valid, np.maximum(q_yy - 2.0 * mean_bc * q_y + mean_bc ** 2 * den_q, 0.0), np.nan)
    var_spread = np.where(valid, np.maximum(q_r4 - 2.0 * var_bc * q_r2 + var_bc ** 2 * den_q, 0.0), np.nan)
    weight_sum = np.where(valid, den_s, np.nan)
    weight_sq_sum = np.where(valid, den_q, np.nan)
    arrays = (density, mean_bc, var_bc, valid, fitted_mean, fitted_var, resid, fitted_scale,
              weight_sum, weight_sq_sum, mean_spread, var_spread)
    for arr in arrays:
        arr.setflags(write=False)
    return SegmentEstimate(grid, density, mean_bc, var_bc, n, valid, fitted_mean, fitted_var,
                           segment, resid, fitted_scale, weight_sum, weight_sq_sum,
                           mean_spread, var_spread)


@dataclass(frozen=True)
class NuEpsilonEstimate:
    value: float
    count: int


def _retained(est: SegmentEstimate) -> np.ndarray:
    cell = est.grid.cell_index(est.segment.x)
    keep = cell >= 0
    keep[keep] = est.valid_mask[cell[keep]]
    return keep


def estimate_nu_epsilon(est1: SegmentEstimate, est2: SegmentEstimate) -> NuEpsilonEstimate:
    """Excess fourth moment of the standardised residuals of two segments.

    Only observations whose covariate falls in a valid grid cell of their
    own segment contribute. Residuals are standardised by ``fitted_scale``,
    which stays bounded away from zero because each point carries weight in
    its own window.
    """
    total = 0.0
    count = 0
    for est in (est1, est2):
        keep = _retained(est)
        if not keep.any():
            continue
        r = est.residuals[keep] / np.sqrt(est.fitted_scale[keep])
        total += float(np.sum(r ** 4))
        count += int(keep.sum())
    if count == 0:
        raise NoValidResidualsError("no residual falls in a valid grid cell")
    return NuEpsilonEstimate(total / count - 1.0, count)
