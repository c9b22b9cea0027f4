"""Kernel functions, their moment constants and bandwidth selection.

Two kernels are used throughout the package: the parabolic (Epanechnikov)
kernel ``K(u) = 0.75 (1 - u^2)`` on ``[-1, 1]`` and its jackknife companion
``K*(u) = 2 K(u) - K(u / sqrt(2)) / sqrt(2)`` on ``[-sqrt(2), sqrt(2)]``.
The second moment of ``K*`` vanishes, which removes the leading
``O(b^2)`` smoothing bias of Nadaraya-Watson estimates built on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Literal, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "KernelSpec",
    "BandwidthConfig",
    "InvalidConfigurationError",
    "DegenerateSampleError",
    "PARABOLIC",
    "JACKKNIFE",
    "JACKKNIFE_SQUARED",
    "kernel_eval",
    "jackknife_eval",
    "kernel_moments",
    "get_kernel",
    "rule_of_thumb_bandwidth",
    "cv_bandwidth",
]

SQRT2 = np.sqrt(2.0)

# admissible exponent range for short-range dependent covariates
EXPONENT_RANGE = (1.0 / 9.0, 1.0 / 3.0)


class InvalidConfigurationError(ValueError):
    """Raised for bandwidth or test settings outside their admissible range."""


class DegenerateSampleError(ValueError):
    """Raised when no candidate bandwidth yields a usable fit."""


def kernel_eval(u):
    """Parabolic kernel ``0.75 (1 - u^2)`` on ``|u| <= 1``, zero elsewhere.

    Accepts scalars or arrays; returns the same shape.
    """
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    return out if out.ndim else float(out)


def jackknife_eval(u):
    """Bias-cancelling companion ``2 K(u) - K(u / sqrt 2) / sqrt 2``."""
    u = np.asarray(u, dtype=float)
    out = 2.0 * kernel_eval(u) - kernel_eval(u / SQRT2) / SQRT2
    out = np.asarray(out)
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _moments(name: str) -> tuple[float, float]:
    func, half = _KERNEL_TABLE[name]
    # split at the kinks so quad sees smooth pieces
    points = sorted({-half, -1.0, 0.0, 1.0, half})
    phi = 0.0
    psi = 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        if hi <= -half or lo >= half:
            continue
        phi += integrate.quad(lambda u: func(u) ** 2, lo, hi, epsabs=1e-13, epsrel=1e-13)[0]
        psi += integrate.quad(lambda u: 0.5 * u * u * func(u), lo, hi, epsabs=1e-13, epsrel=1e-13)[0]
    return phi, psi


def kernel_moments(name: str) -> tuple[float, float]:
    """Return ``(phi, psi)`` for a named kernel.

    ``phi = int K(u)^2 du`` and ``psi = int (u^2 / 2) K(u) du``, both by
    adaptive quadrature over the kernel support.

    Parameters
    ----------
    name : {"parabolic", "jackknife"}

    Returns
    -------
    tuple of float
    """
    if name not in _KERNEL_TABLE:
        raise KeyError(f"unknown kernel {name!r}; expected one of {sorted(_KERNEL_TABLE)}")
    return _moments(name)


def jackknife_squared_eval(u):
    """Squared jackknife kernel ``K*(u)^2``; non-negative weights on K*'s support."""
    v = jackknife_eval(u)
    return v * v


_KERNEL_TABLE: dict[str, tuple[Callable, float]] = {
    "parabolic": (kernel_eval, 1.0),
    "jackknife": (jackknife_eval, float(SQRT2)),
    "jackknife_squared": (jackknife_squared_eval, float(SQRT2)),
}


@dataclass(frozen=True)
class KernelSpec:
    """A kernel together with its support and moment constants."""

    name: str
    support_halfwidth: float
    phi: float
    psi: float

    def __call__(self, u):
        return _KERNEL_TABLE[self.name][0](u)

    def integral(self) -> float:
        h = self.support_halfwidth
        return integrate.quad(self, -h, h, points=[-1.0, 0.0, 1.0] if h > 1 else [0.0],
                              epsabs=1e-13, epsrel=1e-13)[0]


def _make_spec(name: str) -> KernelSpec:
    phi, psi = kernel_moments(name)
    return KernelSpec(name, _KERNEL_TABLE[name][1], phi, psi)


PARABOLIC = _make_spec("parabolic")
JACKKNIFE = _make_spec("jackknife")
JACKKNIFE_SQUARED = _make_spec("jackknife_squared")


def get_kernel(name: str) -> KernelSpec:
    if name == "parabolic":
        return PARABOLIC
    if name == "jackknife":
        return JACKKNIFE
    if name == "jackknife_squared":
        return JACKKNIFE_SQUARED
    raise KeyError(f"unknown kernel {name!r}")


def _check_exponent(exponent: float) -> None:
    lo, hi = EXPONENT_RANGE
    if not lo < exponent < hi:
        raise InvalidConfigurationError(
            f"bandwidth exponent {exponent} outside admissible range ({lo:.4f}, {hi:.4f})"
        )


def rule_of_thumb_bandwidth(n: int, exponent: float = 0.2) -> float:
    """Bandwidth ``n ** -exponent``.

    >>> round(rule_of_thumb_bandwidth(1704), 4)
    0.2258
    """
    if n < 1:
        raise InvalidConfigurationError(f"sample size must be >= 1, got {n}")
    _check_exponent(exponent)
    return float(n) ** (-exponent)


def _loo_scores(x: np.ndarray, y: np.ndarray, candidates: Sequence[float]) -> np.ndarray:
    """Squared leave-one-out errors summed over a common set of observations.

    Candidates (sorted ascending) leaving more than 10% of observations
    without a neighbour score ``inf``. The rest are scored on the
    observations that have a neighbour under the smallest admissible
    candidate; windows nest, so all of them are defined there.
    """
    diff = x[:, None] - x[None, :]
    dy = y[None, :] - y[:, None]  # Y_s - Y_t, exact zero for constant series
    scores = np.full(len(candidates), np.inf)
    common = None
    for i, b in enumerate(candidates):
        w = kernel_eval(diff / b)
        np.fill_diagonal(w, 0.0)
        den = w.sum(axis=1)
        has = den > 0.0
        if has.mean() < 0.9:
            continue
        if common is None:
            common = has
        resid = (w[common] * dy[common]).sum(axis=1) / den[common]
        scores[i] = float(np.sum(resid * resid))
    return scores


def cv_bandwidth(sample, candidates: Sequence[float]) -> float:
    """Pick the candidate bandwidth with the smallest leave-one-out error.

    The criterion is ``sum_t (Y_t - mu_{-t}(X_t | b))^2`` where ``mu_{-t}``
    is the parabolic-kernel Nadaraya-Watson mean fitted without
    observation ``t``. Ties go to the smallest bandwidth.

    Parameters
    ----------
    sample : TimeSeriesSample
        Anything exposing ``x`` and ``y`` arrays.
    candidates : sequence of float
        Positive candidate bandwidths.

    Returns
    -------
    float
        A member of ``candidates``.

    Raises
    ------
    DegenerateSampleError
        If every candidate leaves more than 10% of observations without a
        neighbour.
    """
    cands = [float(c) for c in candidates]
    if not cands:
        raise InvalidConfigurationError("candidate list is empty")
    if any(c <= 0 for c in cands):
        raise InvalidConfigurationError("candidate bandwidths must be positive")
    x = np.asarray(sample.x, dtype=float)
    y = np.asarray(sample.y, dtype=float)
    if x.size < 20:
        raise DegenerateSampleError(f"need at least 20 observations, got {x.size}")
    order = np.argsort(cands, kind="stable")
    sorted_cands = [cands[i] for i in order]
    scores = _loo_scores(x, y, sorted_cands)
    if not np.isfinite(scores).any():
        raise DegenerateSampleError("every candidate bandwidth leaves too many empty windows")
    best = scores.min()
    # first (smallest) bandwidth attaining the minimum, up to rounding
    tol = 1e-12 * max(1.0, abs(best))
    idx = int(np.flatnonzero(scores <= best + tol)[0])
    return sorted_cands[idx]


@dataclass(frozen=True)
class BandwidthConfig:
    """How a bandwidth is chosen for a given sample.

    ``rule_of_thumb`` uses ``n ** -exponent`` with ``n`` the length of the
    data passed to :meth:`resolve`; ``fixed`` returns ``fixed_value``;
    ``cross_validation`` runs :func:`cv_bandwidth` over ``cv_grid``.
    """

    mode: Literal["rule_of_thumb", "fixed", "cross_validation"] = "rule_of_thumb"
    exponent: float = 0.2
    fixed_value: float | None = None
    cv_grid: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.mode not in ("rule_of_thumb", "fixed", "cross_validation"):
            raise InvalidConfigurationError(f"unknown bandwidth mode {self.mode!r}")
        if self.mode == "rule_of_thumb":
            _check_exponent(self.exponent)
        elif self.mode == "fixed":
            if self.fixed_value is None or not self.fixed_value > 0:
                raise InvalidConfigurationError("fixed bandwidth needs a positive fixed_value")
        elif not self.cv_grid:
            object.__setattr__(self, "cv_grid", tuple(np.round(np.linspace(0.05, 1.0, 20), 4)))

    def resolve(self, sample) -> float:
        if self.mode == "fixed":
            return float(self.fixed_value)
        if self.mode == "rule_of_thumb":
            return rule_of_thumb_bandwidth(len(sample.x), self.exponent)
        return cv_bandwidth(sample, self.cv_grid)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "exponent": self.exponent,
            "fixed_value": self.fixed_value,
            "cv_grid": list(self.cv_grid) if self.cv_grid else None,
        }
