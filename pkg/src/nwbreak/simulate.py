"""Synthetic data for size, power and detection-accuracy experiments.

Covariates come from one of three processes (Gaussian white noise, an
ARMA(1,1)-GARCH(1,1) recursion, a two-regime TAR(2)), noise from one of
three laws (standard normal, raw Student t, median-centred Pareto), and
responses from ``Y_t = mu(X_t) + sqrt(sigma2(X_t)) eps_t`` with the
``(mu, sigma2)`` pair switching at each injected break.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from .estimators import VARIANCE_FLOOR, EstimationError, TimeSeriesSample

__all__ = [
    "DgpSpec",
    "NoiseSpec",
    "SimulationScenario",
    "DetectionMetrics",
    "SizePower",
    "InfeasibleBreaksError",
    "gen_covariate",
    "gen_noise",
    "segment_functions",
    "synthesize",
    "inject_breaks",
    "amd",
    "adn",
    "run_size_power",
    "run_detection_benchmark",
]

BURN_IN = 500
MIN_BREAK_GAP = 100
MAX_BREAKS = 4

_DGP_DEFAULTS = {
    "white_noise": {"mu": 0.0, "sigma": 1.0},
    "arma_garch": {"mu": 0.0, "phi1": 0.5, "theta1": -0.4, "omega": 0.1, "alpha1": 0.1, "beta1": 0.8},
    "tar": {"phi11": 0.6, "phi12": 0.3, "phi21": -0.6, "phi22": 0.4},
}
_NOISE_DEFAULTS = {
    "normal": {},
    "student_t": {"nu": 10.0},
    "power_law": {"x0": 1.0, "alpha": 0.6},
    "power_bounded": {"alpha": 0.6},
    "zero": {},
}


class InfeasibleBreaksError(ValueError):
    pass


@dataclass(frozen=True)
class DgpSpec:
    kind: Literal["white_noise", "arma_garch", "tar"] = "white_noise"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _DGP_DEFAULTS:
            raise ValueError(f"unknown DGP {self.kind!r}")
        merged = {**_DGP_DEFAULTS[self.kind], **self.params}
        if not all(np.isfinite(v) for v in merged.values()):
            raise ValueError("DGP parameters must be finite")
        object.__setattr__(self, "params", merged)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise law. ``zero`` is a degenerate law used for plumbing checks."""

    kind: Literal["normal", "student_t", "power_law", "power_bounded", "zero"] = "normal"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _NOISE_DEFAULTS:
            raise ValueError(f"unknown noise {self.kind!r}")
        merged = {**_NOISE_DEFAULTS[self.kind], **self.params}
        if self.kind == "student_t" and not merged["nu"] > 2:
            raise ValueError("Student t noise needs nu > 2")
        if self.kind == "power_law" and not (merged["x0"] > 0 and merged["alpha"] > 0):
            raise ValueError("power-law noise needs x0 > 0 and alpha > 0")
        if self.kind == "power_bounded" and not merged["alpha"] > 0:
            raise ValueError("bounded power noise needs alpha > 0")
        object.__setattr__(self, "params", merged)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_covariate(dgp: DgpSpec, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` covariate values after a burn-in of 500 discarded steps."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    p = dgp.params
    if dgp.kind == "white_noise":
        return p["mu"] + p["sigma"] * rng.standard_normal(n)

    total = n + BURN_IN
    z = rng.standard_normal(total)
    y = np.zeros(total)
    if dgp.kind == "arma_garch":
        mu, phi, theta = p["mu"], p["phi1"], p["theta1"]
        omega, a1, b1 = p["omega"], p["alpha1"], p["beta1"]
        e_prev = 0.0
        s2_prev = 0.0
        y_prev = 0.0
        for t in range(total):
            s2 = omega + a1 * e_prev * e_prev + b1 * s2_prev
            e = np.sqrt(s2) * z[t]
            y[t] = mu + phi * y_prev + e + theta * e_prev
            y_prev, e_prev, s2_prev = y[t], e, s2
    else:
        p11, p12, p21, p22 = p["phi11"], p["phi12"], p["phi21"], p["phi22"]
        y1 = y2 = 0.0
        for t in range(total):
            if y1 <= 0.0:
                y[t] = p11 * y1 + p12 * y2 + z[t]
            else:
                y[t] = p21 * y1 + p22 * y2 + z[t]
            y2, y1 = y1, y[t]
    return y[BURN_IN:]


def gen_noise(noise: NoiseSpec, n: int, seed=None, *, center: bool = True) -> np.ndarray:
    """Draw ``n`` noise values.

    Power-law draws are ``x0 * U ** (-1 / alpha)`` (Pareto, infinite mean
    for ``alpha <= 1``). ``power_bounded`` is the alternative reading with
    density ``alpha * x ** (alpha - 1)`` on ``[0, 1]``, drawn as
    ``U ** (1 / alpha)``. Both are shifted by their sample median unless
    ``center`` is false.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    p = noise.params
    if noise.kind == "normal":
        return rng.standard_normal(n)
    if noise.kind == "student_t":
        return rng.standard_t(p["nu"], n)
    if noise.kind == "zero":
        return np.zeros(n)
    u = 1.0 - rng.random(n)  # (0, 1]
    if noise.kind == "power_bounded":
        draws = u ** (1.0 / p["alpha"])
    else:
        draws = p["x0"] * u ** (-1.0 / p["alpha"])
    return draws - np.median(draws) if center else draws


def _clip(f: Callable) -> Callable:
    return lambda x: np.maximum(f(np.asarray(x, dtype=float)), VARIANCE_FLOOR)


_SEGMENTS: dict[int, tuple[Callable, Callable]] = {
    1: (lambda x: 0.5 + 0.2 * x, lambda x: np.ones_like(x)),
    2: (lambda x: 0.1 + 0.3 * x**2 + 0.1 * x**3 + 0.2 * x**4, lambda x: x**2),
    3: (lambda x: np.log(0.4 + 0.1 * x**2), lambda x: 0.1 + 0.4 * x**2),
    4: (lambda x: np.exp(0.01 * x), lambda x: 0.5 + (0.8 + x) ** 4),
    5: (lambda x: 0.9 * np.sin(x), lambda x: np.log1p(0.4 * x**2)),
}


def segment_functions(seg_id: int) -> tuple[Callable, Callable]:
    """Conditional mean and (floored) conditional variance for segment 1..5."""
    if seg_id not in _SEGMENTS:
        raise ValueError(f"segment id must be in 1..5, got {seg_id}")
    mu, s2 = _SEGMENTS[seg_id]
    return (lambda x: mu(np.asarray(x, dtype=float))), _clip(s2)


@dataclass(frozen=True)
class SimulationScenario:
    """One synthetic series: covariate law, noise law, breaks and segments.

    ``segment_ids`` has one entry per inter-break interval, so its length is
    ``len(breaks) + 1``. A break at index ``k`` means observation ``k`` is
    the first one generated by the next segment.
    """

    n: int
    dgp: DgpSpec = field(default_factory=DgpSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    breaks: tuple[int, ...] = ()
    segment_ids: tuple[int, ...] = (1,)
    seed: int = 0
    enforce_gap: bool = True

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(int(b) for b in self.breaks))
        object.__setattr__(self, "segment_ids", tuple(int(s) for s in self.segment_ids))
        bks = self.breaks
        if len(self.segment_ids) != len(bks) + 1:
            raise ValueError("need exactly one segment id per inter-break interval")
        if any(not 1 <= b < self.n for b in bks):
            raise ValueError("breaks must lie strictly inside [1, n)")
        if any(b2 <= b1 for b1, b2 in zip(bks, bks[1:])):
            raise ValueError("breaks must be strictly increasing")
        if self.enforce_gap:
            if any(b2 - b1 < MIN_BREAK_GAP for b1, b2 in zip(bks, bks[1:])):
                raise ValueError(f"breaks must be at least {MIN_BREAK_GAP} apart")
            if self.n <= 2000 and len(bks) > MAX_BREAKS:
                raise ValueError(f"at most {MAX_BREAKS} breaks for n <= 2000")
        for s in self.segment_ids:
            segment_functions(s)


def synthesize(scenario: SimulationScenario) -> tuple[TimeSeriesSample, tuple[int, ...]]:
    """Generate the series described by ``scenario``; returns ``(series, breaks)``."""
    ss = np.random.SeedSequence(scenario.seed)
    cov_seed, noise_seed = ss.spawn(2)
    x = gen_covariate(scenario.dgp, scenario.n, np.random.default_rng(cov_seed))
    eps = gen_noise(scenario.noise, scenario.n, np.random.default_rng(noise_seed))
    y = np.empty(scenario.n)
    edges = (0, *scenario.breaks, scenario.n)
    for lo, hi, sid in zip(edges[:-1], edges[1:], scenario.segment_ids):
        mu, s2 = segment_functions(sid)
        xs = x[lo:hi]
        y[lo:hi] = mu(xs) + np.sqrt(s2(xs)) * eps[lo:hi]
    return TimeSeriesSample.from_arrays(y, x), scenario.breaks


def inject_breaks(n: int, rng=None) -> tuple[int, ...]:
    """Random break positions at least 100 apart and 100 from both ends.

    The count is uniform on ``1..min(4, feasible)``; given the count the
    positions are uniform over all admissible configurations.
    """
    if n < 3 * MIN_BREAK_GAP:
        raise InfeasibleBreaksError(f"need n >= {3 * MIN_BREAK_GAP} to place a break, got {n}")
    rng = _rng(rng)
    feasible = (n - 1) // MIN_BREAK_GAP - 1
    k = int(rng.integers(1, min(MAX_BREAKS, feasible) + 1))
    # positions in [gap, n - gap]; subtracting i*gap maps admissible sets
    # one-to-one onto k-subsets of a shorter range
    span = n - 2 * MIN_BREAK_GAP - (k - 1) * MIN_BREAK_GAP + 1
    base = np.sort(rng.choice(span, size=k, replace=False))
    return tuple(int(MIN_BREAK_GAP + v + i * MIN_BREAK_GAP) for i, v in enumerate(base))


def amd(truth: Sequence[int], detected: Sequence[int]) -> float:
    """Summed distance from each detected break to its nearest true break."""
    truth = np.asarray(truth, dtype=float)
    if truth.size == 0:
        raise ValueError("truth must contain at least one break")
    det = np.asarray(detected, dtype=float)
    if det.size == 0:
        return 0.0
    return float(np.abs(det[:, None] - truth[None, :]).min(axis=1).sum())


def adn(truth: Sequence[int], detected: Sequence[int]) -> int:
    """Absolute difference between true and detected break counts."""
    return abs(len(truth) - len(detected))


@dataclass(frozen=True)
class DetectionMetrics:
    amd: float
    adn: float
    reps: int


@dataclass(frozen=True)
class SizePower:
    size: float
    power: float
    reps: int


def _rep_seeds(seed: int, reps: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(reps)


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1 << 32, 1], dtype=np.uint64))


def run_size_power(dgp: DgpSpec, noise: NoiseSpec, n: int, target: str, reps: int,
                   seed: int = 0, cfg=None, *, pre_segment: int = 5,
                   post_segment: int = 2) -> SizePower:
    """Empirical size and power of the midpoint test.

    Null replications use ``pre_segment`` throughout. Alternative
    replications switch to ``post_segment`` at a break drawn uniformly from
    the central 60% of the sample. Both tests split at ``n // 2``.
    """
    from .breaktests import TestConfig, run_test

    if reps < 1:
        raise ValueError("reps must be >= 1")
    cfg = cfg or TestConfig(target=target)
    if cfg.target != target:
        cfg = cfg.replace(target=target)
    null_hits = 0
    alt_hits = 0
    for ss in _rep_seeds(seed, reps):
        null_ss, alt_ss, loc_ss = ss.spawn(3)
        null = SimulationScenario(n, dgp, noise, (), (pre_segment,), _seed_int(null_ss))
        series, _ = synthesize(null)
        null_hits += _rejects(series, cfg)
        lo, hi = int(np.ceil(0.2 * n)), int(np.floor(0.8 * n))
        tau = int(np.random.default_rng(loc_ss).integers(lo, hi + 1))
        alt = SimulationScenario(n, dgp, noise, (tau,), (pre_segment, post_segment),
                                 _seed_int(alt_ss), enforce_gap=False)
        series, _ = synthesize(alt)
        alt_hits += _rejects(series, cfg)
    return SizePower(null_hits / reps, alt_hits / reps, reps)


def _rejects(series: TimeSeriesSample, cfg) -> bool:
    from .breaktests import run_test

    try:
        return bool(run_test(series, len(series) // 2, cfg).reject)
    except EstimationError:
        return False


def run_detection_benchmark(dgp: DgpSpec, noise: NoiseSpec, n: int, reps: int, seed: int = 0,
                            cfg=None, detector: Callable | None = None) -> DetectionMetrics:
    """Average MD and DN of a detector over random multi-break series.

    Each replication draws breaks with :func:`inject_breaks`, assigns
    segments ``1, 2, ..., k + 1`` in order and runs ``detector`` (default:
    :func:`nwbreak.detect.cpfind` with ``cfg``). The detector is called as
    ``detector(series, truth)`` and must return break indices in the
    scenario convention (first index of the new segment); the default
    shifts cpfind's last-index-before-the-break by one.
    """
    from .detect import DetectConfig, cpfind

    if reps < 1:
        raise ValueError("reps must be >= 1")
    if detector is None:
        cfg = cfg or DetectConfig()
        detector = lambda series, truth: [b + 1 for b in cpfind(series, cfg).breaks]  # noqa: E731
    md_total = 0.0
    dn_total = 0
    for ss in _rep_seeds(seed, reps):
        brk_ss, data_ss = ss.spawn(2)
        truth = inject_breaks(n, np.random.default_rng(brk_ss))
        scen = SimulationScenario(n, dgp, noise, truth, tuple(range(1, len(truth) + 2)),
                                  _seed_int(data_ss))
        series, _ = synthesize(scen)
        found = list(detector(series, truth))
        md_total += amd(truth, found)
        dn_total += adn(truth, found)
    return DetectionMetrics(md_total / reps, dn_total / reps, reps)
