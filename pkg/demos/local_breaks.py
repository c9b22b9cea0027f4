"""Test a mean break, draw the band, then locate several breaks.

Run with ``python3 demos/local_breaks.py``. Everything is simulated, so the
output is the same on every run.
"""

import numpy as np

from nwbreak import (
    DetectConfig,
    DgpSpec,
    NoiseSpec,
    SimulationScenario,
    confidence_band_mean_diff,
    cpfind,
    synthesize,
    test_joint,
)


def simulate(n, breaks, segments, seed):
    scenario = SimulationScenario(n, DgpSpec("white_noise"), NoiseSpec("normal"),
                                  breaks, segments, seed=seed)
    return synthesize(scenario)[0]


def main():
    # one break: mu(x) = 1 becomes mu(x) = 2 at t = 400
    series = simulate(800, (400,), (1, 2), seed=1)
    out = test_joint(series, 400)
    print(f"split at 400: mean statistic {out.mean.statistic:.2f} "
          f"(critical {out.mean.critical_value:.2f}), variance statistic {out.variance.statistic:.2f}")
    print(f"reject mean {out.mean.reject}, reject variance {out.variance.reject}")

    band = confidence_band_mean_diff(series, 400)
    print("\n  x      diff    lower   upper")
    for i in np.linspace(0, len(band.x) - 1, 7).astype(int):
        print(f"{band.x[i]:6.2f} {band.center[i]:7.3f} {band.lower[i]:7.3f} {band.upper[i]:7.3f}")

    # the same split on a series without a break
    null = simulate(800, (), (1,), seed=2)
    print(f"\nno break: mean reject {test_joint(null, 400).mean.reject}")

    # three breaks, each changing the regression function
    series = simulate(2000, (500, 1000, 1500), (1, 2, 3, 4), seed=3)
    found = cpfind(series, DetectConfig(l_min=100))
    print(f"\ntrue breaks 500, 1000, 1500; first-stage candidates {[b + 1 for b in found.candidates]}")
    # cpfind reports the last index before each break; +1 gives the first after
    print(f"confirmed breaks (first index of each new segment) {[b + 1 for b in found.breaks]}")


if __name__ == "__main__":
    main()
