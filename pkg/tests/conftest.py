import numpy as np
import pytest

from nwbreak import DgpSpec, NoiseSpec, SimulationScenario, TimeSeriesSample, synthesize


def make_series(n, seg=(5,), breaks=(), dgp="white_noise", noise="normal", seed=0):
    scen = SimulationScenario(n, DgpSpec(dgp), NoiseSpec(noise), tuple(breaks), tuple(seg),
                              seed=seed, enforce_gap=False)
    return synthesize(scen)[0]


def doubled(series):
    """The window ``series + series`` with fresh time stamps."""
    y = np.concatenate([series.y, series.y])
    x = np.concatenate([series.x, series.x])
    return TimeSeriesSample.from_arrays(y, x)


@pytest.fixture
def null_series():
    return make_series(600, seed=3)


def write_series_csv(path, series):
    """Columns time, y, x; read back with ``--x-col x --lag 0``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time,y,x\n")
        for t, y, x in zip(series.times, series.y, series.x):
            fh.write(f"{int(t)},{float(y)!r},{float(x)!r}\n")
    return path


def write_price_csv(path, n=1705, seed=0):
    """Daily price and interest-score file shaped like the crypto application.

    Log price is ``level + 0.01 * score_{t-1} + 0.25 eps`` with the level
    stepping at rows 600 and 1200; the score is a bounded AR(1).
    """
    rng = np.random.default_rng(seed)
    g = np.empty(n)
    g[0] = 50.0
    for t in range(1, n):
        g[t] = 50.0 + 0.9 * (g[t - 1] - 50.0) + 6.0 * rng.standard_normal()
    g = np.clip(g, 1.0, 100.0)
    idx = np.arange(n)
    level = np.select([idx < 600, idx < 1200], [9.0, 9.35], 9.15)
    logp = level + 0.01 * np.r_[50.0, g[:-1]] + 0.25 * rng.standard_normal(n)
    days = np.datetime64("2019-01-01") + idx
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,price,gnis\n")
        for d, p, s in zip(days, np.exp(logp), g):
            fh.write(f"{d},{p:.6f},{s:.3f}\n")
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
