"""Command-line workflow on a daily price file.

Writes a synthetic price/interest-score CSV to a temporary directory, then
runs ``nwbreak detect`` and ``nwbreak bands`` on it with the ``bitcoin``
preset (lagged log price as the response, previous day's score as the
covariate). Run with ``python3 demos/price_file.py``.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np


def write_prices(path, n=1705, seed=0):
    rng = np.random.default_rng(seed)
    score = np.empty(n)
    score[0] = 50.0
    for t in range(1, n):
        score[t] = 50.0 + 0.9 * (score[t - 1] - 50.0) + 6.0 * rng.standard_normal()
    score = np.clip(score, 1.0, 100.0)
    # price level steps up at day 600 and partly back at day 1200
    level = np.select([np.arange(n) < 600, np.arange(n) < 1200], [9.0, 9.35], 9.15)
    logp = level + 0.01 * np.r_[50.0, score[:-1]] + 0.25 * rng.standard_normal(n)
    days = np.datetime64("2019-01-01") + np.arange(n)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,price,gnis\n")
        for d, p, s in zip(days, np.exp(logp), score):
            fh.write(f"{d},{p:.6f},{s:.3f}\n")


def nwbreak(*args):
    proc = subprocess.run([sys.executable, "-m", "nwbreak", *map(str, args)],
                          capture_output=True, text=True, check=True)
    return (proc.stdout + proc.stderr).strip()


def main():
    with tempfile.TemporaryDirectory() as tmp:
        data, report = Path(tmp, "prices.csv"), Path(tmp, "detect.json")
        write_prices(data)
        io = ["--input", data, "--time-col", "date", "--y-col", "price", "--x-col", "gnis",
              "--preset", "bitcoin"]
        print(nwbreak("detect", *io, "--output", report))
        rep = json.loads(report.read_text())
        for b in rep["breaks"]["items"]:
            print(f"last day before a break: {b['time']}")
        print(nwbreak("bands", *io, "--kind", "mean", "--band-prefix", Path(tmp, "band"),
                      "--output", Path(tmp, "bands.json")))
        rows = Path(tmp, "band_mean.csv").read_text().splitlines()
        print("\n".join(rows[:4] + ["..."]))


if __name__ == "__main__":
    main()
