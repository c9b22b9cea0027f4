"""CSV ingestion, JSON run reports and the ``nwbreak`` command line.

Subcommands::

    nwbreak detect   --input data.csv --target mean --lmin 200
    nwbreak test     --input data.csv --split 850 --target joint
    nwbreak bands    --input data.csv --split 850 --output report.json
    nwbreak simulate size-power --dgp tar --noise powerlaw --n 1000 --reps 100

Exit status is 0 on success, 1 when the data cannot support the requested
estimate, 2 on usage errors. With ``--output`` the JSON report goes to
that path and a short summary to stdout; otherwise the report itself is
printed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import __version__
from .breaktests import (
    TestConfig,
    confidence_band_mean_diff,
    confidence_band_variance_diff,
    run_test,
)
from .detect import DetectConfig, cpfind
from .estimators import MIN_SEGMENT_N, EstimationError, TimeSeriesSample
from .kernels import BandwidthConfig, DegenerateSampleError, InvalidConfigurationError
from .simulate import DgpSpec, NoiseSpec, run_detection_benchmark, run_size_power

__all__ = [
    "IngestSchema",
    "IngestReport",
    "RunReport",
    "MissingColumnError",
    "InsufficientDataError",
    "load_csv",
    "load_csv_with_report",
    "write_band_csv",
    "build_parser",
    "main",
]

log = logging.getLogger(__name__)

PRESETS = {
    "bitcoin": {"lag": 1, "log_response": True, "standardize_x": True, "lmin": 200, "alpha": 0.05},
}

_DGP_ALIASES = {
    "white": "white_noise", "white_noise": "white_noise", "wn": "white_noise",
    "arma-garch": "arma_garch", "arma_garch": "arma_garch", "armagarch": "arma_garch",
    "tar": "tar",
}
_NOISE_ALIASES = {
    "normal": "normal", "gaussian": "normal",
    "t": "student_t", "student_t": "student_t", "t10": "student_t",
    "powerlaw": "power_law", "power_law": "power_law", "pareto": "power_law",
    "power-bounded": "power_bounded", "power_bounded": "power_bounded",
}


class MissingColumnError(KeyError):
    pass


class InsufficientDataError(ValueError):
    pass


class UsageError(ValueError):
    """Bad flag combination detected after argument parsing."""


# ---------------------------------------------------------------- ingestion

@dataclass(frozen=True)
class IngestSchema:
    """Which CSV columns to read and how to turn them into ``(Y_t, X_t)``.

    Without ``covariate_column`` the covariate is the response lagged by
    ``lag`` steps, so ``lag`` must then be at least 1. With
    ``standardize_covariate`` the covariate is shifted and scaled to mean 0
    and standard deviation 1 after lagging, which puts it on the scale the
    rule-of-thumb bandwidth ``n ** -0.2`` assumes.
    """

    time_column: str = "time"
    response_column: str = "y"
    covariate_column: str | None = None
    lag: int = 1
    transform: Literal["none", "log"] = "none"
    standardize_covariate: bool = False

    def __post_init__(self):
        if self.lag < 0:
            raise InvalidConfigurationError(f"lag must be >= 0, got {self.lag}")
        if self.transform not in ("none", "log"):
            raise InvalidConfigurationError(f"unknown transform {self.transform!r}")
        names = [self.time_column, self.response_column]
        if self.covariate_column is not None:
            names.append(self.covariate_column)
        elif self.lag < 1:
            raise InvalidConfigurationError("a lagged-response covariate needs lag >= 1")
        if len(set(names)) != len(names):
            raise InvalidConfigurationError(f"column names must be distinct, got {names}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class IngestReport:
    """What happened to the raw rows. ``labels[i]`` is the original time text of sample row ``i``."""

    rows_read: int
    rows_dropped: int
    rows_lagged: int
    labels: tuple[str, ...]
    covariate_center: float = 0.0
    covariate_scale: float = 1.0

    def to_dict(self) -> dict:
        return {"rows_read": self.rows_read, "rows_dropped": self.rows_dropped,
                "rows_lagged": self.rows_lagged, "rows_used": len(self.labels),
                "covariate_center": self.covariate_center, "covariate_scale": self.covariate_scale}


def _parse_time(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        return float(int(text))
    except ValueError:
        pass
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        return None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()


def _parse_float(text: str | None) -> float | None:
    if text is None:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv_with_report(path, schema: IngestSchema,
                         min_rows: int = MIN_SEGMENT_N) -> tuple[TimeSeriesSample, IngestReport]:
    """Read ``path`` into a sample and report how many rows were dropped.

    Rows are sorted by time. A row is dropped when its time, response or
    covariate is missing or unparseable, or when a log transform meets a
    non-positive response. Times may be integers or ISO-8601 dates.

    Raises
    ------
    FileNotFoundError
    MissingColumnError
        A named column is not in the header.
    InsufficientDataError
        Fewer than ``min_rows`` usable rows, or repeated time stamps.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        wanted = [schema.time_column, schema.response_column]
        if schema.covariate_column is not None:
            wanted.append(schema.covariate_column)
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing column(s) {missing}; header is {header}")
        rows = []
        read = 0
        for raw in reader:
            read += 1
            t = _parse_time(raw.get(schema.time_column) or "")
            y = _parse_float(raw.get(schema.response_column))
            x = _parse_float(raw.get(schema.covariate_column)) if schema.covariate_column else 0.0
            if t is None or y is None or x is None:
                continue
            if schema.transform == "log":
                if y <= 0:
                    continue
                y = math.log(y)
            rows.append((t, y, x, raw[schema.time_column].strip()))
    dropped = read - len(rows)
    if dropped:
        log.info("%s: dropped %d of %d rows with missing or invalid values", path, dropped, read)
    rows.sort(key=lambda r: r[0])
    times = np.array([r[0] for r in rows])
    if len(times) > 1 and np.any(np.diff(times) <= 0):
        raise InsufficientDataError(f"{path}: repeated time stamps")
    y = np.array([r[1] for r in rows])
    labels = [r[3] for r in rows]
    lag = schema.lag
    if schema.covariate_column is None:
        x = y[:-lag] if lag else y
    else:
        xs = np.array([r[2] for r in rows])
        x = xs[:-lag] if lag else xs
    y, times, labels = y[lag:], times[lag:], labels[lag:]
    if len(y) < min_rows:
        raise InsufficientDataError(f"{path}: {len(y)} usable rows, need at least {min_rows}")
    center, scale = 0.0, 1.0
    if schema.standardize_covariate:
        center, scale = float(np.mean(x)), float(np.std(x))
        if not scale > 0:
            raise InsufficientDataError(f"{path}: covariate is constant, cannot standardise")
        x = (x - center) / scale
    sample = TimeSeriesSample(times, y, x)
    return sample, IngestReport(read, dropped, min(lag, len(rows)), tuple(labels), center, scale)


def load_csv(path, schema: IngestSchema, min_rows: int = MIN_SEGMENT_N) -> TimeSeriesSample:
    """Read ``path`` into a :class:`TimeSeriesSample`; see :func:`load_csv_with_report`."""
    return load_csv_with_report(path, schema, min_rows)[0]


# ------------------------------------------------------------------ reports

@dataclass
class RunReport:
    """Everything a run produced, in JSON-ready form."""

    config: dict
    tests: list = field(default_factory=list)
    breaks: dict = field(default_factory=dict)
    bands: list = field(default_factory=list)
    version: str = __version__
    seed: int | None = None

    def to_dict(self) -> dict:
        return {"config": self.config, "tests": self.tests, "breaks": self.breaks,
                "bands": self.bands, "version": self.version, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        return cls(d["config"], d["tests"], d["breaks"], d["bands"], d["version"], d["seed"])


def write_band_csv(path, band) -> int:
    """Write ``x, center, lower, upper`` rows; returns the row count."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "center", "lower", "upper"])
        for row in zip(band.x, band.center, band.lower, band.upper):
            w.writerow([repr(float(v)) for v in row])
    return len(band.x)


# ---------------------------------------------------------------------- CLI

def _bandwidth(text: str) -> BandwidthConfig:
    if text == "rot":
        return BandwidthConfig()
    if text == "cv":
        return BandwidthConfig(mode="cross_validation")
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected rot, cv or a positive number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {value}")
    return BandwidthConfig(mode="fixed", fixed_value=value)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _alpha(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _common(p: argparse.ArgumentParser, *, data: bool = True) -> None:
    if data:
        p.add_argument("--input", required=True, help="CSV file with a header row")
        p.add_argument("--time-col", default="time")
        p.add_argument("--y-col", default="y")
        p.add_argument("--x-col", default=None,
                       help="covariate column; default is the lagged response")
        p.add_argument("--lag", type=int, default=1)
        p.add_argument("--log-response", action="store_true")
        p.add_argument("--standardize-x", action="store_true",
                       help="rescale the covariate to mean 0, sd 1")
        p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--target", choices=["mean", "variance", "joint"], default="mean")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--bandwidth", type=_bandwidth, default=BandwidthConfig(),
                   help="rot (n^-0.2), cv, or a fixed value")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", default=None, help="write the JSON report here")


def build_parser(preset: str | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nwbreak", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="locate breaks with the two-stage detector")
    _common(p)
    p.add_argument("--lmin", type=_positive_int, default=100)
    p.add_argument("--min-gap", type=_positive_int, default=None)

    p = sub.add_parser("test", help="test for a break at one split point")
    _common(p)
    p.add_argument("--split", type=int, required=True,
                   help="number of observations before the break")

    p = sub.add_parser("bands", help="write simultaneous bands for the two halves' differences")
    _common(p)
    p.add_argument("--split", type=int, default=None,
                   help="default: first break found by detect")
    p.add_argument("--lmin", type=_positive_int, default=100)
    p.add_argument("--min-gap", type=_positive_int, default=None)
    p.add_argument("--kind", choices=["mean", "variance", "both"], default="both")
    p.add_argument("--band-prefix", default=None,
                   help="CSV path prefix; default derives from --output or the input file")

    p = sub.add_parser("simulate", help="Monte-Carlo size/power or detection accuracy")
    p.add_argument("mode", choices=["size-power", "bench"])
    p.add_argument("--dgp", choices=sorted(_DGP_ALIASES), default="white")
    p.add_argument("--noise", choices=sorted(_NOISE_ALIASES), default="normal")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--reps", type=_positive_int, default=100)
    p.add_argument("--lmin", type=_positive_int, default=100)
    p.add_argument("--min-gap", type=_positive_int, default=None)
    _common(p, data=False)
    if preset:
        for name in ("detect", "test", "bands"):
            sub.choices[name].set_defaults(**PRESETS[preset])
    return parser


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--preset", choices=sorted(PRESETS))
    known, _ = pre.parse_known_args(argv)
    # preset values become defaults, so explicit flags still win
    return build_parser(known.preset).parse_args(argv)


def _schema(args) -> IngestSchema:
    return IngestSchema(args.time_col, args.y_col, args.x_col, args.lag,
                        "log" if args.log_response else "none", args.standardize_x)


def _detect_config(args, target: str | None = None) -> DetectConfig:
    return DetectConfig(l_min=args.lmin, alpha=args.alpha, target=target or args.target,
                        min_gap=args.min_gap, bandwidth=args.bandwidth)


def _config_echo(args) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if isinstance(value, BandwidthConfig):
            value = value.to_dict()
        out[key] = value
    return out


def _break_items(series: TimeSeriesSample, labels, found) -> dict:
    items = [{"index": int(b), "time": labels[b], "confirmed": bool(c), "score": float(s)}
             for b, c, s in zip(found.breaks, found.confirmed, found.scores)]
    return {"items": items, "candidates": [int(b) for b in found.candidates]}


def _confirm_outcomes(series: TimeSeriesSample, breaks, tcfg: TestConfig) -> list:
    out = []
    n = len(series)
    for j, b in enumerate(breaks):
        lo = breaks[j - 1] if j > 0 else -1
        hi = breaks[j + 1] if j + 1 < len(breaks) else n - 1
        res = run_test(series[lo + 1:hi + 1], b - lo, tcfg).to_dict()
        res["window"] = [int(lo + 1), int(hi)]
        res["break_index"] = int(b)
        out.append(res)
    return out


def run_detect(args) -> RunReport:
    series, ingest = load_csv_with_report(args.input, _schema(args))
    cfg = _detect_config(args)
    found = cpfind(series, cfg)
    breaks = {"target": cfg.target, **_break_items(series, ingest.labels, found)}
    if getattr(args, "preset", None) == "bitcoin" and cfg.target == "mean":
        # the variance target as a secondary check
        second = cpfind(series, _detect_config(args, "variance"))
        breaks["secondary"] = {"target": "variance", **_break_items(series, ingest.labels, second)}
    config = {"args": _config_echo(args), "detect": cfg.to_dict(), "ingest": ingest.to_dict()}
    tests = _confirm_outcomes(series, list(found.breaks), cfg.test_config())
    return RunReport(config, tests, breaks, [], __version__, args.seed)


def _check_split(split: int, n: int) -> None:
    if not 0 < split < n:
        raise UsageError(f"--split must lie strictly between 0 and {n}, got {split}")


def run_test_command(args) -> RunReport:
    series, ingest = load_csv_with_report(args.input, _schema(args))
    _check_split(args.split, len(series))
    tcfg = TestConfig(alpha=args.alpha, bandwidth=args.bandwidth, target=args.target)
    outcome = run_test(series, args.split, tcfg).to_dict()
    outcome["split"] = args.split
    outcome["split_time"] = ingest.labels[args.split]
    config = {"args": _config_echo(args), "test": tcfg.to_dict(), "ingest": ingest.to_dict()}
    return RunReport(config, [outcome], {}, [], __version__, args.seed)


def emit_bands(args) -> RunReport:
    series, ingest = load_csv_with_report(args.input, _schema(args))
    tcfg = TestConfig(alpha=args.alpha, bandwidth=args.bandwidth, target=args.target)
    split = args.split
    if split is None:
        found = cpfind(series, _detect_config(args))
        if not found.breaks:
            raise EstimationError("no break detected; pass --split explicitly")
        split = found.breaks[0] + 1
    _check_split(split, len(series))
    if args.band_prefix:
        prefix = args.band_prefix
    elif args.output:
        prefix = str(Path(args.output).with_suffix(""))
    else:
        prefix = str(Path(args.input).with_suffix("")) + "_bands"
    kinds = ["mean", "variance"] if args.kind == "both" else [args.kind]
    bands = []
    for kind in kinds:
        builder = confidence_band_mean_diff if kind == "mean" else confidence_band_variance_diff
        band = builder(series, split, tcfg)
        path = f"{prefix}_{kind}.csv"
        rows = write_band_csv(path, band)
        bands.append({"kind": kind, "path": path, "rows": rows, "level": band.level,
                      "excludes_zero": band.excludes_zero()})
    config = {"args": _config_echo(args), "test": tcfg.to_dict(), "ingest": ingest.to_dict(),
              "split": split, "split_time": ingest.labels[split]}
    return RunReport(config, [], {}, bands, __version__, args.seed)


def run_simulate(args) -> RunReport:
    dgp = DgpSpec(_DGP_ALIASES[args.dgp])
    noise = NoiseSpec(_NOISE_ALIASES[args.noise])
    seed = 0 if args.seed is None else args.seed
    row = {"dgp": dgp.kind, "noise": noise.kind, "n": args.n, "reps": args.reps}
    if args.mode == "size-power":
        tcfg = TestConfig(alpha=args.alpha, bandwidth=args.bandwidth, target=args.target)
        res = run_size_power(dgp, noise, args.n, args.target, args.reps, seed, tcfg)
        row.update(kind="size_power", target=args.target, size=res.size, power=res.power)
    else:
        cfg = _detect_config(args)
        res = run_detection_benchmark(dgp, noise, args.n, args.reps, seed, cfg)
        row.update(kind="detection_benchmark", target=args.target, amd=res.amd, adn=res.adn)
    return RunReport({"args": _config_echo(args)}, [row], {}, [], __version__, seed)


def _summary(command: str, report: RunReport) -> str:
    lines = []
    if command == "detect":
        items = report.breaks.get("items", [])
        lines.append(f"{len(items)} break(s) in the {report.breaks.get('target')} target")
        lines += [f"  index {b['index']}  time {b['time']}  score {b['score']:.3f}" for b in items]
        sec = report.breaks.get("secondary")
        if sec is not None:
            lines.append(f"{len(sec['items'])} break(s) in the {sec['target']} target")
    elif command == "test":
        t = report.tests[0]
        if t["kind"] == "joint":
            for part in ("mean", "variance"):
                s = t[part]
                lines.append(f"{part}: statistic {s['statistic']:.4f}  m {s['m']}  "
                             f"critical {s['critical_value']:.4f}")
            lines.append("decision: " + ("reject" if t["reject_any"] else "fail to reject"))
        else:
            lines.append(f"statistic {t['statistic']:.4f}  m {t['m']}  critical {t['critical_value']:.4f}")
            lines.append("decision: " + ("reject" if t["reject"] else "fail to reject"))
    elif command == "bands":
        lines += [f"{b['kind']}: {b['rows']} rows -> {b['path']}" for b in report.bands]
    else:
        r = report.tests[0]
        head = f"{r['dgp']:<12}{r['noise']:<14}{r['n']:>6}"
        if r["kind"] == "size_power":
            lines.append(f"{head}  size {r['size']:.2f}  power {r['power']:.2f}")
        else:
            lines.append(f"{head}  AMD {r['amd']:.2f}  ADN {r['adn']:.2f}")
    return "\n".join(lines)


_COMMANDS = {"detect": run_detect, "test": run_test_command, "bands": emit_bands,
             "simulate": run_simulate}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report = _COMMANDS[args.command](args)
    except (UsageError, InvalidConfigurationError) as exc:
        print(f"nwbreak {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, MissingColumnError, InsufficientDataError, EstimationError,
            DegenerateSampleError, ValueError) as exc:
        print(f"nwbreak {args.command}: {exc}", file=sys.stderr)
        return 1
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(_summary(args.command, report))
    else:
        sys.stdout.write(text)
        print(_summary(args.command, report), file=sys.stderr)
    return 0
