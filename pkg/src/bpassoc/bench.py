"""Monte Carlo sweeps over grid scenarios, with CSV output.

Each trial draws a scenario and one scan from its own random streams,
computes the exact marginals as the reference, then times every
configured algorithm and records its average-over-targets maximum
marginal error. Trials are reduced in trial-index order, so aggregates do
not depend on worker scheduling.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bp import compute_contraction_params, solve
from .corrdecay import cd_beliefs
from .errors import BudgetExceeded, ConfigError, ParseError
from .exact import average_max_error, exact_marginals
from .model import DEFAULT_EVENT_BUDGET
from .scenario import SensorModel, make_trial_scenario

RESULTS_FORMAT = "bpassoc-results/1"
TRIALS_FORMAT = "bpassoc-trials/1"

RESULT_COLUMNS = [
    "combo", "rows", "cols", "spacing", "p_d", "lambda_fa", "r_meas", "algorithm", "params",
    "trials", "mean_err", "p5_err", "p95_err", "mean_time_us", "mean_iters", "max_iters",
    "mean_wstar", "p5_wstar", "p95_wstar", "failures",
]  # fmt: skip
TRIAL_COLUMNS = [
    "combo", "trial", "rows", "cols", "spacing", "p_d", "lambda_fa", "r_meas", "algorithm",
    "params", "status", "error", "iterations", "time_us", "w_star", "w_sup",
]  # fmt: skip


@dataclass(frozen=True)
class Algorithm:
    name: str
    depth: int = 0

    @classmethod
    def parse(cls, text: str) -> "Algorithm":
        text = text.strip()
        if text in ("bp", "oracle"):
            return cls(text)
        if text.startswith("cd:"):
            try:
                depth = int(text[3:])
            except ValueError:
                raise ConfigError(f"bad correlation-decay depth in {text!r}") from None
            if depth < 1:
                raise ConfigError(f"correlation-decay depth must be >= 1 in {text!r}")
            return cls("cd", depth)
        raise ConfigError(f"unknown algorithm {text!r}")

    @property
    def label(self) -> str:
        return f"cd:{self.depth}" if self.name == "cd" else self.name


@dataclass
class SweepConfig:
    rows: int = 2
    cols: int = 3
    spacings: list[float] = field(default_factory=lambda: [3.0])
    p_d: list[float] = field(default_factory=lambda: [0.6])
    lambda_fa: list[float] = field(default_factory=lambda: [0.01])
    r_meas: list[float] = field(default_factory=lambda: [1.0])
    trials: int = 100
    seed: int = 0
    algorithms: list[str] = field(default_factory=lambda: ["bp", "oracle"])
    bp_delta: float = 1e-3
    bp_check_interval: int = 10
    gate_exclusion: float = 1e-4
    preinit_steps: int = 30
    q: float = 0.01
    oracle_budget: int = DEFAULT_EVENT_BUDGET
    timing: bool = True

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigError("trial count must be at least 1")
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("grid needs at least one row and one column")
        if not self.algorithms:
            raise ConfigError("no algorithms selected")
        for alg in self.algorithms:
            Algorithm.parse(alg)
        for name in ("spacings", "p_d", "lambda_fa", "r_meas"):
            if not getattr(self, name):
                raise ConfigError(f"empty {name} list")
        if any(s < 0 for s in self.spacings):
            raise ConfigError("spacing must be non-negative")
        for p in self.p_d:
            if not 0.0 <= p < 1.0:
                raise ConfigError(f"p_d must lie in [0, 1), got {p}")
        if any(not lam > 0 for lam in self.lambda_fa):
            raise ConfigError("false-alarm intensity must be positive")
        if any(not r > 0 for r in self.r_meas):
            raise ConfigError("measurement noise must be positive")
        if not self.bp_delta > 0:
            raise ConfigError("bp delta must be positive")
        if self.bp_check_interval < 1:
            raise ConfigError("bp check interval must be >= 1")
        if not 0.0 < self.gate_exclusion < 1.0:
            raise ConfigError("gate exclusion probability must lie in (0, 1)")
        if self.preinit_steps < 0 or not self.q > 0:
            raise ConfigError("pre-initialisation needs steps >= 0 and q > 0")

    def combos(self) -> list[tuple[float, float, float, float]]:
        return list(itertools.product(self.spacings, self.p_d, self.lambda_fa, self.r_meas))

    def param_string(self, alg: Algorithm) -> str:
        if alg.name == "bp":
            return f"delta={self.bp_delta!r};N={self.bp_check_interval}"
        if alg.name == "cd":
            return f"depth={alg.depth}"
        return f"budget={self.oracle_budget}"


@dataclass
class TrialRecord:
    combo: int
    trial: int
    rows: int
    cols: int
    spacing: float
    p_d: float
    lambda_fa: float
    r_meas: float
    algorithm: str
    params: str
    status: str
    error: float
    iterations: int | None
    time_us: float
    w_star: float
    w_sup: float

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _run_algorithm(alg: Algorithm, w, config: SweepConfig):
    if alg.name == "bp":
        beliefs, report = solve(w, config.bp_delta, config.bp_check_interval)
        return beliefs, report.iterations_used
    if alg.name == "cd":
        return cd_beliefs(w, alg.depth), None
    # the reference itself was computed untimed; recompute so the timing is honest
    return exact_marginals(w, config.oracle_budget), None


def run_trial(config: SweepConfig, combo_index: int, trial: int) -> list[TrialRecord]:
    """One scenario, one scan, every configured algorithm."""
    spacing, p_d, lam, r = config.combos()[combo_index]
    global_trial = combo_index * config.trials + trial
    sensor = SensorModel(p_d, lam, r)
    scen = make_trial_scenario(
        config.rows, config.cols, spacing, sensor,
        exclusion_prob=config.gate_exclusion, q=config.q, steps=config.preinit_steps,
        seed=config.seed, trial=global_trial,
    )  # fmt: skip
    w = scen.weights()
    params = compute_contraction_params(w)
    ref_status = "ok"
    try:
        reference = exact_marginals(w, config.oracle_budget)
    except BudgetExceeded as exc:
        reference = None
        ref_status = f"reference-failed: {exc}"

    out = []
    for name in config.algorithms:
        alg = Algorithm.parse(name)
        rec = dict(
            combo=combo_index, trial=trial, rows=config.rows, cols=config.cols,
            spacing=spacing, p_d=p_d, lambda_fa=lam, r_meas=r,
            algorithm=alg.label, params=config.param_string(alg),
            w_star=params.w_star, w_sup=params.w_sup,
        )  # fmt: skip
        if reference is None:
            out.append(TrialRecord(**rec, status=ref_status, error=math.nan, iterations=None, time_us=math.nan))
            continue
        try:
            t0 = time.perf_counter()
            beliefs, iters = _run_algorithm(alg, w, config)
            elapsed = (time.perf_counter() - t0) * 1e6
            err = average_max_error(beliefs, reference)
            status = "ok"
        except Exception as exc:  # a failed trial is recorded, never fatal
            elapsed, err, iters = math.nan, math.nan, None
            status = f"error: {type(exc).__name__}: {exc}"
        if not config.timing:
            elapsed = math.nan
        out.append(TrialRecord(**rec, status=status, error=err, iterations=iters, time_us=elapsed))
    return out


def _task(args):
    config, combo_index, trial = args
    return run_trial(config, combo_index, trial)


def collect_trials(config: SweepConfig, parallel: int | None = None) -> list[TrialRecord]:
    config.validate()
    tasks = [(config, c, t) for c in range(len(config.combos())) for t in range(config.trials)]
    workers = parallel or os.cpu_count() or 1
    if workers <= 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    records = [rec for trial_records in results for rec in trial_records]
    records.sort(key=lambda r: (r.combo, _algorithm_rank(r.algorithm), r.trial))
    return records


def _algorithm_rank(label: str) -> tuple[int, int]:
    alg = Algorithm.parse(label)
    return ({"bp": 0, "cd": 1, "oracle": 2}[alg.name], alg.depth)


def _pct(values, q):
    return float(np.percentile(values, q)) if len(values) else math.nan


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def aggregate(records: list[TrialRecord]) -> list[dict]:
    """One summary row per (combo, algorithm), independent of record order."""
    groups: dict[tuple[int, str], list[TrialRecord]] = {}
    for rec in records:
        groups.setdefault((rec.combo, rec.algorithm), []).append(rec)
    rows = []
    for combo, alg in sorted(groups, key=lambda k: (k[0], _algorithm_rank(k[1]))):
        recs = groups[(combo, alg)]
        recs = sorted(recs, key=lambda r: r.trial)
        ok = [r for r in recs if r.ok]
        errs = [r.error for r in ok]
        iters = [r.iterations for r in ok if r.iterations is not None]
        wstar = [r.w_star for r in recs]
        first = recs[0]
        rows.append(
            dict(
                combo=combo, rows=first.rows, cols=first.cols, spacing=first.spacing,
                p_d=first.p_d, lambda_fa=first.lambda_fa, r_meas=first.r_meas,
                algorithm=alg, params=first.params, trials=len(ok),
                mean_err=_mean(errs), p5_err=_pct(errs, 5), p95_err=_pct(errs, 95),
                mean_time_us=_mean([r.time_us for r in ok]),
                mean_iters=_mean(iters) if iters else None,
                max_iters=max(iters) if iters else None,
                mean_wstar=_mean(wstar), p5_wstar=_pct(wstar, 5), p95_wstar=_pct(wstar, 95),
                failures=len(recs) - len(ok),
            )  # fmt: skip
        )
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, fmt: str, config: SweepConfig, columns, rows) -> None:
    buf = io.StringIO()
    buf.write(f"# format: {fmt}\n")
    buf.write(f"# config: {json.dumps(asdict(config), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")


def trials_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".trials" + (out.suffix or ".csv"))


def run_sweep(
    config: SweepConfig, out: str | Path, per_trial: bool = False, parallel: int | None = None
) -> tuple[list[dict], list[TrialRecord]]:
    """Run every (combo, trial) and write the aggregated CSV (plus per-trial rows if asked)."""
    records = collect_trials(config, parallel)
    summary = aggregate(records)
    _write_csv(Path(out), RESULTS_FORMAT, config, RESULT_COLUMNS, summary)
    if per_trial:
        _write_csv(trials_path(out), TRIALS_FORMAT, config, TRIAL_COLUMNS, [asdict(r) for r in records])
    return summary, records


def _num(text: str, kind, lineno: int, name: str):
    if text == "":
        return None
    try:
        return kind(text)
    except ValueError:
        raise ParseError(f"bad {name} value {text!r}", line=lineno) from None


_RESULT_TYPES = dict(
    combo=int, rows=int, cols=int, spacing=float, p_d=float, lambda_fa=float, r_meas=float,
    algorithm=str, params=str, trials=int, mean_err=float, p5_err=float, p95_err=float,
    mean_time_us=float, mean_iters=float, max_iters=int, mean_wstar=float, p5_wstar=float,
    p95_wstar=float, failures=int,
)  # fmt: skip
_TRIAL_TYPES = dict(
    combo=int, trial=int, rows=int, cols=int, spacing=float, p_d=float, lambda_fa=float,
    r_meas=float, algorithm=str, params=str, status=str, error=float, iterations=int,
    time_us=float, w_star=float, w_sup=float,
)  # fmt: skip


def read_results(path: str | Path) -> tuple[str, list[dict]]:
    """Parse a results or per-trial file; returns ``(format, rows)``."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    fmt = None
    header = None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("# format:"):
                fmt = line.split(":", 1)[1].strip()
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = fields
            if fmt not in (RESULTS_FORMAT, TRIALS_FORMAT):
                raise ParseError(f"unknown or missing format tag {fmt!r}", line=lineno)
            expected = RESULT_COLUMNS if fmt == RESULTS_FORMAT else TRIAL_COLUMNS
            if header != expected:
                raise ParseError("unexpected column header", line=lineno)
            types = _RESULT_TYPES if fmt == RESULTS_FORMAT else _TRIAL_TYPES
            continue
        if len(fields) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(fields)}", line=lineno)
        rows.append(
            {
                name: (value if types[name] is str else _num(value, types[name], lineno, name))
                for name, value in zip(header, fields)
            }
        )
    if header is None:
        raise ParseError("no header row", line=len(lines))
    return fmt, rows


def summarize(path: str | Path) -> list[dict]:
    """Summary rows for a results file, aggregating first if it holds per-trial rows."""
    fmt, rows = read_results(path)
    if fmt == RESULTS_FORMAT:
        return rows
    records = [TrialRecord(**r) for r in rows]
    return aggregate(records)


def format_summary(rows: list[dict]) -> str:
    cols = ["combo", "spacing", "p_d", "lambda_fa", "r_meas", "algorithm", "trials", "mean_err",
            "p5_err", "p95_err", "mean_time_us", "mean_iters", "max_iters", "mean_wstar",
            "p5_wstar", "p95_wstar", "failures"]  # fmt: skip

    def show(v):
        if v is None:
            return "-"
        if isinstance(v, float):
            return f"{v:.4g}"
        return str(v)

    table = [cols] + [[show(r.get(c)) for c in cols] for r in rows]
    widths = [max(len(row[k]) for row in table) for k in range(len(cols))]
    return "\n".join("  ".join(cell.rjust(wd) for cell, wd in zip(row, widths)) for row in table)
