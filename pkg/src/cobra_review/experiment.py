"""Seeded experiment runs and their summary table.

Per-run CSV columns (``RUN_FIELDS``)::

    run,seed,algorithm,n,usw,esw,violated,unbounded,alpha,largest_group,exactness

``alpha`` is 1 for runs without a violation and ``inf`` for unbounded ones;
``largest_group`` is 0 without a violation. Floats are written with ``repr``
so the summary can be recomputed exactly from the file.

Summary CSV columns (``SUMMARY_FIELDS``), one row per algorithm; ``_se`` is the
standard error of the mean across runs::

    algorithm,runs,usw_mean,usw_se,esw_mean,esw_se,unb_alpha_pct,
    alpha_star_mean,alpha_star_se,cv_pr_pct,largest_group_mean,largest_group_se

``alpha_star`` averages every run with a finite alpha (runs without a
violation count as 1); ``largest_group`` averages the violated runs. Means
over an empty set are written as ``nan``.
"""

from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

from .audit import AuditReport, exact_audit, forced_scan_audit, heuristic_audit
from .baselines import assign_max_usw, assign_maxmin_esw
from .cobra import run_cobra
from .ingest import subsample_instance
from .model import Assignment, InputError, Instance, compute_utilities

ALGORITHMS: dict[str, Callable[[Instance], Assignment]] = {
    "cobra": run_cobra,
    "max-usw": assign_max_usw,
    "maxmin-esw": assign_maxmin_esw,
}
AUDIT_MODES = ("exact", "heuristic", "forced-scan-only")


class ExperimentError(RuntimeError):
    pass


def assign(inst: Instance, algorithm: str, esw_probes: int | None = None) -> Assignment:
    if algorithm == "maxmin-esw":
        return assign_maxmin_esw(inst, max_probes=esw_probes)
    if algorithm not in ALGORITHMS:
        raise InputError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
    return ALGORITHMS[algorithm](inst)


def audit(inst: Instance, asg: Assignment, mode: str, exact_max_n: int = 16) -> AuditReport:
    if mode == "exact":
        return exact_audit(inst, asg, max_n=exact_max_n)
    if mode == "heuristic":
        return heuristic_audit(inst, asg)
    if mode == "forced-scan-only":
        return forced_scan_audit(inst, asg)
    raise InputError(f"unknown audit mode {mode!r}; choose from {', '.join(AUDIT_MODES)}")


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    algorithm: str
    n: int
    usw: float
    esw: float
    violated: bool
    unbounded: bool
    alpha: float
    largest_group: int
    exactness: str


RUN_FIELDS = [f.name for f in fields(RunRecord)]


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple[str, ...] = ("cobra", "max-usw", "maxmin-esw")
    runs: int = 1
    subsample: int | None = None
    base_seed: int = 0
    audit_mode: str = "heuristic"
    exact_max_n: int = 16
    esw_probes: int | None = 0  # threshold MILPs for maxmin-esw; None runs to optimality

    def check(self, k_p: int) -> None:
        if self.runs < 1:
            raise InputError(f"run count must be at least 1, got {self.runs}")
        if self.subsample is not None and self.subsample < k_p + 1:
            raise InputError(f"subsample size {self.subsample} is below k_p + 1 = {k_p + 1}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise InputError(f"unknown algorithm {a!r}; choose from {', '.join(ALGORITHMS)}")
        if self.audit_mode not in AUDIT_MODES:
            raise InputError(f"unknown audit mode {self.audit_mode!r}")


def evaluate(inst: Instance, asg: Assignment, algorithm: str, mode: str, run: int = 0, seed: int = 0,
             exact_max_n: int = 16) -> RunRecord:
    return make_record(inst, asg, audit(inst, asg, mode, exact_max_n), algorithm, run, seed)


def make_record(inst: Instance, asg: Assignment, rep: AuditReport, algorithm: str,
                run: int = 0, seed: int = 0) -> RunRecord:
    util = compute_utilities(inst, asg)
    return RunRecord(
        run=run,
        seed=seed,
        algorithm=algorithm,
        n=inst.n,
        usw=util.usw,
        esw=util.esw,
        violated=rep.violated,
        unbounded=rep.unbounded,
        alpha=rep.alpha,
        largest_group=rep.largest_group,
        exactness=rep.exactness,
    )


def _one_run(full: Instance, config: ExperimentConfig, run: int) -> list[RunRecord]:
    seed = config.base_seed + run
    try:
        inst = full if config.subsample is None else subsample_instance(full, config.subsample, seed)
        out = []
        for name in config.algorithms:
            asg = assign(inst, name, config.esw_probes)
            out.append(evaluate(inst, asg, name, config.audit_mode, run, seed, config.exact_max_n))
        return out
    except Exception as e:
        raise ExperimentError(f"run {run} (seed {seed}) failed: {e}") from e


def run_experiment(full: Instance, config: ExperimentConfig, jobs: int = 1,
                   progress: Callable[[int], None] | None = None) -> list[RunRecord]:
    """Every algorithm on every run's subsample; records ordered by run, then algorithm."""
    config.check(full.k_p)
    results: dict[int, list[RunRecord]] = {}
    if jobs <= 1:
        for r in range(config.runs):
            results[r] = _one_run(full, config, r)
            if progress:
                progress(r)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {r: pool.submit(_one_run, full, config, r) for r in range(config.runs)}
            for r in range(config.runs):
                results[r] = futures[r].result()
                if progress:
                    progress(r)
    return [rec for r in range(config.runs) for rec in results[r]]


# ---------------------------------------------------------------------------
# tables


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    if not xs:
        return math.nan, math.nan
    if len(xs) == 1:
        return float(xs[0]), 0.0
    return statistics.fmean(xs), statistics.stdev(xs) / math.sqrt(len(xs))


@dataclass(frozen=True)
class SummaryRow:
    algorithm: str
    runs: int
    usw_mean: float
    usw_se: float
    esw_mean: float
    esw_se: float
    unb_alpha_pct: float
    alpha_star_mean: float
    alpha_star_se: float
    cv_pr_pct: float
    largest_group_mean: float
    largest_group_se: float


SUMMARY_FIELDS = [f.name for f in fields(SummaryRow)]


def summarize(records: Sequence[RunRecord]) -> list[SummaryRow]:
    """One row per algorithm, in first-appearance order."""
    order: list[str] = []
    by_alg: dict[str, list[RunRecord]] = {}
    for rec in records:
        if rec.algorithm not in by_alg:
            order.append(rec.algorithm)
            by_alg[rec.algorithm] = []
        by_alg[rec.algorithm].append(rec)
    rows = []
    for name in order:
        rs = by_alg[name]
        k = len(rs)
        usw = _mean_se([r.usw for r in rs])
        esw = _mean_se([r.esw for r in rs])
        alpha = _mean_se([r.alpha for r in rs if not r.unbounded])
        group = _mean_se([float(r.largest_group) for r in rs if r.violated])
        rows.append(SummaryRow(
            algorithm=name,
            runs=k,
            usw_mean=usw[0],
            usw_se=usw[1],
            esw_mean=esw[0],
            esw_se=esw[1],
            unb_alpha_pct=100.0 * sum(r.unbounded for r in rs) / k,
            alpha_star_mean=alpha[0],
            alpha_star_se=alpha[1],
            cv_pr_pct=100.0 * sum(r.violated for r in rs) / k,
            largest_group_mean=group[0],
            largest_group_se=group[1],
        ))
    return rows


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_runs_csv(path, records: Sequence[RunRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_FIELDS)
        for rec in records:
            w.writerow([_cell(v) for v in asdict(rec).values()])


def read_runs_csv(path) -> list[RunRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RUN_FIELDS:
            raise InputError(f"{path}: header must be {','.join(RUN_FIELDS)}")
        out = []
        for row in reader:
            out.append(RunRecord(
                run=int(row["run"]),
                seed=int(row["seed"]),
                algorithm=row["algorithm"],
                n=int(row["n"]),
                usw=float(row["usw"]),
                esw=float(row["esw"]),
                violated=row["violated"] == "true",
                unbounded=row["unbounded"] == "true",
                alpha=float(row["alpha"]),
                largest_group=int(row["largest_group"]),
                exactness=row["exactness"],
            ))
    return out


def write_summary_csv(path, rows: Sequence[SummaryRow]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for row in rows:
            w.writerow([_cell(v) for v in asdict(row).values()])


def format_summary(rows: Sequence[SummaryRow]) -> str:
    """Human-readable table in the layout of the results tables (± is standard error)."""
    head = f"{'Alg':<12}{'USW':>20}{'ESW':>18}{'#unb-a':>8}{'a*':>18}{'CV-Pr':>8}{'group':>16}"
    lines = [head, "-" * len(head)]

    def pm(m, s, d):
        return "-" if math.isnan(m) else f"{m:.{d}f} ± {s:.{d}f}"

    for r in rows:
        lines.append(
            f"{r.algorithm:<12}{pm(r.usw_mean, r.usw_se, 3):>20}{pm(r.esw_mean, r.esw_se, 3):>18}"
            f"{r.unb_alpha_pct:>7.0f}%{pm(r.alpha_star_mean, r.alpha_star_se, 3):>18}"
            f"{r.cv_pr_pct:>7.0f}%{pm(r.largest_group_mean, r.largest_group_se, 2):>16}")
    lines.append("± is the standard error of the mean across runs")
    return "\n".join(lines)
