"""Command-line driver: ``assign``, ``audit`` and ``experiment``.

Input is a similarity CSV (``--scores``), optionally a conflicts CSV
(``--conflicts``), and an authorship source (``--authorship``): either
``max-matching`` (conflict matrix), ``greedy`` (highest score) or the path of
a ``paper_id,author_reviewer_id`` CSV.

Outputs:

* assignment CSV ``paper_id,reviewer_id``, one line per pair;
* audit record: ``key=value`` lines on stdout (see :func:`format_report`) and,
  with ``--out``, a one-row per-run CSV;
* experiment: ``runs.csv`` and ``summary.csv`` in the ``--out`` directory
  (columns documented in :mod:`cobra_review.experiment`).

Exit status is 0 on success, 2 for bad input or configuration and 1 when an
experiment run fails.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import experiment as ex
from .audit import AuditReport
from .cobra import run_cobra
from .ingest import (
    authorship_by_greedy,
    authorship_by_max_matching,
    build_instance,
    load_similarity_csv,
    normalize_scores,
    read_authorship_csv,
)
from .model import Assignment, InputError, Instance, compute_utilities, validate_assignment

log = logging.getLogger("cobra_review")

ASSIGNMENT_HEADER = ["paper_id", "reviewer_id"]


def load_instance(args) -> Instance:
    if args.k_a < 1 or args.k_p < 1:
        raise InputError(f"k_a and k_p must be positive integers (got k_a={args.k_a}, k_p={args.k_p})")
    ds = load_similarity_csv(args.scores, args.conflicts)
    if args.normalize:
        ds = normalize_scores(ds)
    if args.authorship == "max-matching":
        authorship = authorship_by_max_matching(ds)
    elif args.authorship == "greedy":
        authorship = authorship_by_greedy(ds)
    else:
        authorship = read_authorship_csv(args.authorship)
    log.info("loaded %d reviewers x %d papers; %d authored papers kept",
             len(ds.reviewer_ids), len(ds.paper_ids), len(authorship))
    return build_instance(ds, authorship, args.k_a, args.k_p)


def write_assignment_csv(path, inst: Instance, asg: Assignment) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ASSIGNMENT_HEADER)
        for i, p in asg.sorted_pairs():
            w.writerow([inst.paper_label(p), inst.agent_label(i)])


def read_assignment_csv(path, inst: Instance) -> Assignment:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    papers = {inst.paper_label(p): p for p in inst.papers}
    agents = {inst.agent_label(i): i for i in range(inst.n)}
    pairs = set()
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ASSIGNMENT_HEADER:
        raise InputError(f"{path}:1: header must be {','.join(ASSIGNMENT_HEADER)}")
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{line}: expected 2 cells, found {len(row)}")
        pid, rid = row[0].strip(), row[1].strip()
        if pid not in papers:
            raise InputError(f"{path}:{line}: unknown paper {pid!r}")
        if rid not in agents:
            raise InputError(f"{path}:{line}: unknown reviewer {rid!r}")
        pair = (agents[rid], papers[pid])
        if pair in pairs:
            raise InputError(f"{path}:{line}: duplicate pair {pid},{rid}")
        pairs.add(pair)
    return Assignment(frozenset(pairs))


def format_report(inst: Instance, rep: AuditReport) -> str:
    """``key=value`` lines; witness lines only when a violation was found."""
    b = lambda v: "true" if v else "false"  # noqa: E731
    lines = [
        f"violated={b(rep.violated)}",
        f"unbounded={b(rep.unbounded)}",
        f"alpha={rep.alpha!r}",
        f"largest_group={rep.largest_group}",
        f"exactness={rep.exactness}",
        f"witnesses_found={rep.witnesses_found}",
    ]
    w = rep.witness
    if w is not None:
        lines.append("witness=" + ",".join(inst.agent_label(i) for i in w.coalition))
        lines.append("witness_pairs=" + ";".join(
            f"{inst.paper_label(p)}:{inst.agent_label(i)}" for i, p in w.restricted.sorted_pairs()))
        lines.append("witness_utilities=" + ";".join(
            f"{inst.agent_label(i)}:{w.before[i]!r}>{w.after[i]!r}" for i in w.coalition))
    return "\n".join(lines)


def cmd_assign(args) -> int:
    inst = load_instance(args)
    if args.trace and args.algorithm != "cobra":
        raise InputError("--trace is only available for the cobra algorithm")
    if args.algorithm == "cobra":
        asg = run_cobra(inst, trace=print if args.trace else None)
    else:
        asg = ex.assign(inst, args.algorithm, args.esw_probes)
    problems = validate_assignment(inst, asg)
    if problems:  # unreachable unless an algorithm is broken
        raise RuntimeError("invalid assignment produced: " + "; ".join(map(str, problems)))
    util = compute_utilities(inst, asg)
    if args.out:
        write_assignment_csv(args.out, inst, asg)
    else:
        for i, p in asg.sorted_pairs():
            print(f"{inst.paper_label(p)},{inst.agent_label(i)}")
    print(f"algorithm={args.algorithm} pairs={len(asg)} USW={util.usw!r} ESW={util.esw!r}")
    return 0


def cmd_audit(args) -> int:
    inst = load_instance(args)
    asg = read_assignment_csv(args.assignment, inst)
    problems = validate_assignment(inst, asg)
    if problems:
        for v in problems:
            print(f"invalid assignment: {v}", file=sys.stderr)
        return 2
    rep = ex.audit(inst, asg, args.audit_mode, args.exact_max_n)
    print(format_report(inst, rep))
    if args.out:
        ex.write_runs_csv(args.out, [ex.make_record(inst, asg, rep, args.label)])
    return 0


def cmd_experiment(args) -> int:
    inst = load_instance(args)
    algorithms = tuple(a for part in args.algorithm for a in part.split(",") if a)
    config = ex.ExperimentConfig(
        algorithms=algorithms or tuple(ex.ALGORITHMS),
        runs=args.runs,
        subsample=args.subsample,
        base_seed=args.seed,
        audit_mode=args.audit_mode,
        exact_max_n=args.exact_max_n,
        esw_probes=args.esw_probes,
    )
    config.check(inst.k_p)
    records = ex.run_experiment(inst, config, jobs=args.jobs,
                                progress=lambda r: log.info("run %d/%d done", r + 1, config.runs))
    rows = ex.summarize(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_runs_csv(out / "runs.csv", records)
    ex.write_summary_csv(out / "summary.csv", rows)
    print(ex.format_summary(rows))
    return 0


def _probes(text: str) -> int | None:
    if text == "all":
        return None
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("probe count must be >= 0 or 'all'")
    return value


def _data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scores", required=True, help="similarity CSV (reviewers x papers)")
    p.add_argument("--conflicts", help="conflicts CSV with the same shape (0/1)")
    p.add_argument("--authorship", default="max-matching",
                   help="max-matching | greedy | path to a paper_id,author_reviewer_id CSV")
    p.add_argument("--normalize", action="store_true", help="divide scores by their global maximum")
    p.add_argument("--k-a", type=int, default=3, help="max papers per reviewer (default 3)")
    p.add_argument("--k-p", type=int, default=3, help="reviewers per paper (default 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cobra-review", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assign", help="compute an assignment")
    _data_args(p)
    p.add_argument("--algorithm", choices=list(ex.ALGORITHMS), default="cobra")
    p.add_argument("--out", help="assignment CSV to write (default: stdout)")
    p.add_argument("--trace", action="store_true", help="print the cobra step trace")
    p.add_argument("--esw-probes", type=_probes, default=None,
                   help="threshold MILPs for maxmin-esw, or 'all' (default: all)")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("audit", help="audit an assignment for core violations")
    _data_args(p)
    p.add_argument("--assignment", required=True, help="paper_id,reviewer_id CSV")
    p.add_argument("--audit-mode", choices=ex.AUDIT_MODES, default="heuristic")
    p.add_argument("--exact-max-n", type=int, default=16,
                   help="exact mode refuses when more candidate agents remain (default 16)")
    p.add_argument("--label", default="input", help="algorithm name recorded in --out")
    p.add_argument("--out", help="one-row per-run CSV to write")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="seeded subsampling experiment")
    _data_args(p)
    p.add_argument("--algorithm", action="append", default=[],
                   help="cobra, max-usw, maxmin-esw; repeat or comma-separate (default: all)")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--subsample", type=int, help="papers per run (default: no subsampling)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed + r")
    p.add_argument("--audit-mode", choices=ex.AUDIT_MODES, default="heuristic")
    p.add_argument("--exact-max-n", type=int, default=16)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--esw-probes", type=_probes, default=0,
                   help="threshold MILPs per maxmin-esw run after local search; 'all' runs to "
                        "optimality (default 0)")
    p.add_argument("--out", required=True, help="output directory for runs.csv and summary.csv")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ex.ExperimentError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
