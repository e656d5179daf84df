"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are repeated in
the "acceptance criteria" section of the terminal summary.
"""

import itertools
import os
import time
from pathlib import Path

import numpy as np
import pytest

from cobra_review import experiment as ex
from cobra_review.audit import ALPHA_TOL, exact_audit, heuristic_audit
from cobra_review.baselines import assign_max_usw, maxmin_esw
from cobra_review.cobra import pra_ttc, run_cobra
from cobra_review.ingest import authorship_by_max_matching, build_instance, load_similarity_csv
from cobra_review.model import Assignment, Instance, pad_to_uniform, validate_assignment
from cobra_review.synthetic import random_scored_instance

from conftest import TRACE_FINAL, FIXTURES
from helpers import balance_probe, trace_instance, fuzz_set, small_scored_instance, verdict
from oracles import best_objective, classic_ttc, exact_value

# directory holding scores.csv and conflicts.csv of the ICLR 2018 data
ICLR_ENV = "COBRA_ICLR2018_DIR"


@pytest.fixture(scope="module")
def fuzz_instances():
    return fuzz_set(1000, seed=2024)


def test_criterion_1_trace_example_reproduction():
    inst = trace_instance()
    start = time.perf_counter()
    lines = []
    asg = run_cobra(inst, trace=lines.append)
    ttc = pra_ttc(pad_to_uniform(inst))
    elapsed = time.perf_counter() - start
    got = {}
    for i, (a, _) in asg.pairs:
        got.setdefault(i + 1, set()).add(a + 1)
    ok = (len(asg) == 18 and got == TRACE_FINAL and ttc.U == (3, 4, 5) and ttc.L == (2,)
          and any(x.endswith("U=4,5,6 L=3") for x in lines) and elapsed < 1.0)
    assert verdict("1", ok, f"18-pair assignment and U={{4,5,6}} L={{3}} reproduced in {elapsed:.3f}s")


def test_criterion_2_validity_fuzzing(fuzz_instances):
    start = time.perf_counter()
    bad = [k for k, inst in enumerate(fuzz_instances) if validate_assignment(inst, run_cobra(inst))]
    elapsed = time.perf_counter() - start
    ok = not bad and elapsed < 60
    assert verdict("2", ok, f"{1000 - len(bad)}/1000 valid in {elapsed:.1f}s (limit 60s)")


def test_criterion_3_core_at_desk_scale():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    violated = 0
    for _ in range(200):
        k_p = int(rng.integers(1, 4))
        n = int(rng.integers(k_p + 1, 9))
        inst = random_scored_instance(rng, n, k_p, k_a=k_p * int(rng.integers(1, 3)), decimals=2)
        violated += exact_audit(inst, run_cobra(inst)).violated
    elapsed = time.perf_counter() - start
    ok = violated == 0 and elapsed < 300
    assert verdict("3", ok, f"{violated}/200 core violations found by exact audit in {elapsed:.1f}s")


def _ttc_agrees(prefs) -> bool:
    n = len(prefs)
    inst = Instance(n=n, k_a=1, k_p=1, submissions=(1,) * n,
                    rankings={(i, 0): tuple(prefs[i]) for i in range(n)})
    ttc = pra_ttc(pad_to_uniform(inst))
    pairs = {(j, a) for (a, _), revs in ttc.partial.reviewers.items() for j in revs}
    traded, kept = classic_ttc(prefs)
    return pairs == traded and set(ttc.U) == kept


def test_criterion_4_ttc_oracle():
    per_agent = [list(itertools.permutations([j for j in range(4) if j != i])) for i in range(4)]
    profiles = [dict(enumerate(map(list, combo))) for combo in itertools.product(*per_agent)]
    rng = np.random.default_rng(4)
    for _ in range(200):
        n = int(rng.integers(5, 8))
        profiles.append({i: [int(x) for x in rng.permutation([j for j in range(n) if j != i])]
                         for i in range(n)})
    mismatches = sum(not _ttc_agrees(p) for p in profiles)
    ok = mismatches == 0 and len(profiles) == 6 ** 4 + 200
    assert verdict("4", ok, f"{len(profiles) - mismatches}/{len(profiles)} profiles match classic TTC")


def _lemma_counts(monkeypatch, instances):
    too_many_incomplete = 0
    with balance_probe(monkeypatch) as probe:
        for inst in instances:
            too_many_incomplete += len(pra_ttc(pad_to_uniform(inst)).U) > inst.k_p
            run_cobra(inst)
    return probe, too_many_incomplete


@pytest.mark.xfail(strict=True, reason="review-balance equality fails when k_a > m*·k_p; "
                                       "agents with spare capacity join cycles without reviewing")
def test_criterion_5_lemma_suite(monkeypatch, fuzz_instances):
    probe, wide = _lemma_counts(monkeypatch, fuzz_instances)
    ok = not probe.unequal and wide == 0
    example = probe.unequal[0][1] if probe.unequal else "none"
    assert verdict("5", ok, f"{len(probe.unequal)} balance inequalities in {probe.checks} checks, "
                            f"{wide} instances with |U| > k_p (first: {example}); expected failure")


def test_criterion_5_provable_part(monkeypatch, fuzz_instances):
    # what does hold: no agent reviews more than its papers receive, equality
    # when k_a == m*·k_p, and at most k_p agents left incomplete
    probe, wide = _lemma_counts(monkeypatch, fuzz_instances)
    tight_unequal = sum(tight for tight, _ in probe.unequal)
    ok = probe.checks > 0 and not probe.excess and tight_unequal == 0 and wide == 0
    assert verdict("5 (provable part)", ok,
                   f"{len(probe.excess)} excess loads, {tight_unequal} tight-instance inequalities, "
                   f"{wide} instances with |U| > k_p over {probe.checks} checks")


def test_criterion_6_baseline_optimality():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    wrong = []
    for k in range(100):
        inst = small_scored_instance(rng)
        authors = [a for a, _ in inst.papers]
        usw = assign_max_usw(inst)
        esw = maxmin_esw(inst).assignment
        if exact_value(inst.scores, inst, usw, "usw") != best_objective(
                inst.scores, authors, inst.n, inst.k_a, inst.k_p, "usw"):
            wrong.append(f"usw#{k}")
        if exact_value(inst.scores, inst, esw, "esw") != best_objective(
                inst.scores, authors, inst.n, inst.k_a, inst.k_p, "esw"):
            wrong.append(f"esw#{k}")
    elapsed = time.perf_counter() - start
    ok = not wrong and elapsed < 120
    assert verdict("6", ok, f"{200 - len(wrong)}/200 optima matched exactly in {elapsed:.1f}s"
                            + (f" (first misses: {wrong[:3]})" if wrong else ""))


def test_criterion_7_adversarial_fixture(n4):
    asg = Assignment.from_pairs([(0, (3, 0)), (1, (2, 0)), (2, (0, 0)), (3, (1, 0))])
    reps = {"exact": exact_audit(n4, asg), "heuristic": heuristic_audit(n4, asg)}
    ok = all(r.violated and not r.unbounded and abs(r.alpha_star - 3.0) <= ALPHA_TOL
             and r.largest_group == 2 for r in reps.values())
    detail = ", ".join(f"{k}: alpha={r.alpha:.4f} group={r.largest_group}" for k, r in reps.items())
    assert verdict("7", ok, detail)


def test_criterion_8_dominance_on_synthetic_conference():
    ds = load_similarity_csv(FIXTURES / "conference_scores.csv", FIXTURES / "conference_conflicts.csv")
    full = build_instance(ds, authorship_by_max_matching(ds), 3, 3)
    config = ex.ExperimentConfig(runs=5, subsample=20, base_seed=0, esw_probes=None)
    records = ex.run_experiment(full, config)
    broken = []
    for r in range(config.runs):
        got = {x.algorithm: x for x in records if x.run == r}
        tpms, pr4a, cobra = got["max-usw"], got["maxmin-esw"], got["cobra"]
        if not (tpms.usw >= pr4a.usw and tpms.usw >= cobra.usw):
            broken.append(f"usw run {r}")
        if not (pr4a.esw >= tpms.esw and pr4a.esw >= cobra.esw):
            broken.append(f"esw run {r}")
    row = {s.algorithm: s for s in ex.summarize(records)}["cobra"]
    ok = not broken and row.cv_pr_pct == 0.0 and f"{row.alpha_star_mean:.3f}" == "1.000"
    assert verdict("8", ok, f"dominance held in {config.runs - len({b.split()[-1] for b in broken})}"
                            f"/{config.runs} runs; cobra CV-Pr={row.cv_pr_pct:.0f}% "
                            f"alpha*={row.alpha_star_mean:.3f}")


# published ICLR 2018 results: per-paper mean USW and ESW
ICLR_TABLE = {"cobra": (0.166, 0.028), "max-usw": (0.184, 0.048), "maxmin-esw": (0.179, 0.082)}


def test_criterion_9_iclr_reproduction():
    root = os.environ.get(ICLR_ENV)
    if not root or not (Path(root) / "scores.csv").exists():
        verdict("9", None, f"no ICLR 2018 data (set {ICLR_ENV}); criteria 1-8 are the acceptance")
        pytest.skip(f"ICLR 2018 dataset not supplied; set {ICLR_ENV}")
    ds = load_similarity_csv(Path(root) / "scores.csv", Path(root) / "conflicts.csv")
    full = build_instance(ds, authorship_by_max_matching(ds), 3, 3)
    config = ex.ExperimentConfig(runs=100, subsample=100, base_seed=0)
    records = ex.run_experiment(full, config, jobs=os.cpu_count() or 1)
    rows = {s.algorithm: s for s in ex.summarize(records)}
    within = lambda got, want: abs(got - want) <= 0.15 * want  # noqa: E731
    welfare = all(within(rows[a].usw_mean / 100, u) and within(rows[a].esw_mean, e)
                  for a, (u, e) in ICLR_TABLE.items())
    ok = (rows["max-usw"].cv_pr_pct >= 80 and rows["maxmin-esw"].cv_pr_pct >= 90
          and rows["cobra"].cv_pr_pct == 0 and welfare)
    detail = "; ".join(f"{a}: USW/paper={r.usw_mean / 100:.3f} ESW={r.esw_mean:.3f} CV-Pr={r.cv_pr_pct:.0f}%"
                       for a, r in rows.items())
    assert verdict("9", ok, detail)


def test_criterion_10_scale():
    inst = random_scored_instance(np.random.default_rng(10), 500, 3, k_a=3)
    start = time.perf_counter()
    asg = run_cobra(inst)
    elapsed = time.perf_counter() - start
    ok = elapsed < 10 and validate_assignment(inst, asg) == []
    assert verdict("10", ok, f"n=500 k_a=k_p=3 assigned in {elapsed:.2f}s (limit 10s)")
