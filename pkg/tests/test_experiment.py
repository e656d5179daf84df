import math
import statistics

import pytest

from cobra_review import experiment as ex
from cobra_review.ingest import authorship_by_max_matching, build_instance, load_similarity_csv
from cobra_review.model import InputError

from conftest import FIXTURES


def rec(alg, usw=1.0, esw=0.5, violated=False, unbounded=False, alpha=1.0, group=0, run=0):
    return ex.RunRecord(run=run, seed=run, algorithm=alg, n=10, usw=usw, esw=esw, violated=violated,
                        unbounded=unbounded, alpha=alpha, largest_group=group, exactness="exact")


@pytest.fixture(scope="module")
def conference():
    ds = load_similarity_csv(FIXTURES / "conference_scores.csv", FIXTURES / "conference_conflicts.csv")
    return build_instance(ds, authorship_by_max_matching(ds), 3, 3)


def test_summary_folds():
    records = [
        rec("a", usw=1.0, violated=True, alpha=1.5, group=4, run=0),
        rec("a", usw=2.0, violated=True, unbounded=True, alpha=math.inf, group=6, run=1),
        rec("a", usw=3.0, run=2),
        rec("b", usw=5.0, run=0),
    ]
    a, b = ex.summarize(records)
    assert a.algorithm == "a" and a.runs == 3
    assert a.usw_mean == 2.0 and a.usw_se == statistics.stdev([1, 2, 3]) / math.sqrt(3)
    assert a.cv_pr_pct == pytest.approx(200 / 3)
    assert a.unb_alpha_pct == pytest.approx(100 / 3)
    # bounded runs only, the unviolated one counting as 1
    assert a.alpha_star_mean == 1.25
    assert a.largest_group_mean == 5.0
    assert b.runs == 1 and b.usw_se == 0.0
    assert math.isnan(b.largest_group_mean) and b.cv_pr_pct == 0.0 and b.alpha_star_mean == 1.0


def test_runs_csv_round_trip(tmp_path):
    records = [rec("cobra", usw=0.1 + 0.2), rec("max-usw", violated=True, unbounded=True, alpha=math.inf, group=3)]
    path = tmp_path / "runs.csv"
    ex.write_runs_csv(path, records)
    assert path.read_text().splitlines()[0] == ",".join(ex.RUN_FIELDS)
    assert ex.read_runs_csv(path) == records


def test_runs_csv_rejects_other_headers(tmp_path):
    path = tmp_path / "runs.csv"
    path.write_text("run,seed\n0,0\n")
    with pytest.raises(InputError):
        ex.read_runs_csv(path)


def test_summary_csv_and_table(tmp_path):
    rows = ex.summarize([rec("cobra"), rec("cobra", run=1, usw=2.0)])
    path = tmp_path / "summary.csv"
    ex.write_summary_csv(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(ex.SUMMARY_FIELDS)
    assert lines[1].startswith("cobra,2,1.5,0.5,")
    table = ex.format_summary(rows)
    assert "standard error" in table and "1.500 ± 0.500" in table


@pytest.mark.parametrize("kwargs", [dict(runs=0), dict(subsample=3), dict(algorithms=("nope",)),
                                    dict(audit_mode="nope")])
def test_config_checks(kwargs):
    with pytest.raises(InputError):
        ex.ExperimentConfig(**kwargs).check(3)


def test_experiment_is_deterministic_and_parallel_safe(conference):
    config = ex.ExperimentConfig(runs=3, subsample=12, base_seed=5, audit_mode="exact")
    serial = ex.run_experiment(conference, config)
    assert [(r.run, r.seed, r.algorithm) for r in serial[:3]] == [
        (0, 5, "cobra"), (0, 5, "max-usw"), (0, 5, "maxmin-esw")]
    assert ex.run_experiment(conference, config, jobs=2) == serial
    assert ex.run_experiment(conference, config) == serial


def test_dominance_and_core_per_run(conference):
    config = ex.ExperimentConfig(runs=3, subsample=20, base_seed=0, esw_probes=None)
    records = ex.run_experiment(conference, config)
    for r in range(3):
        got = {x.algorithm: x for x in records if x.run == r}
        assert got["max-usw"].usw >= got["cobra"].usw
        assert got["max-usw"].usw >= got["maxmin-esw"].usw
        assert got["maxmin-esw"].esw >= max(got["cobra"].esw, got["max-usw"].esw)
        assert not got["cobra"].violated and got["cobra"].alpha == 1.0


def test_failing_run_reports_its_seed(conference):
    config = ex.ExperimentConfig(algorithms=("max-usw",), runs=1, subsample=30, base_seed=11,
                                 audit_mode="exact", exact_max_n=2)
    with pytest.raises(ex.ExperimentError, match="seed 11"):
        ex.run_experiment(conference, config)


def test_unknown_names():
    with pytest.raises(InputError):
        ex.assign(None, "nope")
    with pytest.raises(InputError):
        ex.audit(None, None, "nope")
