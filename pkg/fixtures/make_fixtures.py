"""Regenerate the CSV fixtures in this directory (deterministic)."""

from pathlib import Path

import numpy as np

from cobra_review.ingest import RawDataset, write_authorship_csv
from cobra_review.synthetic import synthetic_conference

HERE = Path(__file__).parent

# reviewer preference per paper, best first; paper i is written by agent i
TRACE_RANKINGS = {
    1: [2, 3, 4, 5, 6],
    2: [3, 1, 5, 4, 6],
    3: [1, 2, 5, 4, 6],
    4: [1, 3, 5, 2, 6],
    5: [6, 4, 1, 2, 3],
    6: [2, 1, 3, 4, 5],
}

# (reviewer, paper author) -> score; everything else is 0
N3_SCORES = {(1, 2): 0.9, (1, 3): 0.1, (2, 1): 0.8, (2, 3): 0.5, (3, 1): 0.2, (3, 2): 0.4}
N4_SCORES = {(1, 4): 1.0, (2, 3): 1.0, (3, 1): 0.2, (4, 2): 0.3, (2, 1): 0.9, (1, 2): 0.9}
N4_ASSIGNMENT = [(4, 1), (3, 2), (1, 3), (2, 4)]  # (paper author, reviewer)


def write_matrix(path, rows, cols, M, fmt=str):
    with open(path, "w") as fh:
        fh.write(",".join(["reviewer_id", *cols]) + "\n")
        for r, vals in zip(rows, M):
            fh.write(",".join([r, *(fmt(v) for v in vals)]) + "\n")


def small(name, n, scores):
    ids = [str(i) for i in range(1, n + 1)]
    papers = [f"p{i}" for i in ids]
    S = np.zeros((n, n))
    for (r, a), v in scores.items():
        S[r - 1, a - 1] = v
    write_matrix(HERE / f"{name}_scores.csv", ids, papers, S, fmt=lambda v: f"{v:g}")
    write_matrix(HERE / f"{name}_conflicts.csv", ids, papers, np.eye(n, dtype=int))
    write_authorship_csv(HERE / f"{name}_authorship.csv", dict(zip(papers, ids)))


def main():
    trace_example = {}
    for a, ranking in TRACE_RANKINGS.items():
        for pos, r in enumerate(ranking):
            trace_example[(r, a)] = (5 - pos) / 5
    small("trace_example", 6, trace_example)
    small("n3", 3, N3_SCORES)
    small("n4", 4, N4_SCORES)
    with open(HERE / "n4_assignment.csv", "w") as fh:
        fh.write("paper_id,reviewer_id\n")
        for a, r in N4_ASSIGNMENT:
            fh.write(f"p{a},{r}\n")

    ds: RawDataset = synthetic_conference(np.random.default_rng(2024), n_reviewers=160, n_papers=120)
    write_matrix(HERE / "conference_scores.csv", ds.reviewer_ids, ds.paper_ids, ds.scores, fmt=lambda v: f"{v:g}")
    write_matrix(HERE / "conference_conflicts.csv", ds.reviewer_ids, ds.paper_ids, ds.conflicts.astype(int))


if __name__ == "__main__":
    main()
