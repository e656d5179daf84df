"""Dataset loading, authorship derivation, normalization and subsampling.

Similarity CSV: header ``reviewer_id,<paper_id>,...`` then one row per
reviewer with decimal scores. A conflicts CSV has the same shape with 0/1
cells. Authorship CSV: ``paper_id,author_reviewer_id``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import InputError, Instance, instance_from_scores

AUTHORSHIP_HEADER = ["paper_id", "author_reviewer_id"]


@dataclass(frozen=True)
class RawDataset:
    reviewer_ids: tuple[str, ...]
    paper_ids: tuple[str, ...]
    scores: np.ndarray  # reviewers x papers
    conflicts: np.ndarray | None = None  # bool, same shape

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape


def _read_matrix(path, what: str, parse) -> tuple[tuple[str, ...], tuple[str, ...], np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [(i, r) for i, r in enumerate(rows, start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: empty {what} file")
    line, header = rows[0]
    cols = [c.strip() for c in header[1:]]
    if not cols:
        raise InputError(f"{path}:{line}: header lists no paper ids")
    _check_unique(cols, f"{path}:{line}: duplicate paper id")
    ids, data = [], []
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} cells, found {len(row)}")
        rid = row[0].strip()
        if rid in ids:
            raise InputError(f"{path}:{line}: duplicate reviewer id {rid!r}")
        ids.append(rid)
        vals = []
        for pid, cell in zip(cols, row[1:]):
            try:
                vals.append(parse(cell.strip()))
            except ValueError as e:
                raise InputError(f"{path}:{line}: reviewer {rid!r}, paper {pid!r}: {e}") from None
        data.append(vals)
    if not ids:
        raise InputError(f"{path}: no reviewer rows")
    return tuple(ids), tuple(cols), np.array(data, dtype=float)


def _check_unique(ids, msg):
    seen = set()
    for x in ids:
        if x in seen:
            raise InputError(f"{msg} {x!r}")
        seen.add(x)


def _score(cell: str) -> float:
    v = float(cell)
    if not math.isfinite(v):
        raise ValueError(f"score {cell!r} is not finite")
    if v < 0:
        raise ValueError(f"score {cell!r} is negative")
    return v


def _flag(cell: str) -> float:
    if cell not in ("0", "1"):
        raise ValueError(f"conflict cell {cell!r} is not 0 or 1")
    return float(cell)


def load_similarity_csv(path, conflicts_path=None) -> RawDataset:
    """Parse a similarity CSV and, optionally, a matching conflicts CSV."""
    rids, pids, S = _read_matrix(path, "similarity", _score)
    C = None
    if conflicts_path is not None:
        crids, cpids, C = _read_matrix(conflicts_path, "conflicts", _flag)
        if crids != rids or cpids != pids:
            raise InputError(f"{conflicts_path}: reviewer/paper ids differ from {path}")
        C = C.astype(bool)
    return RawDataset(rids, pids, S, C)


def authorship_by_max_matching(ds: RawDataset) -> dict[str, str]:
    """Maximum-cardinality matching of papers to conflicted reviewers.

    Returns ``{paper_id: reviewer_id}``; unmatched papers are absent.
    """
    if ds.conflicts is None:
        raise InputError("authorship by matching needs a conflicts matrix")
    # rows are papers so the result maps each paper to its matched reviewer
    graph = csr_matrix(ds.conflicts.T.astype(np.int8))
    match = maximum_bipartite_matching(graph, perm_type="column")
    return {ds.paper_ids[p]: ds.reviewer_ids[r] for p, r in enumerate(match) if r >= 0}


def authorship_by_greedy(ds: RawDataset) -> dict[str, str]:
    """Papers in file order take their highest-score reviewer if still free.

    Ties go to the lowest reviewer index; a paper whose best reviewer is taken
    is dropped.
    """
    taken: set[int] = set()
    out = {}
    for p, pid in enumerate(ds.paper_ids):
        best = int(np.argmax(ds.scores[:, p]))
        if best in taken:
            continue
        taken.add(best)
        out[pid] = ds.reviewer_ids[best]
    return out


def normalize_scores(ds: RawDataset) -> RawDataset:
    """Divide every score by the global maximum."""
    top = float(np.max(ds.scores, initial=0.0))
    if top <= 0:
        raise InputError("cannot normalize an all-zero similarity matrix")
    return replace(ds, scores=ds.scores / top)


def read_authorship_csv(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != AUTHORSHIP_HEADER:
        raise InputError(f"{path}:1: header must be {','.join(AUTHORSHIP_HEADER)}")
    out = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise InputError(f"{path}:{line}: expected 2 cells, found {len(row)}")
        pid, rid = row[0].strip(), row[1].strip()
        if pid in out:
            raise InputError(f"{path}:{line}: duplicate paper id {pid!r}")
        out[pid] = rid
    return out


def write_authorship_csv(path, authorship: dict[str, str]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AUTHORSHIP_HEADER)
        for pid, rid in authorship.items():
            w.writerow([pid, rid])


def build_instance(ds: RawDataset, authorship: dict[str, str], k_a: int, k_p: int) -> Instance:
    """Single-paper instance over the authoring reviewers.

    Agents are the authors in paper file order; reviewers who author nothing
    are dropped. Each author may hold at most one paper.
    """
    rindex = {r: i for i, r in enumerate(ds.reviewer_ids)}
    pindex = {p: j for j, p in enumerate(ds.paper_ids)}
    pairs = []
    seen = set()
    for pid in ds.paper_ids:
        if pid not in authorship:
            continue
        rid = authorship[pid]
        if rid not in rindex:
            raise InputError(f"paper {pid!r}: unknown author reviewer {rid!r}")
        if rid in seen:
            raise InputError(f"reviewer {rid!r} authors more than one paper")
        seen.add(rid)
        pairs.append((pindex[pid], rindex[rid]))
    for pid in authorship:
        if pid not in pindex:
            raise InputError(f"authorship lists unknown paper {pid!r}")
    cols = [p for p, _ in pairs]
    rows = [r for _, r in pairs]
    S = ds.scores[np.ix_(rows, cols)]
    return instance_from_scores(
        S, [1] * len(pairs), k_a, k_p,
        agent_ids=[ds.reviewer_ids[r] for r in rows],
        paper_labels={(i, 0): ds.paper_ids[p] for i, p in enumerate(cols)},
    )


def subsample_instance(full: Instance, size: int, seed: int) -> Instance:
    """Keep ``size`` authored papers drawn uniformly without replacement.

    The sampled papers' authors form the new agent set (in their original
    order); rankings are rederived from the scores.
    """
    if any(m > 1 for m in full.submissions):
        raise InputError("subsampling needs single-paper agents")
    authors = [i for i in range(full.n) if full.submissions[i] == 1]
    if not 0 < size <= len(authors):
        raise InputError(f"subsample size {size} must be in 1..{len(authors)}")
    if full.scores is None:
        raise InputError("subsampling needs similarity scores")
    rng = np.random.default_rng(seed)
    picked = sorted(int(a) for a in rng.choice(authors, size=size, replace=False))
    cols = [full.paper_index[(a, 0)] for a in picked]
    S = full.scores[np.ix_(picked, cols)]
    return instance_from_scores(
        S, [1] * size, full.k_a, full.k_p,
        agent_ids=[full.agent_label(a) for a in picked],
        paper_labels={(i, 0): full.paper_label((a, 0)) for i, a in enumerate(picked)},
    )
