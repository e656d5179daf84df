"""Problem and solution data model for reviewer assignment.

Agents are indexed ``0..n-1``. A paper is identified by ``(author, l)`` where
``l`` is the author's 0-based submission index; dummy papers added by
:func:`pad_to_uniform` get ``l >= m_i``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

PaperId = tuple[int, int]


class InputError(ValueError):
    """Malformed or inconsistent user input."""


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class Instance:
    """A peer review instance.

    ``rankings[(i, l)]`` lists every agent except ``i`` from most to least
    preferred reviewer of paper ``(i, l)``. ``scores``, when present, has shape
    ``(n, len(papers))`` with columns aligned to :attr:`papers`; the author's own
    entry is ignored.
    """

    n: int
    k_a: int
    k_p: int
    submissions: tuple[int, ...]
    rankings: Mapping[PaperId, tuple[int, ...]]
    scores: np.ndarray | None = None
    agent_ids: tuple[str, ...] | None = None
    paper_labels: Mapping[PaperId, str] | None = None

    @cached_property
    def papers(self) -> list[PaperId]:
        return [(i, l) for i in range(self.n) for l in range(self.submissions[i])]

    @cached_property
    def paper_index(self) -> dict[PaperId, int]:
        return {p: c for c, p in enumerate(self.papers)}

    @property
    def m(self) -> int:
        return sum(self.submissions)

    @property
    def m_star(self) -> int:
        return max(self.submissions, default=0)

    def agent_label(self, i: int) -> str:
        return self.agent_ids[i] if self.agent_ids is not None else str(i + 1)

    def paper_label(self, p: PaperId) -> str:
        if self.paper_labels is not None and p in self.paper_labels:
            return self.paper_labels[p]
        author, l = p
        if self.submissions[author] <= 1 and l == 0:
            return f"p{self.agent_label(author)}"
        return f"p{self.agent_label(author)}.{l + 1}"

    def score(self, reviewer: int, paper: PaperId) -> float:
        if self.scores is None:
            raise InputError("instance has no similarity scores")
        return float(self.scores[reviewer, self.paper_index[paper]])


@dataclass(frozen=True)
class PaddedInstance(Instance):
    """An instance where every agent has exactly ``m_star`` submissions."""

    dummies: frozenset[PaperId] = field(default_factory=frozenset)
    source: Instance | None = None

    def is_dummy(self, p: PaperId) -> bool:
        return p in self.dummies


@dataclass(frozen=True)
class Assignment:
    """A set of ``(reviewer, paper)`` pairs with per-reviewer and per-paper views."""

    pairs: frozenset[tuple[int, PaperId]]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, PaperId]]) -> "Assignment":
        return cls(frozenset((int(i), (int(p[0]), int(p[1]))) for i, p in pairs))

    @cached_property
    def _by_reviewer(self) -> dict[int, frozenset[PaperId]]:
        out: dict[int, set[PaperId]] = defaultdict(set)
        for i, p in self.pairs:
            out[i].add(p)
        return {i: frozenset(ps) for i, ps in out.items()}

    @cached_property
    def _by_paper(self) -> dict[PaperId, frozenset[int]]:
        out: dict[PaperId, set[int]] = defaultdict(set)
        for i, p in self.pairs:
            out[p].add(i)
        return {p: frozenset(rs) for p, rs in out.items()}

    def papers_of(self, reviewer: int) -> frozenset[PaperId]:
        return self._by_reviewer.get(reviewer, frozenset())

    def reviewers_of(self, paper: PaperId) -> frozenset[int]:
        return self._by_paper.get(paper, frozenset())

    def load(self, reviewer: int) -> int:
        return len(self.papers_of(reviewer))

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair: object) -> bool:
        return pair in self.pairs

    def sorted_pairs(self) -> list[tuple[int, PaperId]]:
        return sorted(self.pairs, key=lambda t: (t[1], t[0]))


def validate_instance(inst: Instance) -> list[Violation]:
    """Return every violated instance invariant; an empty list means valid."""
    out: list[Violation] = []
    if inst.n < 1:
        out.append(Violation("agents", f"n = {inst.n} < 1"))
    if inst.k_a < 1:
        out.append(Violation("k_a", f"k_a = {inst.k_a} must be a positive integer"))
    if inst.k_p < 1:
        out.append(Violation("k_p", f"k_p = {inst.k_p} must be a positive integer"))
    if len(inst.submissions) != inst.n:
        out.append(Violation("submissions", f"{len(inst.submissions)} submission counts for n = {inst.n}"))
        return out
    for i, m_i in enumerate(inst.submissions):
        if m_i < 0:
            out.append(Violation("submissions", f"agent {i} has m_i = {m_i} < 0"))
        elif m_i * inst.k_p > inst.k_a:
            out.append(Violation(
                "capacity", f"agent {i} has m_i * k_p = {m_i * inst.k_p} > k_a = {inst.k_a}"))
    if inst.n < inst.k_p + 1:
        out.append(Violation("agents", f"n = {inst.n} < k_p + 1 = {inst.k_p + 1}"))

    expected = set(inst.papers)
    for p in sorted(set(inst.rankings) - expected):
        out.append(Violation("ranking", f"ranking given for unknown paper {p}"))
    for p in inst.papers:
        sigma = inst.rankings.get(p)
        if sigma is None:
            out.append(Violation("ranking", f"paper {p} has no ranking"))
            continue
        others = set(range(inst.n)) - {p[0]}
        if len(sigma) != len(others) or set(sigma) != others:
            out.append(Violation("ranking", f"ranking of paper {p} is not a permutation of N minus its author"))

    if inst.scores is not None:
        s = np.asarray(inst.scores)
        if s.shape != (inst.n, len(inst.papers)):
            out.append(Violation("scores", f"score matrix shape {s.shape} != {(inst.n, len(inst.papers))}"))
        else:
            mask = np.ones(s.shape, dtype=bool)
            for c, (author, _) in enumerate(inst.papers):
                mask[author, c] = False
            bad = ~np.isfinite(s) | (s < 0)
            for i, c in zip(*np.nonzero(bad & mask)):
                out.append(Violation("scores", f"score of reviewer {i} for paper {inst.papers[c]} is {s[i, c]}"))
    return out


def rankings_from_scores(scores: np.ndarray, authors: Sequence[int]) -> list[tuple[int, ...]]:
    """Rank reviewers per paper column by descending score, ties by ascending index.

    ``scores`` has one row per reviewer and one column per paper; ``authors[c]``
    is the author of column ``c`` and is left out of that column's ranking.
    """
    scores = np.asarray(scores, dtype=float)
    n = scores.shape[0]
    out = []
    for c, author in enumerate(authors):
        col = scores[:, c]
        reviewers = np.array([i for i in range(n) if i != author], dtype=int)
        vals = col[reviewers]
        missing = ~np.isfinite(vals)
        if missing.any():
            i = int(reviewers[np.argmax(missing)])
            raise InputError(f"missing score for reviewer {i}, paper column {c}")
        order = np.lexsort((reviewers, -vals))
        out.append(tuple(int(x) for x in reviewers[order]))
    return out


def instance_from_scores(
    scores: np.ndarray,
    submissions: Sequence[int],
    k_a: int,
    k_p: int,
    agent_ids: Sequence[str] | None = None,
    paper_labels: Mapping[PaperId, str] | None = None,
) -> Instance:
    """Build an instance whose rankings are derived from a score matrix.

    Columns of ``scores`` must follow the canonical paper order
    ``(0, 0), (0, 1), ..., (1, 0), ...``.
    """
    submissions = tuple(int(x) for x in submissions)
    papers = [(i, l) for i in range(len(submissions)) for l in range(submissions[i])]
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(submissions), len(papers)):
        raise InputError(f"score matrix shape {scores.shape} does not match {len(submissions)} agents "
                         f"and {len(papers)} papers")
    ranks = rankings_from_scores(scores, [a for a, _ in papers])
    return Instance(
        n=len(submissions),
        k_a=k_a,
        k_p=k_p,
        submissions=submissions,
        rankings=dict(zip(papers, ranks)),
        scores=scores,
        agent_ids=tuple(agent_ids) if agent_ids is not None else None,
        paper_labels=dict(paper_labels) if paper_labels is not None else None,
    )


def pad_to_uniform(inst: Instance) -> PaddedInstance:
    """Give every agent ``m_star`` submissions by adding dummy papers.

    Dummy rankings list the other agents in ascending index order.
    """
    m_star = inst.m_star
    rankings = dict(inst.rankings)
    dummies = set()
    for i in range(inst.n):
        for l in range(inst.submissions[i], m_star):
            rankings[(i, l)] = tuple(j for j in range(inst.n) if j != i)
            dummies.add((i, l))
    labels = {p: inst.paper_label(p) for p in inst.papers}
    for i, l in dummies:
        labels[(i, l)] = f"dummy{inst.agent_label(i)}.{l + 1}"
    return PaddedInstance(
        n=inst.n,
        k_a=inst.k_a,
        k_p=inst.k_p,
        submissions=(m_star,) * inst.n,
        rankings=rankings,
        scores=None,
        agent_ids=inst.agent_ids,
        paper_labels=labels,
        dummies=frozenset(dummies),
        source=inst,
    )


def strip_dummies(padded: PaddedInstance, asg: Assignment) -> Assignment:
    if not padded.dummies:
        return asg
    return Assignment(frozenset(pr for pr in asg.pairs if pr[1] not in padded.dummies))


def validate_assignment(inst: Instance, asg: Assignment) -> list[Violation]:
    """Check the three validity conditions; an empty list means valid."""
    papers = set(inst.papers)
    for i, p in asg.pairs:
        if not 0 <= i < inst.n:
            raise InputError(f"unknown reviewer {i}")
        if p not in papers:
            raise InputError(f"unknown paper {p}")
    out: list[Violation] = []
    for p in inst.papers:
        got = len(asg.reviewers_of(p))
        if got != inst.k_p:
            out.append(Violation("coverage", f"paper {inst.paper_label(p)} has {got} reviewers, needs {inst.k_p}"))
    for i in range(inst.n):
        if asg.load(i) > inst.k_a:
            out.append(Violation("load", f"agent {inst.agent_label(i)} reviews {asg.load(i)} > k_a = {inst.k_a}"))
    for i, p in asg.sorted_pairs():
        if p[0] == i:
            out.append(Violation("self-review", f"agent {inst.agent_label(i)} reviews own paper {inst.paper_label(p)}"))
    return out


@dataclass(frozen=True)
class Utilities:
    paper_scores: dict[PaperId, float]
    agent_utilities: tuple[float, ...]
    usw: float
    esw: float


def compute_utilities(inst: Instance, asg: Assignment) -> Utilities:
    """Additive paper scores, agent utilities and the two welfare measures."""
    if inst.scores is None:
        raise InputError("instance has no similarity scores")
    paper_scores: dict[PaperId, float] = {}
    for p in inst.papers:
        c = inst.paper_index[p]
        vals = [float(inst.scores[i, c]) for i in sorted(asg.reviewers_of(p))]
        if not all(math.isfinite(v) for v in vals):
            raise InputError(f"missing score on paper {inst.paper_label(p)}")
        paper_scores[p] = math.fsum(vals)
    per_agent = [0.0] * inst.n
    for i in range(inst.n):
        per_agent[i] = math.fsum(paper_scores[(i, l)] for l in range(inst.submissions[i]))
    values = list(paper_scores.values())
    return Utilities(
        paper_scores=paper_scores,
        agent_utilities=tuple(per_agent),
        usw=math.fsum(values),
        esw=min(values, default=0.0),
    )
