"""Random instances for fuzzing and a synthetic conference dataset generator."""

from __future__ import annotations

import numpy as np

from .ingest import RawDataset
from .model import Instance, instance_from_scores


def random_ranking_instance(
    rng: np.random.Generator,
    n: int,
    k_p: int,
    k_a: int | None = None,
    submissions=None,
    max_papers: int = 1,
) -> Instance:
    """Instance with uniformly random rankings and no scores.

    ``submissions`` defaults to uniform draws from ``0..max_papers``; ``k_a``
    defaults to ``m_star * k_p``.
    """
    if submissions is None:
        submissions = rng.integers(0, max_papers + 1, size=n)
    submissions = tuple(int(x) for x in submissions)
    if k_a is None:
        k_a = max(max(submissions, default=0), 1) * k_p
    rankings = {}
    for i in range(n):
        others = np.array([j for j in range(n) if j != i])
        for l in range(submissions[i]):
            rankings[(i, l)] = tuple(int(x) for x in rng.permutation(others))
    return Instance(n=n, k_a=k_a, k_p=k_p, submissions=submissions, rankings=rankings)


def random_scored_instance(
    rng: np.random.Generator,
    n: int,
    k_p: int,
    k_a: int | None = None,
    submissions=None,
    decimals: int | None = 4,
) -> Instance:
    """Single-paper (by default) instance with i.i.d. uniform scores."""
    if submissions is None:
        submissions = [1] * n
    m = sum(submissions)
    if k_a is None:
        k_a = max(max(submissions, default=0), 1) * k_p
    S = rng.random((n, m))
    if decimals is not None:
        S = np.round(S, decimals)
    return instance_from_scores(S, submissions, k_a, k_p)


def synthetic_conference(
    rng: np.random.Generator,
    n_reviewers: int,
    n_papers: int,
    topics: int = 10,
    concentration: float = 0.3,
    zero_fraction: float = 0.2,
    max_coauthors: int = 2,
    decimals: int = 4,
) -> RawDataset:
    """Similarity and conflict matrices with topical and heavy-tailed structure.

    Reviewers have topic profiles and a lognormal activity level; each paper
    is written by a distinct reviewer (plus up to ``max_coauthors`` conflicted
    co-authors) and leans toward its author's topics. Similarity is the
    topic overlap scaled by activity and multiplicative noise, with a
    fraction of entries zeroed, normalized to a maximum of 1.
    """
    if n_papers > n_reviewers:
        raise ValueError("need at least one distinct author per paper")
    expertise = rng.dirichlet(np.full(topics, concentration), size=n_reviewers)
    activity = rng.lognormal(0.0, 0.8, size=n_reviewers)
    authors = rng.permutation(n_reviewers)[:n_papers]
    mix = rng.dirichlet(np.full(topics, concentration), size=n_papers)
    paper_topics = 0.7 * expertise[authors] + 0.3 * mix

    unit = lambda M: M / np.linalg.norm(M, axis=1, keepdims=True)  # noqa: E731
    S = unit(expertise) @ unit(paper_topics).T
    S *= activity[:, None] * rng.lognormal(0.0, 0.6, size=S.shape)
    S[rng.random(S.shape) < zero_fraction] = 0.0
    S = np.round(S / S.max(), decimals)

    C = np.zeros(S.shape, dtype=bool)
    C[authors, np.arange(n_papers)] = True
    for p in range(n_papers):
        extra = rng.integers(0, max_coauthors + 1)
        C[rng.choice(n_reviewers, size=extra, replace=False), p] = True

    width = len(str(max(n_reviewers, n_papers)))
    return RawDataset(
        reviewer_ids=tuple(f"r{i:0{width}d}" for i in range(n_reviewers)),
        paper_ids=tuple(f"p{j:0{width}d}" for j in range(n_papers)),
        scores=S,
        conflicts=C,
    )
