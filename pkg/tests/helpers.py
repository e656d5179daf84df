"""Instance generators and instrumentation shared by several test modules."""

from __future__ import annotations

import contextlib

import numpy as np

from cobra_review.cobra import PartialAssignment
from cobra_review.model import Instance, instance_from_scores
from cobra_review.synthetic import random_ranking_instance

from conftest import TRACE_RANKINGS


def trace_instance() -> Instance:
    rankings = {(a - 1, 0): tuple(r - 1 for r in ranking) for a, ranking in TRACE_RANKINGS.items()}
    return Instance(n=6, k_a=3, k_p=3, submissions=(1,) * 6, rankings=rankings)


def small_scored_instance(rng: np.random.Generator, max_papers: int = 8) -> Instance:
    """At most ``max_papers`` papers, k_p <= 2, two-decimal scores with some zeros."""
    k_p = int(rng.integers(1, 3))
    n = int(rng.integers(k_p + 1, 7))
    while True:
        subs = rng.integers(0, 3, size=n)
        if 1 <= subs.sum() <= max_papers:
            break
    k_a = max(int(subs.max()), 1) * k_p * int(rng.integers(1, 3))
    S = np.round(rng.random((n, int(subs.sum()))), 2)
    S[rng.random(S.shape) < 0.3] = 0.0
    return instance_from_scores(S, subs, k_a, k_p)


def fuzz_instance(rng: np.random.Generator) -> Instance:
    """n <= 30, k_p in {1,2,3}, k_a = m* k_p times 1 or 2, up to three papers each."""
    k_p = int(rng.integers(1, 4))
    n = int(rng.integers(k_p + 1, 31))
    max_papers = int(rng.integers(1, 4))
    subs = rng.integers(0, max_papers + 1, size=n)
    if not subs.any():
        subs[rng.integers(n)] = 1
    m_star = int(subs.max())
    k_a = m_star * k_p * int(rng.integers(1, 3))
    return random_ranking_instance(rng, n, k_p, k_a=k_a, submissions=subs)


def fuzz_set(count: int, seed: int = 0) -> list[Instance]:
    rng = np.random.default_rng(seed)
    return [fuzz_instance(rng) for _ in range(count)]


class BalanceProbe:
    """Independent review-balance check at every instrumented boundary.

    ``unequal`` collects ``(tight, message)`` for agents whose reviewing load
    differs from the reviews their papers hold, where ``tight`` records
    ``k_a == m_star * k_p``; ``excess`` collects loads above that count.
    """

    def __init__(self):
        self.checks = 0
        self.unequal: list[tuple[bool, str]] = []
        self.excess: list[str] = []

    def check(self, part: PartialAssignment, agents) -> None:
        if agents is None:
            agents = [i for i in range(part.inst.n) if part.incomplete[i]]
        for i in agents:
            if not part.incomplete[i]:
                continue
            reviewing = sum(1 for revs in part.reviewers.values() if i in revs)
            received = sum(len(revs) for (a, _), revs in part.reviewers.items() if a == i)
            self.checks += 1
            msg = f"agent {i}: reviews {reviewing}, receives {received}"
            if reviewing != received:
                self.unequal.append((part.k_a == part.inst.m_star * part.k_p, msg))
            if reviewing > received:
                self.excess.append(msg)


@contextlib.contextmanager
def balance_probe(monkeypatch):
    probe = BalanceProbe()
    original = PartialAssignment.check_review_balance

    def wrapped(self, agents=None):
        probe.check(self, agents)
        return original(self, agents)

    monkeypatch.setattr(PartialAssignment, "check_review_balance", wrapped)
    yield probe


# one line per acceptance criterion, echoed again in the terminal summary
VERDICTS: list[str] = []


def verdict(criterion: str, ok: bool | None, detail: str) -> bool:
    """Record a verdict line; ``ok=None`` marks a skipped criterion."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"criterion {criterion}: {status} {detail}"
    VERDICTS.append(line)
    print(line)
    return ok
