"""Independent reference implementations used as test oracles.

Nothing here imports the algorithms under test; values are computed with
exact rationals where scores are involved.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np


def exact_scores(S) -> list[list[Fraction]]:
    """Rationals for a score matrix whose entries have a short decimal form."""
    return [[Fraction(repr(float(v))) for v in row] for row in np.asarray(S)]


def classic_ttc(prefs: dict[int, list[int]]) -> tuple[set[tuple[int, int]], set[int]]:
    """Shapley-Scarf top trading cycles.

    Agent ``i`` owns house ``i`` and ranks the other houses by ``prefs[i]``,
    with its own house appended last. Returns the ``(owner of house, agent)``
    pairs for agents that traded, and the agents left with their own house.
    """
    active = set(prefs)
    traded = set()
    kept = set()
    while active:
        point = {}
        for i in active:
            full = [h for h in prefs[i] if h in active] + [i]
            point[i] = full[0]
        # walk from the smallest agent until a node repeats
        seen = []
        v = min(active)
        while v not in seen:
            seen.append(v)
            v = point[v]
        cycle = seen[seen.index(v):]
        for i in cycle:
            if point[i] == i:
                kept.add(i)
            else:
                traded.add((point[i], i))
        active -= set(cycle)
    return traded, kept


def best_objective(S, authors, n, k_a, k_p, objective):
    """Optimal USW or ESW over every valid assignment, as a Fraction.

    ``S[r][c]`` is reviewer ``r``'s score for paper column ``c`` written by
    ``authors[c]``. A dynamic program over reviewer load vectors visits every
    assignment implicitly, so it is exhaustive.
    """
    F = exact_scores(S)
    # integer arithmetic on a common denominator keeps the search fast
    denom = math.lcm(*(x.denominator for row in F for x in row))
    V = [[int(x * denom) for x in row] for row in F]
    m = len(authors)
    combos = [
        [(c, sum(V[r][col] for r in c))
         for c in itertools.combinations([r for r in range(n) if r != authors[col]], k_p)]
        for col in range(m)
    ]

    @lru_cache(maxsize=None)
    def go(col, loads):
        if col == m:
            return 0 if objective == "usw" else None
        best = None
        for c, v in combos[col]:
            if any(loads[r] >= k_a for r in c):
                continue
            nl = list(loads)
            for r in c:
                nl[r] += 1
            rest = go(col + 1, tuple(nl))
            if objective == "usw":
                if rest is None:
                    continue
                val = v + rest
            else:
                if rest is False:
                    continue
                val = v if rest is None else min(v, rest)
            if best is None or val > best:
                best = val
        if best is None:
            return None if objective == "usw" else False
        return best

    out = go(0, (0,) * n)
    if out is None or out is False:
        raise ValueError("no valid assignment")
    return Fraction(out, denom)


def exact_value(S, inst, asg, objective):
    F = exact_scores(S)
    vals = [sum((F[r][c] for r in asg.reviewers_of(p)), Fraction(0)) for c, p in enumerate(inst.papers)]
    return sum(vals, Fraction(0)) if objective == "usw" else min(vals)


def brute_core(S, asg_reviewers, k_a, k_p):
    """Exhaustive core check for single-paper agents.

    ``S[r][j]`` is reviewer ``r``'s score for agent ``j``'s paper and
    ``asg_reviewers[j]`` the current reviewers of that paper. Returns
    ``(violated, best_factor, largest_group)`` where ``best_factor`` is the
    largest min-over-members improvement ratio of any deviation (``inf`` when
    a zero-utility member can gain, and every member can).
    """
    F = exact_scores(S)
    n = len(F)
    u = [sum((F[r][j] for r in asg_reviewers[j]), Fraction(0)) for j in range(n)]
    best = None
    largest = 0

    def ratio(v, j):
        return float("inf") if u[j] == 0 else v / u[j]

    for size in range(k_p + 1, n + 1):
        for S_ in itertools.combinations(range(n), size):
            opts = []
            for j in S_:
                o = []
                for c in itertools.combinations([r for r in S_ if r != j], k_p):
                    v = sum((F[r][j] for r in c), Fraction(0))
                    if v > u[j]:
                        o.append((c, ratio(v, j)))
                if not o:
                    break
                opts.append(o)
            else:
                found = _max_min(opts, S_, k_a)
                if found is not None:
                    largest = max(largest, size)
                    if best is None or found > best:
                        best = found
    return best is not None, best, largest


def _max_min(opts, members, k_a):
    best = None
    load = {r: 0 for r in members}

    def rec(pos, cur):
        nonlocal best
        if best is not None and cur <= best:
            return
        if pos == len(opts):
            best = cur
            return
        for c, f in opts[pos]:
            if all(load[r] < k_a for r in c):
                for r in c:
                    load[r] += 1
                rec(pos + 1, min(cur, f))
                for r in c:
                    load[r] -= 1

    rec(0, float("inf"))
    return best


def max_matching_size(edges: set[tuple[int, int]]) -> int:
    """Largest matching by trying every edge subset (tiny graphs only)."""
    edges = sorted(edges)
    top = min(len({a for a, _ in edges}), len({b for _, b in edges}))
    for k in range(top, 0, -1):
        for sub in itertools.combinations(edges, k):
            if len({a for a, _ in sub}) == k and len({b for _, b in sub}) == k:
                return k
    return 0
