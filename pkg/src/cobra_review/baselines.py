"""Score-driven baseline assigners.

``assign_max_usw`` maximizes total paper score (TPMS-style). It is a
capacitated bipartite b-matching; its constraint matrix is totally unimodular,
so the HiGHS solve is integral at the root.

``assign_maxmin_esw`` maximizes the minimum paper score (PR4A-style first
level), then total score among those optima. A local search on the lowest
paper score supplies incumbents; feasibility MILPs at a threshold ``tau``
just above the incumbent either improve it or prove it optimal. This is a
surrogate for PR4A's full leximin rule. Threshold MILPs get slow beyond a few
dozen papers, so callers at that scale can cap the probe count and accept a
certified-or-not lower bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .model import Assignment, InputError, Instance, validate_instance

log = logging.getLogger(__name__)

# HiGHS accepts MIP points violating constraints by up to 1e-6 (absolute), so
# a probe must sit two resolutions above the incumbent to be decisive.
SOLVER_RESOLUTION = 1e-6


class InfeasibleError(RuntimeError):
    """No valid assignment exists; unreachable for valid instances."""


@dataclass
class _Program:
    rev: np.ndarray  # reviewer of each variable
    col: np.ndarray  # paper column of each variable
    w: np.ndarray
    a_paper: sparse.csr_matrix
    a_reviewer: sparse.csr_matrix
    a_score: sparse.csr_matrix


def _program(inst: Instance) -> _Program:
    problems = validate_instance(inst)
    if problems:
        raise InputError("invalid instance: " + "; ".join(map(str, problems)))
    if inst.scores is None:
        raise InputError("baselines need similarity scores")
    authors = np.array([a for a, _ in inst.papers], dtype=int)
    m = len(authors)
    rev, col = np.meshgrid(np.arange(inst.n), np.arange(m), indexing="ij")
    keep = rev != authors[None, :]
    rev, col = rev[keep], col[keep]
    w = np.asarray(inst.scores, dtype=float)[rev, col]
    nv = len(w)
    idx = np.arange(nv)
    return _Program(
        rev=rev,
        col=col,
        w=w,
        a_paper=sparse.csr_matrix((np.ones(nv), (col, idx)), shape=(m, nv)),
        a_reviewer=sparse.csr_matrix((np.ones(nv), (rev, idx)), shape=(inst.n, nv)),
        a_score=sparse.csr_matrix((w, (col, idx)), shape=(m, nv)),
    )


def _solve(inst: Instance, prog: _Program, tau: float | None, limits: dict,
           objective: bool = True):
    """Solve the assignment program; with ``objective=False`` any feasible point will do."""
    m = prog.a_paper.shape[0]
    blocks = [prog.a_paper, prog.a_reviewer]
    lb = [np.full(m, inst.k_p), np.zeros(inst.n)]
    ub = [np.full(m, inst.k_p), np.full(inst.n, inst.k_a)]
    if tau is not None:
        blocks.append(prog.a_score)
        lb.append(np.full(m, tau))
        ub.append(np.full(m, np.inf))
    res = milp(
        -prog.w if objective else np.zeros(len(prog.w)),
        constraints=LinearConstraint(sparse.vstack(blocks).tocsr(), np.concatenate(lb), np.concatenate(ub)),
        integrality=np.ones(len(prog.w)),
        bounds=Bounds(0, 1),
        options=dict(limits),
    )
    if res.x is None:
        return None, res.status
    return np.round(res.x).astype(bool), res.status


def _to_assignment(inst: Instance, prog: _Program, x: np.ndarray) -> Assignment:
    return Assignment(frozenset(
        (int(i), inst.papers[int(c)]) for i, c in zip(prog.rev[x], prog.col[x])))


def _paper_scores(inst: Instance, prog: _Program, x: np.ndarray) -> list[float]:
    per = [[] for _ in inst.papers]
    for v, c in zip(prog.w[x], prog.col[x]):
        per[c].append(float(v))
    return [math.fsum(sorted(vals)) for vals in per]


def assign_max_usw(inst: Instance) -> Assignment:
    """Valid assignment with the largest total similarity."""
    prog = _program(inst)
    if not inst.papers:
        return Assignment(frozenset())
    x, status = _solve(inst, prog, None, {})
    if x is None:
        raise InfeasibleError(f"max-USW program infeasible (status {status})")
    return _to_assignment(inst, prog, x)


@dataclass(frozen=True)
class MaxMinResult:
    assignment: Assignment
    esw: float
    upper_bound: float
    certified: bool
    usw_optimal: bool = True


class _BottleneckSearch:
    """Assignment state for local search on the lowest paper score.

    ``W[r, c]`` is reviewer ``r``'s score for paper column ``c`` (``-inf`` for
    the author). Paper values are running sums; callers rescore the result.
    """

    def __init__(self, inst: Instance, prog: _Program, x: np.ndarray):
        n, m = inst.n, prog.a_paper.shape[0]
        self.n, self.m, self.k_a = n, m, inst.k_a
        self.W = np.full((n, m), -np.inf)
        self.W[prog.rev, prog.col] = prog.w
        self.rev = [set() for _ in range(m)]
        self.papers = [set() for _ in range(n)]
        for r, c in zip(prog.rev[x], prog.col[x]):
            self.rev[c].add(int(r))
            self.papers[r].add(int(c))
        self.val = np.array([math.fsum(self.W[r, c] for r in self.rev[c]) for c in range(m)])

    def copy(self) -> "_BottleneckSearch":
        new = object.__new__(_BottleneckSearch)
        new.__dict__.update(self.__dict__)
        new.rev = [set(x) for x in self.rev]
        new.papers = [set(x) for x in self.papers]
        new.val = self.val.copy()
        return new

    def key(self) -> tuple[float, int]:
        """Lowest score, then fewer papers at it: larger is better."""
        low = float(self.val.min())
        return low, -int(np.count_nonzero(self.val <= low))

    def swap(self, c: int, r: int, y: int, d: int | None) -> None:
        """``y`` replaces ``r`` on paper ``c``; ``r`` takes ``y``'s place on ``d`` if given."""
        W = self.W
        self.rev[c].discard(r)
        self.rev[c].add(y)
        self.papers[r].discard(c)
        self.papers[y].add(c)
        self.val[c] += W[y, c] - W[r, c]
        if d is not None:
            self.rev[d].discard(y)
            self.rev[d].add(r)
            self.papers[y].discard(d)
            self.papers[r].add(d)
            self.val[d] += W[r, d] - W[y, d]

    def climb(self) -> None:
        """Raise the lowest paper while no other paper falls to its level.

        Each step takes the move (spare-load replacement or two-paper swap)
        that most increases the smaller of the changed papers' scores; the
        number of papers at the minimum drops or the minimum rises, so the
        loop ends.
        """
        W = self.W
        while True:
            c = int(np.argmin(self.val))
            cur = self.val[c]
            best = None
            for r in sorted(self.rev[c]):
                for y in range(self.n):
                    if y in self.rev[c] or W[y, c] <= W[r, c]:
                        continue
                    new_c = cur - W[r, c] + W[y, c]
                    if len(self.papers[y]) < self.k_a:
                        if best is None or new_c - cur > best[0]:
                            best = (new_c - cur, r, y, None)
                        continue
                    for d in sorted(self.papers[y]):
                        if r in self.rev[d] or W[r, d] == -np.inf:
                            continue
                        gain = min(new_c, self.val[d] - W[y, d] + W[r, d]) - cur
                        if gain > 0 and (best is None or gain > best[0]):
                            best = (gain, r, y, d)
            if best is None:
                return
            self.swap(c, best[1], best[2], best[3])

    def kick(self, rng: np.random.Generator, moves: int) -> None:
        """Random valid swaps between low papers and arbitrary papers."""
        low = np.argsort(self.val, kind="stable")[: max(4, self.m // 5)]
        for _ in range(moves):
            c = int(rng.choice(low))
            d = int(rng.integers(self.m))
            if c == d:
                continue
            r = int(rng.choice(sorted(self.rev[c])))
            y = int(rng.choice(sorted(self.rev[d])))
            if y in self.rev[c] or r in self.rev[d] or self.W[y, c] == -np.inf or self.W[r, d] == -np.inf:
                continue
            self.swap(c, r, y, d)

    def to_x(self, prog: _Program) -> np.ndarray:
        var = np.full(self.W.shape, -1)
        var[prog.rev, prog.col] = np.arange(len(prog.w))
        out = np.zeros(len(prog.w), dtype=bool)
        for c, rs in enumerate(self.rev):
            for r in rs:
                out[var[r, c]] = True
        return out


def _raise_bottleneck(inst: Instance, prog: _Program, x: np.ndarray, target: float,
                      iterations: int, seed: int) -> np.ndarray:
    """Iterated local search: climb, then perturb the best state and climb again.

    Stops early once the lowest score reaches ``target``. Equal-key states are
    accepted so the search can walk plateaus. Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(seed)
    state = _BottleneckSearch(inst, prog, x)
    state.climb()
    best, best_key = state, state.key()
    for _ in range(iterations):
        if best_key[0] >= target:
            break
        trial = best.copy()
        trial.kick(rng, int(rng.integers(1, 4)))
        trial.climb()
        k = trial.key()
        if k >= best_key:
            best, best_key = trial, k
    return best.to_x(prog)


def maxmin_esw(
    inst: Instance,
    tol: float = 1e-9,
    max_probes: int | None = None,
    node_limit: int | None = None,
    time_limit: float | None = None,
    search_iterations: int = 1000,
    seed: int = 0,
) -> MaxMinResult:
    """Max-min paper score, then max USW among assignments reaching it.

    The max-USW assignment is improved by iterated local search on the lowest
    paper score, then threshold probes (pure feasibility MILPs) ask for any
    strict improvement on the incumbent, up to the LP-relaxation bound; each
    feasible probe is improved again. ``max_probes`` caps the probe count (``None``: until the
    bracket is within ``tol``); a probe stopped by ``node_limit`` or
    ``time_limit`` narrows the search but not the proven ``upper_bound``.
    ``certified`` says whether the returned ESW is within ``tol`` (plus twice
    the solver resolution) of that bound. Everything except ``time_limit`` is
    deterministic.
    """
    prog = _program(inst)
    m = len(inst.papers)
    if m == 0:
        return MaxMinResult(Assignment(frozenset()), 0.0, 0.0, True)
    limits = {}
    if node_limit is not None:
        limits["node_limit"] = node_limit
    if time_limit is not None:
        limits["time_limit"] = time_limit

    x, status = _solve(inst, prog, None, {})
    if x is None:
        raise InfeasibleError(f"assignment program infeasible (status {status})")
    resolution = SOLVER_RESOLUTION * max(1.0, float(np.max(prog.w, initial=0.0)))
    bound = _lp_upper_bound(inst, prog)
    target = bound - resolution
    best = _raise_bottleneck(inst, prog, x, target, search_iterations, seed)
    lo = min(_paper_scores(inst, prog, best))
    hi = bound
    probes = 0
    while hi - lo > tol and (max_probes is None or probes < max_probes):
        # the local search usually lands on the optimum, so ask for any strict
        # improvement: one infeasibility proof then certifies the incumbent
        tau = lo + 2 * resolution
        if tau >= hi:
            break
        probes += 1
        x, status = _solve(inst, prog, tau, limits, objective=False)
        if x is not None and min(_paper_scores(inst, prog, x)) > lo:
            best = _raise_bottleneck(inst, prog, x, target, search_iterations, seed)
            lo = min(_paper_scores(inst, prog, best))
        else:
            hi = tau
            if status == 2:  # proven infeasible
                bound = min(bound, tau)
        log.debug("maxmin probe: tau=%.12g lo=%.12g hi=%.12g status=%s", tau, lo, hi, status)
    certified = bound - lo <= tol + 2 * resolution

    # best-USW assignment among those reaching the final ESW
    usw_optimal = False
    if max_probes is None or probes < max_probes:
        x, status = _solve(inst, prog, lo, limits)
        if x is not None and min(_paper_scores(inst, prog, x)) >= lo and prog.w[x].sum() >= prog.w[best].sum():
            best = x
            usw_optimal = status == 0
    return MaxMinResult(_to_assignment(inst, prog, best), lo, max(bound, lo), certified, usw_optimal)


def _lp_upper_bound(inst: Instance, prog: _Program) -> float:
    """Max-min value of the LP relaxation, padded by the solver resolution."""
    m = prog.a_paper.shape[0]
    nv = len(prog.w)
    t_col = sparse.csr_matrix(np.ones((m, 1)))
    a_ub = sparse.vstack([
        sparse.hstack([prog.a_reviewer, sparse.csr_matrix((inst.n, 1))]),
        sparse.hstack([-prog.a_score, t_col]),
    ]).tocsr()
    b_ub = np.concatenate([np.full(inst.n, inst.k_a), np.zeros(m)])
    a_eq = sparse.hstack([prog.a_paper, sparse.csr_matrix((m, 1))]).tocsr()
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=np.full(m, inst.k_p),
                  bounds=[(0, 1)] * nv + [(0, None)], method="highs")
    if res.status != 0:
        raise InfeasibleError(f"LP relaxation failed: {res.message}")
    return -res.fun + SOLVER_RESOLUTION * max(1.0, float(np.max(prog.w, initial=0.0)))


def assign_maxmin_esw(inst: Instance, max_probes: int | None = None) -> Assignment:
    """Valid assignment maximizing the minimum paper score, ties by total score.

    With ``max_probes`` set the result is a heuristic lower bound; see
    :func:`maxmin_esw`.
    """
    return maxmin_esw(inst, max_probes=max_probes).assignment
