"""Core-based reviewer assignment: PRA-TTC followed by Filling-Gaps.

Every arbitrary choice in the algorithm is fixed so runs are reproducible:

* an incomplete agent drives its preference edge with its lowest-index
  incomplete paper;
* a complete agent points to the lowest-index agent that still has an
  incomplete paper;
* when the preference graph has several cycles, the one containing the
  lowest-index node is eliminated, then the graph is rebuilt;
* greedy-graph cycles are found by depth-first search from the lowest-index
  node (neighbours ascending), and an edge is labelled by the lowest-index
  paper that justifies it;
* the Phase 2 order puts sources first, ties by ascending index;
* swap candidates are taken in ascending ``(author, submission)`` order, then
  ascending reviewer index.

Trace format
------------
When a ``trace`` callable is passed, one line is emitted per event, using the
instance's agent and paper labels::

    ttc round=<r> cycle=<a>><b>>... assign=<reviewer>:<paper>,...
    ttc done rounds=<r> U=<a>,... L=<a>,...
    fill1 round=<r> cycle=<a>><b>>... assign=<reviewer>:<paper>,...
    fill1 done U=<a>,... L=<a>,...
    fill2 order=<a>,<b>,...
    fill2 agent=<a> paper=<p> swap=<i''>:<p'>><p> take=<a>:<p'>
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

from .model import (
    Assignment,
    InputError,
    Instance,
    PaddedInstance,
    PaperId,
    pad_to_uniform,
    strip_dummies,
    validate_assignment,
    validate_instance,
)

Trace = Callable[[str], None]


class CobraInvariantError(RuntimeError):
    """An internal invariant of the algorithm failed; this is a bug, not bad input."""


class PartialAssignment:
    """Mutable assignment under construction, with incomplete-paper bookkeeping.

    ``incomplete[i]`` holds the submission indices of ``i`` with fewer than
    ``k_p`` reviewers. ``completed_at[i]`` is the step at which ``i``'s last
    paper became complete, or ``None`` while some paper is still incomplete.
    """

    def __init__(self, inst: Instance):
        self.inst = inst
        self.k_p = inst.k_p
        self.k_a = inst.k_a
        self.reviewers: dict[PaperId, set[int]] = {p: set() for p in inst.papers}
        self.reviews: list[set[PaperId]] = [set() for _ in range(inst.n)]
        self.incomplete: list[list[int]] = [list(range(m)) for m in inst.submissions]
        self.completed_at: list[int | None] = [None if m else 0 for m in inst.submissions]
        self.clock = 0
        self.pairs = 0

    def load(self, i: int) -> int:
        return len(self.reviews[i])

    def is_complete(self, p: PaperId) -> bool:
        return len(self.reviewers[p]) >= self.k_p

    def add(self, reviewer: int, p: PaperId) -> None:
        revs = self.reviewers[p]
        if reviewer in revs or reviewer == p[0]:
            raise CobraInvariantError(f"cannot add reviewer {reviewer} to paper {p}")
        revs.add(reviewer)
        self.reviews[reviewer].add(p)
        self.pairs += 1
        if len(revs) == self.k_p:
            author, l = p
            self.incomplete[author].remove(l)
            if not self.incomplete[author]:
                self.completed_at[author] = self.clock

    def remove(self, reviewer: int, p: PaperId) -> None:
        revs = self.reviewers[p]
        revs.remove(reviewer)
        self.reviews[reviewer].remove(p)
        self.pairs -= 1
        if len(revs) == self.k_p - 1:
            author, l = p
            self.incomplete[author].append(l)
            self.incomplete[author].sort()
            self.completed_at[author] = None

    def agents_with_incomplete(self) -> list[int]:
        return [i for i in range(self.inst.n) if self.incomplete[i]]

    def to_assignment(self) -> Assignment:
        return Assignment(frozenset((i, p) for p, revs in self.reviewers.items() for i in revs))

    def check_review_balance(self, agents=None) -> None:
        """Assert an agent with an incomplete paper reviews no more than its papers received.

        Checked for every agent with an incomplete paper (or the given agents).
        When ``k_a == m_star * k_p`` a complete agent has no spare capacity, so
        it never joins a cycle and the two counts are equal. With spare
        capacity a complete agent can close a cycle whose next member then
        gains a reviewer without reviewing, and only the inequality holds.
        """
        if agents is None:
            agents = self.agents_with_incomplete()
        exact = self.k_a == self.inst.m_star * self.k_p
        for i in agents:
            if not self.incomplete[i]:
                continue
            owed = sum(len(self.reviewers[(i, l)]) for l in range(self.inst.submissions[i]))
            if self.load(i) > owed or (exact and self.load(i) != owed):
                raise CobraInvariantError(
                    f"agent {i} reviews {self.load(i)} papers but its papers hold {owed} reviews")


@dataclass(frozen=True)
class PreferenceGraph:
    targets: tuple[int | None, ...]
    chosen_paper: tuple[int | None, ...]

    def find_cycle(self) -> list[int] | None:
        """The cycle containing the lowest-index node that lies on any cycle."""
        return _functional_cycle(self.targets)


@dataclass(frozen=True)
class GreedyGraph:
    nodes: tuple[int, ...]
    edges: dict[int, tuple[tuple[int, int], ...]]  # i -> ((i2, label submission), ...)

    def successors(self, i: int) -> list[int]:
        return [j for j, _ in self.edges.get(i, ())]

    def label(self, i: int, j: int) -> int:
        for k, l in self.edges[i]:
            if k == j:
                return l
        raise KeyError((i, j))

    def find_cycle(self) -> list[int] | None:
        """Depth-first search from the lowest-index node; the first back edge closes the cycle."""
        state = {v: 0 for v in self.nodes}
        for root in self.nodes:
            if state[root]:
                continue
            stack = [root]
            iters = [iter(self.successors(root))]
            state[root] = 1
            while stack:
                nxt = next(iters[-1], None)
                if nxt is None:
                    state[stack.pop()] = 2
                    iters.pop()
                    continue
                if state[nxt] == 1:
                    return stack[stack.index(nxt):]
                if state[nxt] == 0:
                    state[nxt] = 1
                    stack.append(nxt)
                    iters.append(iter(self.successors(nxt)))
        return None

    def topological_order(self) -> list[int]:
        """Sources first, ties by ascending index. The graph must be acyclic."""
        indeg = {v: 0 for v in self.nodes}
        for i in self.nodes:
            for j in self.successors(i):
                indeg[j] += 1
        heap = [v for v in self.nodes if indeg[v] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            v = heapq.heappop(heap)
            order.append(v)
            for j in self.successors(v):
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(heap, j)
        if len(order) != len(self.nodes):
            raise CobraInvariantError("greedy graph still has a cycle")
        return order


@dataclass(frozen=True)
class TtcOutcome:
    partial: PartialAssignment
    U: tuple[int, ...]
    L: tuple[int, ...]
    rounds: int


def _functional_cycle(targets) -> list[int] | None:
    n = len(targets)
    state = [0] * n
    best = None
    for s in range(n):
        if state[s]:
            continue
        path = []
        v = s
        while v is not None and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = targets[v]
        if v is not None and state[v] == 1:
            cyc = path[path.index(v):]
            if best is None or min(cyc) < min(best):
                best = cyc
        for u in path:
            state[u] = 2
    if best is None:
        return None
    k = best.index(min(best))
    return best[k:] + best[:k]


class _RankCursor:
    """Per-paper position in the ranking, skipping reviewers that can never qualify again.

    During PRA-TTC reviews are only added, so once a reviewer reviews the paper
    or is at capacity it stays ineligible; the cursor only moves forward.
    """

    def __init__(self, inst: Instance):
        self.pos = {p: 0 for p in inst.papers}

    def best(self, inst: Instance, part: PartialAssignment, p: PaperId) -> int | None:
        sigma = inst.rankings[p]
        k = self.pos[p]
        revs = part.reviewers[p]
        while k < len(sigma) and (sigma[k] in revs or part.load(sigma[k]) >= part.k_a):
            k += 1
        self.pos[p] = k
        return sigma[k] if k < len(sigma) else None


def build_preference_graph(
    padded: Instance, part: PartialAssignment, cursor: _RankCursor | None = None
) -> PreferenceGraph:
    n = padded.n
    targets: list[int | None] = [None] * n
    chosen: list[int | None] = [None] * n
    first_open = next((i for i in range(n) if part.incomplete[i]), None)
    for i in range(n):
        if part.incomplete[i]:
            l = part.incomplete[i][0]
            chosen[i] = l
            p = (i, l)
            if cursor is not None:
                targets[i] = cursor.best(padded, part, p)
            else:
                targets[i] = next(
                    (j for j in padded.rankings[p]
                     if j not in part.reviewers[p] and part.load(j) < part.k_a),
                    None,
                )
        else:
            targets[i] = first_open
    return PreferenceGraph(tuple(targets), tuple(chosen))


def _fmt_agents(inst: Instance, agents) -> str:
    return ",".join(inst.agent_label(i) for i in agents)


def pra_ttc(padded: PaddedInstance, trace: Trace | None = None) -> TtcOutcome:
    """Eliminate preference-graph cycles until none is left."""
    part = PartialAssignment(padded)
    cursor = _RankCursor(padded)
    budget = padded.m * padded.k_p
    rounds = 0
    while True:
        graph = build_preference_graph(padded, part, cursor)
        cycle = graph.find_cycle()
        if cycle is None:
            break
        rounds += 1
        part.clock = rounds
        before = part.pairs
        edits = []
        for i in cycle:
            l = graph.chosen_paper[i]
            if l is None:
                continue
            j = graph.targets[i]
            part.add(j, (i, l))
            edits.append((j, (i, l)))
        if part.pairs <= before or rounds > budget:
            raise CobraInvariantError("cycle elimination made no progress")
        part.check_review_balance()
        if trace is not None:
            trace(f"ttc round={rounds} cycle={'>'.join(padded.agent_label(i) for i in cycle)} "
                  f"assign={','.join(f'{padded.agent_label(j)}:{padded.paper_label(p)}' for j, p in edits)}")

    U = tuple(part.agents_with_incomplete())
    if len(U) > padded.k_p:
        raise CobraInvariantError(f"{len(U)} agents left incomplete, more than k_p = {padded.k_p}")
    done = sorted((i for i in range(padded.n) if not part.incomplete[i]),
                  key=lambda i: (part.completed_at[i], i))
    take = padded.k_p - len(U) + 1
    L = tuple(done[len(done) - take:]) if take > 0 else ()
    if trace is not None:
        trace(f"ttc done rounds={rounds} U={_fmt_agents(padded, U)} L={_fmt_agents(padded, L)}")
    return TtcOutcome(part, U, L, rounds)


def build_greedy_graph(padded: Instance, part: PartialAssignment, U) -> GreedyGraph:
    nodes = tuple(sorted(U))
    edges: dict[int, tuple[tuple[int, int], ...]] = {}
    for i in nodes:
        out = []
        for j in nodes:
            if j == i:
                continue
            label = next((l for l in part.incomplete[i] if j not in part.reviewers[(i, l)]), None)
            if label is not None:
                out.append((j, label))
        edges[i] = tuple(out)
    return GreedyGraph(nodes, edges)


def filling_gaps(padded: PaddedInstance, ttc: TtcOutcome, trace: Trace | None = None) -> Assignment:
    """Complete the partial assignment left by :func:`pra_ttc`.

    Phase 1 eliminates greedy-graph cycles; Phase 2 walks the greedy graph in
    topological order and completes each remaining paper with a three-way
    swap against a complete paper of another agent in ``U`` or ``L``.
    """
    if not ttc.U:
        raise ValueError("filling_gaps needs at least one incomplete agent")
    part = ttc.partial
    U = list(ttc.U)
    L = list(ttc.L)
    pool = sorted(set(U) | set(L))
    step = part.clock
    rnd = 0
    # Phase 1
    while True:
        graph = build_greedy_graph(padded, part, U)
        cycle = graph.find_cycle()
        if cycle is None:
            break
        rnd += 1
        step += 1
        part.clock = step
        edits = []
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            p = (a, graph.label(a, b))
            part.add(b, p)
            edits.append((b, p))
        finished = [i for i in U if not part.incomplete[i]]
        for i in finished:
            U.remove(i)
            L.append(i)
        part.check_review_balance(U)
        if trace is not None:
            trace(f"fill1 round={rnd} cycle={'>'.join(padded.agent_label(i) for i in cycle)} "
                  f"assign={','.join(f'{padded.agent_label(j)}:{padded.paper_label(p)}' for j, p in edits)}")
    if trace is not None:
        trace(f"fill1 done U={_fmt_agents(padded, U)} L={_fmt_agents(padded, L)}")

    # Phase 2
    order = build_greedy_graph(padded, part, U).topological_order()
    if trace is not None:
        trace(f"fill2 order={_fmt_agents(padded, order)}")
    m_star = padded.m_star
    for rho in order:
        while part.incomplete[rho]:
            p = (rho, part.incomplete[rho][0])
            donor = next(
                ((a, l) for a in pool if a != rho for l in range(m_star)
                 if part.is_complete((a, l)) and rho not in part.reviewers[(a, l)]),
                None,
            )
            if donor is None:
                raise CobraInvariantError(f"no complete paper available to swap for agent {rho}")
            mover = next(
                (i for i in sorted(part.reviewers[donor]) if i != rho and i not in part.reviewers[p]),
                None,
            )
            if mover is None:
                raise CobraInvariantError(f"no reviewer of {donor} can take paper {p}")
            part.add(mover, p)
            part.add(rho, donor)
            part.remove(mover, donor)
            if part.load(rho) > part.k_a:
                raise CobraInvariantError(f"agent {rho} exceeds k_a after swap")
            if trace is not None:
                trace(f"fill2 agent={padded.agent_label(rho)} paper={padded.paper_label(p)} "
                      f"swap={padded.agent_label(mover)}:{padded.paper_label(donor)}>{padded.paper_label(p)} "
                      f"take={padded.agent_label(rho)}:{padded.paper_label(donor)}")
    return part.to_assignment()


def run_cobra(inst: Instance, trace: Trace | None = None) -> Assignment:
    """Compute a core assignment from the rankings alone.

    Raises :class:`InputError` for invalid instances.
    """
    problems = validate_instance(inst)
    if problems:
        raise InputError("invalid instance: " + "; ".join(map(str, problems)))
    padded = pad_to_uniform(inst)
    ttc = pra_ttc(padded, trace)
    if ttc.U:
        full = filling_gaps(padded, ttc, trace)
    else:
        full = ttc.partial.to_assignment()
    problems = validate_assignment(padded, full)
    if problems:
        raise CobraInvariantError("output is not valid: " + "; ".join(map(str, problems)))
    return strip_dummies(padded, full)
