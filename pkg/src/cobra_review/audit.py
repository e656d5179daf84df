"""Core-violation audits under additive utilities.

A coalition ``N'`` deviates when it can review its own papers among itself
(``k_p`` reviewers per paper, at most ``k_a`` reviews per member, no
self-review) so that every member's paper score strictly increases. Audits
handle instances where every agent has at most one paper; agents without a
paper can never strictly gain and are never coalition members.

The violation factor ``alpha`` of an assignment is the largest ``alpha >= 1``
such that some coalition can deviate with every member reaching at least
``alpha`` times its current utility. A zero-utility member only needs a
positive score, so ``alpha`` is unbounded exactly when some deviating
coalition consists of zero-utility members only.

Score sums use :func:`math.fsum` so equal reviewer sets always compare equal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import Assignment, InputError, Instance, compute_utilities, validate_assignment

ALPHA_TOL = 1e-3


@dataclass(frozen=True)
class DeviationWitness:
    """A coalition and a restricted assignment that every member strictly prefers."""

    coalition: tuple[int, ...]
    restricted: Assignment
    before: dict[int, float]
    after: dict[int, float]

    @property
    def factors(self) -> dict[int, float]:
        return {i: _factor(self.after[i], self.before[i]) for i in self.coalition}

    @property
    def min_factor(self) -> float:
        return min(self.factors.values())

    @property
    def size(self) -> int:
        return len(self.coalition)


@dataclass(frozen=True)
class AuditReport:
    violated: bool
    unbounded: bool
    alpha_star: float | None
    witness: DeviationWitness | None
    largest_group: int
    exactness: str
    witnesses_found: int = 0

    @property
    def alpha(self) -> float:
        """Violation factor for reporting: 1 when not violated, inf when unbounded."""
        if not self.violated:
            return 1.0
        if self.unbounded:
            return math.inf
        return float(self.alpha_star)


def _factor(after: float, before: float) -> float:
    if before > 0:
        return after / before
    return math.inf if after > 0 else 0.0


@dataclass
class _View:
    """Single-paper view: ``A[i, j]`` is reviewer ``i``'s score for agent ``j``'s paper."""

    inst: Instance
    A: np.ndarray
    u: np.ndarray
    has_paper: np.ndarray
    k_a: int
    k_p: int
    cols: dict[int, int] = field(default_factory=dict)

    def value(self, j: int, reviewers) -> float:
        return math.fsum(sorted(float(self.A[r, j]) for r in reviewers))


def _view(inst: Instance, asg: Assignment) -> _View:
    if inst.scores is None:
        raise InputError("audits need similarity scores")
    if any(m > 1 for m in inst.submissions):
        raise InputError("audits support at most one paper per agent")
    problems = validate_assignment(inst, asg)
    if problems:
        raise InputError("invalid assignment: " + "; ".join(map(str, problems)))
    n = inst.n
    A = np.zeros((n, n))
    has = np.zeros(n, dtype=bool)
    cols = {}
    for c, (author, _) in enumerate(inst.papers):
        A[:, author] = inst.scores[:, c]
        A[author, author] = 0.0
        has[author] = True
        cols[author] = c
    util = compute_utilities(inst, asg)
    u = np.array(util.agent_utilities, dtype=float)
    return _View(inst, A, u, has, inst.k_a, inst.k_p, cols)


def _eligible(view: _View) -> list[int]:
    """Agents that could belong to some deviating coalition.

    A member needs its top ``k_p`` scores from the other candidates to beat its
    current utility; dropping agents that fail this only shrinks the others'
    options, so iterate to a fixpoint.
    """
    cand = [int(j) for j in np.nonzero(view.has_paper)[0]]
    k = view.k_p
    while True:
        if len(cand) < k + 1:
            return []
        idx = np.array(cand)
        sub = view.A[np.ix_(idx, idx)].copy()
        np.fill_diagonal(sub, -np.inf)
        top = -np.sort(-sub, axis=0)[:k].sum(axis=0)
        keep = [j for j, t in zip(cand, top) if t > view.u[j] - 1e-12]
        if len(keep) == len(cand):
            return cand
        cand = keep


def _witness(view: _View, choice: dict[int, tuple[int, ...]]) -> DeviationWitness:
    members = tuple(sorted(choice))
    pairs = frozenset((r, (j, 0)) for j in members for r in choice[j])
    return DeviationWitness(
        coalition=members,
        restricted=Assignment(pairs),
        before={j: float(view.u[j]) for j in members},
        after={j: view.value(j, choice[j]) for j in members},
    )


def verify_witness(inst: Instance, asg: Assignment, w: DeviationWitness) -> str | None:
    """Return ``None`` if the witness certifies a core violation, else the first failed check."""
    members = set(w.coalition)
    if len(members) != len(w.coalition):
        return "coalition lists an agent twice"
    if len(members) <= inst.k_p:
        return f"coalition of {len(members)} agents is too small to give each paper {inst.k_p} reviewers"
    for j in members:
        if not 0 <= j < inst.n:
            return f"unknown agent {j}"
        if inst.submissions[j] != 1:
            return f"agent {j} does not have exactly one paper"
    for r, p in w.restricted.pairs:
        if r not in members:
            return f"reviewer {r} is outside the coalition"
        if p[0] not in members or p[1] != 0:
            return f"paper {p} does not belong to the coalition"
        if r == p[0]:
            return f"agent {r} reviews its own paper"
    for j in sorted(members):
        got = len(w.restricted.reviewers_of((j, 0)))
        if got != inst.k_p:
            return f"paper of agent {j} has {got} reviewers, needs {inst.k_p}"
    for r in sorted(members):
        if w.restricted.load(r) > inst.k_a:
            return f"agent {r} reviews {w.restricted.load(r)} > k_a papers"
    return _verify(inst, w, compute_utilities(inst, asg).agent_utilities)


def _verify(inst: Instance, w: DeviationWitness, now) -> str | None:
    members = set(w.coalition)
    if len(members) <= inst.k_p or len(members) != len(w.coalition):
        return "malformed coalition"
    for r, p in w.restricted.pairs:
        if r not in members or p[0] not in members or p[1] != 0 or r == p[0]:
            return f"pair {(r, p)} is outside the coalition or a self-review"
    for j in members:
        if inst.submissions[j] != 1 or len(w.restricted.reviewers_of((j, 0))) != inst.k_p:
            return f"paper of agent {j} is not covered by exactly k_p reviewers"
        if w.restricted.load(j) > inst.k_a:
            return f"agent {j} exceeds k_a"
    c = inst.paper_index
    for j in sorted(members):
        after = math.fsum(sorted(float(inst.scores[r, c[(j, 0)]]) for r in w.restricted.reviewers_of((j, 0))))
        if after <= now[j]:
            return f"agent {j} does not strictly improve ({now[j]!r} -> {after!r})"
        if j not in w.after or j not in w.before:
            return f"witness records no utilities for agent {j}"
        if not math.isclose(after, w.after[j], rel_tol=1e-12, abs_tol=1e-15) or \
                not math.isclose(now[j], w.before[j], rel_tol=1e-12, abs_tol=1e-15):
            return f"recorded utilities of agent {j} do not match the assignments"
    return None


# ---------------------------------------------------------------------------
# forced coalitions of size k_p + 1


def forced_coalition_scan(inst: Instance, asg: Assignment) -> list[DeviationWitness]:
    """All deviating coalitions of size ``k_p + 1``.

    In such a coalition every paper must be reviewed by all other members, so
    the restricted assignment is forced (and respects ``k_a >= k_p``).
    """
    if inst.k_a < inst.k_p:
        raise InputError("forced coalition scan needs k_a >= k_p")
    view = _view(inst, asg)
    return [_witness(view, _forced_choice(c)) for c in _forced_coalitions(view, _eligible(view))]


def forced_scan_audit(inst: Instance, asg: Assignment) -> AuditReport:
    """Audit limited to coalitions of size ``k_p + 1``; a sound lower bound."""
    if inst.k_a < inst.k_p:
        raise InputError("forced coalition scan needs k_a >= k_p")
    view = _view(inst, asg)
    items = [(c, _forced_choice(c)) for c in _forced_coalitions(view, _eligible(view))]
    return _report(inst, asg, view, items, "forced-scan-lower-bound", _fixed_searcher(view, dict(items)))


def _fixed_searcher(view: _View, found: dict):
    """Alpha oracle over already-found restricted assignments."""
    witnesses = {c: _witness(view, ch) for c, ch in found.items()}

    def searcher(c, alpha):
        w = witnesses[c]
        ok = all(w.after[j] > w.before[j] and w.after[j] >= alpha * w.before[j] for j in c)
        return found[c] if ok else None

    return searcher


def _forced_choice(coalition) -> dict[int, tuple[int, ...]]:
    return {j: tuple(r for r in coalition if r != j) for j in coalition}


def _forced_coalitions(view: _View, elig: list[int]) -> list[tuple[int, ...]]:
    size = view.k_p + 1
    E = np.array(elig, dtype=int)
    if len(E) < size:
        return []
    A = view.A[np.ix_(E, E)]
    u = view.u[E]
    colsort = -np.sort(-A, axis=0)  # per column, descending (diagonal zero is harmless slack)
    topsum = np.vstack([np.zeros(len(E)), np.cumsum(colsort, axis=0)])
    slack = 1e-12
    found: list[tuple[int, ...]] = []

    upper = np.triu(np.ones((len(E), len(E)), dtype=bool), k=1)

    def rec(start: int, T: list[int], partial: np.ndarray) -> None:
        remaining = size - len(T)
        if remaining == 2:
            # the last two members (c, d), c < d, screened for all pairs at once
            idx = np.arange(start, len(E))
            if len(idx) < 2:
                return
            ok = upper[np.ix_(idx, idx)].copy()
            for t, j in enumerate(T):
                col = A[idx, j]
                ok &= partial[t] + col[:, None] + col[None, :] > u[j] - slack
            into = A[np.ix_(T, idx)].sum(axis=0) if T else np.zeros(len(idx))
            sub = A[np.ix_(idx, idx)]  # sub[x, y]: x reviews y
            ok &= (into[:, None] + sub.T) > u[idx][:, None] - slack  # c gains from T and d
            ok &= (into[None, :] + sub) > u[idx][None, :] - slack  # d gains from T and c
            for x, y in zip(*np.nonzero(ok)):
                members = tuple(int(E[v]) for v in (*T, int(idx[x]), int(idx[y])))
                if all(view.value(j, [r for r in members if r != j]) > view.u[j] for j in members):
                    found.append(tuple(sorted(members)))
            return
        for c in range(start, len(E) - remaining + 1):
            T2 = T + [c]
            p2 = np.array([partial[t] + A[c, j] for t, j in enumerate(T)] + [A[T, c].sum()])
            rest = remaining - 1
            if np.all(p2 + topsum[rest, T2] > u[T2] - slack):
                rec(c + 1, T2, p2)

    rec(0, [], np.zeros(0))
    found.sort()
    return found


# ---------------------------------------------------------------------------
# exact search


def _options(view: _View, members, j: int, alpha: float):
    need_u = float(view.u[j])
    out = []
    for combo in itertools.combinations([r for r in members if r != j], view.k_p):
        s = view.value(j, combo)
        if s > need_u and s >= alpha * need_u:
            out.append((s, combo))
    out.sort(key=lambda t: (-t[0], t[1]))
    return out


def _search(view: _View, members, alpha: float = 1.0) -> dict[int, tuple[int, ...]] | None:
    """A restricted assignment on ``members`` meeting the ``alpha`` targets, or None."""
    members = tuple(members)
    if len(members) <= view.k_p:
        return None
    k = view.k_p
    for j in members:
        top = sorted((view.A[r, j] for r in members if r != j), reverse=True)[:k]
        s = math.fsum(top)
        if not (s > view.u[j] - 1e-12 and s >= alpha * view.u[j] - 1e-12):
            return None
    opts = {j: _options(view, members, j, alpha) for j in members}
    if any(not o for o in opts.values()):
        return None
    order = sorted(members, key=lambda j: (len(opts[j]), j))
    load = {r: 0 for r in members}
    k_a = view.k_a
    choice: dict[int, tuple[int, ...]] = {}

    def alive(pos: int) -> bool:
        for j in order[pos:]:
            if not any(all(load[r] < k_a for r in combo) for _, combo in opts[j]):
                return False
        return True

    def rec(pos: int) -> bool:
        if pos == len(order):
            return True
        j = order[pos]
        for _, combo in opts[j]:
            if all(load[r] < k_a for r in combo):
                for r in combo:
                    load[r] += 1
                choice[j] = combo
                if alive(pos + 1) and rec(pos + 1):
                    return True
                for r in combo:
                    load[r] -= 1
        choice.pop(j, None)
        return False

    return dict(choice) if rec(0) else None


def _alpha_cap(view: _View, agents) -> float:
    cap = 1.0
    for j in agents:
        if view.u[j] > 0:
            cap = max(cap, view.k_p * float(np.max(view.A[:, j])) / float(view.u[j]))
    return cap


def _bisect(lo: float, hi: float, feasible: Callable[[float], bool], tol: float) -> tuple[float, float]:
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def alpha_bisection(
    inst: Instance,
    asg: Assignment,
    feasibility_oracle: Callable[[float], bool],
    tol: float = ALPHA_TOL,
) -> float:
    """Largest alpha the oracle accepts, to within ``tol``; returns the final bracket midpoint.

    ``feasibility_oracle(alpha)`` must be monotone non-increasing in alpha and
    accept ``alpha = 1``. The search range is ``[1, cap]`` where ``cap`` bounds
    any member's achievable improvement factor.
    """
    view = _view(inst, asg)
    if not feasibility_oracle(1.0):
        raise ValueError("alpha_bisection called without a core violation")
    hi = _alpha_cap(view, np.nonzero(view.has_paper)[0]) + 2 * tol
    if feasibility_oracle(hi):
        raise ValueError("violation is unbounded; alpha has no finite value")
    lo, hi = _bisect(1.0, hi, feasibility_oracle, tol)
    return (lo + hi) / 2


def exact_audit(inst: Instance, asg: Assignment, max_n: int = 16) -> AuditReport:
    """Exhaustive audit over every coalition of at least ``k_p + 1`` agents.

    Agents that cannot gain in any coalition are pruned first; the audit
    refuses when more than ``max_n`` candidates remain.
    """
    view = _view(inst, asg)
    elig = _eligible(view)
    if len(elig) > max_n:
        raise InputError(
            f"{len(elig)} candidate agents exceed max_n = {max_n}; use heuristic_audit for this size")
    found: list[tuple[tuple[int, ...], dict]] = []
    for size in range(view.k_p + 1, len(elig) + 1):
        for coalition in itertools.combinations(elig, size):
            choice = _search(view, coalition)
            if choice is not None:
                found.append((coalition, choice))
    return _report(inst, asg, view, found, "exact", lambda c, a: _search(view, c, a))


def _report(inst, asg, view, found, exactness, searcher) -> AuditReport:
    if not found:
        return AuditReport(False, False, None, None, 0, exactness, 0)
    largest = max(len(c) for c, _ in found)
    zero = [(c, ch) for c, ch in found if all(view.u[j] == 0 for j in c)]
    if zero:
        c, ch = zero[0]
        return AuditReport(True, True, None, _witness(view, ch), largest, exactness, len(found))

    def oracle(alpha: float) -> bool:
        return any(searcher(c, alpha) is not None for c, _ in found)

    alpha = alpha_bisection(inst, asg, oracle)
    lo = max(1.0, alpha - ALPHA_TOL / 2)
    witness = None
    for c, ch in found:
        hit = searcher(c, lo)
        if hit is not None:
            witness = _witness(view, hit)
            break
    # the witness certifies its own factor, which lies inside the final bracket
    if witness is not None and abs(witness.min_factor - alpha) <= ALPHA_TOL:
        alpha = witness.min_factor
    return AuditReport(True, False, alpha, witness, largest, exactness, len(found))


# ---------------------------------------------------------------------------
# heuristic growth


class _Coalition:
    """A coalition with a valid restricted assignment, grown one agent at a time.

    Member values are kept as running float sums; witnesses built from the
    final state are recomputed exactly and verified.
    """

    def __init__(self, view: _View, choice: dict[int, tuple[int, ...]]):
        self.view = view
        self.rev = {j: set(choice[j]) for j in choice}
        self.papers = {r: set() for r in choice}
        self.load = {r: 0 for r in choice}
        for j, rs in choice.items():
            for r in rs:
                self.papers[r].add(j)
                self.load[r] += 1
        self.val = {j: float(sum(view.A[r, j] for r in rs)) for j, rs in self.rev.items()}

    @property
    def members(self) -> list[int]:
        return sorted(self.rev)

    def copy(self) -> "_Coalition":
        new = object.__new__(_Coalition)
        new.view = self.view
        new.rev = {j: set(s) for j, s in self.rev.items()}
        new.papers = {r: set(s) for r, s in self.papers.items()}
        new.load = dict(self.load)
        new.val = dict(self.val)
        return new

    def key(self, j: int, val: float | None = None) -> float:
        """Improvement factor of ``j``; non-improving values map below every strict gain."""
        val = self.val[j] if val is None else val
        u = self.view.u[j]
        if val <= u:
            return val / u - 1.0 if u > 0 else 0.0
        return _factor(val, u)

    def min_key(self) -> float:
        return min(self.key(j) for j in self.rev)

    def deviates(self) -> bool:
        return all(self.val[j] > self.view.u[j] for j in self.rev)

    def choice(self) -> dict[int, tuple[int, ...]]:
        return {j: tuple(sorted(rs)) for j, rs in self.rev.items()}

    def _move(self, r: int, old: int | None, new: int | None) -> None:
        """Reviewer ``r`` drops paper ``old`` and takes paper ``new`` (either may be None)."""
        A = self.view.A
        if old is not None:
            self.rev[old].discard(r)
            self.papers[r].discard(old)
            self.load[r] -= 1
            self.val[old] -= A[r, old]
        if new is not None:
            self.rev[new].add(r)
            self.papers[r].add(new)
            self.load[r] += 1
            self.val[new] += A[r, new]

    def extend(self, a: int) -> "_Coalition | None":
        """Add agent ``a``; each of its ``k_p`` reviewers has spare load or hands one paper to ``a``."""
        view = self.view
        A, k_a, k_p = view.A, view.k_a, view.k_p
        old = self.members
        new = self.copy()
        new.rev[a] = set()
        new.papers[a] = set()
        new.load[a] = 0
        new.val[a] = 0.0
        for slot in range(k_p):
            keys = sorted((new.key(j), j) for j in old)
            first = keys[0]
            second = keys[1] if len(keys) > 1 else (math.inf, -1)
            free = sorted(((A[x, a], x) for x in old if x not in new.rev[a]), reverse=True)
            best = None
            for i in old:
                if i in new.rev[a]:
                    continue
                # optimistic value of a: i now, the best other free reviewers later
                later = [v for v, x in free if x != i][: k_p - slot - 1]
                prov = new.key(a, new.val[a] + A[i, a] + sum(later))
                if new.load[i] < k_a:
                    score = (min(first[0], prov), A[i, a], -i, 1)
                    if best is None or score > best[0]:
                        best = (score, i, None)
                    continue
                if new.load[a] >= k_a:
                    continue
                for j in sorted(new.papers[i]):
                    if a in new.rev[j]:
                        continue
                    kj = new.key(j, new.val[j] + A[a, j] - A[i, j])
                    rest = second[0] if first[1] == j else first[0]
                    score = (min(rest, kj, prov), A[i, a], -i, -j)
                    if best is None or score > best[0]:
                        best = (score, i, j)
            if best is None:
                return None
            _, i, j = best
            new._move(i, j, a)
            if j is not None:
                new._move(a, None, j)
        new.improve()
        return new

    def improve(self, max_moves: int = 50) -> None:
        """Local search raising the worst member by replacing one of its reviewers."""
        A, k_a = self.view.A, self.view.k_a
        for _ in range(max_moves):
            w = min(self.rev, key=lambda j: (self.key(j), j))
            floor = self.key(w)
            move = None
            for y in sorted(self.rev[w], key=lambda r: (A[r, w], r)):
                for x in sorted(self.rev, key=lambda r: (-A[r, w], r)):
                    if A[x, w] <= A[y, w]:
                        break
                    if x == w or x in self.rev[w]:
                        continue
                    if self.load[x] < k_a:
                        move = (x, None, y, None)
                        break
                    new_w = self.key(w, self.val[w] - A[y, w] + A[x, w])
                    for j in sorted(self.papers[x]):
                        if j == y or y in self.rev[j]:
                            continue
                        if min(self.key(j, self.val[j] - A[x, j] + A[y, j]), new_w) > floor:
                            move = (x, j, y, j)
                            break
                    if move:
                        break
                if move:
                    break
            if move is None:
                return
            x, x_old, y, y_new = move
            self._move(x, x_old, w)  # x leaves x_old (if any) for w
            self._move(y, w, y_new)  # y leaves w for y_new (if any)


def heuristic_audit(
    inst: Instance,
    asg: Assignment,
    size_cap: int = 20,
    max_seeds: int = 20,
    seed_budget: int = 2000,
    candidates_per_step: int = 8,
) -> AuditReport:
    """Desk-scale audit: forced-coalition scan, then greedy coalition growth.

    Every reported witness is verified, so ``violated=True`` is sound; a
    negative answer is not a proof of core membership. Growth starts from the
    ``max_seeds`` strongest forced witnesses and, when there are at most
    ``seed_budget`` candidate coalitions of size ``k_p + 1``, from all of them.
    Each growth step tries the ``candidates_per_step`` outsiders with the best
    optimistic gain.
    """
    view = _view(inst, asg)
    if view.k_a < view.k_p:
        raise InputError("heuristic audit needs k_a >= k_p")
    k_p = view.k_p
    elig = _eligible(view)
    forced = _forced_coalitions(view, elig)
    found: dict[tuple[int, ...], dict] = {c: _forced_choice(c) for c in forced}

    seeds = sorted(forced, key=lambda c: (-_witness(view, found[c]).min_factor, c))[:max_seeds]
    if math.comb(len(elig), k_p + 1) <= seed_budget:
        seeds += [c for c in itertools.combinations(elig, k_p + 1) if c not in found]

    for seed in seeds:
        state = _Coalition(view, _forced_choice(seed))
        while len(state.rev) < min(size_cap, len(elig)):
            ranked = []
            for a in elig:
                if a in state.rev:
                    continue
                top = sum(sorted((view.A[r, a] for r in state.rev), reverse=True)[:k_p])
                if top > view.u[a]:
                    ranked.append((-state.key(a, top), a))
            best = None
            for _, a in sorted(ranked)[:candidates_per_step]:
                cand = state.extend(a)
                if cand is None:
                    continue
                score = (cand.deviates(), cand.min_key())
                if best is None or score > best[0]:
                    best = (score, cand)
            if best is None:
                break
            state = best[1]
            if state.deviates():
                found.setdefault(tuple(state.members), state.choice())
            elif len(state.rev) > k_p + 2:
                break

    now = compute_utilities(inst, asg).agent_utilities
    items = []
    for c in sorted(found, key=lambda c: (len(c), c)):
        if _verify(inst, _witness(view, found[c]), now) is None:
            items.append((c, found[c]))
    return _report(inst, asg, view, items, "heuristic-lower-bound", _fixed_searcher(view, dict(items)))
