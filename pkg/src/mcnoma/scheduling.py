"""User scheduling over M subcarriers.

Each of the K users is replicated into L virtual users (one per subcarrier
it will occupy). In the overload regime ``M < K*L <= 2*M`` there must be
``K*L - M`` NOMA pairs and ``2*M - K*L`` users alone on a subcarrier.

Three schedulers share one cost table:

* ``schedule_proposed`` orders users by an average-linkage dendrogram of the
  pairing costs, leaves the rightmost users alone and pairs the first half of
  the remaining leaves with the second half, position by position.
* ``schedule_exhaustive`` evaluates every admissible combination.
* ``schedule_random`` draws one admissible combination uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Sequence, Union

import numpy as np

from .power import PairSolution, VirtualUser, solve_pair, solve_single, virtual_users

EXHAUSTIVE_LIMIT = 10**7


class SchedulingError(ValueError):
    pass


class TooManyCombinations(SchedulingError):
    def __init__(self, count: int, limit: int = EXHAUSTIVE_LIMIT):
        super().__init__(f"exhaustive search would visit {count} combinations (limit {limit})")
        self.count = count
        self.limit = limit


# -- cost table -------------------------------------------------------------

@dataclass(frozen=True)
class CostMatrix:
    """Pairing powers ``cost[i, j]`` (i != j) and single-user powers on the diagonal."""

    cost: np.ndarray
    owners: tuple[int, ...]
    keys: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.owners)


def build_cost_matrix(users: Sequence[VirtualUser]) -> CostMatrix:
    n = len(users)
    if n < 2:
        raise SchedulingError("need at least two virtual users")
    cost = np.empty((n, n))
    for i in range(n):
        cost[i, i] = solve_single(users[i])
        for j in range(i + 1, n):
            cost[i, j] = cost[j, i] = solve_pair(users[i], users[j]).total
    cost.setflags(write=False)
    return CostMatrix(
        cost,
        tuple(u.user_id for u in users),
        tuple((u.user_id, u.replica_index) for u in users),
    )


# -- clustering -------------------------------------------------------------

@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge tree in the usual linkage convention.

    Leaves are ``0..n-1``; merge ``k`` creates cluster ``n + k``.
    ``leaf_keys[i]`` is the (user id, replica) label of leaf ``i``.
    """

    merges: tuple[Merge, ...]
    leaf_keys: tuple[tuple[int, int], ...]

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_keys)

    def as_linkage(self) -> np.ndarray:
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)


def agglomerative_cluster(costs: Union[CostMatrix, np.ndarray], keys=None) -> Dendrogram:
    """Average-linkage (UPGMA) clustering of the off-diagonal costs.

    The distance between two clusters is the mean of all cross-pair costs.
    Equal distances are resolved towards the pair whose smallest leaf keys
    are lexicographically smallest, so the tree does not depend on input order.
    """
    if isinstance(costs, CostMatrix):
        keys = costs.keys if keys is None else keys
        costs = costs.cost
    d = np.array(costs, dtype=float)
    n = d.shape[0]
    if keys is None:
        keys = tuple((i, 0) for i in range(n))
    keys = tuple(tuple(k) for k in keys)
    if n == 1:
        return Dendrogram((), keys)

    np.fill_diagonal(d, np.inf)
    cluster_id = list(range(n))
    size = [1] * n
    min_key = list(keys)
    alive = np.ones(n, dtype=bool)
    merges = []

    for step in range(n - 1):
        masked = np.where(alive[:, None] & alive[None, :], d, np.inf)
        best = masked.min()
        rows, cols = np.nonzero(masked == best)
        candidates = [
            (min(min_key[r], min_key[c]), max(min_key[r], min_key[c]), r, c)
            for r, c in zip(rows, cols) if r < c
        ]
        _, _, r, c = min(candidates)
        if min_key[c] < min_key[r]:
            r, c = c, r
        nr, nc = size[r], size[c]
        merges.append(Merge(cluster_id[r], cluster_id[c], float(best), nr + nc))
        # Lance-Williams update for average linkage; row r becomes the union
        d[r, :] = (nr * d[r, :] + nc * d[c, :]) / (nr + nc)
        d[:, r] = d[r, :]
        d[r, r] = np.inf
        alive[c] = False
        size[r] = nr + nc
        min_key[r] = min(min_key[r], min_key[c])
        cluster_id[r] = n + step
    return Dendrogram(tuple(merges), keys)


def leaf_order(dendro: Dendrogram) -> list[int]:
    """Left-to-right leaf indices of the dendrogram.

    At every internal node the child that joined the tree at the lower height
    goes left. A leaf joins at its parent's height, a subtree at its own merge
    height, so isolated users drift to the right. Ties go to the child holding
    the smallest leaf key.
    """
    n = dendro.n_leaves
    if n == 1:
        return [0]
    height = {n + k: m.height for k, m in enumerate(dendro.merges)}
    children = {n + k: (m.left, m.right) for k, m in enumerate(dendro.merges)}
    smallest: dict[int, tuple] = {i: dendro.leaf_keys[i] for i in range(n)}
    for k, m in enumerate(dendro.merges):
        smallest[n + k] = min(smallest[m.left], smallest[m.right])

    order: list[int] = []
    stack = [n + len(dendro.merges) - 1]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
            continue
        h = height[node]
        kids = sorted(children[node], key=lambda c: (height.get(c, h), smallest[c]))
        stack.extend(reversed(kids))
    return order


# -- schedules --------------------------------------------------------------

@dataclass(frozen=True)
class Single:
    user: VirtualUser
    power: float

    @property
    def total(self) -> float:
        return self.power


@dataclass(frozen=True)
class Pair:
    a: VirtualUser
    b: VirtualUser
    solution: PairSolution

    @property
    def total(self) -> float:
        return self.solution.total

    @property
    def sic_user(self) -> VirtualUser:
        return self.a if self.solution.sic_user == "a" else self.b


@dataclass(frozen=True)
class Schedule:
    """Subcarrier ``m`` carries ``entries[m]``."""

    entries: tuple[Union[Single, Pair], ...]
    total_power: float
    combinations_evaluated: int | None = None

    @property
    def pairs(self) -> list[Pair]:
        return [e for e in self.entries if isinstance(e, Pair)]

    @property
    def singles(self) -> list[Single]:
        return [e for e in self.entries if isinstance(e, Single)]


def check_load(n_virtual: int, M: int):
    if M < 1:
        raise SchedulingError("need at least one subcarrier")
    if not M < n_virtual <= 2 * M:
        raise SchedulingError(
            f"load K*L={n_virtual} must satisfy M < K*L <= 2M with M={M}"
        )


def assemble(users: Sequence[VirtualUser], singles: Sequence[int],
             pairs: Sequence[tuple[int, int]], evaluated: int | None = None) -> Schedule:
    entries: list[Union[Single, Pair]] = []
    for i, j in pairs:
        entries.append(Pair(users[i], users[j], solve_pair(users[i], users[j])))
    for i in singles:
        entries.append(Single(users[i], solve_single(users[i])))
    total = math.fsum(e.total for e in entries)
    return Schedule(tuple(entries), total, evaluated)


def validate_schedule(schedule: Schedule, users: Sequence[VirtualUser], M: int):
    """Raise ``SchedulingError`` unless ``schedule`` is a complete valid assignment."""
    n = len(users)
    if len(schedule.entries) != M:
        raise SchedulingError(f"{len(schedule.entries)} entries for {M} subcarriers")
    if len(schedule.pairs) != n - M or len(schedule.singles) != 2 * M - n:
        raise SchedulingError("wrong number of pairs/singles")
    seen = []
    for e in schedule.entries:
        seen.extend([e.a, e.b] if isinstance(e, Pair) else [e.user])
    keys = sorted((u.user_id, u.replica_index) for u in seen)
    if keys != sorted((u.user_id, u.replica_index) for u in users):
        raise SchedulingError("every virtual user must appear exactly once")
    if not math.isclose(schedule.total_power, math.fsum(e.total for e in schedule.entries),
                        rel_tol=1e-12):
        raise SchedulingError("total power does not match entries")


def _self_pairs_allowed(owners: Sequence[int], M: int) -> bool:
    return len(owners) - M == 1


def propose_from_costs(costs: CostMatrix, M: int) -> tuple[list[int], list[tuple[int, int]]]:
    """Singles and pairs (virtual-user indices) chosen by the dendrogram heuristic."""
    n = costs.size
    check_load(n, M)
    order = leaf_order(agglomerative_cluster(costs))
    P = n - M
    A, B, S = order[:P], order[P:2 * P], order[2 * P:]
    own = costs.owners

    for t in range(P):
        if own[A[t]] != own[B[t]]:
            continue
        fixed = False
        # later positions of the second group
        for t2 in range(t + 1, P):
            if own[B[t2]] != own[A[t]] and own[B[t]] != own[A[t2]]:
                B[t], B[t2] = B[t2], B[t]
                fixed = True
                break
        # leftmost users left alone
        if not fixed:
            for k in range(len(S)):
                if own[S[k]] != own[A[t]]:
                    B[t], S[k] = S[k], B[t]
                    fixed = True
                    break
        # earlier positions, already settled
        if not fixed:
            for t2 in range(t):
                if own[B[t2]] != own[A[t]] and own[B[t]] != own[A[t2]]:
                    B[t], B[t2] = B[t2], B[t]
                    fixed = True
                    break
        if not fixed and not _self_pairs_allowed(own, M):
            raise SchedulingError("cannot avoid pairing a user with itself")
    return S, list(zip(A, B))


def schedule_virtual(users: Sequence[VirtualUser], M: int,
                     costs: CostMatrix | None = None) -> Schedule:
    if costs is None:
        costs = build_cost_matrix(users)
    singles, pairs = propose_from_costs(costs, M)
    return assemble(users, singles, pairs)


def schedule_proposed(profiles, M: int, L: int = 1) -> Schedule:
    users = virtual_users(profiles, L)
    check_load(len(users), M)
    return schedule_virtual(users, M)


# -- enumeration ------------------------------------------------------------

def count_combinations(K: int, M: int) -> int:
    """Number of ways to leave ``2M-K`` users alone and pair the rest."""
    if not (isinstance(K, (int, np.integer)) and isinstance(M, (int, np.integer))):
        raise TypeError("K and M must be integers")
    if not M < K <= 2 * M:
        raise ValueError(f"need M < K <= 2M, got K={K}, M={M}")
    n = math.comb(K, 2 * M - K)
    for m in range(1, K - M + 1):
        n *= 2 * m - 1
    return n


def _matchings(items: tuple[int, ...], owners):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k, j in enumerate(rest):
        if owners is not None and owners[first] == owners[j]:
            continue
        for m in _matchings(rest[:k] + rest[k + 1:], owners):
            yield ((first, j),) + m


def enumerate_combinations(n: int, M: int, owners=None):
    """Yield ``(singles, pairs)`` for every admissible combination in lexicographic order.

    With ``owners`` given, pairs of two replicas of the same user are skipped.
    """
    check_load(n, M)
    for singles in combinations(range(n), 2 * M - n):
        chosen = set(singles)
        rest = tuple(i for i in range(n) if i not in chosen)
        for pairs in _matchings(rest, owners):
            yield singles, pairs


def _owner_pattern(owners: Sequence[int]) -> tuple[int, ...]:
    index: dict[int, int] = {}
    return tuple(index.setdefault(o, len(index)) for o in owners)


@lru_cache(maxsize=64)
def _combination_table(n: int, M: int, pattern: tuple[int, ...] | None):
    combos = list(enumerate_combinations(n, M, pattern))
    if not combos and pattern is not None and _self_pairs_allowed(pattern, M):
        combos = list(enumerate_combinations(n, M, None))
    s, p = 2 * M - n, n - M
    singles = np.array([c[0] for c in combos], dtype=np.intp).reshape(len(combos), s)
    pairs = np.array([c[1] for c in combos], dtype=np.intp).reshape(len(combos), p, 2)
    return combos, singles, pairs


def schedule_exhaustive(users: Sequence[VirtualUser], M: int,
                        costs: CostMatrix | None = None) -> Schedule:
    """Minimum-power schedule over every admissible combination.

    Ties keep the lexicographically first combination. Refuses when the
    unrestricted combination count exceeds ``EXHAUSTIVE_LIMIT``.
    """
    n = len(users)
    check_load(n, M)
    count = count_combinations(n, M)
    if count > EXHAUSTIVE_LIMIT:
        raise TooManyCombinations(count)
    if costs is None:
        costs = build_cost_matrix(users)
    pattern = _owner_pattern(costs.owners) if len(set(costs.owners)) < n else None
    combos, singles, pairs = _combination_table(n, M, pattern)
    c = costs.cost
    totals = c[singles, singles].sum(axis=1) + c[pairs[..., 0], pairs[..., 1]].sum(axis=1)
    k = int(np.argmin(totals))
    best_singles, best_pairs = combos[k]
    return assemble(users, best_singles, best_pairs, evaluated=len(combos))


def random_combination(n: int, M: int, rng: np.random.Generator, owners=None,
                       max_tries: int = 10_000):
    """Uniform admissible combination.

    The singles are a uniform subset; the rest are matched by repeatedly
    pairing the lowest remaining index with a uniform partner. Draws with a
    forbidden self-pair are rejected, which keeps the result uniform.
    """
    check_load(n, M)
    for _ in range(max_tries):
        singles = sorted(int(i) for i in rng.choice(n, size=2 * M - n, replace=False))
        chosen = set(singles)
        rest = [i for i in range(n) if i not in chosen]
        pairs = []
        while rest:
            first = rest.pop(0)
            pairs.append((first, rest.pop(int(rng.integers(len(rest))))))
        if owners is None or all(owners[i] != owners[j] for i, j in pairs):
            return singles, pairs
        if _self_pairs_allowed(owners, M) and len(set(owners)) == 1:
            return singles, pairs
    raise SchedulingError("no admissible combination found")


def schedule_random(users: Sequence[VirtualUser], M: int, rng: np.random.Generator) -> Schedule:
    owners = [u.user_id for u in users]
    singles, pairs = random_combination(len(users), M, rng, owners)
    return assemble(users, singles, pairs)
