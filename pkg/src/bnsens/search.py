"""Exact MAP structure search by dynamic programming over variable subsets.

The BDeu local score of ``i`` given parents ``S`` only depends on the
joint counts of ``S`` and of ``S + {i}``: writing

    F(W) = sum over observed configurations c of W of
           log Gamma(N_c + alpha/q_W) - log Gamma(alpha/q_W)

the local score is ``F(S + {i}) - F(S)``.  The histograms of counts behind
``F`` do not depend on ``alpha``, so they are computed once per dataset
(:class:`SubsetCounts`) and reused across an alpha sweep.

The search itself follows the usual three steps: best parent sets inside
every candidate set, best sinks for every subset of variables, and peeling
the sinks back into an ordering and a DAG.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from .dag import Dag
from .data import CategoricalDataset
from .errors import CapacityError
from .scoring import check_alpha
from .special import log_rising_factorial

MAX_VARS = 20
BRUTE_FORCE_MAX_VARS = 5


def popcount(x):
    return np.bitwise_count(np.asarray(x, dtype=np.int64)).astype(np.int64)


def compress(mask, i):
    """Drop bit ``i`` from ``mask`` (masks over V \\ {i} -> dense index)."""
    low = (1 << i) - 1
    return (mask & low) | ((mask >> (i + 1)) << i)


def expand(index, i):
    """Inverse of :func:`compress` for masks not containing ``i``."""
    low = (1 << i) - 1
    return (index & low) | ((index >> i) << (i + 1))


class SubsetCounts:
    """Count histograms of every variable subset up to a size limit.

    For subset ``W`` the stored histogram lists the distinct non-zero
    configuration counts of ``W`` and how often each occurs.
    """

    def __init__(self, data: CategoricalDataset, max_size: int | None = None,
                 max_vars: int = MAX_VARS):
        n = data.n_vars
        if n > max_vars:
            raise CapacityError(
                f"{n} variables exceed the exact-search limit of {max_vars}; "
                "select fewer variables (max_parents only trims the local score "
                "tables, the subset dynamic program stays exponential in n)")
        self.n = n
        self.n_rows = data.n_rows
        self.arities = data.arities
        self.max_size = n if max_size is None else min(max_size, n)
        self.q = np.ones(1 << n, dtype=float)
        self.computed = np.zeros(1 << n, dtype=bool)
        sub_idx, vals, mults = [], [], []

        codes = data.data
        n_rows = data.n_rows
        # depth-first over subsets built in increasing variable order
        stack = [(0, np.zeros(n_rows, dtype=np.int64), 1 if n_rows else 0, -1, 1)]
        while stack:
            mask, ids, distinct, last, q = stack.pop()
            self.computed[mask] = True
            self.q[mask] = float(q)
            if n_rows:
                if distinct == n_rows:
                    hv, hm = np.array([1]), np.array([n_rows])
                else:
                    _, cnt = np.unique(ids, return_counts=True)
                    hv, hm = np.unique(cnt, return_counts=True)
                sub_idx.append(np.full(hv.size, mask, dtype=np.int64))
                vals.append(hv)
                mults.append(hm)
            if bin(mask).count("1") >= self.max_size:
                continue
            for v in range(n - 1, last, -1):
                if distinct == n_rows:
                    new_ids, new_distinct = ids, distinct
                else:
                    joint = ids * self.arities[v] + codes[:, v]
                    _, new_ids, = np.unique(joint, return_inverse=True)
                    new_ids = new_ids.astype(np.int64)
                    new_distinct = int(new_ids.max()) + 1
                stack.append((mask | (1 << v), new_ids, new_distinct, v, q * self.arities[v]))

        if sub_idx:
            self._sub = np.concatenate(sub_idx)
            self._vals = np.concatenate(vals).astype(float)
            self._mults = np.concatenate(mults).astype(float)
        else:
            self._sub = np.zeros(0, dtype=np.int64)
            self._vals = self._mults = np.zeros(0)

    def family_scores(self, alpha: float) -> np.ndarray:
        """``F(W)`` for every subset; NaN where ``W`` exceeds the size limit."""
        alpha = check_alpha(alpha)
        a = alpha / self.q[self._sub]
        terms = self._mults * log_rising_factorial(a, self._vals)
        F = np.bincount(self._sub, weights=terms, minlength=1 << self.n)
        F[~self.computed] = np.nan
        return F


@dataclass(frozen=True)
class LocalScoreTable:
    """Local BDeu scores ``score(i | S)`` for all ``S`` within the parent cap."""

    n: int
    alpha: float
    max_parents: int | None
    family: np.ndarray   # F(W) per subset bitmask

    def __post_init__(self):
        self.family.setflags(write=False)

    @property
    def cap(self) -> int:
        return self.n - 1 if self.max_parents is None else min(self.max_parents, self.n - 1)

    def local(self, i: int, parents_mask: int) -> float:
        if parents_mask >> i & 1:
            raise KeyError(f"variable {i} cannot be its own parent")
        if bin(parents_mask).count("1") > self.cap:
            raise KeyError("parent set exceeds the max_parents cap")
        return float(self.family[parents_mask | (1 << i)] - self.family[parents_mask])

    def local_array(self, i: int) -> np.ndarray:
        """Scores of ``i`` for all subsets of V \\ {i}, indexed by compressed mask."""
        idx = np.arange(1 << (self.n - 1), dtype=np.int64)
        full = expand(idx, i)
        out = self.family[full | (1 << i)] - self.family[full]
        out[popcount(idx) > self.cap] = -np.inf
        return out

    def __len__(self) -> int:
        return self.n * sum(math.comb(self.n - 1, k) for k in range(self.cap + 1))

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(variable, parent bitmask, score)`` in variable, then mask order."""
        for i in range(self.n):
            for idx in range(1 << (self.n - 1)):
                if bin(idx).count("1") <= self.cap:
                    mask = int(expand(idx, i))
                    yield i, mask, self.local(i, mask)

    def dag_score(self, dag: Dag) -> float:
        """Total log score of ``dag``, summed exactly over family terms.

        Markov equivalent DAGs share the same family terms after
        cancellation, so they get bit-identical scores here.
        """
        if dag.n != self.n:
            raise ValueError("graph size does not match the score table")
        if any(len(p) > self.cap for p in dag.parents):
            raise ValueError("graph violates the max_parents cap")
        terms = []
        for i, m in enumerate(dag.masks):
            terms.append(float(self.family[m | (1 << i)]))
            terms.append(-float(self.family[m]))
        return math.fsum(terms)


def compute_local_score_table(data: CategoricalDataset, alpha: float,
                              max_parents: int | None = None, *,
                              counts: SubsetCounts | None = None,
                              max_vars: int = MAX_VARS) -> LocalScoreTable:
    alpha = check_alpha(alpha)
    if max_parents is not None and max_parents < 0:
        raise ValueError("max_parents must be >= 0")
    if counts is None:
        size = None if max_parents is None else max_parents + 1
        counts = SubsetCounts(data, size, max_vars=max_vars)
    elif max_parents is not None and counts.max_size < min(max_parents + 1, data.n_vars):
        raise ValueError("count cache was built for a smaller parent cap")
    elif max_parents is None and counts.max_size < data.n_vars:
        raise ValueError("count cache was built with a parent cap")
    return LocalScoreTable(data.n_vars, alpha, max_parents, counts.family_scores(alpha))


@dataclass(frozen=True)
class BestParentsTable:
    """For each variable ``i`` and candidate set ``C`` (compressed index),
    the best-scoring subset of ``C`` and its score."""

    n: int
    scores: tuple[np.ndarray, ...]
    best_sets: tuple[np.ndarray, ...]   # full bitmasks

    def best(self, i: int, candidates_mask: int) -> tuple[int, float]:
        if candidates_mask >> i & 1:
            raise KeyError(f"candidate set contains variable {i}")
        c = compress(candidates_mask, i)
        return int(self.best_sets[i][c]), float(self.scores[i][c])


def best_parents(table: LocalScoreTable) -> BestParentsTable:
    """Best parent set within every candidate set.

    Ties go to the smaller set, then to the smaller bitmask, so the result
    does not depend on the order in which subsets are visited.
    """
    n = table.n
    m = 1 << (n - 1)
    idx = np.arange(m, dtype=np.int64)
    scores, sets = [], []
    for i in range(n):
        score = table.local_array(i)
        best = idx.copy()
        pc = popcount(idx)
        for b in range(n - 1):
            with_b = idx[(idx >> b) & 1 == 1]
            without = with_b ^ (1 << b)
            s_o, s_c = score[without], score[with_b]
            b_o, b_c = best[without], best[with_b]
            p_o, p_c = pc[without], pc[with_b]
            take = (s_o > s_c) | ((s_o == s_c) & ((p_o < p_c) | ((p_o == p_c) & (b_o < b_c))))
            score[with_b] = np.where(take, s_o, s_c)
            best[with_b] = np.where(take, b_o, b_c)
            pc[with_b] = np.where(take, p_o, p_c)
        scores.append(score)
        sets.append(expand(best, i))
    return BestParentsTable(n, tuple(scores), tuple(sets))


def sink_table(bp: BestParentsTable) -> tuple[np.ndarray, np.ndarray]:
    """Best network score and best sink for every subset of variables.

    Among tied sinks the highest index wins, which puts lower indices
    earlier in the peeled ordering.
    """
    n = bp.n
    size = 1 << n
    masks = np.arange(size, dtype=np.int64)
    pc = popcount(masks)
    layers = np.argsort(pc, kind="stable")
    bounds = np.searchsorted(pc[layers], np.arange(n + 2))
    net = np.full(size, -np.inf)
    net[0] = 0.0
    sink = np.full(size, -1, dtype=np.int64)
    for k in range(1, n + 1):
        W = layers[bounds[k]:bounds[k + 1]]
        for s in range(n):
            sel = W[(W >> s) & 1 == 1]
            prev = sel ^ (1 << s)
            cand = net[prev] + bp.scores[s][compress(prev, s)]
            upd = cand >= net[sel]
            net[sel[upd]] = cand[upd]
            sink[sel[upd]] = s
    return net, sink


def best_order(bp: BestParentsTable) -> list[int]:
    """Variable ordering of an optimal network, sources first."""
    _, sink = sink_table(bp)
    return _peel(sink, bp.n)


def _peel(sink: np.ndarray, n: int) -> list[int]:
    order = []
    W = (1 << n) - 1
    while W:
        s = int(sink[W])
        order.append(s)
        W ^= 1 << s
    order.reverse()
    return order


def reconstruct_dag(order: list[int], bp: BestParentsTable) -> Dag:
    if sorted(order) != list(range(bp.n)):
        raise ValueError("order must be a permutation of the variables")
    masks = [0] * bp.n
    seen = 0
    for v in order:
        masks[v], _ = bp.best(v, seen)
        seen |= 1 << v
    return Dag.from_masks(masks)


def learn_map(data: CategoricalDataset, alpha: float, max_parents: int | None = None, *,
              counts: SubsetCounts | None = None, max_vars: int = MAX_VARS
              ) -> tuple[Dag, float]:
    """Globally optimal DAG under BDeu with equivalent sample size ``alpha``.

    Returns the DAG and its total log score.  Deterministic: identical
    inputs give the identical DAG.
    """
    table = compute_local_score_table(data, alpha, max_parents, counts=counts,
                                      max_vars=max_vars)
    bp = best_parents(table)
    dag = reconstruct_dag(best_order(bp), bp)
    return dag, table.dag_score(dag)


def _is_acyclic(masks: tuple[int, ...]) -> bool:
    remaining = (1 << len(masks)) - 1
    while remaining:
        free = [i for i in range(len(masks)) if remaining >> i & 1 and not masks[i] & remaining]
        if not free:
            return False
        for i in free:
            remaining ^= 1 << i
    return True


@lru_cache(maxsize=None)
def enumerate_dags(n: int) -> tuple[tuple[int, ...], ...]:
    """All labeled DAGs on ``n`` nodes as tuples of parent bitmasks."""
    if n > BRUTE_FORCE_MAX_VARS:
        raise CapacityError(f"DAG enumeration is limited to {BRUTE_FORCE_MAX_VARS} variables")
    choices = [[expand(c, i) for c in range(1 << (n - 1))] for i in range(n)]
    return tuple(m for m in itertools.product(*choices) if _is_acyclic(m))


def brute_force_map(data: CategoricalDataset, alpha: float, *,
                    table: LocalScoreTable | None = None) -> tuple[Dag, float]:
    """Exhaustive search over all DAGs (test oracle, at most five variables).

    Among exactly tied maximizers the one with fewest arcs, then the
    lexicographically smallest parent-mask tuple, is returned.
    """
    n = data.n_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise CapacityError(f"brute force search is limited to {BRUTE_FORCE_MAX_VARS} variables")
    if table is None:
        table = compute_local_score_table(data, alpha)
    best_key, best_masks, best_score = None, None, -math.inf
    for masks in enumerate_dags(n):
        score = table.dag_score(Dag.from_masks(masks))
        key = (-score, sum(bin(m).count("1") for m in masks), masks)
        if best_key is None or key < best_key:
            best_key, best_masks, best_score = key, masks, score
    return Dag.from_masks(best_masks), best_score
