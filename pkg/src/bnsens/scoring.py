"""BDeu marginal likelihood and its arc-level decomposition.

All scores are natural logarithms.  With equivalent sample size ``alpha``,
a variable with ``r`` values and ``q`` parent configurations gets the
Dirichlet pseudo-count ``alpha / (q r)`` in every cell, i.e. ``alpha / q``
per parent configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dag import Dag
from .data import CategoricalDataset
from .errors import DomainError
from .special import STIRLING_MIN, log_gamma, log_rising_factorial, stirling_tail


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0):
        raise DomainError(f"equivalent sample size must be positive and finite, got {alpha}")
    return alpha


@dataclass(frozen=True)
class SufficientStats:
    """Counts ``N_ijk`` of one child under one parent set.

    Only configurations that occur in the data are stored; ``counts``
    expands them into the full ``q x r`` grid on demand.
    """

    child: int
    parents: tuple[int, ...]
    q: int
    r: int
    configs: np.ndarray      # sorted indices of observed parent configurations
    observed: np.ndarray     # len(configs) x r counts for those configurations

    @property
    def counts(self) -> np.ndarray:
        grid = np.zeros((self.q, self.r), dtype=np.int64)
        grid[self.configs] = self.observed
        return grid

    @property
    def n_rows(self) -> int:
        return int(self.observed.sum())


def config_index(data: np.ndarray, arities: Sequence[int], variables: Sequence[int]) -> np.ndarray:
    """Mixed-radix configuration index per row; lowest variable is least significant."""
    idx = np.zeros(data.shape[0], dtype=np.int64)
    stride = 1
    for v in sorted(variables):
        idx += data[:, v] * stride
        stride *= arities[v]
    return idx


def count_sufficient_stats(data: CategoricalDataset, child: int,
                           parents: Iterable[int]) -> SufficientStats:
    parents = tuple(sorted(set(int(p) for p in parents)))
    n = data.n_vars
    if child in parents:
        raise ValueError(f"child {child} is listed among its own parents")
    if not 0 <= child < n or any(not 0 <= p < n for p in parents):
        raise ValueError("variable index out of range")
    r = data.arities[child]
    q = math.prod(data.arities[p] for p in parents)
    j = config_index(data.data, data.arities, parents)
    configs, inverse = np.unique(j, return_inverse=True)
    observed = np.zeros((configs.size, r), dtype=np.int64)
    np.add.at(observed, (inverse, data.data[:, child]), 1)
    return SufficientStats(child, parents, q, r, configs, observed)


def log_multinomial_beta(args: Sequence[float]) -> float:
    """log B(a_1..a_K) = sum log Gamma(a_k) - log Gamma(sum a_k)."""
    a = np.asarray(args, dtype=float).ravel()
    if a.size == 0:
        raise DomainError("multinomial Beta needs at least one argument")
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise DomainError("multinomial Beta arguments must be positive and finite")
    return math.fsum(np.atleast_1d(log_gamma(a))) - log_gamma(math.fsum(a))


def log_uniform_beta(x: float, r: int) -> float:
    """log B(x, ..., x) with ``r`` equal arguments."""
    return r * log_gamma(x) - log_gamma(r * x)


def local_log_bdeu(stats: SufficientStats, alpha: float) -> float:
    """Log BDeu factor of one variable given its parents.

    Sum over parent configurations of ``log B(N_j + a) - log B(a)`` with
    per-cell pseudo-count ``a = alpha / (q r)``.  Unobserved
    configurations contribute exactly zero and are skipped.
    """
    alpha = check_alpha(alpha)
    cell = alpha / (stats.q * stats.r)
    per_config = alpha / stats.q
    if stats.observed.size == 0:
        return 0.0
    num = log_rising_factorial(cell, stats.observed).sum()
    den = log_rising_factorial(per_config, stats.observed.sum(axis=1)).sum()
    return float(num - den)


def _as_dag(dag, n: int) -> Dag:
    if not isinstance(dag, Dag):
        dag = Dag(dag)  # raises ValueError on cycles
    if dag.n != n:
        raise ValueError(f"graph has {dag.n} nodes but the data has {n} variables")
    return dag


def total_log_bdeu(data: CategoricalDataset, dag, alpha: float) -> float:
    """Log BDeu score of a whole network: the sum of its local scores."""
    dag = _as_dag(dag, data.n_vars)
    return math.fsum(local_log_bdeu(count_sufficient_stats(data, i, p), alpha)
                     for i, p in enumerate(dag.parents))


def prequential_log_ml(data: CategoricalDataset, dag, alpha: float,
                       row_order: Sequence[int] | None = None) -> float:
    """Log marginal likelihood accumulated one row at a time.

    Each row is predicted from the counts of the rows processed before it,
    then added to the counts.  Any row order gives the same total.
    """
    alpha = check_alpha(alpha)
    dag = _as_dag(dag, data.n_vars)
    n_rows = data.n_rows
    if row_order is None:
        row_order = range(n_rows)
    row_order = [int(t) for t in row_order]
    if sorted(row_order) != list(range(n_rows)):
        raise ValueError("row_order must be a permutation of the dataset rows")

    rows = data.data.tolist()
    families = []
    for i, parents in enumerate(dag.parents):
        q = math.prod(data.arities[p] for p in parents)
        r = data.arities[i]
        families.append((i, parents, alpha / (q * r), alpha / q, {}, {}))

    total = 0.0
    for t in row_order:
        row = rows[t]
        for i, parents, cell, per_config, cell_counts, config_counts in families:
            j = tuple(row[p] for p in parents)
            jk = (j, row[i])
            n_jk = cell_counts.get(jk, 0)
            n_j = config_counts.get(j, 0)
            total += math.log((n_jk + cell) / (n_j + per_config))
            cell_counts[jk] = n_jk + 1
            config_counts[j] = n_j + 1
    return total


def arc_penalty_per_config(r: int, q: int, K: int, alpha: float) -> float:
    """Change of the prior (denominator) term per original parent configuration.

    Adding a parent with ``K`` values replaces ``log B(x, .., x)`` by
    ``K log B(x/K, .., x/K)`` with ``x = alpha / (q r)``; the returned value
    is the resulting signed change of the log score.  Zero for ``K == 1``.
    """
    alpha = check_alpha(alpha)
    if min(r, q, K) < 1:
        raise DomainError("r, q and K must all be >= 1")
    if K == 1:
        return 0.0
    x = alpha / (q * r)
    y = x / K
    if y < STIRLING_MIN:
        return log_uniform_beta(x, r) - K * log_uniform_beta(y, r)
    # Stirling form; the large x log x terms cancel analytically
    tail = lambda v: r * stirling_tail(v) - stirling_tail(r * v)
    return float((K - 1) * (r - 1) / 2 * (math.log(x) - math.log(2 * math.pi))
                 - (K - 1) / 2 * math.log(r) - (r - 1) / 2 * K * math.log(K)
                 + tail(x) - K * tail(y))


def arc_gain(before: Sequence[int], after: Sequence[Sequence[int]], r: int, q: int,
             K: int, alpha: float) -> float:
    """Change of the data (numerator) term when one histogram splits in ``K``."""
    alpha = check_alpha(alpha)
    before = np.asarray(before, dtype=np.int64)
    after = np.asarray(after, dtype=np.int64).reshape(-1, before.size)
    if before.size != r or after.shape[0] != K:
        raise ValueError(f"expected one histogram of {r} counts split into {K}")
    if not np.array_equal(after.sum(axis=0), before):
        raise ValueError("split histograms do not sum to the original histogram")
    x = alpha / (q * r)
    y = x / K
    return (math.fsum(log_multinomial_beta(h + y) for h in after)
            - log_multinomial_beta(before + x))


@dataclass
class ArcDecomposition:
    alpha: float
    penalty_per_config: float
    total_penalty: float
    gains: list[float] = field(default_factory=list)
    net: float = 0.0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "penalty_per_config": self.penalty_per_config,
                "total_penalty": self.total_penalty, "gains": list(self.gains),
                "net": self.net}


def split_histograms(data: CategoricalDataset, child: int, parents: Sequence[int],
                     new_parent: int) -> np.ndarray:
    """Counts indexed ``[j, m, k]``: configuration j of ``parents``, value m of
    ``new_parent``, child value k."""
    parents = tuple(sorted(set(parents)))
    q = math.prod(data.arities[p] for p in parents)
    K = data.arities[new_parent]
    r = data.arities[child]
    j = config_index(data.data, data.arities, parents)
    hist = np.zeros((q, K, r), dtype=np.int64)
    np.add.at(hist, (j, data.data[:, new_parent], data.data[:, child]), 1)
    return hist


def arc_delta(data: CategoricalDataset, child: int, parents: Iterable[int],
              new_parent: int, alpha: float) -> ArcDecomposition:
    """Split the score change of adding ``new_parent -> child`` into penalty and gains."""
    alpha = check_alpha(alpha)
    parents = tuple(sorted(set(int(p) for p in parents)))
    if child in parents:
        raise ValueError("child is listed among its own parents")
    if new_parent == child or new_parent in parents:
        raise ValueError("new parent must differ from the child and the current parents")
    r = data.arities[child]
    K = data.arities[new_parent]
    hist = split_histograms(data, child, parents, new_parent)
    q = hist.shape[0]
    penalty = arc_penalty_per_config(r, q, K, alpha)
    gains = [arc_gain(hist[j].sum(axis=0), hist[j], r, q, K, alpha) for j in range(q)]
    total_penalty = q * penalty
    return ArcDecomposition(alpha=alpha, penalty_per_config=penalty,
                            total_penalty=total_penalty, gains=gains,
                            net=math.fsum([total_penalty, *gains]))
