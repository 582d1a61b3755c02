"""Sensitivity of the MAP structure to the equivalent sample size.

Sweeps over alpha grids with summaries, score curves of fixed
structures, and two ways of choosing alpha: integrating it out under a
discrete uniform prior, or maximizing the marginal likelihood jointly over
(structure, alpha).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .dag import Dag
from .data import CategoricalDataset
from .equivalence import EquivalenceKey, equivalence_key
from .scoring import count_sufficient_stats, local_log_bdeu
from .search import MAX_VARS, SubsetCounts, learn_map


@dataclass(frozen=True)
class AlphaGrid:
    values: tuple[float, ...]
    descriptor: str = ""

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("alpha grid is empty")
        if not all(math.isfinite(v) and v > 0 for v in vals):
            raise ValueError("alpha values must be positive and finite")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("alpha values must be strictly increasing")
        object.__setattr__(self, "values", vals)
        if not self.descriptor:
            object.__setattr__(self, "descriptor", "list:" + ",".join(map(repr, vals)))

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> "AlphaGrid":
        return cls(tuple(values))

    @classmethod
    def linear(cls, start: float, stop: float, count: int) -> "AlphaGrid":
        vals = np.linspace(start, stop, int(count))
        return cls(tuple(vals), f"lin:{start!r}:{stop!r}:{int(count)}")

    @classmethod
    def logarithmic(cls, start: float, stop: float, count: int) -> "AlphaGrid":
        if start <= 0 or stop <= 0:
            raise ValueError("logarithmic grid bounds must be positive")
        vals = np.logspace(math.log10(start), math.log10(stop), int(count))
        vals[0] = start
        vals[-1] = stop
        return cls(tuple(vals), f"log:{start!r}:{stop!r}:{int(count)}")

    @classmethod
    def integers(cls, start: int, stop: int) -> "AlphaGrid":
        return cls(tuple(float(v) for v in range(int(start), int(stop) + 1)),
                   f"int:{int(start)}:{int(stop)}")

    @classmethod
    def parse(cls, text: str) -> "AlphaGrid":
        """Parse ``log:a:b:n``, ``lin:a:b:n``, ``int:a:b`` or ``list:x,y,...``."""
        kind, _, rest = text.partition(":")
        try:
            if kind == "list":
                return cls(tuple(float(v) for v in rest.split(",") if v.strip()), text)
            parts = rest.split(":")
            if kind == "int" and len(parts) == 2:
                return cls.integers(int(parts[0]), int(parts[1]))
            if kind in ("log", "lin") and len(parts) == 3:
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
                if count < 1:
                    raise ValueError("count must be >= 1")
                make = cls.logarithmic if kind == "log" else cls.linear
                grid = make(start, stop, count)
                return cls(grid.values, text)
        except ValueError as exc:
            raise ValueError(f"bad alpha grid {text!r}: {exc}") from None
        raise ValueError(f"bad alpha grid {text!r}; expected log:a:b:n, lin:a:b:n, "
                         "int:a:b or list:x,y,...")


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    dag: Dag
    log_score: float
    arc_count: int
    key: EquivalenceKey


@dataclass
class SweepResult:
    grid: AlphaGrid
    records: list[SweepRecord]
    names: tuple[str, ...] = ()

    def model_index(self) -> list[int]:
        """Index of each record's model among distinct keys, in first-seen order."""
        seen: dict[EquivalenceKey, int] = {}
        return [seen.setdefault(rec.key, len(seen)) for rec in self.records]

    def csv_rows(self, dag_ref: str = "models/model_{:03d}.json") -> list[list[str]]:
        return [[repr(rec.alpha), repr(rec.log_score), str(rec.arc_count),
                  rec.key.digest(), dag_ref.format(m)]
                for rec, m in zip(self.records, self.model_index())]


CSV_HEADER = ["alpha", "log_score", "arc_count", "equivalence_key_hash", "dag_json_ref"]


def sweep(data: CategoricalDataset, grid: AlphaGrid, max_parents: int | None = None, *,
          threads: int = 1, counts: SubsetCounts | None = None,
          max_vars: int = MAX_VARS) -> SweepResult:
    """Learn the MAP structure at every grid value, results in grid order."""
    if counts is None:
        size = None if max_parents is None else max_parents + 1
        counts = SubsetCounts(data, size, max_vars=max_vars)

    def one(alpha):
        dag, score = learn_map(data, alpha, max_parents, counts=counts)
        return SweepRecord(alpha, dag, score, dag.arc_count(), equivalence_key(dag))

    if threads > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, grid.values))
    else:
        records = [one(a) for a in grid.values]
    return SweepResult(grid, records, data.column_names)


@dataclass(frozen=True)
class SweepSummary:
    distinct_arc_counts: int
    max_possible_arcs: int
    arc_range: tuple[int, int]
    alpha_range_used: tuple[float, float]
    grid_range: tuple[float, float]
    distinct_models: int

    def to_dict(self) -> dict:
        return {
            "distinct_arc_counts": self.distinct_arc_counts,
            "max_possible_arcs": self.max_possible_arcs,
            "arcs": f"{self.distinct_arc_counts}/{self.max_possible_arcs + 1}",
            "arc_range": list(self.arc_range),
            "alpha_range_used": list(self.alpha_range_used),
            "grid_range": list(self.grid_range),
            "distinct_models": self.distinct_models,
        }


def _covering_window(alphas: list[float], labels: list[int]) -> tuple[float, float]:
    # narrowest run of consecutive grid points showing every distinct label
    need = len(set(labels))
    best = (0, len(labels) - 1)
    have: dict[int, int] = {}
    lo = 0
    for hi, lab in enumerate(labels):
        have[lab] = have.get(lab, 0) + 1
        while len(have) == need:
            if hi - lo < best[1] - best[0]:
                best = (lo, hi)
            have[labels[lo]] -= 1
            if not have[labels[lo]]:
                del have[labels[lo]]
            lo += 1
    return alphas[best[0]], alphas[best[1]]


def summarize(result: SweepResult) -> SweepSummary:
    """Compact summary of a sweep.

    ``alpha_range_used`` is the narrowest stretch of the grid in which all
    observed arc counts occur; ``max_possible_arcs`` is ``n (n - 1) / 2``.
    """
    if not result.records:
        raise ValueError("empty sweep")
    arcs = [rec.arc_count for rec in result.records]
    alphas = [rec.alpha for rec in result.records]
    n = result.records[0].dag.n
    return SweepSummary(
        distinct_arc_counts=len(set(arcs)),
        max_possible_arcs=n * (n - 1) // 2,
        arc_range=(min(arcs), max(arcs)),
        alpha_range_used=_covering_window(alphas, arcs),
        grid_range=(alphas[0], alphas[-1]),
        distinct_models=len({rec.key for rec in result.records}),
    )


def candidate_set_from_sweep(result: SweepResult) -> list[Dag]:
    """One DAG per distinct equivalence class, first occurrence kept."""
    seen = set()
    out = []
    for rec in result.records:
        if rec.key not in seen:
            seen.add(rec.key)
            out.append(rec.dag)
    return out


def score_curves(data: CategoricalDataset, dags: Sequence[Dag], grid: AlphaGrid) -> np.ndarray:
    """Matrix of total log scores, one row per DAG and one column per alpha."""
    stats = {}
    out = np.empty((len(dags), len(grid)))
    for d, dag in enumerate(dags):
        if dag.n != data.n_vars:
            raise ValueError("graph size does not match the data")
        for i, p in enumerate(dag.parents):
            if (i, p) not in stats:
                stats[i, p] = count_sufficient_stats(data, i, p)
    local = {}
    for a_idx, alpha in enumerate(grid.values):
        for d, dag in enumerate(dags):
            terms = []
            for i, p in enumerate(dag.parents):
                if (i, p, alpha) not in local:
                    local[i, p, alpha] = local_log_bdeu(stats[i, p], alpha)
                terms.append(local[i, p, alpha])
            out[d, a_idx] = math.fsum(terms)
    return out


@dataclass
class AlphaPosterior:
    candidates: list[Dag]
    keys: list[EquivalenceKey]
    log_evidence: np.ndarray      # log of the prior-averaged marginal likelihood
    posterior: np.ndarray
    grid: AlphaGrid
    best: int = field(init=False)

    def __post_init__(self):
        self.best = int(np.argmax(self.posterior))

    @property
    def winner(self) -> Dag:
        return self.candidates[self.best]


def integrate_out_alpha(data: CategoricalDataset, candidates: Sequence[Dag],
                        grid: AlphaGrid, *, curves: np.ndarray | None = None) -> AlphaPosterior:
    """Posterior over candidate structures with alpha averaged out.

    The grid acts as a discrete uniform prior on alpha; each candidate's
    evidence is ``log mean_alpha exp(score(G, alpha))``, normalized over the
    candidates in the log domain.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate structures")
    keys = [equivalence_key(d) for d in candidates]
    if len(set(keys)) != len(keys):
        raise ValueError("candidates must be pairwise distinct equivalence classes")
    if curves is None:
        curves = score_curves(data, candidates, grid)
    log_ev = logsumexp(curves, axis=1) - math.log(len(grid))
    post = np.exp(log_ev - logsumexp(log_ev))
    post /= math.fsum(post)
    return AlphaPosterior(candidates, keys, log_ev, post, grid)


TIE_RTOL = 1e-12


def select_alpha_star(data: CategoricalDataset, grid: AlphaGrid,
                      max_parents: int | None = None, *,
                      result: SweepResult | None = None) -> tuple[Dag, float, float]:
    """The (structure, alpha) pair with the highest marginal likelihood.

    Ties go to the smaller alpha; scores within ``TIE_RTOL`` (relative)
    count as ties, since equal scores at different alpha rarely agree to
    the last bit.  Pass ``result`` to reuse a sweep over
    the same grid.
    """
    if result is None:
        result = sweep(data, grid, max_parents)
    elif tuple(r.alpha for r in result.records) != grid.values:
        raise ValueError("sweep result was computed on a different grid")
    best = result.records[0]
    for rec in result.records[1:]:
        if rec.log_score - best.log_score > TIE_RTOL * max(1.0, abs(best.log_score)):
            best = rec
    return best.dag, best.alpha, best.log_score


@dataclass
class SelectionReport:
    alpha_star: float
    star_dag: Dag
    star_score: float
    posterior: AlphaPosterior
    alpha_integrated: list[float]     # grid values whose MAP model is the posterior winner

    @property
    def agree(self) -> bool:
        return equivalence_key(self.star_dag) == self.posterior.keys[self.posterior.best]


def compare_selections(data: CategoricalDataset, result: SweepResult) -> SelectionReport:
    """Run both alpha selection methods on one sweep and compare their winners."""
    dag, a_star, score = select_alpha_star(data, result.grid, result=result)
    post = integrate_out_alpha(data, candidate_set_from_sweep(result), result.grid)
    win = post.keys[post.best]
    a_int = [rec.alpha for rec in result.records if rec.key == win]
    return SelectionReport(a_star, dag, score, post, a_int)
