"""Seeded synthetic data from a fixed ground-truth network.

The default network has six variables with arities ``(3, 2, 3, 2, 3, 3)``
and arcs ``0->1, 0->2, 1->3, 2->3, 2->4, 3->5, 4->5``.  Each conditional
distribution is drawn from a symmetric Dirichlet(``concentration``) using
``numpy.random.default_rng(seed)``, visiting variables in index order and
parent configurations in mixed-radix order; rows are then forward-sampled
with the same generator.
"""

from __future__ import annotations

import math

import numpy as np

from .dag import Dag
from .data import CategoricalDataset
from .scoring import config_index

DEFAULT_ARITIES = (3, 2, 3, 2, 3, 3)
DEFAULT_DAG = Dag([(), (0,), (0,), (1, 2), (2,), (3, 4)])
DEFAULT_SEED = 20240601


def sample_network(dag: Dag, arities, n_rows: int, seed: int,
                   concentration: float = 1.0) -> CategoricalDataset:
    rng = np.random.default_rng(seed)
    cpts = []
    for i, parents in enumerate(dag.parents):
        q = math.prod(arities[p] for p in parents)
        cpts.append(rng.dirichlet(np.full(arities[i], concentration), size=q))
    data = np.zeros((n_rows, dag.n), dtype=np.int64)
    for i in dag.topological_order():
        j = config_index(data, arities, dag.parents[i])
        cum = np.cumsum(cpts[i][j], axis=1)
        u = rng.random(n_rows)[:, None]
        data[:, i] = np.minimum((u >= cum).sum(axis=1), arities[i] - 1)
    return CategoricalDataset(data, tuple(arities), tuple(f"X{i}" for i in range(dag.n)))


def default_dataset(n_rows: int = 500, seed: int = DEFAULT_SEED) -> CategoricalDataset:
    """The six-variable benchmark dataset used by the sensitivity tests."""
    return sample_network(DEFAULT_DAG, DEFAULT_ARITIES, n_rows, seed)
