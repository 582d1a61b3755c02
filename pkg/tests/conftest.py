import numpy as np
import pytest

from bnsens.data import CategoricalDataset


def random_dataset(rng, n, n_rows, max_arity=3, min_arity=2, couple=0.6):
    """Random categorical data with some chained dependence between columns."""
    arities = tuple(int(a) for a in rng.integers(min_arity, max_arity + 1, size=n))
    cols = []
    for i, r in enumerate(arities):
        col = rng.integers(0, r, size=n_rows)
        if i and rng.random() < couple:
            src = cols[int(rng.integers(0, i))]
            copy = rng.random(n_rows) < 0.7
            col = np.where(copy, src % r, col)
        cols.append(col)
    data = np.column_stack(cols) if n_rows else np.zeros((0, n), dtype=np.int64)
    return CategoricalDataset(data, arities)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def worked_example():
    """Child V8 (3 values), parent V11 (2 values), new parent V3 (3 values),
    with the joint counts of a reference arc-addition example."""
    splits = {0: [(442, 11, 0), (2, 1, 0), (2, 0, 0)],
              1: [(34, 29, 5), (22, 39, 12), (21, 37, 42)]}
    rows = []
    for p, hists in splits.items():
        for m, h in enumerate(hists):
            for k, c in enumerate(h):
                rows += [(p, m, k)] * c
    return CategoricalDataset(np.array(rows), (2, 3, 3), ("V11", "V3", "V8"))
