import itertools

import numpy as np
import pytest

from bnsens.dag import Dag
from bnsens.data import CategoricalDataset
from bnsens.errors import CapacityError
from bnsens.scoring import count_sufficient_stats, local_log_bdeu, total_log_bdeu
from bnsens.search import (SubsetCounts, best_order, best_parents, brute_force_map,
                           compute_local_score_table, enumerate_dags, learn_map,
                           reconstruct_dag, sink_table)

from conftest import random_dataset
from oracles import labeled_dag_count, random_dag


def bits(mask):
    return [j for j in range(mask.bit_length()) if mask >> j & 1]


class TestLocalScoreTable:
    def test_single_variable(self):
        ds = CategoricalDataset(np.array([[0], [1], [1]]), (2,))
        table = compute_local_score_table(ds, 1.0)
        assert list(table.entries()) == [
            (0, 0, pytest.approx(local_log_bdeu(count_sufficient_stats(ds, 0, []), 1.0)))]

    def test_entries_match_scoring_module(self, rng):
        ds = random_dataset(rng, 3, 50, max_arity=2)
        table = compute_local_score_table(ds, 0.8)
        entries = list(table.entries())
        assert len(entries) == len(table) == 12
        for i, mask, score in entries:
            direct = local_log_bdeu(count_sufficient_stats(ds, i, bits(mask)), 0.8)
            assert abs(score - direct) <= 1e-12

    def test_larger_instance_matches(self, rng):
        ds = random_dataset(rng, 6, 300)
        table = compute_local_score_table(ds, 3.0)
        for i, mask, score in table.entries():
            direct = local_log_bdeu(count_sufficient_stats(ds, i, bits(mask)), 3.0)
            assert score == pytest.approx(direct, abs=1e-10)

    def test_max_parents_entry_count(self, rng):
        ds = random_dataset(rng, 5, 30)
        table = compute_local_score_table(ds, 1.0, max_parents=1)
        assert len(table) == 5 * (1 + 4)
        assert len(list(table.entries())) == 25
        with pytest.raises(KeyError):
            table.local(0, 0b110)

    def test_capacity(self, rng):
        ds = CategoricalDataset(np.zeros((3, 21), dtype=int), (1,) * 21)
        with pytest.raises(CapacityError, match="21 variables"):
            compute_local_score_table(ds, 1.0)

    def test_count_cache_reuse(self, rng):
        ds = random_dataset(rng, 4, 60)
        counts = SubsetCounts(ds)
        for alpha in (0.1, 2.0):
            a = compute_local_score_table(ds, alpha, counts=counts).family
            b = compute_local_score_table(ds, alpha).family
            np.testing.assert_array_equal(a, b)

    def test_alpha_independent_histograms(self, rng):
        # scores for all-distinct configurations reduce to -N log r
        # every parent configuration occurs once
        ds = CategoricalDataset(np.array([[0, 0], [1, 1], [0, 2], [1, 3]]), (2, 4))
        table = compute_local_score_table(ds, 1e-3)
        assert table.local(0, 0b10) == pytest.approx(-4 * np.log(2), abs=1e-12)


class TestBestParents:
    def test_base_case(self, rng):
        ds = random_dataset(rng, 4, 40)
        table = compute_local_score_table(ds, 1.0)
        bp = best_parents(table)
        for i in range(4):
            assert bp.best(i, 0) == (0, table.local(i, 0))

    def test_strict_maximum_at_full_set(self):
        # child determined jointly by two parents: the full set wins outright
        rows = [(a, b, a ^ b) for a in (0, 1) for b in (0, 1)] * 25
        ds = CategoricalDataset(np.array(rows), (2, 2, 2))
        table = compute_local_score_table(ds, 1.0)
        bp = best_parents(table)
        assert bp.best(2, 0b011)[0] == 0b011

    def test_against_subset_scan(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 4, int(rng.integers(5, 60)))
            table = compute_local_score_table(ds, float(rng.choice([0.1, 1.0, 10.0])))
            bp = best_parents(table)
            for i in range(4):
                others = [v for v in range(4) if v != i]
                for k in range(4):
                    for cand in itertools.combinations(others, k):
                        cmask = sum(1 << v for v in cand)
                        subs = [sum(1 << v for v in s) for kk in range(k + 1)
                                for s in itertools.combinations(cand, kk)]
                        best = max(subs, key=lambda m: (table.local(i, m), -bin(m).count("1"), -m))
                        assert bp.best(i, cmask) == (best, table.local(i, best))

    def test_monotone(self, rng):
        ds = random_dataset(rng, 5, 50)
        bp = best_parents(compute_local_score_table(ds, 2.0))
        for i in range(5):
            s = bp.scores[i]
            for c in range(s.size):
                for b in range(4):
                    if c >> b & 1:
                        assert s[c ^ (1 << b)] <= s[c]


class TestOrderAndDag:
    def test_single_variable(self):
        ds = CategoricalDataset(np.array([[0], [1]]), (2,))
        bp = best_parents(compute_local_score_table(ds, 1.0))
        assert best_order(bp) == [0]
        assert reconstruct_dag([0], bp) == Dag.empty(1)

    def test_independent_variables_ascending(self):
        # full factorial design: exactly independent, identical marginals
        rows = list(itertools.product(range(2), repeat=4)) * 3
        ds = CategoricalDataset(np.array(rows), (2, 2, 2, 2))
        bp = best_parents(compute_local_score_table(ds, 1.0))
        assert best_order(bp) == [0, 1, 2, 3]
        dag, _ = learn_map(ds, 1.0)
        assert dag == Dag.empty(4)

    def test_reconstructed_scores_best_net(self, rng):
        for _ in range(10):
            ds = random_dataset(rng, 5, 80)
            bp = best_parents(compute_local_score_table(ds, 1.0))
            net, _ = sink_table(bp)
            dag = reconstruct_dag(best_order(bp), bp)
            assert total_log_bdeu(ds, dag, 1.0) == pytest.approx(net[-1], abs=1e-9)

    def test_order_must_be_permutation(self, rng):
        bp = best_parents(compute_local_score_table(random_dataset(rng, 3, 10), 1.0))
        with pytest.raises(ValueError):
            reconstruct_dag([0, 0, 1], bp)


class TestLearnMap:
    def test_one_variable(self):
        ds = CategoricalDataset(np.array([[0], [1], [1]]), (2,))
        dag, score = learn_map(ds, 1.0)
        assert dag == Dag.empty(1)
        assert score == pytest.approx(local_log_bdeu(count_sufficient_stats(ds, 0, []), 1.0))

    def test_identical_columns(self, rng):
        col = rng.integers(0, 2, 100)
        ds = CategoricalDataset(np.column_stack([col, col]), (2, 2))
        scores = {m: total_log_bdeu(ds, Dag.from_masks(m), 1.0)
                  for m in [(0, 0), (0, 1), (2, 0)]}
        dag, score = learn_map(ds, 1.0)
        assert dag.arc_count() == 1
        assert score == pytest.approx(max(scores.values()), abs=1e-9)
        assert scores[(0, 1)] == pytest.approx(scores[(2, 0)], abs=1e-9)

    def test_matches_brute_force(self, rng):
        for _ in range(15):
            ds = random_dataset(rng, 4, int(rng.integers(1, 50)))
            for alpha in (0.1, 1.0, 10.0):
                dag, score = learn_map(ds, alpha)
                bf_dag, bf_score = brute_force_map(ds, alpha)
                assert score == bf_score
                assert total_log_bdeu(ds, dag, alpha) == pytest.approx(
                    total_log_bdeu(ds, bf_dag, alpha), abs=1e-9)

    def test_dominates_random_dags(self, rng):
        ds = random_dataset(rng, 6, 120)
        dag, score = learn_map(ds, 2.0, max_parents=2)
        for _ in range(100):
            other = random_dag(rng, 6, max_parents=2)
            assert total_log_bdeu(ds, other, 2.0) <= score + 1e-9

    def test_max_parents_respected(self, rng):
        ds = random_dataset(rng, 6, 200)
        dag, _ = learn_map(ds, 50.0, max_parents=1)
        assert max(len(p) for p in dag.parents) <= 1

    def test_deterministic(self, rng):
        ds = random_dataset(rng, 7, 150)
        first = learn_map(ds, 1.0)
        for _ in range(3):
            assert learn_map(ds, 1.0) == first


class TestBruteForce:
    @pytest.mark.parametrize("n, count", [(1, 1), (2, 3), (3, 25), (4, 543)])
    def test_enumeration_count(self, n, count):
        assert len(enumerate_dags(n)) == count == labeled_dag_count(n)
        assert len(set(enumerate_dags(n))) == count

    def test_capacity(self, rng):
        with pytest.raises(CapacityError):
            brute_force_map(random_dataset(rng, 6, 5), 1.0)

    def test_all_enumerated_are_valid(self):
        for masks in enumerate_dags(3):
            Dag.from_masks(masks)
