"""Selection: cluster cap, relaxation, baselines, exhaustive k-center oracle."""

import itertools
import math

import numpy as np
import pytest

from alrank.cluster import Clustering
from alrank.pool import ItemRecord, pool_from_items
from alrank.scorers import ScoreReport
from alrank.select import (cap_feasible, read_batch_jsonl, select_capped,
                           select_coreset_greedy, select_random,
                           select_random_capped, write_batch_jsonl)


def reports_for(values, direction="maximize", strategy="divergence"):
    return [ScoreReport(i, strategy, v, direction) for i, v in values.items()]


def fake_clustering(assignment, k=None):
    k = (max(assignment.values()) + 1) if k is None else k
    return Clustering(k, np.zeros((k, 1)), dict(assignment), 0.0)


def line_pool(points, labeled=()):
    items = [ItemRecord(str(p), np.array([float(p)]), ((1,),)) for p in points]
    pool = pool_from_items(items)
    labeled = {str(p) for p in labeled}
    pool.labeled = sorted(labeled)
    pool.unlabeled = sorted(set(pool.items) - labeled)
    return pool


class TestSelectCapped:
    def test_cap_not_binding(self):
        values = {f"i{k}": 1.0 - k / 10 for k in range(10)}
        clustering = fake_clustering({i: 0 for i in values}, k=1)
        batch = select_capped(reports_for(values), clustering, 3, phi=3)
        assert batch.ids == ["i0", "i1", "i2"]
        assert batch.relaxation_level == 0

    def test_single_cluster_forces_relaxation(self):
        values = {f"i{k}": 1.0 - k / 10 for k in range(10)}
        clustering = fake_clustering({i: 0 for i in values}, k=1)
        batch = select_capped(reports_for(values), clustering, 5, phi=3)
        assert batch.ids == ["i0", "i1", "i2", "i3", "i4"]
        assert batch.relaxation_level == 1
        assert batch.per_cluster_counts == {0: 5}

    def test_spread_scores_match_uncapped(self):
        values = {f"i{k}": 1.0 - k / 10 for k in range(5)}
        clustering = fake_clustering({f"i{k}": k for k in range(5)})
        capped = select_capped(reports_for(values), clustering, 5, phi=3)
        uncapped = select_capped(reports_for(values), clustering, 5, phi=None)
        assert capped.ids == uncapped.ids
        assert capped.relaxation_level == 0

    def test_minimize_direction_sorts_ascending(self):
        values = {"a": 2.0, "b": -1.0, "c": 0.5}
        clustering = fake_clustering({"a": 0, "b": 1, "c": 2})
        batch = select_capped(reports_for(values, "minimize", "likelihood"),
                              clustering, 2, phi=1)
        assert batch.ids == ["b", "c"]

    def test_score_ties_break_by_id(self):
        values = {"z": 1.0, "a": 1.0, "m": 1.0}
        clustering = fake_clustering({"z": 0, "a": 1, "m": 2})
        batch = select_capped(reports_for(values), clustering, 3, phi=3)
        assert batch.ids == ["a", "m", "z"]

    def test_batch_too_large(self):
        values = {"a": 1.0}
        clustering = fake_clustering({"a": 0})
        with pytest.raises(ValueError, match="batch size"):
            select_capped(reports_for(values), clustering, 2, phi=3)

    def test_unassigned_id(self):
        values = {"a": 1.0}
        with pytest.raises(ValueError, match="cluster assignment"):
            select_capped(reports_for(values), fake_clustering({"b": 0}), 1, phi=1)

    def test_cap_invariant_many_seeds(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            n = int(rng.integers(5, 40))
            n_clusters = int(rng.integers(1, 6))
            phi = int(rng.integers(1, 4))
            batch_size = int(rng.integers(1, n + 1))
            assignment = {f"i{k}": int(rng.integers(n_clusters)) for k in range(n)}
            values = {f"i{k}": float(rng.random()) for k in range(n)}
            batch = select_capped(reports_for(values), fake_clustering(assignment),
                                  batch_size, phi)
            cap = phi * (batch.relaxation_level + 1)
            assert max(batch.per_cluster_counts.values()) <= cap
            sizes = {}
            for cluster in assignment.values():
                sizes[cluster] = sizes.get(cluster, 0) + 1
            if batch.relaxation_level > 0:
                assert not cap_feasible(sizes.values(), batch_size, phi)
            else:
                assert cap_feasible(sizes.values(), batch_size, phi)
            assert len(batch.ids) == batch_size


class TestSelectRandom:
    def test_full_pool_boundary(self):
        pool = line_pool(range(8))
        batch = select_random(pool, 8, seed=0)
        assert sorted(batch.ids) == pool.ids()

    def test_deterministic(self):
        pool = line_pool(range(30))
        a = select_random(pool, 5, seed=4)
        b = select_random(pool, 5, seed=4)
        assert a.ids == b.ids

    def test_too_large(self):
        pool = line_pool(range(3))
        with pytest.raises(ValueError):
            select_random(pool, 4, seed=0)

    def test_uniform_frequencies(self):
        pool = line_pool(range(4))
        counts = {i: 0 for i in pool.ids()}
        for seed in range(10000):
            counts[select_random(pool, 1, seed=seed).ids[0]] += 1
        for c in counts.values():
            assert abs(c / 10000 - 0.25) < 0.02


class TestSelectRandomCapped:
    def test_huge_phi_matches_plain_random_support(self):
        pool = line_pool(range(12))
        clustering = fake_clustering({i: 0 for i in pool.ids()}, k=1)
        batch = select_random_capped(pool, clustering, 12, phi=10 ** 6, seed=1)
        assert sorted(batch.ids) == pool.ids()
        assert batch.relaxation_level == 0

    def test_single_cluster_phi_one(self):
        pool = line_pool(range(5))
        clustering = fake_clustering({i: 0 for i in pool.ids()}, k=1)
        batch = select_random_capped(pool, clustering, 1, phi=1, seed=2)
        assert len(batch.ids) == 1
        assert batch.relaxation_level == 0

    def test_cap_respected_over_seeds(self):
        pool = line_pool(range(24))
        assignment = {i: int(i) % 4 for i in pool.ids()}
        clustering = fake_clustering({i: int(float(i)) % 4 for i in pool.ids()}, k=4)
        for seed in range(100):
            batch = select_random_capped(pool, clustering, 8, phi=2, seed=seed)
            assert batch.relaxation_level == 0
            assert max(batch.per_cluster_counts.values()) <= 2


def covering_radius(pool, selected):
    centers = pool.feature_matrix(sorted(set(pool.labeled) | set(selected)))
    allpts = pool.feature_matrix(pool.ids())
    d2 = ((allpts[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
    return float(np.sqrt(d2.min(axis=1)).max())


class TestCoresetGreedy:
    def test_farthest_first_single(self):
        pool = line_pool([0, 1, 2, 5], labeled=[0])
        batch = select_coreset_greedy(pool, 1)
        assert batch.ids == ["5"]

    def test_hand_trace_with_tie(self):
        pool = line_pool([0, 1, 9, 10], labeled=[0])
        batch = select_coreset_greedy(pool, 2)
        # after picking 10, min-dists are 1 -> 1 and 9 -> 1; tie goes to id "1"
        assert batch.ids == ["10", "1"]

    def test_requires_anchor(self):
        pool = line_pool(range(4))
        with pytest.raises(ValueError, match="anchor"):
            select_coreset_greedy(pool, 1)

    def test_two_approximation_against_exhaustive(self):
        rng = np.random.default_rng(42)
        for trial in range(50):
            n = int(rng.integers(5, 13))
            dim = int(rng.integers(1, 4))
            pts = rng.normal(size=(n, dim)) * 3
            items = [ItemRecord(f"p{i:02d}", pts[i], ((1,),)) for i in range(n)]
            pool = pool_from_items(items)
            n_labeled = int(rng.integers(1, 3))
            labeled = set(list(pool.items)[:n_labeled])
            pool.labeled = sorted(labeled)
            pool.unlabeled = sorted(set(pool.items) - labeled)
            batch_size = int(rng.integers(1, min(4, len(pool.unlabeled)) + 1))
            greedy = covering_radius(pool, select_coreset_greedy(pool, batch_size).ids)
            best = math.inf
            for combo in itertools.combinations(pool.unlabeled, batch_size):
                best = min(best, covering_radius(pool, combo))
            assert greedy <= 2.0 * best + 1e-9


def test_batch_jsonl_round_trip(tmp_path):
    from alrank.select import SelectionBatch

    batch = SelectionBatch(3, ["b", "a"], {0: 2}, 1, "divergence")
    path = tmp_path / "batch.jsonl"
    write_batch_jsonl(batch, path)
    back = read_batch_jsonl(path)
    assert back.round == 3
    assert back.ids == ["b", "a"]
    assert back.relaxation_level == 1
    assert back.strategy == "divergence"
