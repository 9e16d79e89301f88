"""Pool partition, seeding, batch application, and JSONL round-trips."""

import json
import math

import numpy as np
import pytest

from alrank.pool import (ItemRecord, apply_batch, batch_size_for_round,
                         load_pool, load_pool_from_paths, pool_from_items,
                         seed_split, write_features_jsonl,
                         write_pool_state_jsonl, write_references_jsonl)
from alrank.select import SelectionBatch
from alrank.synthetic import SyntheticConfig, generate


def make_items(n, dim=3):
    rng = np.random.default_rng(0)
    return [ItemRecord(f"id-{i:04d}", rng.normal(size=dim), ((1, 2, 3),))
            for i in range(n)]


def feature_recs(items):
    return [{"id": it.id, "features": list(it.features)} for it in items]


def reference_recs(items):
    return [{"id": it.id, "references": [list(r) for r in it.references]} for it in items]


class TestLoadPool:
    def test_basic_construction(self):
        items = make_items(3)
        pool = load_pool(feature_recs(items), reference_recs(items))
        assert pool.n == 3
        assert len(pool.unlabeled) == 3
        assert pool.labeled == []
        assert pool.round == 0
        assert pool.ids() == sorted(it.id for it in items)

    def test_missing_reference_names_id(self):
        items = make_items(3)
        with pytest.raises(ValueError, match="id-0002"):
            load_pool(feature_recs(items), reference_recs(items[:2]))

    def test_missing_feature_names_id(self):
        items = make_items(3)
        with pytest.raises(ValueError, match="id-0002"):
            load_pool(feature_recs(items[:2]), reference_recs(items))

    def test_inconsistent_dimension(self):
        recs = [{"id": "a", "features": [1.0, 2.0]},
                {"id": "b", "features": [1.0, 2.0, 3.0]}]
        refs = [{"id": "a", "references": [[1]]}, {"id": "b", "references": [[1]]}]
        with pytest.raises(ValueError, match="dimension"):
            load_pool(recs, refs)

    def test_empty_reference_list_rejected(self):
        with pytest.raises(ValueError, match="empty reference"):
            load_pool([{"id": "a", "features": [1.0]}],
                      [{"id": "a", "references": []}])

    def test_duplicate_id_rejected(self):
        items = make_items(1)
        with pytest.raises(ValueError, match="duplicate"):
            load_pool(feature_recs(items) * 2, reference_recs(items))

    def test_synthetic_round_trip_byte_identical(self, tmp_path):
        cfg = SyntheticConfig(n_items=2000, n_val=1, n_components=20,
                              feature_dim=6, vocab_size=20, seed=13)
        train, _ = generate(cfg)
        f1, r1 = tmp_path / "f1.jsonl", tmp_path / "r1.jsonl"
        write_features_jsonl(train, f1)
        write_references_jsonl(train, r1)
        pool = load_pool_from_paths(f1, r1)
        f2, r2 = tmp_path / "f2.jsonl", tmp_path / "r2.jsonl"
        write_features_jsonl(pool.items.values(), f2)
        write_references_jsonl(pool.items.values(), r2)
        assert f1.read_bytes() == f2.read_bytes()
        assert r1.read_bytes() == r2.read_bytes()


class TestSeedSplit:
    def test_five_percent_of_100(self):
        pool = pool_from_items(make_items(100))
        seed_split(pool, 0.05, seed=3)
        assert len(pool.labeled) == 5
        assert len(pool.unlabeled) == 95

    def test_full_fraction(self):
        pool = pool_from_items(make_items(10))
        seed_split(pool, 1.0, seed=3)
        assert len(pool.labeled) == 10
        assert pool.unlabeled == []

    def test_deterministic(self):
        a = pool_from_items(make_items(100))
        b = pool_from_items(make_items(100))
        seed_split(a, 0.05, seed=7)
        seed_split(b, 0.05, seed=7)
        assert a.labeled == b.labeled

    def test_bad_fraction(self):
        pool = pool_from_items(make_items(10))
        for frac in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                seed_split(pool, frac, seed=0)

    def test_double_seed_rejected(self):
        pool = pool_from_items(make_items(10))
        seed_split(pool, 0.5, seed=0)
        with pytest.raises(ValueError, match="seeded"):
            seed_split(pool, 0.5, seed=0)


class TestApplyBatch:
    def test_grows_labeled_and_round(self):
        pool = pool_from_items(make_items(20))
        seed_split(pool, 0.25, seed=1)
        ids = pool.unlabeled[:5]
        apply_batch(pool, SelectionBatch(1, ids))
        assert pool.round == 1
        assert len(pool.labeled) == 10
        assert all(pool.round_labeled[i] == 1 for i in ids)

    def test_labeled_id_rejects_whole_batch(self):
        pool = pool_from_items(make_items(20))
        seed_split(pool, 0.25, seed=1)
        bad = [pool.unlabeled[0], pool.labeled[0]]
        before = (list(pool.labeled), list(pool.unlabeled), pool.round)
        with pytest.raises(ValueError, match="already labeled"):
            apply_batch(pool, SelectionBatch(1, bad))
        assert (pool.labeled, pool.unlabeled, pool.round) == before

    def test_unknown_id_rejected(self):
        pool = pool_from_items(make_items(5))
        with pytest.raises(ValueError, match="not in the pool"):
            apply_batch(pool, SelectionBatch(1, ["ghost"]))

    def test_nineteen_rounds_exhaust(self):
        pool = pool_from_items(make_items(100))
        seed_split(pool, 0.05, seed=2)
        while pool.unlabeled:
            size = batch_size_for_round(pool.n, 0.05, len(pool.unlabeled))
            apply_batch(pool, SelectionBatch(pool.round + 1, pool.unlabeled[:size]))
        assert pool.round == 19
        assert pool.unlabeled == []
        assert len(pool.labeled) == 100

    def test_partition_invariant_over_random_ops(self):
        pool = pool_from_items(make_items(60))
        seed_split(pool, 0.1, seed=5)
        rng = np.random.default_rng(5)
        while pool.unlabeled:
            size = int(rng.integers(1, min(7, len(pool.unlabeled)) + 1))
            ids = list(rng.choice(pool.unlabeled, size=size, replace=False))
            apply_batch(pool, SelectionBatch(pool.round + 1, ids))
            labeled, unlabeled = set(pool.labeled), set(pool.unlabeled)
            assert labeled | unlabeled == set(pool.items)
            assert not (labeled & unlabeled)


class TestPoolStateDump:
    def test_round_labels_recorded(self, tmp_path):
        pool = pool_from_items(make_items(8))
        seed_split(pool, 0.25, seed=1)
        first = pool.unlabeled[:2]
        apply_batch(pool, SelectionBatch(1, first))
        path = tmp_path / "state.jsonl"
        write_pool_state_jsonl(pool, path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == 8
        by_id = {r["id"]: r for r in rows}
        for item_id in first:
            assert by_id[item_id] == {"id": item_id, "labeled": True, "round_labeled": 1}
        unlabeled_rows = [r for r in rows if not r["labeled"]]
        assert all(r["round_labeled"] is None for r in unlabeled_rows)


def test_item_record_validation():
    with pytest.raises(ValueError, match="empty reference"):
        ItemRecord("a", np.zeros(2), ())
    with pytest.raises(ValueError, match="finite"):
        ItemRecord("a", np.array([np.nan, 0.0]), ((1,),))
    with pytest.raises(ValueError, match="flat"):
        ItemRecord("a", np.zeros((2, 2)), ((1,),))


def test_batch_size_truncation():
    assert batch_size_for_round(100, 0.05, 95) == 5
    assert batch_size_for_round(103, 0.05, 3) == 3
    assert math.ceil(0.05 * 103) == 6
