"""Pooling, weighted scoring, head order, and the selection loop."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclip.cluster import ClusterAssignment
from enclip.ranker import (
    COMPARATORS,
    build_candidate_pool,
    enclip_rank,
    select_heads,
    weighted_score,
)
from tests.conftest import hits_from_ids, make_model_set
from tests.oracles import RefCandidate, reference_rank, ws_direct_sum


def clusters_from_labels(labels) -> ClusterAssignment:
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if len(labels) else 1
    return ClusterAssignment(
        labels=labels, centroids=np.zeros((k, 2)), inertia=0.0, k=k, silhouette=0.0, seed=0
    )


@pytest.fixture
def worked_pool():
    """z=3, m0={A,B,C}, m1={B,C,D}, m2={C,D,E}; sims descend 0.9/0.8/0.7."""
    rng = np.random.default_rng(0)
    ids = ["A", "B", "C", "D", "E"]
    stack = np.stack([rng.standard_normal((5, 8)) for _ in range(3)])
    ms = make_model_set(stack, epochs=[10, 30, 50], ids=ids)
    hit_lists = [
        hits_from_ids(["A", "B", "C"], 0),
        hits_from_ids(["B", "C", "D"], 1),
        hits_from_ids(["C", "D", "E"], 2),
    ]
    return build_candidate_pool(hit_lists, ms)


class TestWeightedScore:
    def test_all_false_is_zero(self):
        assert weighted_score([False] * 5) == 0.0

    def test_single_epoch_weights(self):
        assert weighted_score([False, False, False, False, True]) == pytest.approx(1.6)
        assert weighted_score([True]) == 0.1

    def test_weight_doubles_per_index(self):
        only_n0 = weighted_score([True, False])
        only_n1 = weighted_score([False, True])
        assert only_n1 == pytest.approx(2.0 * only_n0)

    def test_all_five_models(self):
        assert weighted_score([True] * 5) == pytest.approx(3.1)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=8))
    def test_bitwise_equals_direct_sum(self, occ):
        # summation order is pinned ascending, so equality is exact
        assert weighted_score(occ) == ws_direct_sum(occ)

    def test_monotone_in_occurrence(self):
        base = [True, False, True, False]
        more = [True, True, True, False]
        assert weighted_score(more) > weighted_score(base)


class TestBuildPool:
    def test_worked_example_frequencies_and_scores(self, worked_pool):
        e = worked_pool.entries
        assert {iid: e[iid].frequency for iid in "ABCDE"} == {
            "A": 1,
            "B": 2,
            "C": 3,
            "D": 2,
            "E": 1,
        }
        assert e["A"].weighted_score == pytest.approx(0.1)
        assert e["B"].weighted_score == pytest.approx(0.3)
        assert e["C"].weighted_score == pytest.approx(0.7)
        assert e["D"].weighted_score == pytest.approx(0.6)
        assert e["E"].weighted_score == pytest.approx(0.4)

    def test_occurrence_flags(self, worked_pool):
        assert worked_pool.entries["C"].occurrence == [True, True, True]
        assert worked_pool.entries["D"].occurrence == [False, True, True]

    def test_points_match_frequency(self, worked_pool):
        for entry in worked_pool.entries.values():
            assert len(entry.points) == entry.frequency
            assert [p.model_index for p in entry.points] == sorted(
                p.model_index for p in entry.points
            )
        assert len(worked_pool.all_points) == 9

    def test_point_matrix_shape_and_dim(self, worked_pool):
        pm = worked_pool.point_matrix()
        assert pm.shape == (9, 8)

    def test_best_similarity_is_max(self, worked_pool):
        assert worked_pool.entries["D"].best_similarity == pytest.approx(0.8)
        assert worked_pool.entries["C"].best_similarity == pytest.approx(0.9)

    def test_single_model_single_item(self):
        rng = np.random.default_rng(1)
        ms = make_model_set(rng.standard_normal((1, 3, 4)), epochs=[10], ids=["A", "B", "C"])
        pool = build_candidate_pool([hits_from_ids(["A"], 0)], ms)
        assert pool.entries["A"].frequency == 1
        assert pool.entries["A"].weighted_score == pytest.approx(0.1)

    def test_empty_pool_rejected(self):
        rng = np.random.default_rng(2)
        ms = make_model_set(rng.standard_normal((2, 3, 4)), epochs=[1, 2])
        with pytest.raises(ValueError, match="empty"):
            build_candidate_pool([[], []], ms)

    def test_hit_list_count_mismatch(self, worked_pool):
        rng = np.random.default_rng(3)
        ms = make_model_set(rng.standard_normal((2, 3, 4)), epochs=[1, 2])
        with pytest.raises(ValueError):
            build_candidate_pool([hits_from_ids(["it000"], 0)], ms)

    def test_unknown_item_rejected(self):
        rng = np.random.default_rng(4)
        ms = make_model_set(rng.standard_normal((1, 3, 4)), epochs=[1])
        with pytest.raises(ValueError, match="ghost"):
            build_candidate_pool([hits_from_ids(["ghost"], 0)], ms)


class TestSelectHeads:
    def test_worked_example_order(self, worked_pool):
        assert select_heads(worked_pool) == ["C", "D", "B", "E", "A"]

    def test_full_tie_falls_back_to_item_id(self):
        rng = np.random.default_rng(5)
        ms = make_model_set(rng.standard_normal((1, 3, 4)), epochs=[10], ids=["c", "a", "b"])
        pool = build_candidate_pool([hits_from_ids(["c", "a", "b"], 0, sims=[0.5, 0.5, 0.5])], ms)
        assert select_heads(pool) == ["a", "b", "c"]

    def test_singleton(self):
        rng = np.random.default_rng(6)
        ms = make_model_set(rng.standard_normal((1, 2, 4)), epochs=[10], ids=["A", "B"])
        pool = build_candidate_pool([hits_from_ids(["A"], 0)], ms)
        assert select_heads(pool) == ["A"]


class TestEnclipRank:
    def test_worked_example_top4(self, worked_pool):
        # all_points order: A0 B0 B1 C0 C1 C2 D1 D2 E2
        labels = [1, 1, 1, 0, 0, 0, 0, 0, 0]
        result = enclip_rank(worked_pool, clusters_from_labels(labels), 4)
        assert [it.item_id for it in result.items] == ["C", "D", "E", "B"]
        assert result.head_sequence[0] == "C"

    def test_n1_returns_first_head(self, worked_pool):
        labels = [1, 1, 1, 0, 0, 0, 0, 0, 0]
        result = enclip_rank(worked_pool, clusters_from_labels(labels), 1)
        assert [it.item_id for it in result.items] == ["C"]

    def test_first_item_is_first_head_property(self, worked_pool):
        rng = np.random.default_rng(7)
        for _ in range(20):
            labels = rng.integers(0, 3, size=9)
            result = enclip_rank(worked_pool, clusters_from_labels(labels), 5)
            assert result.items[0].item_id == result.head_sequence[0] == "C"

    def test_single_cluster_reduces_to_comparator_order(self, worked_pool):
        labels = [0] * 9
        result = enclip_rank(worked_pool, clusters_from_labels(labels), 5)
        assert [it.item_id for it in result.items] == ["C", "D", "B", "E", "A"]

    def test_single_model_similarity_order(self):
        rng = np.random.default_rng(8)
        ms = make_model_set(rng.standard_normal((1, 4, 4)), epochs=[10], ids=list("wxyz"))
        pool = build_candidate_pool(
            [hits_from_ids(["y", "w", "z", "x"], 0, sims=[0.9, 0.6, 0.5, 0.2])], ms
        )
        result = enclip_rank(pool, clusters_from_labels([0, 0, 0, 0]), 10)
        assert [it.item_id for it in result.items] == ["y", "w", "z", "x"]

    def test_result_size_min_of_n_and_pool(self, worked_pool):
        labels = [0] * 9
        for n in [1, 3, 5, 7, 12]:
            result = enclip_rank(worked_pool, clusters_from_labels(labels), n)
            assert len(result.items) == min(n, 5)

    def test_items_unique_and_from_pool(self, worked_pool):
        rng = np.random.default_rng(9)
        labels = rng.integers(0, 4, size=9)
        result = enclip_rank(worked_pool, clusters_from_labels(labels), 5)
        ids = [it.item_id for it in result.items]
        assert len(set(ids)) == len(ids)
        assert set(ids) <= set(worked_pool.entries)

    def test_label_count_mismatch_rejected(self, worked_pool):
        with pytest.raises(ValueError, match="9"):
            enclip_rank(worked_pool, clusters_from_labels([0, 1]), 3)

    def test_n_zero_rejected(self, worked_pool):
        with pytest.raises(ValueError):
            enclip_rank(worked_pool, clusters_from_labels([0] * 9), 0)

    def test_bad_comparator_rejected(self, worked_pool):
        with pytest.raises(ValueError, match="comparator"):
            enclip_rank(worked_pool, clusters_from_labels([0] * 9), 3, comparator="nope")

    def test_comparators_diverge_where_designed(self, worked_pool):
        # B (freq 2, ws 0.3) vs E (freq 1, ws 0.4): frequency ranks B first,
        # weighted score ranks E first
        labels = [0] * 9
        by_freq = enclip_rank(worked_pool, clusters_from_labels(labels), 5, "freq_then_ws")
        by_ws = enclip_rank(worked_pool, clusters_from_labels(labels), 5, "ws_only")
        ids_freq = [it.item_id for it in by_freq.items]
        ids_ws = [it.item_id for it in by_ws.items]
        assert ids_freq.index("B") < ids_freq.index("E")
        assert ids_ws.index("E") < ids_ws.index("B")

    def test_diagnostics_alignment(self, worked_pool):
        labels = [1, 1, 1, 0, 0, 0, 0, 0, 0]
        result = enclip_rank(worked_pool, clusters_from_labels(labels), 4)
        d = result.diagnostics
        assert d.point_items == [p.item_id for p in worked_pool.all_points]
        assert d.point_models == [p.model_index for p in worked_pool.all_points]
        assert len(d.labels) == 9
        assert d.coords.shape == (9, 2)
        # head C touches only cluster 0; head B only cluster 1
        assert d.head_cluster_ids[0] == [0]

    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_matches_straightline_reference(self, data):
        z = data.draw(st.integers(min_value=1, max_value=5), label="z")
        n_items = data.draw(st.integers(min_value=1, max_value=12), label="items")
        ids = [f"c{i:02d}" for i in range(n_items)]
        occs = []
        for i in range(n_items):
            occ = data.draw(
                st.lists(st.booleans(), min_size=z, max_size=z).filter(any), label=f"occ{i}"
            )
            occs.append(occ)
        sims = [
            data.draw(st.floats(min_value=-1, max_value=1, allow_nan=False), label=f"sim{i}")
            for i in range(n_items)
        ]
        total_points = sum(sum(o) for o in occs)
        n_clusters = data.draw(st.integers(min_value=1, max_value=6), label="k")
        labels = [
            data.draw(st.integers(min_value=0, max_value=n_clusters - 1), label=f"lab{j}")
            for j in range(total_points)
        ]
        n = data.draw(st.integers(min_value=1, max_value=12), label="n")
        comparator = data.draw(st.sampled_from(COMPARATORS), label="cmp")

        pool = _pool_from_spec(ids, occs, sims, z)
        got = enclip_rank(pool, clusters_from_labels(labels), n, comparator)
        # labels index pool.all_points, so the reference walks candidates in
        # pool entry order
        idx = {iid: i for i, iid in enumerate(ids)}
        ref_candidates = [
            RefCandidate(iid, occs[idx[iid]], sims[idx[iid]]) for iid in pool.entries
        ]
        ref = reference_rank(ref_candidates, labels, n, comparator)
        assert [it.item_id for it in got.items] == ref


def _pool_from_spec(ids, occs, sims, z):
    """Build a pool whose entries have exactly the given occurrence patterns."""
    rng = np.random.default_rng(42)
    stack = np.stack([rng.standard_normal((len(ids), 4)) for _ in range(z)])
    ms = make_model_set(stack, epochs=list(range(10, 10 + 10 * z, 10)), ids=ids)
    hit_lists = []
    for m in range(z):
        members = [i for i in range(len(ids)) if occs[i][m]]
        # rank within the list follows descending similarity, as retrieval would
        members.sort(key=lambda i: (-sims[i], ids[i]))
        hit_lists.append(hits_from_ids([ids[i] for i in members], m, sims=[sims[i] for i in members]))
    return build_candidate_pool(hit_lists, ms)
