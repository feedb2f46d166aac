"""IR metrics, the eval harness, and the planted synthetic benchmark."""

from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from enclip.corpus import ModelSet
from enclip.evalkit import (
    FixtureSpec,
    QueryRecord,
    RelevanceJudgment,
    average_precision_at_k,
    format_report_table,
    load_qrels,
    load_queries,
    mean_average_precision,
    precision_at_k,
    run_eval,
    synth_fixture,
    write_fixture,
)
from enclip.pipeline import PipelineConfig, run_pipeline
from enclip.search import cosine_topk
from tests.oracles import ap_bruteforce

SMALL = FixtureSpec(items=300, groups=5, models=3, dim=16)


class TestPrecisionAtK:
    def test_worked_example(self):
        assert precision_at_k(["A", "B", "C", "D"], {"A", "C"}, 4) == pytest.approx(0.5)

    def test_no_relevant_hit(self):
        assert precision_at_k(["A", "B"], {"Z"}, 2) == 0.0

    def test_all_relevant(self):
        assert precision_at_k(["A", "B"], {"A", "B"}, 2) == 1.0

    def test_short_list_keeps_denominator(self):
        # 2 hits in a 2-item list at k=4: missing slots count as misses
        assert precision_at_k(["A", "B"], {"A", "B"}, 4) == pytest.approx(0.5)

    def test_k_validation(self):
        with pytest.raises(ValueError):
            precision_at_k(["A"], {"A"}, 0)

    @settings(max_examples=50, deadline=None)
    @given(
        n=st.integers(min_value=0, max_value=20),
        k=st.integers(min_value=1, max_value=25),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_times_k_is_integer_and_bounded(self, n, k, seed):
        rng = np.random.default_rng(seed)
        ranked = [f"d{i}" for i in range(n)]
        relevant = {f"d{i}" for i in range(n) if rng.random() < 0.4} | {"other"}
        p = precision_at_k(ranked, relevant, k)
        assert 0.0 <= p <= 1.0
        assert (p * k) == pytest.approx(round(p * k), abs=1e-9)


class TestAveragePrecision:
    def test_worked_example(self):
        # (1*1 + 0.5*0 + (2/3)*1) / 2 = 5/6, printed as 0.833333
        got = average_precision_at_k(["A", "B", "C"], {"A", "C"}, 3)
        assert got == pytest.approx(5.0 / 6.0, abs=1e-9)
        assert f"{got:.6f}" == "0.833333"

    def test_nothing_retrieved(self):
        assert average_precision_at_k(["X", "Y"], {"A"}, 2) == 0.0

    def test_perfect_prefix(self):
        assert average_precision_at_k(["A", "B", "C", "D"], {"A", "B"}, 4) == 1.0

    def test_empty_relevant_rejected(self):
        with pytest.raises(ValueError):
            average_precision_at_k(["A"], set(), 1)

    def test_denominators(self):
        ranked = ["A", "B"]
        relevant = {"A", "B", "C", "D"}
        by_min = average_precision_at_k(ranked, relevant, 2, denominator="min")
        by_total = average_precision_at_k(ranked, relevant, 2, denominator="total")
        assert by_min == pytest.approx(1.0)
        assert by_total == pytest.approx(0.5)
        with pytest.raises(ValueError):
            average_precision_at_k(ranked, relevant, 2, denominator="bogus")

    @settings(max_examples=100, deadline=None)
    @given(
        n=st.integers(min_value=0, max_value=25),
        k=st.integers(min_value=1, max_value=30),
        seed=st.integers(min_value=0, max_value=2**31 - 1),
        denominator=st.sampled_from(["min", "total"]),
    )
    def test_matches_bruteforce(self, n, k, seed, denominator):
        rng = np.random.default_rng(seed)
        ranked = [f"d{i}" for i in rng.permutation(40)[:n]]
        relevant = {f"d{i}" for i in range(40) if rng.random() < 0.3} | {"extra"}
        got = average_precision_at_k(ranked, relevant, k, denominator)
        assert got == pytest.approx(ap_bruteforce(ranked, relevant, k, denominator), abs=1e-12)
        assert 0.0 <= got <= 1.0


class TestMeanAveragePrecision:
    def test_worked_example(self):
        got = mean_average_precision([5.0 / 6.0, 1.0])
        assert got == pytest.approx(11.0 / 12.0, abs=1e-9)
        assert f"{got:.6f}" == "0.916667"

    def test_identity_and_zero(self):
        assert mean_average_precision([0.42]) == pytest.approx(0.42)
        assert mean_average_precision([0.0, 0.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_average_precision([])

    def test_permutation_invariant(self):
        vals = [0.1, 0.9, 0.4, 0.7]
        assert mean_average_precision(vals) == pytest.approx(
            mean_average_precision(list(reversed(vals)))
        )


class TestFileLoading:
    def test_roundtrip_via_write_fixture(self, tmp_path):
        mats, queries, qrels = synth_fixture(0, SMALL)
        manifest = write_fixture(tmp_path, mats, queries, qrels)
        loaded_q = load_queries(manifest["queries"])
        loaded_j = load_qrels(manifest["qrels"])
        assert [q.query_id for q in loaded_q] == [q.query_id for q in queries]
        assert loaded_j[0].relevant == qrels[0].relevant
        assert np.allclose(loaded_q[0].vectors["m010"], queries[0].vectors["m010"])

    def test_query_missing_id_rejected(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text(json.dumps({"text": "hello"}) + "\n")
        with pytest.raises(ValueError, match="query_id"):
            load_queries(p)

    def test_qrel_empty_relevant_rejected(self, tmp_path):
        p = tmp_path / "j.jsonl"
        p.write_text(json.dumps({"query_id": "q1", "relevant": []}) + "\n")
        with pytest.raises(ValueError):
            load_qrels(p)

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "q.jsonl"
        p.write_text('{"query_id": "a"}\n\n{"query_id": "b"}\n')
        assert [q.query_id for q in load_queries(p)] == ["a", "b"]


@pytest.fixture(scope="module")
def small_fixture():
    mats, queries, qrels = synth_fixture(0, SMALL)
    return ModelSet(models=mats), queries, qrels


class TestRunEval:
    def test_missing_judgment_names_query(self, small_fixture):
        ms, queries, qrels = small_fixture
        with pytest.raises(ValueError, match=queries[-1].query_id):
            run_eval(ms, queries, qrels[:-1], k=5, config=PipelineConfig(n=5))

    def test_unknown_qrel_id_warns(self, small_fixture):
        ms, queries, qrels = small_fixture
        patched = [RelevanceJudgment(qrels[0].query_id, qrels[0].relevant | {"missing-item"})] + qrels[1:]
        with pytest.warns(UserWarning, match="missing-item"):
            run_eval(ms, queries[:1], patched[:1], k=5, config=PipelineConfig(n=5))

    def test_n_must_cover_k(self, small_fixture):
        ms, queries, qrels = small_fixture
        with pytest.raises(ValueError, match="cutoff"):
            run_eval(ms, queries, qrels, k=10, config=PipelineConfig(n=5))

    def test_no_queries_rejected(self, small_fixture):
        ms, _, _ = small_fixture
        with pytest.raises(ValueError, match="quer"):
            run_eval(ms, [], [], k=5, config=PipelineConfig(n=5))

    def test_report_structure(self, small_fixture):
        ms, queries, qrels = small_fixture
        report = run_eval(ms, queries[:4], qrels[:4], k=5, config=PipelineConfig(n=5))
        assert set(report.per_query) == {q.query_id for q in queries[:4]}
        assert set(report.baselines) == {m.model_id for m in ms}
        aps = [m.avg_prec_at_k for m in report.per_query.values()]
        assert report.map_score == pytest.approx(float(np.mean(aps)))
        assert report.config["k"] == 5

    def test_progress_callback(self, small_fixture):
        ms, queries, qrels = small_fixture
        seen = []
        run_eval(
            ms,
            queries[:3],
            qrels[:3],
            k=5,
            config=PipelineConfig(n=5),
            progress=lambda done, total: seen.append((done, total)),
        )
        assert seen == [(1, 3), (2, 3), (3, 3)]

    def test_top1_consistency_with_single_model(self):
        # with z=1 the first ranked item is provably the cosine top-1, so
        # mAP at k=1/n=1 matches the baseline exactly
        mats, queries, qrels = synth_fixture(3, FixtureSpec(items=120, groups=3, models=1, dim=12))
        ms = ModelSet(models=mats)
        report = run_eval(ms, queries, qrels, k=1, config=PipelineConfig(n=1))
        (baseline,) = report.baselines.values()
        assert report.map_score == pytest.approx(baseline.map_score, abs=1e-12)
        for qid, m in report.per_query.items():
            assert m.avg_prec_at_k == pytest.approx(
                baseline.per_query[qid].avg_prec_at_k, abs=1e-12
            )

    def test_single_model_set_equality(self):
        # z=1: the pool IS the model's top-k, so at n=top_k the returned
        # item set equals the plain cosine top-k set (order may differ
        # because selection walks cluster batches)
        mats, queries, qrels = synth_fixture(4, FixtureSpec(items=120, groups=3, models=1, dim=12))
        ms = ModelSet(models=mats)
        config = PipelineConfig(n=15, top_k_per_model=15)
        for q in queries[:4]:
            vecs = [q.vectors[m.model_id] for m in ms]
            result, _ = run_pipeline(ms, vecs, config)
            baseline = cosine_topk(ms.models[0], vecs[0], 15)
            assert {it.item_id for it in result.items} == {h.item_id for h in baseline}


class TestSynthFixture:
    def test_deterministic(self):
        a_mats, a_q, a_j = synth_fixture(5, SMALL)
        b_mats, b_q, b_j = synth_fixture(5, SMALL)
        for ma, mb in zip(a_mats, b_mats):
            assert ma == mb
        assert [q.query_id for q in a_q] == [q.query_id for q in b_q]
        assert all(x.relevant == y.relevant for x, y in zip(a_j, b_j))

    def test_epoch_schedule(self):
        mats, _, _ = synth_fixture(0, FixtureSpec(items=70, groups=2, models=7, dim=8))
        assert [m.epoch for m in mats] == [10, 30, 50, 80, 100, 120, 140]

    def test_z1_reduces_to_plain_benchmark(self):
        mats, queries, qrels = synth_fixture(1, FixtureSpec(items=100, groups=2, models=1, dim=8))
        assert len(mats) == 1
        ms = ModelSet(models=mats)
        report = run_eval(ms, queries, qrels, k=5, config=PipelineConfig(n=5))
        assert 0.0 <= report.map_score <= 1.0

    def test_identical_models_yield_identical_pool(self):
        # no model noise, no blind spots, no intruders: every checkpoint is
        # the same matrix, so the pool equals any single model's top-k set
        spec = FixtureSpec(
            items=100,
            groups=2,
            models=3,
            dim=8,
            model_noise=0.0,
            blind_per_model=0,
            intruders_per_model=0,
        )
        mats, queries, _ = synth_fixture(2, spec)
        assert np.array_equal(mats[0].vectors, mats[1].vectors)
        ms = ModelSet(models=mats)
        q = queries[0]
        vecs = [q.vectors[m.model_id] for m in ms]
        result, pool = run_pipeline(ms, vecs, PipelineConfig(n=10, top_k_per_model=10))
        single = cosine_topk(ms.models[0], vecs[0], 10)
        assert set(pool.entries) == {h.item_id for h in single}
        assert {it.item_id for it in result.items} == {h.item_id for h in single}
        assert all(e.frequency == 3 for e in pool.entries.values())

    def test_union_recall_beats_single_model(self):
        mats, queries, qrels = synth_fixture(0, FixtureSpec())
        ms = ModelSet(models=mats)
        judged = {j.query_id: j.relevant for j in qrels}
        union_total, best_single_total = 0, 0
        for q in queries[:8]:
            relevant = judged[q.query_id]
            per_model_hits = []
            for m in ms:
                hits = {h.item_id for h in cosine_topk(m, q.vectors[m.model_id], 20)}
                per_model_hits.append(len(hits & relevant))
            union = set()
            for m in ms:
                union |= {h.item_id for h in cosine_topk(m, q.vectors[m.model_id], 20)}
            union_total += len(union & relevant)
            best_single_total += max(per_model_hits)
        assert union_total > best_single_total

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            FixtureSpec(items=5, groups=10)
        with pytest.raises(ValueError):
            FixtureSpec(dim=1)


class TestReportTable:
    def test_shape_and_values(self, small_fixture):
        ms, queries, qrels = small_fixture
        report = run_eval(ms, queries, qrels, k=5, config=PipelineConfig(n=5))
        table = format_report_table(report, [m.model_id for m in ms])
        lines = table.splitlines()
        assert "@5" in lines[0]
        assert lines[1].split() == ["category", "m010", "m030", "m050", "ensemble"]
        assert lines[-1].startswith("ALL")
        assert len(lines) == 3 + 5 + 1  # title, header, rule, 5 groups, ALL
        assert f"{report.map_score:.3f}" in lines[-1]
