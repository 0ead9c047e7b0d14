"""
验收测试
在合成两跳数据上验证召回方向性、退化规律、预算与去重、单次调用、轨迹回放、确定性和训练对标签
"""

import random
import time

import pytest

from src import plugins  # noqa: F401
from src.config.settings import EngineSettings
from src.core.batch_runner import BatchRunner
from src.core.pipeline import DrRagPipeline
from src.plugins.classifier_backends import ConstantClassifier, LexicalClassifier
from src.schemas.pipeline import PipelineConfig
from src.schemas.records import DatasetRecord
from src.services.index_store import build_indexes
from src.services.metrics import recall_rate
from src.services.pair_generator import PairCase, gen_training_pairs
from src.services.synth import SynthSpec, generate
from src.utils.clock import FrozenClock
from src.utils.jsonl import dumps_line
from tests.reference import PairClassifier, replay_trace

pytestmark = pytest.mark.acceptance


def build_suite(seed, num_queries=100, distractors=3):
    result = generate(SynthSpec(num_queries=num_queries, distractors_per_query=distractors, seed=seed))
    bundle = build_indexes(result.corpus(), EngineSettings())
    queries = [DatasetRecord.model_validate(row) for row in result.dataset_records()]
    return bundle, queries


def make_pipeline(bundle, classifier=None):
    return DrRagPipeline(
        bundle.corpus, bundle.bm25, bundle.vectors, classifier=classifier, clock=FrozenClock(),
    )


@pytest.fixture(scope="module")
def suite_seed7():
    return build_suite(7)


@pytest.fixture(scope="module")
def large_suite():
    return build_suite(7, num_queries=1000)


class TestDirectionalRecall:
    """QDC在合成数据上找回动态相关文档"""

    def test_sm_versus_qdc(self):
        started = time.perf_counter()
        bundle, queries = build_suite(7)
        pipeline = make_pipeline(bundle)

        sm = PipelineConfig(strategy="sm", k=2)
        qdc = PipelineConfig(strategy="qdc", k=2, k1=1, k2=2)
        sm_recall = [recall_rate(pipeline.run_single_stage(q, sm).final_context, q.gold_doc_ids) for q in queries]
        qdc_recall = [recall_rate(pipeline.run_qdc(q, qdc).final_context, q.gold_doc_ids) for q in queries]

        assert sum(sm_recall) / len(sm_recall) <= 0.55
        assert sum(qdc_recall) / len(qdc_recall) == 1.0
        assert time.perf_counter() - started < 5.0

    def test_thousand_queries(self, large_suite):
        """1000个查询时头实体和桥实体桶组合仍足够"""
        bundle, queries = large_suite
        pipeline = make_pipeline(bundle)

        sm = PipelineConfig(strategy="sm", k=2)
        qdc = PipelineConfig(strategy="qdc", k=2, k1=1, k2=2)
        sm_recall = [recall_rate(pipeline.run_single_stage(q, sm).final_context, q.gold_doc_ids) for q in queries]
        qdc_recall = [recall_rate(pipeline.run_qdc(q, qdc).final_context, q.gold_doc_ids) for q in queries]

        assert len(queries) == 1000
        assert len(bundle.corpus) == 5000
        assert sum(sm_recall) / len(sm_recall) <= 0.55
        assert sum(qdc_recall) / len(qdc_recall) == 1.0


class TestDegeneracy:
    """固定判定的分类器让CFS/CIS退化为QDC或只有第一阶段"""

    @pytest.mark.asyncio
    async def test_always_positive_equals_qdc(self, large_suite):
        bundle, queries = large_suite
        pipeline = make_pipeline(bundle, ConstantClassifier("positive"))
        for query in queries:
            for k in (2, 4):
                qdc = pipeline.run_qdc(query, PipelineConfig(strategy="qdc", k=k)).final_context
                cfs = await pipeline.run_cfs(query, PipelineConfig(strategy="cfs", k=k))
                cis = await pipeline.run_cis(query, PipelineConfig(strategy="cis", k=k))
                assert cfs.final_context == qdc
                assert cis.final_context == qdc

    @pytest.mark.asyncio
    async def test_always_negative_is_first_stage_only(self, large_suite):
        bundle, queries = large_suite
        pipeline = make_pipeline(bundle, ConstantClassifier("negative"))
        for query in queries:
            cfg = {"k": 4}
            first = [doc.doc_id for doc in pipeline.run_first_stage(query, PipelineConfig(strategy="qdc", **cfg))]
            cfs = await pipeline.run_cfs(query, PipelineConfig(strategy="cfs", **cfg))
            cis = await pipeline.run_cis(query, PipelineConfig(strategy="cis", **cfg))
            assert cfs.final_context == first
            assert cis.final_context == first


class TestBudget:
    """预算与去重"""

    @pytest.mark.asyncio
    async def test_every_strategy_and_k(self, suite_seed7):
        bundle, queries = suite_seed7
        pipeline = make_pipeline(bundle, LexicalClassifier())
        corpus_size = len(bundle.corpus)

        for strategy in ("bm25", "sm", "qdc", "cis", "cfs"):
            for k in (2, 3, 4, 6):
                for query in queries:
                    context = (await pipeline.retrieve(query, PipelineConfig(strategy=strategy, k=k))).final_context
                    assert len(context) <= k
                    assert len(context) == len(set(context))
                    if strategy == "sm":
                        assert len(context) == min(k, corpus_size)

    @pytest.mark.asyncio
    async def test_bm25_fills_budget_on_synth(self, suite_seed7):
        """每个查询都与自己的静态文档和干扰文档有词汇重叠"""
        bundle, queries = suite_seed7
        pipeline = make_pipeline(bundle)
        for k in (2, 3, 4):
            for query in queries:
                trace = await pipeline.retrieve(query, PipelineConfig(strategy="bm25", k=k))
                assert len(trace.final_context) == k

    @pytest.mark.asyncio
    async def test_cfs_falls_short_at_high_threshold(self, suite_seed7):
        bundle, queries = suite_seed7
        pipeline = make_pipeline(bundle, LexicalClassifier())
        cfg = PipelineConfig(strategy="cfs", k=6, classifier_threshold=0.9)

        sizes = [len((await pipeline.run_cfs(query, cfg)).final_context) for query in queries]

        assert min(sizes) < 6


class TestSingleCall:
    """每个查询恰好调用一次LLM"""

    @pytest.mark.asyncio
    async def test_steps_exactly_one(self, suite_seed7):
        bundle, queries = suite_seed7
        for strategy in ("bm25", "sm", "qdc", "cis", "cfs"):
            runner = BatchRunner(bundle, PipelineConfig(strategy=strategy, k=4), "mock", "lexical", jobs=8)
            rows = await runner.run(queries)

            assert runner.llm.call_count == len(queries)
            assert sum(row["llm_calls"] for row in rows) / len(rows) == 1.0


class TestTraceReplay:
    """轨迹回放"""

    @pytest.mark.asyncio
    async def test_random_runs_replay_exactly(self, suite_seed7):
        bundle, queries = suite_seed7
        rng = random.Random(2024)
        doc_ids = bundle.corpus.doc_ids

        for _ in range(200):
            query = rng.choice(queries)
            positives = {(rng.choice(doc_ids), rng.choice(doc_ids)) for _ in range(50)}
            positives |= {(a, b) for a in query.gold_doc_ids for b in query.gold_doc_ids if a != b}
            classifier = PairClassifier(
                (bundle.corpus.get(a).text, bundle.corpus.get(b).text) for a, b in positives
            )
            pipeline = make_pipeline(bundle, classifier)
            k = rng.choice([2, 3, 4, 6])
            strategy = rng.choice(["cfs", "cis"])
            cfg = PipelineConfig(strategy=strategy, k=k, cis_pairwise=rng.random() < 0.3)

            trace = await pipeline.retrieve(query, cfg)

            assert replay_trace(trace.to_dict(), k) == trace.final_context


class TestDeterminism:
    """确定性"""

    @pytest.mark.asyncio
    async def test_repeated_runs_identical(self, suite_seed7):
        bundle, queries = suite_seed7
        outputs = []
        for jobs in (1, 8):
            runner = BatchRunner(
                bundle, PipelineConfig(strategy="cfs", k=4), "mock", "lexical", jobs=jobs, seed=7,
            )
            rows = await runner.run(queries)
            outputs.append("\n".join(dumps_line(row) for row in rows))

        assert outputs[0] == outputs[1]

    def test_synth_identical(self):
        first = generate(SynthSpec(num_queries=50, distractors_per_query=3, seed=7))
        second = generate(SynthSpec(num_queries=50, distractors_per_query=3, seed=7))
        assert first.corpus_records() == second.corpus_records()


class TestPairContract:
    """训练对标签与比例"""

    def test_labels_match_gold_sets(self):
        result = generate(SynthSpec(num_queries=50, distractors_per_query=3, seed=7))
        corpus = result.corpus()
        dataset = [DatasetRecord.model_validate(row) for row in result.dataset_records()]
        gold_by_query = {record.question: set(record.gold_doc_ids) for record in dataset}

        pairs, summary = gen_training_pairs(dataset, corpus, (1, 1), seed=7)

        for pair in pairs:
            golds = gold_by_query[pair.query]
            both_gold = pair.doc_a_id in golds and pair.doc_b_id in golds
            assert pair.label.value == ("positive" if both_gold else "negative")
            if pair.case is PairCase.GOLD_DISTRACTOR:
                assert pair.doc_a_id in golds and pair.doc_b_id not in golds
            if pair.case is PairCase.DISTRACTOR_DISTRACTOR:
                assert pair.doc_a_id not in golds and pair.doc_b_id not in golds
        assert abs(summary.positives - summary.negatives) <= 1
