"""
DR-RAG检索流水线
两阶段检索（静态相关文档 + 查询-文档拼接召回的动态相关文档），可选分类器过滤，
最后只调用一次LLM
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..config.settings import EngineSettings, settings as global_settings
from ..schemas.pipeline import PipelineConfig, Strategy
from ..schemas.records import DatasetRecord
from ..services.bm25_index import BM25Index
from ..services.classifier import ClassifierVerdict, classify
from ..services.corpus import CorpusHandle, Document
from ..services.llm_client import parse_answer
from ..services.retrieval import Retriever, ScoredDoc, concat_query
from ..services.vector_index import VectorIndex
from ..utils.clock import Clock
from ..utils.logger import logger
from .backend import ClassifierBackend, CompletionRequest, LLMBackend
from .errors import BackendTransportError, QueryFailedError, UsageError

FIRST_STAGE = "first"
SECOND_STAGE = "second"

PROMPT_RULE = "-" * 42

PROMPT_PREAMBLE = "You are a reading comprehension expert, and you need to complete a reading comprehension task."

PROMPT_INSTRUCTION = (
    "After reading the documents above, answering the following question. Reasoning step by step. "
    "At last, you should output the final result via the following format:\n"
    "Answer: <your answer based on the documents>;\n"
    "Please answer the question directly."
)

PROMPT_CLOSING = "Give your analysis process first, and then output your answer in a specified format."


@dataclass
class ContextEntry:
    """Cnt中的一篇文档"""
    doc_id: str
    stage: str
    score: float
    rank: int
    parent_doc_id: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "stage": self.stage,
            "parent_doc_id": self.parent_doc_id,
            "score": self.score,
            "rank": self.rank,
        }


@dataclass
class SecondStageCandidates:
    """某个父文档的第二阶段候选"""
    parent_doc_id: str
    candidates: List[ScoredDoc]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parent_doc_id": self.parent_doc_id,
            "candidates": [candidate.to_dict() for candidate in self.candidates],
        }


@dataclass
class RetrievalTrace:
    """一次流水线运行的完整轨迹"""
    query_id: str
    strategy: str
    k: int
    k1: int
    k2: Optional[int]
    threshold: Optional[float] = None
    first_stage: List[ScoredDoc] = field(default_factory=list)
    second_stage: List[SecondStageCandidates] = field(default_factory=list)
    verdicts: List[ClassifierVerdict] = field(default_factory=list)
    context: List[ContextEntry] = field(default_factory=list)
    removed_doc_ids: List[str] = field(default_factory=list)
    llm_calls: int = 0
    llm_retries: int = 0
    answer_parse_ok: Optional[bool] = None
    wall_time_ms: float = 0.0

    @property
    def final_context(self) -> List[str]:
        """Cnt，按加入顺序"""
        return [entry.doc_id for entry in self.context]

    def contains(self, doc_id: str) -> bool:
        return any(entry.doc_id == doc_id for entry in self.context)

    def add(self, entry: ContextEntry):
        self.context.append(entry)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "strategy": self.strategy,
            "k": self.k,
            "k1": self.k1,
            "k2": self.k2,
            "threshold": self.threshold,
            "first_stage": [doc.to_dict() for doc in self.first_stage],
            "second_stage_candidates": [item.to_dict() for item in self.second_stage],
            "verdicts": [verdict.to_dict() for verdict in self.verdicts],
            "context": [entry.to_dict() for entry in self.context],
            "removed_doc_ids": list(self.removed_doc_ids),
            "final_context": self.final_context,
            "llm_calls": self.llm_calls,
            "llm_retries": self.llm_retries,
            "answer_parse_ok": self.answer_parse_ok,
            "wall_time_ms": self.wall_time_ms,
        }


def assemble_prompt(question: str, context_docs: Sequence[Document]) -> str:
    """
    组装阅读理解prompt

    文档按Cnt顺序以 "Document i:" 编号，正文原样引用；问题只出现一次
    """
    lines = [PROMPT_PREAMBLE, PROMPT_RULE, "Contexts", ""]
    for i, doc in enumerate(context_docs, start=1):
        lines.append(f"Document {i}:")
        lines.append(doc.text)
        lines.append("")
    lines.extend([PROMPT_RULE, PROMPT_INSTRUCTION, PROMPT_RULE, "Question", question, PROMPT_RULE, PROMPT_CLOSING])
    return "\n".join(lines)


class DrRagPipeline:
    """检索流水线，索引只读，可被多个查询并发共享"""

    def __init__(
        self,
        corpus: CorpusHandle,
        bm25: BM25Index,
        vectors: VectorIndex,
        classifier: Optional[ClassifierBackend] = None,
        llm: Optional[LLMBackend] = None,
        clock: Optional[Clock] = None,
        settings: Optional[EngineSettings] = None,
        seed: Optional[int] = None,
    ):
        self.corpus = corpus
        self.bm25 = bm25
        self.vectors = vectors
        self.classifier = classifier
        self.llm = llm
        self.clock = clock or Clock()
        self.settings = settings or global_settings
        self.seed = seed

    def retriever_for(self, cfg: PipelineConfig) -> Retriever:
        """单阶段策略用自身的检索器，两阶段策略用base_retriever"""
        if cfg.strategy == Strategy.BM25:
            return self.bm25
        if cfg.strategy == Strategy.SM:
            return self.vectors
        return self.bm25 if cfg.base_retriever.value == "bm25" else self.vectors

    def _new_trace(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        return RetrievalTrace(
            query_id=query.query_id,
            strategy=cfg.strategy.value,
            k=cfg.k,
            k1=cfg.first_stage_count,
            k2=cfg.second_stage_depth,
            threshold=cfg.classifier_threshold if cfg.strategy.needs_classifier else None,
        )

    def run_first_stage(self, query: DatasetRecord, cfg: PipelineConfig) -> List[ScoredDoc]:
        """第一阶段：检索静态相关文档，全部无条件进入Cnt"""
        if len(self.corpus) == 0:
            return []
        return self.retriever_for(cfg).retrieve(query.question, cfg.first_stage_count)

    def _start(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        trace = self._new_trace(query, cfg)
        trace.first_stage = self.run_first_stage(query, cfg)
        for doc in trace.first_stage:
            trace.add(ContextEntry(doc_id=doc.doc_id, stage=FIRST_STAGE, score=doc.score, rank=doc.rank))
        return trace

    def _second_stage(self, query: DatasetRecord, cfg: PipelineConfig, parent: Document) -> List[ScoredDoc]:
        """
        用 q* = 查询+父文档 检索k2个候选，不预先排除Cnt中的文档

        concat_second_stage关闭时只用原查询检索
        """
        text = concat_query(query.question, parent) if cfg.concat_second_stage else query.question
        return self.retriever_for(cfg).retrieve(text, cfg.k2)

    def run_single_stage(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        """BM25/SM基线：直接取top-k"""
        return self._start(query, cfg)

    def run_qdc(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        """
        查询-文档拼接（QDC）

        按第一阶段排名依次处理父文档，每个父文档加入第一个不在Cnt中的候选，|Cnt|达到k即停止
        """
        trace = self._start(query, cfg)
        for parent in list(trace.first_stage):
            if len(trace.context) >= cfg.k:
                break
            candidates = self._second_stage(query, cfg, self.corpus.get(parent.doc_id))
            trace.second_stage.append(SecondStageCandidates(parent.doc_id, candidates))
            for candidate in candidates:
                if not trace.contains(candidate.doc_id):
                    trace.add(ContextEntry(
                        doc_id=candidate.doc_id,
                        stage=SECOND_STAGE,
                        score=candidate.score,
                        rank=candidate.rank,
                        parent_doc_id=parent.doc_id,
                    ))
                    break
        return trace

    def _require_classifier(self) -> ClassifierBackend:
        if self.classifier is None:
            raise UsageError("cis/cfs策略需要配置分类器后端")
        return self.classifier

    async def _classify(
        self,
        query: DatasetRecord,
        cfg: PipelineConfig,
        doc_a: Document,
        doc_b: Document,
        parent_doc_id: str,
        candidate_doc_id: str,
    ) -> ClassifierVerdict:
        try:
            return await classify(
                self._require_classifier(),
                query.question,
                doc_a,
                doc_b,
                cfg.classifier_threshold,
                parent_doc_id=parent_doc_id,
                candidate_doc_id=candidate_doc_id,
            )
        except BackendTransportError as e:
            raise QueryFailedError(query.query_id, e) from e

    async def run_cis(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        """
        分类器反向筛选（CIS）

        先做QDC，再把每个第二阶段文档d'与所有第一阶段文档d_i按 (q, d', d_i) 判断，
        没有任何正判的d'被移除；第一阶段文档从不移除
        """
        self._require_classifier()
        trace = self.run_qdc(query, cfg)
        second_stage = [entry for entry in trace.context if entry.stage == SECOND_STAGE]

        removed = []
        for entry in second_stage:
            candidate_doc = self.corpus.get(entry.doc_id)
            if cfg.cis_pairwise:
                partners = [other.doc_id for other in trace.context if other.doc_id != entry.doc_id]
            else:
                partners = [doc.doc_id for doc in trace.first_stage]

            keep = False
            for partner_id in partners:
                verdict = await self._classify(
                    query, cfg, candidate_doc, self.corpus.get(partner_id),
                    parent_doc_id=partner_id, candidate_doc_id=entry.doc_id,
                )
                trace.verdicts.append(verdict)
                keep = keep or verdict.is_positive
            if not keep:
                removed.append(entry.doc_id)

        if removed:
            removed_ids = set(removed)
            trace.removed_doc_ids = removed
            trace.context = [entry for entry in trace.context if entry.doc_id not in removed_ids]
        return trace

    async def run_cfs(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        """
        分类器正向选择（CFS）

        每个父文档d_i按排名扫描候选，加入第一个不在Cnt中且 C(q, d_i, d') 为正的候选；
        没有合格候选时该父文档不加入任何文档，|Cnt|可能小于k
        """
        self._require_classifier()
        trace = self._start(query, cfg)
        for parent in list(trace.first_stage):
            if len(trace.context) >= cfg.k:
                break
            parent_doc = self.corpus.get(parent.doc_id)
            candidates = self._second_stage(query, cfg, parent_doc)
            trace.second_stage.append(SecondStageCandidates(parent.doc_id, candidates))

            for candidate in candidates:
                if trace.contains(candidate.doc_id):
                    continue
                verdict = await self._classify(
                    query, cfg, parent_doc, self.corpus.get(candidate.doc_id),
                    parent_doc_id=parent.doc_id, candidate_doc_id=candidate.doc_id,
                )
                trace.verdicts.append(verdict)
                if verdict.is_positive:
                    trace.add(ContextEntry(
                        doc_id=candidate.doc_id,
                        stage=SECOND_STAGE,
                        score=candidate.score,
                        rank=candidate.rank,
                        parent_doc_id=parent.doc_id,
                    ))
                    break
        return trace

    async def retrieve(self, query: DatasetRecord, cfg: PipelineConfig) -> RetrievalTrace:
        """按策略分派检索"""
        if cfg.strategy == Strategy.QDC:
            return self.run_qdc(query, cfg)
        if cfg.strategy == Strategy.CIS:
            return await self.run_cis(query, cfg)
        if cfg.strategy == Strategy.CFS:
            return await self.run_cfs(query, cfg)
        return self.run_single_stage(query, cfg)

    async def answer_query(self, query: DatasetRecord, cfg: PipelineConfig) -> Tuple[str, RetrievalTrace]:
        """
        回答一个查询：检索、组装prompt、调用一次LLM、解析答案

        Raises:
            UsageError: 缺少LLM或分类器后端
            QueryFailedError: 分类器或LLM后端请求失败
        """
        if self.llm is None:
            raise UsageError("未配置LLM后端")

        started = self.clock.now()
        trace = await self.retrieve(query, cfg)

        context_docs = [self.corpus.get(doc_id) for doc_id in trace.final_context]
        request = CompletionRequest(
            prompt=assemble_prompt(query.question, context_docs),
            max_tokens=self.settings.llm_max_tokens,
            temperature=self.settings.llm_temperature,
            seed=self.seed,
        )
        try:
            result = await self.llm.complete(request)
        except BackendTransportError as e:
            raise QueryFailedError(query.query_id, e) from e

        parsed = parse_answer(result.text)
        if not parsed.parse_ok:
            logger.warning(f"查询 {query.query_id} 的LLM输出没有Answer行，使用整段输出")

        trace.llm_calls = 1
        trace.llm_retries = result.retries
        trace.answer_parse_ok = parsed.parse_ok
        trace.wall_time_ms = self.clock.elapsed_ms(started)
        logger.debug(
            f"查询 {query.query_id} 完成: strategy={cfg.strategy.value}, "
            f"context={trace.final_context}, parse_ok={parsed.parse_ok}"
        )
        return parsed.extracted, trace
