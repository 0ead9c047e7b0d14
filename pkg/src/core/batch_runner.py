"""
批量运行器
负责后端的生命周期，并发执行数据集中的所有查询，按query_id顺序汇总结果
"""

import asyncio
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from ..config.settings import EngineSettings
from ..schemas.pipeline import PipelineConfig
from ..schemas.records import DatasetRecord, ResultRecord
from ..services.index_store import IndexBundle
from ..utils.clock import ClockMode, make_clock
from ..utils.logger import logger
from .backend import ClassifierBackend, LLMBackend, backend_registry
from .errors import BackendTransportError
from .pipeline import DrRagPipeline


@dataclass
class BatchSummary:
    """批量运行统计"""
    total: int = 0
    succeeded: int = 0
    failed: int = 0

    @property
    def success_rate(self) -> float:
        if self.total == 0:
            return 0.0
        return self.succeeded / self.total


class BatchRunner:
    """批量运行器"""

    def __init__(
        self,
        bundle: IndexBundle,
        cfg: PipelineConfig,
        llm_selector: str,
        classifier_selector: Optional[str] = None,
        settings: Optional[EngineSettings] = None,
        jobs: int = 1,
        keep_going: bool = False,
        clock_mode: ClockMode = ClockMode.AUTO,
        seed: Optional[int] = None,
    ):
        self.bundle = bundle
        self.cfg = cfg
        self.llm_selector = llm_selector
        self.classifier_selector = classifier_selector
        self.settings = settings or EngineSettings()
        self.jobs = max(1, jobs)
        self.keep_going = keep_going
        self.clock_mode = clock_mode
        self.seed = seed

        self.classifier: Optional[ClassifierBackend] = None
        self.llm: Optional[LLMBackend] = None
        self.summary = BatchSummary()

    def load_backends(self):
        """按选择器创建后端"""
        self.llm = backend_registry.create("llm", self.llm_selector, self.settings)
        if self.classifier_selector:
            self.classifier = backend_registry.create("classifier", self.classifier_selector, self.settings)
        logger.info(
            f"已加载后端: llm={self.llm_selector}, classifier={self.classifier_selector or '-'}"
        )

    @property
    def hermetic(self) -> bool:
        """所有后端都是本地确定性后端"""
        backends = [backend for backend in (self.llm, self.classifier) if backend is not None]
        return all(backend.hermetic for backend in backends)

    async def start_all(self):
        """打开所有后端"""
        for backend in (self.classifier, self.llm):
            if backend is not None:
                await backend.open()

    async def stop_all(self):
        """关闭所有后端，关闭失败只记录日志"""
        for backend in (self.classifier, self.llm):
            if backend is None:
                continue
            try:
                await backend.close()
            except Exception as e:
                logger.error(f"关闭后端失败: {e}")

    def build_pipeline(self) -> DrRagPipeline:
        clock = make_clock(self.clock_mode, self.hermetic)
        if clock.frozen:
            logger.debug("时钟已冻结，wall_time_ms 记为0")
        return DrRagPipeline(
            corpus=self.bundle.corpus,
            bm25=self.bundle.bm25,
            vectors=self.bundle.vectors,
            classifier=self.classifier,
            llm=self.llm,
            clock=clock,
            settings=self.settings,
            seed=self.seed,
        )

    def _result_row(self, query: DatasetRecord, answer: str, trace) -> Dict[str, Any]:
        return ResultRecord(
            query_id=query.query_id,
            strategy=self.cfg.strategy.value,
            k=self.cfg.k,
            k1=self.cfg.first_stage_count,
            k2=self.cfg.second_stage_depth,
            answer=answer,
            context_doc_ids=trace.final_context,
            llm_calls=trace.llm_calls,
            wall_time_ms=trace.wall_time_ms,
            trace=trace.to_dict(),
        ).model_dump(exclude={"error"})

    def _error_row(self, query: DatasetRecord, error: Exception) -> Dict[str, Any]:
        return ResultRecord(
            query_id=query.query_id,
            strategy=self.cfg.strategy.value,
            k=self.cfg.k,
            k1=self.cfg.first_stage_count,
            k2=self.cfg.second_stage_depth,
            status="error",
            error=str(error),
        ).model_dump()

    async def _run_one(self, pipeline: DrRagPipeline, query: DatasetRecord) -> Dict[str, Any]:
        try:
            answer, trace = await pipeline.answer_query(query, self.cfg)
            self.summary.succeeded += 1
            return self._result_row(query, answer, trace)
        except BackendTransportError as e:
            self.summary.failed += 1
            if not self.keep_going:
                raise
            logger.error(f"查询失败，继续执行: {e}")
            return self._error_row(query, e)

    async def run(self, dataset: List[DatasetRecord]) -> List[Dict[str, Any]]:
        """
        运行全部查询

        Returns:
            结果行，按query_id升序

        Raises:
            QueryFailedError: 未开启keep_going时第一个失败的查询
        """
        if self.llm is None:
            self.load_backends()

        self.summary = BatchSummary(total=len(dataset))
        pipeline = self.build_pipeline()
        semaphore = asyncio.Semaphore(self.jobs)

        async def guarded(query: DatasetRecord) -> Dict[str, Any]:
            async with semaphore:
                return await self._run_one(pipeline, query)

        logger.info(
            f"开始运行 {len(dataset)} 个查询: strategy={self.cfg.strategy.value}, "
            f"k={self.cfg.k}, jobs={self.jobs}"
        )
        await self.start_all()
        try:
            tasks = [asyncio.create_task(guarded(query)) for query in dataset]
            try:
                rows = await asyncio.gather(*tasks)
            except Exception:
                for task in tasks:
                    task.cancel()
                await asyncio.gather(*tasks, return_exceptions=True)
                raise
        finally:
            await self.stop_all()

        logger.info(
            f"运行完成: 成功 {self.summary.succeeded}/{self.summary.total}, 失败 {self.summary.failed}, "
            f"成功率 {self.summary.success_rate:.1%}"
        )
        return sorted(rows, key=lambda row: row["query_id"])
