"""
运行结果评测
逐查询计算指标，汇总为报告；汇总值只由逐查询明细算出，便于独立复算
"""

from pathlib import Path
from statistics import fmean
from typing import Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from ..core.errors import CorpusFormatError, DataError, DatasetError
from ..schemas.records import DatasetRecord, ResultRecord
from ..schemas.report import Aggregates, EvalReport, QueryMetrics
from ..utils.jsonl import ensure_writable, iter_jsonl
from ..utils.logger import logger
from .corpus import CorpusHandle
from .dataset import check_corpus_references, load_dataset
from .metrics import accuracy, exact_match, recall_rate, token_f1

PathLike = Union[str, Path]

AGGREGATE_FIELDS = ("em", "f1", "acc", "recall_rate", "actual_numbers", "steps", "time_per_query")


def load_results(path: PathLike) -> List[ResultRecord]:
    """
    读取结果文件

    Raises:
        CorpusFormatError: 行格式错误
        DatasetError: query_id重复
    """
    results: List[ResultRecord] = []
    seen = set()
    duplicates = []
    for line_number, raw in iter_jsonl(path):
        try:
            result = ResultRecord.model_validate(raw)
        except ValidationError as e:
            first_error = e.errors()[0]
            field = ".".join(str(part) for part in first_error.get("loc", ())) or "record"
            raise CorpusFormatError(f"{field}: {first_error.get('msg')}", line_number) from e
        if result.query_id in seen:
            duplicates.append(result.query_id)
        seen.add(result.query_id)
        results.append(result)

    if duplicates:
        raise DatasetError("结果文件中query_id重复", sorted(set(duplicates)))
    return results


def score_query(result: ResultRecord, record: DatasetRecord) -> QueryMetrics:
    """计算一个查询的指标"""
    recall = recall_rate(result.context_doc_ids, record.gold_doc_ids) if record.gold_doc_ids else None
    return QueryMetrics(
        query_id=result.query_id,
        em=float(exact_match(result.answer, record.answers)),
        f1=token_f1(result.answer, record.answers),
        acc=float(accuracy(result.answer, record.answers)),
        recall=recall,
        actual_number=len(result.context_doc_ids),
        steps=result.llm_calls,
        time_ms=result.wall_time_ms,
    )


def _mean(values: Sequence[float]) -> float:
    return fmean(values) if values else 0.0


def recompute_aggregates(per_query: Sequence[QueryMetrics]) -> Aggregates:
    """由逐查询明细计算汇总值：EM/F1/Acc/召回率为百分制均值，其余为算术均值"""
    recalls = [row.recall for row in per_query if row.recall is not None]
    return Aggregates(
        em=100.0 * _mean([row.em for row in per_query]),
        f1=100.0 * _mean([row.f1 for row in per_query]),
        acc=100.0 * _mean([row.acc for row in per_query]),
        recall_rate=100.0 * fmean(recalls) if recalls else None,
        actual_numbers=_mean([float(row.actual_number) for row in per_query]),
        steps=_mean([float(row.steps) for row in per_query]),
        time_per_query=_mean([row.time_ms for row in per_query]),
    )


def baseline_means(path: PathLike) -> Tuple[float, float]:
    """基线运行的平均耗时和平均调用次数（只统计成功行）"""
    rows = [result for result in load_results(path) if result.status == "ok"]
    return _mean([row.wall_time_ms for row in rows]), _mean([float(row.llm_calls) for row in rows])


def evaluate_run(
    results_path: PathLike,
    dataset_path: PathLike,
    corpus: Optional[CorpusHandle] = None,
    baseline_path: Optional[PathLike] = None,
) -> EvalReport:
    """
    评测一次运行

    Args:
        results_path: 结果JSONL
        dataset_path: 数据集JSONL
        corpus: 提供时校验gold文档都在语料中
        baseline_path: 基线结果，提供时计算相对耗时和调用次数

    Raises:
        DatasetError: 结果中的query_id不在数据集中、query_id重复、引用未知文档
    """
    dataset = load_dataset(dataset_path)
    if corpus is not None:
        check_corpus_references(dataset, corpus)
    by_id: Dict[str, DatasetRecord] = {record.query_id: record for record in dataset}

    results = load_results(results_path)
    unknown = sorted(result.query_id for result in results if result.query_id not in by_id)
    if unknown:
        raise DatasetError("结果中的query_id不在数据集中", unknown)

    missing = len(by_id) - len(results)
    if missing > 0:
        logger.warning(f"数据集中有 {missing} 个查询没有结果")

    succeeded = sorted((result for result in results if result.status == "ok"), key=lambda r: r.query_id)
    failed = len(results) - len(succeeded)
    if failed:
        logger.warning(f"{failed} 个查询运行失败，不计入指标")

    per_query = [score_query(result, by_id[result.query_id]) for result in succeeded]
    aggregates = recompute_aggregates(per_query)

    report = EvalReport(
        **aggregates.model_dump(),
        results_path=str(results_path),
        dataset_path=str(dataset_path),
        strategy=results[0].strategy if results else None,
        count=len(per_query),
        failed=failed,
        recall_excluded=sum(1 for row in per_query if row.recall is None),
        per_query=per_query,
    )

    if baseline_path is not None:
        base_time, base_steps = baseline_means(baseline_path)
        report.baseline_path = str(baseline_path)
        report.normalized_time = report.time_per_query / base_time if base_time > 0 else None
        report.normalized_steps = report.steps / base_steps if base_steps > 0 else None
        if base_time <= 0:
            logger.warning("基线平均耗时为0（冻结时钟？），无法计算相对耗时")

    logger.info(f"评测完成: {report.count} 个查询, EM={report.em:.2f}, F1={report.f1:.2f}, Acc={report.acc:.2f}")
    return report


def write_report(report: EvalReport, path: PathLike, force: bool = False) -> Path:
    """写出JSON报告"""
    file_path = ensure_writable(path, force)
    file_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return file_path


def load_report(path: PathLike) -> EvalReport:
    """读取JSON报告"""
    file_path = Path(path)
    if not file_path.is_file():
        raise DataError(f"文件不存在: {path}", {"path": str(path)})
    try:
        return EvalReport.model_validate_json(file_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"报告格式错误: {path}") from e


def verify_report(report: EvalReport) -> List[str]:
    """
    由逐查询明细复算汇总值

    Returns:
        不一致的字段名，全部一致时为空
    """
    recomputed = recompute_aggregates(report.per_query)
    mismatches = []
    for name in AGGREGATE_FIELDS:
        if getattr(report, name) != getattr(recomputed, name):
            mismatches.append(name)
    if report.count != len(report.per_query):
        mismatches.append("count")
    return mismatches


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def render_report(report: EvalReport, console: Optional[Console] = None):
    """以表格形式输出报告"""
    console = console or Console()
    table = Table(title=f"评测结果 ({report.strategy or '-'})")
    columns = ["EM", "F1", "Acc", "Recall", "Actual", "Step", "Time(ms)"]
    values = [
        _fmt(report.em), _fmt(report.f1), _fmt(report.acc), _fmt(report.recall_rate),
        _fmt(report.actual_numbers), _fmt(report.steps), _fmt(report.time_per_query),
    ]
    if report.baseline_path is not None:
        columns += ["Step(norm)", "Time(norm)"]
        values += [_fmt(report.normalized_steps), _fmt(report.normalized_time)]

    for column in columns:
        table.add_column(column, justify="right")
    table.add_row(*values)
    console.print(table)
    console.print(f"查询数: {report.count}  失败: {report.failed}  无gold文档: {report.recall_excluded}")
