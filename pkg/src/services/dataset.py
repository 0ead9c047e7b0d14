"""
QA数据集
读取 {"query_id", "question", "answers", "gold_doc_ids", "candidates"} 行并校验与语料的引用关系
"""

from pathlib import Path
from typing import Dict, List, Union

from pydantic import ValidationError

from ..core.errors import CorpusFormatError, DatasetError
from ..schemas.records import DatasetRecord
from ..utils.jsonl import iter_jsonl
from ..utils.logger import logger
from .corpus import CorpusHandle


def load_dataset(path: Union[str, Path]) -> List[DatasetRecord]:
    """
    读取数据集，保持文件顺序

    Raises:
        DataError: 文件不存在
        CorpusFormatError: 行格式错误
        DatasetError: query_id重复
    """
    records: List[DatasetRecord] = []
    first_seen: Dict[str, int] = {}
    duplicates: List[str] = []

    for line_number, raw in iter_jsonl(path):
        try:
            record = DatasetRecord.model_validate(raw)
        except ValidationError as e:
            first_error = e.errors()[0]
            field = ".".join(str(part) for part in first_error.get("loc", ())) or "record"
            raise CorpusFormatError(f"{field}: {first_error.get('msg')}", line_number) from e

        if record.query_id in first_seen:
            duplicates.append(record.query_id)
        first_seen[record.query_id] = line_number
        records.append(record)

    if duplicates:
        raise DatasetError("数据集中query_id重复", sorted(set(duplicates)))

    logger.info(f"数据集读取完成: {path} - {len(records)} 个查询")
    return records


def check_corpus_references(dataset: List[DatasetRecord], corpus: CorpusHandle):
    """
    校验数据集引用的gold文档和候选文档都在语料中

    Raises:
        DatasetError: 列出引用了未知文档的query_id
    """
    offending = []
    for record in dataset:
        referenced = list(record.gold_doc_ids) + list(record.candidates or [])
        missing = [doc_id for doc_id in referenced if doc_id not in corpus]
        if missing:
            logger.error(f"查询 {record.query_id} 引用了语料中不存在的文档: {', '.join(missing[:5])}")
            offending.append(record.query_id)

    if offending:
        raise DatasetError("数据集引用了语料中不存在的文档", offending)
