"""
知识库语料
负责读取JSONL语料、分词，并提供按doc_id访问文档的只读句柄
"""

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

from pydantic import ValidationError

from ..core.errors import CorpusFormatError, DuplicateDocumentError, UnknownDocumentError
from ..schemas.records import CorpusRecord
from ..utils.jsonl import file_sha256, iter_jsonl
from ..utils.logger import logger

# Unicode字母数字串；下划线不算字母数字
_TOKEN_PATTERN = re.compile(r"[^\W_]+")


def tokenize(text: str) -> List[str]:
    """
    全引擎统一的分词规则：小写后按非字母数字切分

    Args:
        text: 任意文本

    Returns:
        有序token列表，不含空token
    """
    if not text:
        return []
    return _TOKEN_PATTERN.findall(text.lower())


@dataclass(frozen=True)
class Document:
    """知识库文档"""
    doc_id: str
    title: str
    text: str

    @property
    def searchable_text(self) -> str:
        """用于建索引的文本：标题+换行+正文，空标题只取正文"""
        if self.title:
            return f"{self.title}\n{self.text}"
        return self.text


@dataclass(frozen=True)
class CorpusStats:
    """语料统计"""
    count: int
    mean_token_length: float


class CorpusHandle:
    """只读语料句柄，文档按doc_id升序排列"""

    def __init__(self, documents: Iterable[Document], source_sha256: Optional[str] = None):
        ordered = sorted(documents, key=lambda doc: doc.doc_id)
        self._documents: Tuple[Document, ...] = tuple(ordered)
        self._by_id: Dict[str, Document] = {doc.doc_id: doc for doc in ordered}
        self.source_sha256 = source_sha256
        self.stats = self.compute_stats()

    @classmethod
    def from_documents(cls, documents: Iterable[Document]) -> "CorpusHandle":
        """在内存中构造句柄，校验规则与ingest_corpus相同"""
        seen = set()
        checked = []
        for position, doc in enumerate(documents, start=1):
            if not doc.text:
                raise CorpusFormatError("text不能为空", position)
            if doc.doc_id in seen:
                raise DuplicateDocumentError(doc.doc_id, position)
            seen.add(doc.doc_id)
            checked.append(doc)
        return cls(checked)

    def compute_stats(self) -> CorpusStats:
        """重新计算统计信息"""
        if not self._documents:
            return CorpusStats(count=0, mean_token_length=0.0)
        total = sum(len(tokenize(doc.searchable_text)) for doc in self._documents)
        return CorpusStats(count=len(self._documents), mean_token_length=total / len(self._documents))

    @property
    def documents(self) -> Tuple[Document, ...]:
        return self._documents

    @property
    def doc_ids(self) -> List[str]:
        return [doc.doc_id for doc in self._documents]

    def get(self, doc_id: str) -> Document:
        """按doc_id取文档"""
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise UnknownDocumentError(doc_id) from None

    def __contains__(self, doc_id: object) -> bool:
        return doc_id in self._by_id

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._documents)


def ingest_corpus(path: Union[str, Path]) -> CorpusHandle:
    """
    读取JSONL语料

    Args:
        path: 语料文件路径，每行 {"doc_id", "title", "text"}

    Returns:
        语料句柄

    Raises:
        DataError: 文件不存在
        CorpusFormatError: 行格式错误、text为空
        DuplicateDocumentError: doc_id重复（报告第二次出现的行号）
    """
    documents: List[Document] = []
    first_seen: Dict[str, int] = {}

    for line_number, raw in iter_jsonl(path):
        try:
            record = CorpusRecord.model_validate(raw)
        except ValidationError as e:
            first_error = e.errors()[0]
            field = ".".join(str(part) for part in first_error.get("loc", ())) or "record"
            raise CorpusFormatError(f"{field}: {first_error.get('msg')}", line_number) from e

        if record.doc_id in first_seen:
            raise DuplicateDocumentError(record.doc_id, line_number)
        first_seen[record.doc_id] = line_number
        documents.append(Document(doc_id=record.doc_id, title=record.title, text=record.text))

    handle = CorpusHandle(documents, source_sha256=file_sha256(path))
    logger.info(
        f"语料读取完成: {path} - 文档数={handle.stats.count}, "
        f"平均token长度={handle.stats.mean_token_length:.2f}"
    )
    return handle
