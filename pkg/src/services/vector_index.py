"""
相似度匹配（SM）检索
可替换的嵌入器接口、确定性的哈希词袋参考嵌入器，以及穷举余弦打分的向量索引
"""

import hashlib
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import ValidationError

from ..core.errors import CorpusFormatError, DataError, DimensionMismatchError, DuplicateDocumentError
from ..schemas.records import EmbeddingRecord
from ..utils.jsonl import iter_jsonl
from ..utils.logger import logger
from .corpus import CorpusHandle, tokenize
from .retrieval import Retriever, ScoredDoc

# 余弦分数量化位数：数学上相等的分数不受浮点求和顺序影响，同分再按doc_id排序
SCORE_DECIMALS = 12


@dataclass(frozen=True)
class EmbeddingVector:
    """嵌入向量"""
    values: np.ndarray
    norm: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> "EmbeddingVector":
        array = np.asarray(values, dtype=np.float64)
        return cls(values=array, norm=float(np.linalg.norm(array)))

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """余弦相似度，任一为零向量时为0"""
    if a.norm == 0.0 or b.norm == 0.0:
        return 0.0
    return float(np.dot(a.values, b.values) / (a.norm * b.norm))


class Embedder(ABC):
    """嵌入器接口"""

    @property
    @abstractmethod
    def dimension(self) -> int:
        """向量维度"""

    @property
    @abstractmethod
    def embedder_id(self) -> str:
        """写入索引清单的嵌入器标识"""

    @abstractmethod
    def embed(self, text: str) -> EmbeddingVector:
        """文本嵌入"""


@lru_cache(maxsize=65536)
def _token_digest(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


class HashedEmbedder(Embedder):
    """哈希词袋嵌入器：token哈希到固定数量的桶里计数，再做L2归一化"""

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError(f"嵌入维度必须>=1: {dimension}")
        self._dimension = dimension

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def embedder_id(self) -> str:
        return f"hashed-bow-blake2b-{self._dimension}"

    def bucket(self, token: str) -> int:
        """token所在的桶"""
        return _token_digest(token) % self._dimension

    def embed(self, text: str) -> EmbeddingVector:
        values = np.zeros(self._dimension, dtype=np.float64)
        for token, count in Counter(tokenize(text)).items():
            values[self.bucket(token)] += count

        norm = float(np.linalg.norm(values))
        if norm > 0.0:
            values = values / norm
        return EmbeddingVector.from_values(values)


def load_embedding_sidecar(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """
    读取预计算嵌入旁路文件

    Returns:
        doc_id -> 向量

    Raises:
        CorpusFormatError: 行格式错误
        DuplicateDocumentError: doc_id重复
        DimensionMismatchError: 向量维度不统一
    """
    vectors: Dict[str, np.ndarray] = {}
    dimension: Optional[int] = None

    for line_number, raw in iter_jsonl(path):
        try:
            record = EmbeddingRecord.model_validate(raw)
        except ValidationError as e:
            raise CorpusFormatError(f"嵌入记录格式错误: {e.errors()[0].get('msg')}", line_number) from e

        if record.doc_id in vectors:
            raise DuplicateDocumentError(record.doc_id, line_number)
        if dimension is None:
            dimension = len(record.vector)
        elif len(record.vector) != dimension:
            raise DimensionMismatchError(dimension, len(record.vector), f"{path} 第 {line_number} 行")

        vectors[record.doc_id] = np.asarray(record.vector, dtype=np.float64)

    logger.info(f"读取嵌入旁路文件: {path} - {len(vectors)} 条, 维度={dimension}")
    return vectors


class VectorIndex(Retriever):
    """穷举余弦打分的向量索引，构建后只读"""

    name = "sm"

    def __init__(self, doc_ids: List[str], matrix: np.ndarray, embedder: Embedder):
        if matrix.ndim != 2 or matrix.shape[0] != len(doc_ids):
            raise DataError("向量矩阵形状与文档数不一致")
        if len(doc_ids) and matrix.shape[1] != embedder.dimension:
            raise DimensionMismatchError(embedder.dimension, int(matrix.shape[1]), "文档向量")

        self.doc_ids = list(doc_ids)
        self.embedder = embedder
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float64)
        self.norms = np.linalg.norm(self.matrix, axis=1) if len(doc_ids) else np.zeros(0)

    @classmethod
    def build(
        cls,
        corpus: CorpusHandle,
        embedder: Embedder,
        sidecar: Optional[Dict[str, np.ndarray]] = None,
    ) -> "VectorIndex":
        """
        为语料建向量索引

        Args:
            corpus: 语料句柄
            embedder: 查询嵌入器（无旁路向量的文档也用它）
            sidecar: 预计算文档向量，维度必须与嵌入器一致
        """
        sidecar = sidecar or {}
        unknown = sorted(doc_id for doc_id in sidecar if doc_id not in corpus)
        if unknown:
            raise DataError(f"嵌入旁路文件包含语料中不存在的doc_id: {', '.join(unknown[:10])}")

        rows = []
        fallback_count = 0
        for doc in corpus:
            vector = sidecar.get(doc.doc_id)
            if vector is not None:
                if vector.shape[0] != embedder.dimension:
                    raise DimensionMismatchError(embedder.dimension, int(vector.shape[0]), "嵌入旁路文件")
                rows.append(vector)
            else:
                if sidecar:
                    fallback_count += 1
                rows.append(embedder.embed(doc.searchable_text).values)

        if fallback_count:
            logger.warning(f"{fallback_count} 篇文档不在嵌入旁路文件中，改用 {embedder.embedder_id}")

        matrix = np.vstack(rows) if rows else np.zeros((0, embedder.dimension))
        return cls(corpus.doc_ids, matrix, embedder)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def similarities(self, query: EmbeddingVector) -> np.ndarray:
        """查询与全部文档的余弦相似度（已量化）"""
        if not self.doc_ids:
            return np.zeros(0)
        if query.dimension != self.matrix.shape[1]:
            raise DimensionMismatchError(int(self.matrix.shape[1]), query.dimension, "查询向量")

        dots = self.matrix @ query.values
        denominators = self.norms * query.norm
        scores = np.zeros(len(self.doc_ids), dtype=np.float64)
        nonzero = denominators > 0
        scores[nonzero] = dots[nonzero] / denominators[nonzero]
        return np.round(scores, SCORE_DECIMALS)

    def retrieve(self, query_text: str, k: int) -> List[ScoredDoc]:
        """按余弦相似度返回top-k；零分文档保留，按doc_id参与排序"""
        if k < 1:
            raise ValueError(f"k必须>=1: {k}")
        if not self.doc_ids:
            return []

        scores = self.similarities(self.embedder.embed(query_text))
        # 文档按doc_id升序存放，稳定排序即实现同分doc_id升序
        order = np.argsort(-scores, kind="stable")[:k]
        return [
            ScoredDoc(doc_id=self.doc_ids[position], score=float(scores[position]), rank=rank)
            for rank, position in enumerate(order, start=1)
        ]
