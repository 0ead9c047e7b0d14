"""
检索公共类型
排序结果、检索器接口，以及第二阶段使用的查询-文档拼接
"""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Sequence, Tuple

from .corpus import Document


@dataclass(frozen=True)
class ScoredDoc:
    """排序结果中的一条"""
    doc_id: str
    score: float
    rank: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class Retriever(ABC):
    """检索器接口"""

    name: str = "retriever"

    @abstractmethod
    def retrieve(self, query_text: str, k: int) -> List[ScoredDoc]:
        """
        返回top-k排序结果

        Args:
            query_text: 查询文本
            k: 返回数量上限（>=1）

        Returns:
            分数非增、同分按doc_id升序、rank从1连续编号的列表
        """


def rank_scored(scored: Sequence[Tuple[str, float]], k: int) -> List[ScoredDoc]:
    """按(分数降序, doc_id升序)排序并截断为top-k"""
    if k < 1:
        raise ValueError(f"k必须>=1: {k}")
    ordered = sorted(scored, key=lambda item: (-item[1], item[0]))[:k]
    return [ScoredDoc(doc_id=doc_id, score=score, rank=i) for i, (doc_id, score) in enumerate(ordered, start=1)]


def concat_query(query_text: str, doc: Document) -> str:
    """
    拼接查询和文档，得到第二阶段查询q*

    格式: 查询 + 换行 + 标题 + 换行 + 正文；空标题不产生额外空行
    """
    if doc.title:
        return f"{query_text}\n{doc.title}\n{doc.text}"
    return f"{query_text}\n{doc.text}"
