"""
成对相关性分类器
判断两篇文档对回答查询是否都关键：后端给出分数，按阈值得到正/负标签
"""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional

from ..core.backend import ClassifierBackend
from .corpus import Document, tokenize


class VerdictLabel(str, Enum):
    """分类标签"""
    POSITIVE = "positive"
    NEGATIVE = "negative"


@dataclass(frozen=True)
class ClassifierVerdict:
    """一次成对判断"""
    score: float
    threshold: float
    parent_doc_id: str
    candidate_doc_id: str

    @property
    def label(self) -> VerdictLabel:
        """score >= threshold 即为正"""
        return VerdictLabel.POSITIVE if self.score >= self.threshold else VerdictLabel.NEGATIVE

    @property
    def is_positive(self) -> bool:
        return self.label is VerdictLabel.POSITIVE

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parent_doc_id": self.parent_doc_id,
            "candidate_doc_id": self.candidate_doc_id,
            "score": self.score,
            "threshold": self.threshold,
            "label": self.label.value,
        }


def lexical_score(query: str, doc_a: str, doc_b: str) -> float:
    """
    词汇重叠参考分数

    Jaccard(tokens(query) ∪ tokens(doc_a), tokens(doc_b))，任一侧为空时为0
    """
    left = set(tokenize(query)) | set(tokenize(doc_a))
    right = set(tokenize(doc_b))
    if not left or not right:
        return 0.0
    return len(left & right) / len(left | right)


async def classify(
    backend: ClassifierBackend,
    query: str,
    doc_a: Document,
    doc_b: Document,
    threshold: float,
    parent_doc_id: Optional[str] = None,
    candidate_doc_id: Optional[str] = None,
) -> ClassifierVerdict:
    """
    对 (查询, 文档A, 文档B) 做一次成对判断，参数顺序原样传给后端

    Args:
        backend: 分类器后端
        query: 查询文本
        doc_a: 第一个文档
        doc_b: 第二个文档
        threshold: 判正阈值，[0,1]
        parent_doc_id: 轨迹中记录的父文档，默认doc_a
        candidate_doc_id: 轨迹中记录的候选文档，默认doc_b

    Raises:
        ValueError: 阈值越界
        ClassifierTransportError: HTTP后端请求失败
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"阈值必须在[0,1]内: {threshold}")

    score = await backend.score(query, doc_a.text, doc_b.text)
    return ClassifierVerdict(
        score=score,
        threshold=threshold,
        parent_doc_id=parent_doc_id if parent_doc_id is not None else doc_a.doc_id,
        candidate_doc_id=candidate_doc_id if candidate_doc_id is not None else doc_b.doc_id,
    )
