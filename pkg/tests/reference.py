"""
测试用参考实现
穷举扫描的BM25/余弦排序、逐步回放轨迹的朴素模拟器，以及可编排的检索器和分类器桩
"""

import hashlib
import json
import math
from collections import Counter
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

from src.core.backend import ClassifierBackend
from src.services.corpus import Document, tokenize
from src.services.retrieval import Retriever, ScoredDoc

SCORE_DECIMALS = 12


def write_lines(path: Path, records: Iterable[Dict[str, Any]]) -> Path:
    """把记录写成JSONL"""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
    return path


def brute_force_bm25(
    documents: Sequence[Document], query: str, k: int, k1: float = 1.2, b: float = 0.75
) -> List[Tuple[str, float]]:
    """逐篇文档线性扫描的Okapi BM25，零分排除，(分数降序, doc_id升序)"""
    docs = sorted(documents, key=lambda doc: doc.doc_id)
    term_freqs = [Counter(tokenize(doc.searchable_text)) for doc in docs]
    lengths = [sum(tf.values()) for tf in term_freqs]
    if not docs:
        return []
    avgdl = sum(lengths) / len(lengths)
    doc_freq = Counter(token for tf_map in term_freqs for token in tf_map)

    scored = []
    for doc, tf_map, length in zip(docs, term_freqs, lengths):
        score = 0.0
        for token in tokenize(query):
            tf = tf_map.get(token, 0)
            if not tf:
                continue
            n = doc_freq[token]
            idf = math.log((len(docs) - n + 0.5) / (n + 0.5) + 1)
            score += idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * length / avgdl))
        if score > 0:
            scored.append((doc.doc_id, score))
    return sorted(scored, key=lambda item: (-item[1], item[0]))[:k]


def hashed_counts(text: str, dimension: int = 256) -> Dict[int, int]:
    """token -> BLAKE2b(8字节) mod 维度 的桶计数"""
    counts: Dict[int, int] = Counter()
    for token in tokenize(text):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        counts[int.from_bytes(digest, "big") % dimension] += 1
    return dict(counts)


def brute_force_cosine(
    documents: Sequence[Document], query: str, k: int, dimension: int = 256
) -> List[Tuple[str, float]]:
    """整数桶计数上的穷举余弦，零向量相似度为0"""
    query_counts = hashed_counts(query, dimension)
    query_norm = math.sqrt(sum(v * v for v in query_counts.values()))

    scored = []
    for doc in documents:
        counts = hashed_counts(doc.searchable_text, dimension)
        norm = math.sqrt(sum(v * v for v in counts.values()))
        dot = sum(query_counts.get(bucket, 0) * value for bucket, value in counts.items())
        score = dot / (query_norm * norm) if query_norm and norm else 0.0
        scored.append((doc.doc_id, round(score, SCORE_DECIMALS)))
    return sorted(scored, key=lambda item: (-item[1], item[0]))[:k]


def replay_trace(trace: Dict, k: int) -> List[str]:
    """
    只根据轨迹里记录的候选和判定，按算法定义一步步重建最终上下文

    Args:
        trace: RetrievalTrace.to_dict() 的结果
        k: 总预算
    """
    strategy = trace["strategy"]
    first = [doc["doc_id"] for doc in trace["first_stage"]]
    context = list(first)
    if strategy in ("bm25", "sm"):
        return context

    candidates = {
        block["parent_doc_id"]: [c["doc_id"] for c in block["candidates"]]
        for block in trace["second_stage_candidates"]
    }
    verdicts: Dict[Tuple[str, str], List[str]] = {}
    for verdict in trace["verdicts"]:
        key = (verdict["parent_doc_id"], verdict["candidate_doc_id"])
        verdicts.setdefault(key, []).append(verdict["label"])

    second_stage: List[str] = []
    for parent in first:
        if len(context) >= k:
            break
        for candidate in candidates.get(parent, []):
            if candidate in context:
                continue
            if strategy == "cfs" and verdicts.get((parent, candidate)) != ["positive"]:
                continue
            context.append(candidate)
            second_stage.append(candidate)
            break

    if strategy == "cis":
        for doc_id in second_stage:
            labels = [
                label
                for (partner, candidate), recorded in verdicts.items()
                if candidate == doc_id
                for label in recorded
            ]
            if "positive" not in labels:
                context.remove(doc_id)
    return context


class ScriptedRetriever(Retriever):
    """按查询文本返回预先编排的排序"""

    name = "scripted"

    def __init__(self, rankings: Dict[str, List[str]]):
        self.rankings = rankings
        self.queries: List[str] = []

    def retrieve(self, query_text: str, k: int) -> List[ScoredDoc]:
        self.queries.append(query_text)
        ordered = self.rankings.get(query_text, [])[:k]
        return [
            ScoredDoc(doc_id=doc_id, score=round(1.0 - 0.1 * i, 3), rank=i + 1)
            for i, doc_id in enumerate(ordered)
        ]


class PairClassifier(ClassifierBackend):
    """(doc_a正文, doc_b正文) 在正例集合中给1.0，否则0.0；记录每次调用"""

    def __init__(self, positives: Optional[Iterable[Tuple[str, str]]] = None):
        super().__init__("")
        self.positives: Set[Tuple[str, str]] = set(positives or [])
        self.calls: List[Tuple[str, str, str]] = []

    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        self.calls.append((query, doc_a, doc_b))
        return 1.0 if (doc_a, doc_b) in self.positives else 0.0
