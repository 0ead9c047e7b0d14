"""
BM25倒排索引
Okapi BM25打分（k1=1.2, b=0.75），零分文档不进入结果
"""

import math
from collections import Counter, defaultdict
from typing import Any, Dict, List, Sequence, Tuple

from ..core.errors import DataError, UnknownDocumentError
from .corpus import CorpusHandle, tokenize
from .retrieval import Retriever, ScoredDoc, rank_scored


def bm25_idf(num_docs: int, doc_freq: int) -> float:
    """idf = ln((N - n + 0.5) / (n + 0.5) + 1)，恒为正"""
    return math.log((num_docs - doc_freq + 0.5) / (doc_freq + 0.5) + 1)


def bm25_term_score(idf: float, tf: int, doc_length: int, avgdl: float, k1: float, b: float) -> float:
    """单个查询词对单篇文档的贡献"""
    return idf * (tf * (k1 + 1)) / (tf + k1 * (1 - b + b * doc_length / avgdl))


class BM25Index(Retriever):
    """BM25倒排索引，构建后只读"""

    name = "bm25"

    def __init__(self, corpus: CorpusHandle, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.doc_ids: List[str] = corpus.doc_ids
        self._positions: Dict[str, int] = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}

        self._term_freqs: List[Counter] = [Counter(tokenize(doc.searchable_text)) for doc in corpus]
        self.doc_lengths: List[int] = [sum(tf.values()) for tf in self._term_freqs]
        self.avgdl = sum(self.doc_lengths) / len(self.doc_lengths) if self.doc_lengths else 0.0

        # 倒排表: term -> [(文档位置, 词频), ...]，按位置升序
        self.postings: Dict[str, List[Tuple[int, int]]] = defaultdict(list)
        for position, term_freq in enumerate(self._term_freqs):
            for term, tf in term_freq.items():
                self.postings[term].append((position, tf))
        self.postings = dict(self.postings)

        self.idf: Dict[str, float] = {
            term: bm25_idf(len(self.doc_ids), len(postings)) for term, postings in self.postings.items()
        }

    def __len__(self) -> int:
        return len(self.doc_ids)

    def _term_score(self, term: str, tf: int, position: int) -> float:
        return bm25_term_score(self.idf[term], tf, self.doc_lengths[position], self.avgdl, self.k1, self.b)

    def bm25_score(self, query_tokens: Sequence[str], doc_id: str) -> float:
        """
        计算查询对单篇文档的BM25分数，重复的查询词重复计分

        Raises:
            UnknownDocumentError: doc_id不在索引中
        """
        position = self._positions.get(doc_id)
        if position is None:
            raise UnknownDocumentError(doc_id)

        term_freq = self._term_freqs[position]
        score = 0.0
        for token in query_tokens:
            tf = term_freq.get(token, 0)
            if tf:
                score += self._term_score(token, tf, position)
        return score

    def retrieve(self, query_text: str, k: int) -> List[ScoredDoc]:
        """按BM25分数返回top-k，分数为0的文档被排除"""
        if k < 1:
            raise ValueError(f"k必须>=1: {k}")

        accumulated: Dict[int, float] = defaultdict(float)
        for token in tokenize(query_text):
            for position, tf in self.postings.get(token, ()):
                accumulated[position] += self._term_score(token, tf, position)

        scored = [(self.doc_ids[position], score) for position, score in accumulated.items() if score > 0]
        return rank_scored(scored, k)

    def to_dict(self) -> Dict[str, Any]:
        """序列化倒排索引"""
        return {
            "k1": self.k1,
            "b": self.b,
            "doc_ids": self.doc_ids,
            "doc_lengths": self.doc_lengths,
            "postings": {term: [list(entry) for entry in postings] for term, postings in sorted(self.postings.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], corpus: CorpusHandle) -> "BM25Index":
        """从序列化结果恢复，并校验与语料一致"""
        index = cls.__new__(cls)
        index.k1 = float(data["k1"])
        index.b = float(data["b"])
        index.doc_ids = list(data["doc_ids"])
        if index.doc_ids != corpus.doc_ids:
            raise DataError("倒排索引与语料的文档集合不一致")
        index._positions = {doc_id: i for i, doc_id in enumerate(index.doc_ids)}
        index.doc_lengths = [int(length) for length in data["doc_lengths"]]
        index.avgdl = sum(index.doc_lengths) / len(index.doc_lengths) if index.doc_lengths else 0.0
        index.postings = {
            term: [(int(position), int(tf)) for position, tf in postings]
            for term, postings in data["postings"].items()
        }
        index._term_freqs = [Counter() for _ in index.doc_ids]
        for term, postings in index.postings.items():
            for position, tf in postings:
                index._term_freqs[position][term] = tf
        index.idf = {term: bm25_idf(len(index.doc_ids), len(postings)) for term, postings in index.postings.items()}
        return index
