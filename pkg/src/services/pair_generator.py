"""
分类器训练对生成
(gold, gold) 为正例；(gold, 干扰) 与 (干扰, 干扰) 为负例，按种子采样到指定正负比例
"""

import random
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations, product
from typing import Any, Dict, List, Optional, Sequence, Tuple

from ..core.errors import UsageError
from ..schemas.records import DatasetRecord, TrainingPairRecord
from ..utils.logger import logger
from .classifier import VerdictLabel
from .corpus import CorpusHandle


class PairCase(str, Enum):
    """训练对类别"""
    GOLD_GOLD = "gold-gold"
    GOLD_DISTRACTOR = "gold-distractor"
    DISTRACTOR_DISTRACTOR = "distractor-distractor"


@dataclass(frozen=True)
class TrainingPair:
    """一条训练对"""
    query: str
    doc_a: str
    doc_b: str
    label: VerdictLabel
    doc_a_id: str
    doc_b_id: str
    case: PairCase

    def to_dict(self) -> Dict[str, Any]:
        return TrainingPairRecord(
            query=self.query,
            doc_a=self.doc_a,
            doc_b=self.doc_b,
            label=self.label.value,
            doc_a_id=self.doc_a_id,
            doc_b_id=self.doc_b_id,
            case=self.case.value,
        ).model_dump()


@dataclass
class PairSummary:
    """生成统计"""
    records: int = 0
    skipped_records: int = 0
    positives: int = 0
    negatives: int = 0
    per_case: Dict[str, int] = field(default_factory=lambda: {case.value: 0 for case in PairCase})

    def describe(self) -> str:
        cases = ", ".join(f"{name}={count}" for name, count in self.per_case.items())
        return (
            f"正例 {self.positives}, 负例 {self.negatives} ({cases}); "
            f"查询 {self.records}, 跳过 {self.skipped_records}"
        )


def parse_ratio(value: str) -> Tuple[int, int]:
    """
    解析 "正:负" 比例

    Raises:
        UsageError: 格式错误或非正整数
    """
    parts = value.split(":")
    try:
        positive, negative = (int(part) for part in parts)
    except ValueError:
        raise UsageError(f"比例格式应为 正:负，如 1:1: {value!r}") from None
    if positive < 1 or negative < 1:
        raise UsageError(f"比例的两项都必须>=1: {value!r}")
    return positive, negative


def _unique(ids: Sequence[str]) -> List[str]:
    return list(dict.fromkeys(ids))


def _sample_in_order(rng: random.Random, items: List[Any], count: int) -> List[Any]:
    """无放回采样，保持原顺序"""
    indices = sorted(rng.sample(range(len(items)), count))
    return [items[i] for i in indices]


def gen_training_pairs(
    dataset: Sequence[DatasetRecord],
    corpus: CorpusHandle,
    ratio: Tuple[int, int] = (1, 1),
    seed: int = 0,
    max_pairs: Optional[int] = None,
    distractors_per_record: int = 2,
) -> Tuple[List[TrainingPair], PairSummary]:
    """
    生成分类器训练对

    Args:
        dataset: 数据集
        corpus: 语料
        ratio: (正, 负) 比例
        seed: 随机种子
        max_pairs: 总对数上限，按比例分配；不设时保留全部正例，负例按比例采样
        distractors_per_record: 没有候选池时从语料采样的干扰文档数

    Returns:
        (训练对, 统计)，训练对按数据集顺序排列
    """
    rng = random.Random(seed)
    summary = PairSummary(records=len(dataset))
    pos_weight, neg_weight = ratio
    all_doc_ids = corpus.doc_ids

    positives: List[Tuple[int, Tuple[str, str, str, PairCase]]] = []
    negatives: List[Tuple[int, Tuple[str, str, str, PairCase]]] = []

    for record_index, record in enumerate(dataset):
        golds = _unique(record.gold_doc_ids)
        if len(golds) < 2:
            logger.warning(f"查询 {record.query_id} 的gold文档少于2篇，跳过")
            summary.skipped_records += 1
            continue

        gold_set = set(golds)
        if record.candidates:
            distractors = [doc_id for doc_id in _unique(record.candidates) if doc_id not in gold_set]
        else:
            pool = [doc_id for doc_id in all_doc_ids if doc_id not in gold_set]
            distractors = rng.sample(pool, min(distractors_per_record, len(pool)))
        if not distractors:
            logger.warning(f"查询 {record.query_id} 没有可用的干扰文档，跳过")
            summary.skipped_records += 1
            continue

        for a, b in combinations(golds, 2):
            positives.append((record_index, (record.question, a, b, PairCase.GOLD_GOLD)))
        for a, b in product(golds, distractors):
            negatives.append((record_index, (record.question, a, b, PairCase.GOLD_DISTRACTOR)))
        for a, b in combinations(distractors, 2):
            negatives.append((record_index, (record.question, a, b, PairCase.DISTRACTOR_DISTRACTOR)))

    if max_pairs is not None:
        n_pos = min(max_pairs * pos_weight // (pos_weight + neg_weight), len(positives))
        n_neg = min(max_pairs - n_pos, len(negatives))
    else:
        n_pos = len(positives)
        n_neg = round(n_pos * neg_weight / pos_weight)
        if n_neg > len(negatives):
            n_neg = len(negatives)
            n_pos = min(n_pos, round(n_neg * pos_weight / neg_weight))

    chosen = [(item, VerdictLabel.POSITIVE) for item in _sample_in_order(rng, positives, n_pos)]
    chosen += [(item, VerdictLabel.NEGATIVE) for item in _sample_in_order(rng, negatives, n_neg)]
    chosen.sort(key=lambda entry: (entry[0][0], entry[1] != VerdictLabel.POSITIVE))

    pairs: List[TrainingPair] = []
    for (_, (question, a, b, case)), label in chosen:
        pairs.append(TrainingPair(
            query=question,
            doc_a=corpus.get(a).text,
            doc_b=corpus.get(b).text,
            label=label,
            doc_a_id=a,
            doc_b_id=b,
            case=case,
        ))
        summary.per_case[case.value] += 1

    summary.positives = n_pos
    summary.negatives = n_neg
    logger.info(f"训练对生成完成: {summary.describe()}")
    return pairs, summary
