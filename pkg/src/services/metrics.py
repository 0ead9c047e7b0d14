"""
答案与检索指标
EM、token F1、包含式Acc（均基于标准化答案），以及召回率
"""

import re
import string
import unicodedata
from collections import Counter
from typing import Callable, List, Sequence

from .corpus import tokenize

_ARTICLES = re.compile(r"\b(a|an|the)\b")


def _is_punctuation(ch: str) -> bool:
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


def normalize_answer(s: str) -> str:
    """小写、去标点、去冠词 a/an/the、合并空白"""
    s = s.lower()
    s = "".join(ch for ch in s if not _is_punctuation(ch))
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def answer_tokens(s: str) -> List[str]:
    """标准化后的token"""
    return tokenize(normalize_answer(s))


def _max_over_golds(metric_fn: Callable[[str, str], float], pred: str, golds: Sequence[str]) -> float:
    if not golds:
        raise ValueError("标准答案列表不能为空")
    return max(metric_fn(pred, gold) for gold in golds)


def _exact_match_single(pred: str, gold: str) -> float:
    return float(normalize_answer(pred) == normalize_answer(gold))


def _f1_single(pred: str, gold: str) -> float:
    pred_tokens = answer_tokens(pred)
    gold_tokens = answer_tokens(gold)
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return (2 * precision * recall) / (precision + recall)


def _contains_single(pred: str, gold: str) -> float:
    pred_tokens = answer_tokens(pred)
    gold_tokens = answer_tokens(gold)
    if not gold_tokens:
        # 空标准答案只匹配空预测
        return float(not pred_tokens)
    width = len(gold_tokens)
    return float(any(pred_tokens[i:i + width] == gold_tokens for i in range(len(pred_tokens) - width + 1)))


def exact_match(pred: str, golds: Sequence[str]) -> int:
    """标准化后与任一标准答案相等为1"""
    return int(_max_over_golds(_exact_match_single, pred, golds))


def token_f1(pred: str, golds: Sequence[str]) -> float:
    """token多重集F1，取各标准答案的最大值"""
    return _max_over_golds(_f1_single, pred, golds)


def accuracy(pred: str, golds: Sequence[str]) -> int:
    """任一标准答案的token序列连续出现在预测中为1"""
    return int(_max_over_golds(_contains_single, pred, golds))


def recall_rate(context_doc_ids: Sequence[str], gold_doc_ids: Sequence[str]) -> float:
    """
    |context ∩ gold| / |gold|，集合语义

    Raises:
        ValueError: gold为空
    """
    gold = set(gold_doc_ids)
    if not gold:
        raise ValueError("gold_doc_ids不能为空")
    return len(gold & set(context_doc_ids)) / len(gold)
