"""
测试配置文件
共享的小语料、数据集写出工具和引擎配置
"""

import os
import sys

import pytest

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.config.settings import EngineSettings  # noqa: E402
from src.services.corpus import CorpusHandle, Document  # noqa: E402
from tests.reference import write_lines  # noqa: E402


@pytest.fixture
def settings():
    """默认引擎配置"""
    return EngineSettings()


@pytest.fixture
def heiberg_records():
    """两跳小语料"""
    return [
        {"doc_id": "d1", "title": "Peter Andreas Heiberg", "text": "Peter Andreas Heiberg son Johan Ludvig Heiberg"},
        {"doc_id": "d2", "title": "Johan Ludvig Heiberg", "text": "Johan Ludvig Heiberg wife Johanne Luise"},
        {"doc_id": "d3", "title": "Astronomy", "text": "Johan studied astronomy in Copenhagen"},
        {"doc_id": "d4", "title": "Spouse", "text": "a spouse is a partner in a marriage"},
        {"doc_id": "d5", "title": "", "text": "Copenhagen harbour and theatre"},
    ]


@pytest.fixture
def heiberg_corpus(heiberg_records):
    return CorpusHandle.from_documents(
        Document(record["doc_id"], record["title"], record["text"]) for record in heiberg_records
    )


@pytest.fixture
def corpus_file(tmp_path, heiberg_records):
    return write_lines(tmp_path / "corpus.jsonl", heiberg_records)


@pytest.fixture
def dataset_records():
    return [
        {
            "query_id": "q1",
            "question": "Who is the spouse of the son of Peter Andreas Heiberg?",
            "answers": ["Johanne Luise"],
            "gold_doc_ids": ["d1", "d2"],
            "candidates": ["d1", "d2", "d3", "d4"],
        },
        {
            "query_id": "q2",
            "question": "What did Johan study?",
            "answers": ["astronomy"],
            "gold_doc_ids": ["d3"],
        },
    ]


@pytest.fixture
def dataset_file(tmp_path, dataset_records):
    return write_lines(tmp_path / "dataset.jsonl", dataset_records)
