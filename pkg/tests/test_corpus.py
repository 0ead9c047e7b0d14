"""
语料读取与分词测试
"""

import pytest

from src.core.errors import (
    CorpusFormatError,
    DataError,
    DuplicateDocumentError,
    UnknownDocumentError,
    UsageError,
)
from src.services.corpus import CorpusHandle, Document, ingest_corpus, tokenize
from src.utils.jsonl import ensure_writable, file_sha256, iter_jsonl, write_jsonl
from tests.reference import write_lines


class TestTokenize:
    """分词测试"""

    def test_lowercase_and_split(self):
        assert tokenize("The Green performer!") == ["the", "green", "performer"]

    def test_empty(self):
        assert tokenize("") == []

    def test_possessive(self):
        assert tokenize("Peter Andreas Heiberg's son") == ["peter", "andreas", "heiberg", "s", "son"]

    def test_unicode_letters(self):
        assert tokenize("Søren Kierkegaard, København") == ["søren", "kierkegaard", "københavn"]

    def test_underscore_is_separator(self):
        assert tokenize("snake_case") == ["snake", "case"]

    @pytest.mark.parametrize("text", ["A-b  c", "Miquette Giraudy.", "1960, 1964", "  spaced\tout\n"])
    def test_idempotent_on_joined_output(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens


class TestIngestCorpus:
    """语料读取测试"""

    def test_reads_all_records(self, corpus_file, heiberg_records):
        corpus = ingest_corpus(corpus_file)

        assert len(corpus) == 5
        assert corpus.stats.count == 5
        for record in heiberg_records:
            doc = corpus.get(record["doc_id"])
            assert doc.title == record["title"]
            assert doc.text == record["text"]

    def test_source_hash_recorded(self, corpus_file):
        corpus = ingest_corpus(corpus_file)
        assert corpus.source_sha256 == file_sha256(corpus_file)

    def test_stats_match_recomputation(self, corpus_file):
        corpus = ingest_corpus(corpus_file)
        assert corpus.compute_stats() == corpus.stats

    def test_duplicate_doc_id_reports_second_line(self, tmp_path):
        path = write_lines(tmp_path / "dup.jsonl", [
            {"doc_id": "d1", "title": "", "text": "one"},
            {"doc_id": "d2", "title": "", "text": "two"},
            {"doc_id": "d3", "title": "", "text": "three"},
            {"doc_id": "d1", "title": "", "text": "again"},
        ])

        with pytest.raises(DuplicateDocumentError) as exc_info:
            ingest_corpus(path)

        assert exc_info.value.doc_id == "d1"
        assert exc_info.value.line_number == 4
        assert "d1" in exc_info.value.message

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")

        corpus = ingest_corpus(path)

        assert len(corpus) == 0
        assert corpus.stats.mean_token_length == 0.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            ingest_corpus(tmp_path / "nope.jsonl")

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"doc_id": "d1", "text": "ok"}\n{not json\n', encoding="utf-8")

        with pytest.raises(CorpusFormatError) as exc_info:
            ingest_corpus(path)

        assert exc_info.value.line_number == 2

    def test_empty_text_rejected(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [{"doc_id": "d1", "title": "t", "text": ""}])

        with pytest.raises(CorpusFormatError):
            ingest_corpus(path)

    def test_unknown_fields_ignored_and_title_optional(self, tmp_path):
        path = write_lines(tmp_path / "c.jsonl", [{"doc_id": "d1", "text": "body", "url": "x"}])

        corpus = ingest_corpus(path)

        assert corpus.get("d1") == Document("d1", "", "body")

    def test_unknown_doc_id(self, heiberg_corpus):
        with pytest.raises(UnknownDocumentError):
            heiberg_corpus.get("missing")


class TestCorpusHandle:
    """语料句柄测试"""

    def test_documents_sorted_by_id(self):
        corpus = CorpusHandle.from_documents([Document("b", "", "x"), Document("a", "", "y")])
        assert corpus.doc_ids == ["a", "b"]

    def test_searchable_text_skips_empty_title(self):
        assert Document("d", "", "body").searchable_text == "body"
        assert Document("d", "T", "body").searchable_text == "T\nbody"

    def test_from_documents_rejects_duplicates(self):
        with pytest.raises(DuplicateDocumentError):
            CorpusHandle.from_documents([Document("a", "", "x"), Document("a", "", "y")])


class TestJsonl:
    """JSONL工具测试"""

    def test_write_refuses_overwrite_without_force(self, tmp_path):
        path = tmp_path / "out.jsonl"
        write_jsonl(path, [{"a": 1}])

        with pytest.raises(UsageError):
            write_jsonl(path, [{"a": 2}])

        write_jsonl(path, [{"a": 2}], force=True)
        assert [record for _, record in iter_jsonl(path)] == [{"a": 2}]

    def test_ensure_writable_creates_parent(self, tmp_path):
        path = ensure_writable(tmp_path / "nested" / "dir" / "out.jsonl")
        assert path.parent.is_dir()

    def test_blank_lines_skipped_with_warning(self, tmp_path, mocker):
        path = tmp_path / "x.jsonl"
        path.write_text('{"a": 1}\n\n  \n{"a": 2}\n', encoding="utf-8")
        log = mocker.patch("src.utils.jsonl.logger")

        assert [line for line, _ in iter_jsonl(path)] == [1, 4]
        log.warning.assert_called_once()
        assert "跳过 2 个空白行" in log.warning.call_args.args[0]

    def test_no_warning_without_blank_lines(self, tmp_path, mocker):
        path = tmp_path / "x.jsonl"
        path.write_text('{"a": 1}\n{"a": 2}\n', encoding="utf-8")
        log = mocker.patch("src.utils.jsonl.logger")

        assert len(list(iter_jsonl(path))) == 2
        log.warning.assert_not_called()

    def test_non_object_line_rejected(self, tmp_path):
        path = tmp_path / "x.jsonl"
        path.write_text("[1, 2]\n", encoding="utf-8")

        with pytest.raises(CorpusFormatError):
            list(iter_jsonl(path))
