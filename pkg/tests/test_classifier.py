"""
成对分类器与分类器后端测试
"""

import asyncio
from unittest.mock import AsyncMock, MagicMock, patch

import aiohttp
import pytest

from src import plugins  # noqa: F401
from src.core.backend import ClassifierBackend, LLMBackend, backend_registry
from src.core.errors import ClassifierTransportError, UsageError
from src.plugins.classifier_backends import ConstantClassifier, HttpClassifier, LexicalClassifier
from src.services.classifier import ClassifierVerdict, VerdictLabel, classify, lexical_score
from src.services.classifier_client import ClassifierClient
from src.services.corpus import Document


def fake_response(status=200, payload=None, text=""):
    """构造 session.post(...) 返回的异步上下文管理器"""
    response = MagicMock()
    response.status = status
    response.json = AsyncMock(return_value=payload)
    response.text = AsyncMock(return_value=text)
    context = MagicMock()
    context.__aenter__ = AsyncMock(return_value=response)
    context.__aexit__ = AsyncMock(return_value=False)
    return context


class TestLexicalScore:
    """词汇重叠分数测试"""

    def test_hand_computed_example(self):
        """{heiberg, son, spouse, johan} 与 {johan, wife, miquette} 只共享 johan"""
        score = lexical_score("heiberg son spouse", "heiberg son johan", "johan wife miquette")
        assert score == pytest.approx(1 / 6)

    def test_empty_sides(self):
        assert lexical_score("", "", "") == 0.0
        assert lexical_score("q", "a", "") == 0.0
        assert lexical_score("", "", "b") == 0.0

    def test_identical_sets(self):
        assert lexical_score("alpha", "beta", "beta alpha") == 1.0

    def test_order_matters(self):
        assert lexical_score("beta", "alpha", "alpha beta") == 1.0
        assert lexical_score("beta", "alpha beta", "alpha") == 0.5


class TestVerdict:
    """分类判断测试"""

    @pytest.mark.parametrize("threshold, label", [(0.2, VerdictLabel.NEGATIVE), (0.1, VerdictLabel.POSITIVE)])
    @pytest.mark.asyncio
    async def test_threshold(self, threshold, label):
        """分数约0.167：阈值0.2为负，0.1为正"""
        verdict = await classify(
            LexicalClassifier(),
            "heiberg son spouse",
            Document("a", "", "heiberg son johan"),
            Document("b", "", "johan wife miquette"),
            threshold,
        )
        assert verdict.label is label
        assert verdict.parent_doc_id == "a"
        assert verdict.candidate_doc_id == "b"

    def test_score_equal_to_threshold_is_positive(self):
        assert ClassifierVerdict(0.5, 0.5, "a", "b").is_positive

    def test_threshold_monotonic(self):
        """阈值升高只会让正判变少"""
        scores = [i / 20 for i in range(21)]
        for score in scores:
            labels = [ClassifierVerdict(score, t, "a", "b").is_positive for t in scores]
            assert labels == sorted(labels, reverse=True)

    @pytest.mark.asyncio
    async def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            await classify(LexicalClassifier(), "q", Document("a", "", "x"), Document("b", "", "y"), 1.5)

    @pytest.mark.asyncio
    async def test_trace_ids_override(self):
        verdict = await classify(
            ConstantClassifier("negative"), "q", Document("a", "", "x"), Document("b", "", "y"), 0.5,
            parent_doc_id="p", candidate_doc_id="c",
        )
        assert verdict.to_dict() == {
            "parent_doc_id": "p",
            "candidate_doc_id": "c",
            "score": 0.0,
            "threshold": 0.5,
            "label": "negative",
        }


class TestBackendRegistry:
    """后端注册表测试"""

    def test_builtin_backends_registered(self):
        assert {"constant", "http", "https", "lexical"} <= set(backend_registry.get_available("classifier"))
        assert {"http", "https", "mock"} <= set(backend_registry.get_available("llm"))

    def test_create_lexical(self):
        assert isinstance(backend_registry.create("classifier", "lexical"), LexicalClassifier)

    def test_selector_with_url_keeps_scheme(self):
        assert backend_registry.parse_selector("http://localhost:9000") == ("http", "http://localhost:9000")
        assert backend_registry.parse_selector("constant:negative") == ("constant", "negative")

    def test_unknown_scheme(self):
        with pytest.raises(UsageError):
            backend_registry.create("classifier", "bigbird")

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValueError):
            backend_registry.register("classifier", "bad", LLMBackend)


class TestConstantClassifier:
    """固定分数分类器测试"""

    @pytest.mark.asyncio
    async def test_positive_and_negative(self):
        assert await ConstantClassifier("positive").score("q", "a", "b") == 1.0
        assert await ConstantClassifier("negative").score("q", "a", "b") == 0.0

    def test_default_is_positive(self):
        assert ConstantClassifier().value == 1.0

    def test_unknown_label(self):
        with pytest.raises(UsageError):
            ConstantClassifier("maybe")

    def test_hermetic(self):
        assert ConstantClassifier.hermetic
        assert LexicalClassifier.hermetic
        assert not HttpClassifier.hermetic
        assert issubclass(HttpClassifier, ClassifierBackend)


class TestClassifierClient:
    """分类器HTTP客户端测试"""

    @pytest.fixture
    def client(self):
        return ClassifierClient("http://localhost:9000/", timeout=5, max_in_flight=2)

    def test_endpoint(self, client):
        assert client.endpoint == "http://localhost:9000/classify"

    def test_missing_url(self):
        with pytest.raises(ValueError):
            ClassifierClient("")

    @pytest.mark.asyncio
    async def test_score_success(self, client):
        """测试按线协议发送并解析分数"""
        async with client:
            with patch.object(client.session, "post", return_value=fake_response(payload={"score": 0.7})) as post:
                score = await client.score("q", "doc a", "doc b")

        assert score == 0.7
        assert client.request_count == 1
        post.assert_called_once_with(
            "http://localhost:9000/classify", json={"query": "q", "doc_a": "doc a", "doc_b": "doc b"}
        )

    @pytest.mark.asyncio
    async def test_non_2xx(self, client):
        async with client:
            with patch.object(client.session, "post", return_value=fake_response(status=503, text="busy")):
                with pytest.raises(ClassifierTransportError) as exc_info:
                    await client.score("q", "a", "b")

        assert exc_info.value.status_code == 503
        assert exc_info.value.exit_code == 3

    @pytest.mark.asyncio
    async def test_score_out_of_range(self, client):
        async with client:
            with patch.object(client.session, "post", return_value=fake_response(payload={"score": 1.5})):
                with pytest.raises(ClassifierTransportError):
                    await client.score("q", "a", "b")

    @pytest.mark.asyncio
    async def test_missing_score_field(self, client):
        async with client:
            with patch.object(client.session, "post", return_value=fake_response(payload={"label": "yes"})):
                with pytest.raises(ClassifierTransportError):
                    await client.score("q", "a", "b")

    @pytest.mark.asyncio
    async def test_network_error(self, client):
        async with client:
            with patch.object(client.session, "post", side_effect=aiohttp.ClientConnectionError("refused")):
                with pytest.raises(ClassifierTransportError):
                    await client.score("q", "a", "b")

    @pytest.mark.asyncio
    async def test_timeout(self, client):
        async with client:
            with patch.object(client.session, "post", side_effect=asyncio.TimeoutError()):
                with pytest.raises(ClassifierTransportError):
                    await client.score("q", "a", "b")

    @pytest.mark.asyncio
    async def test_not_opened(self, client):
        with pytest.raises(ClassifierTransportError):
            await client.score("q", "a", "b")

    @pytest.mark.asyncio
    async def test_http_backend_delegates(self):
        backend = backend_registry.create("classifier", "http://localhost:9000")
        assert isinstance(backend, HttpClassifier)

        with patch.object(backend.client, "score", new_callable=AsyncMock) as score:
            score.return_value = 0.25
            assert await backend.score("q", "a", "b") == 0.25
        score.assert_awaited_once_with("q", "a", "b")
