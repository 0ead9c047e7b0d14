"""
分类器后端插件
lexical: 词汇重叠参考分类器；constant:positive|negative: 固定分数；http:URL: 外部分类服务
"""

from typing import Optional

from ..config.settings import EngineSettings
from ..core.backend import ClassifierBackend, backend_registry
from ..core.errors import UsageError
from ..services.classifier import lexical_score
from ..services.classifier_client import ClassifierClient
from ..utils.logger import logger


class LexicalClassifier(ClassifierBackend):
    """Jaccard(tokens(q) ∪ tokens(a), tokens(b))"""

    hermetic = True

    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        return lexical_score(query, doc_a, doc_b)


class ConstantClassifier(ClassifierBackend):
    """对所有输入给出同一分数，positive=1.0，negative=0.0"""

    hermetic = True

    _SCORES = {"positive": 1.0, "negative": 0.0}

    def __init__(self, argument: str = "", settings: Optional[EngineSettings] = None):
        super().__init__(argument, settings)
        label = (argument or "positive").strip().lower()
        if label not in self._SCORES:
            raise UsageError(f"constant分类器只支持 positive/negative: {argument!r}")
        self.label = label
        self.value = self._SCORES[label]

    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        return self.value


class HttpClassifier(ClassifierBackend):
    """通过HTTP线协议调用外部分类模型"""

    hermetic = False

    def __init__(self, argument: str = "", settings: Optional[EngineSettings] = None):
        super().__init__(argument, settings)
        if not argument:
            raise UsageError("http分类器需要服务地址，格式 http:URL")
        self.client = ClassifierClient(
            argument,
            timeout=self.settings.classifier_timeout,
            max_in_flight=self.settings.classifier_max_in_flight,
        )

    async def open(self):
        await self.client.open()
        logger.info(f"分类器服务已连接: {self.client.endpoint}")

    async def close(self):
        await self.client.close()

    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        return await self.client.score(query, doc_a, doc_b)


# 注册分类器后端
backend_registry.register("classifier", "lexical", LexicalClassifier)
backend_registry.register("classifier", "constant", ConstantClassifier)
backend_registry.register("classifier", "http", HttpClassifier)
backend_registry.register("classifier", "https", HttpClassifier)
