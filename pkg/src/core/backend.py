"""
后端基类和注册表
分类器与LLM后端都是可插拔的，通过 "scheme" 或 "scheme:参数" 形式的选择器创建
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple, Type

from ..config.settings import EngineSettings
from ..utils.logger import logger
from .errors import UsageError


@dataclass
class CompletionRequest:
    """一次补全请求"""
    prompt: str
    max_tokens: int = 512
    temperature: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt不能为空")


@dataclass
class CompletionResult:
    """一次补全的结果"""
    text: str
    attempts: int = 1

    @property
    def retries(self) -> int:
        return self.attempts - 1


class Backend(ABC):
    """后端基类"""

    #: 后端是否完全本地、确定（不访问网络）
    hermetic: bool = True

    def __init__(self, argument: str = "", settings: Optional[EngineSettings] = None):
        """
        初始化后端

        Args:
            argument: 选择器中冒号之后的部分（URL、夹具路径等）
            settings: 引擎配置
        """
        self.argument = argument
        self.settings = settings or EngineSettings()

    async def open(self):
        """打开连接等资源"""

    async def close(self):
        """释放资源"""

    async def __aenter__(self):
        await self.open()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        await self.close()


class ClassifierBackend(Backend):
    """分类器后端：给 (查询, 文档A, 文档B) 打分，分数在[0,1]"""

    @abstractmethod
    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        """
        打分

        Args:
            query: 查询文本
            doc_a: 第一个文档正文
            doc_b: 第二个文档正文

        Returns:
            [0,1]之间的分数
        """


class LLMBackend(Backend):
    """LLM后端：一次调用发送一个请求"""

    def __init__(self, argument: str = "", settings: Optional[EngineSettings] = None):
        super().__init__(argument, settings)
        self._call_count = 0

    @abstractmethod
    async def _complete(self, request: CompletionRequest) -> CompletionResult:
        """执行补全"""

    async def complete(self, request: CompletionRequest) -> CompletionResult:
        """执行一次补全，调用计数加1"""
        self._call_count += 1
        return await self._complete(request)

    @property
    def call_count(self) -> int:
        """complete()被调用的次数"""
        return self._call_count


class BackendRegistry:
    """后端注册表"""

    def __init__(self):
        self._backends: Dict[Tuple[str, str], Type[Backend]] = {}

    def register(self, kind: str, scheme: str, backend_class: Type[Backend]):
        """注册后端类"""
        expected = ClassifierBackend if kind == "classifier" else LLMBackend
        if not issubclass(backend_class, expected):
            raise ValueError(f"{kind}后端必须继承自{expected.__name__}: {backend_class}")

        self._backends[(kind, scheme.lower())] = backend_class
        logger.debug(f"已注册{kind}后端: {scheme}")

    def get_available(self, kind: str) -> List[str]:
        """获取某类可用的scheme列表"""
        return sorted(scheme for backend_kind, scheme in self._backends if backend_kind == kind)

    @staticmethod
    def parse_selector(selector: str) -> Tuple[str, str]:
        """拆分选择器 "scheme:参数"，参数可包含冒号（URL）；裸URL本身即为http(s)后端的参数"""
        selector = selector.strip()
        scheme, _, argument = selector.partition(":")
        if argument.startswith("//"):
            argument = selector
        return scheme.lower(), argument

    def create(self, kind: str, selector: str, settings: Optional[EngineSettings] = None) -> Any:
        """
        按选择器创建后端实例

        Raises:
            UsageError: 未知scheme
        """
        scheme, argument = self.parse_selector(selector)
        backend_class = self._backends.get((kind, scheme))
        if not backend_class:
            available = ", ".join(self.get_available(kind))
            raise UsageError(f"未知的{kind}后端: {selector!r}（可用: {available}）")
        return backend_class(argument, settings)


# 全局后端注册表
backend_registry = BackendRegistry()
