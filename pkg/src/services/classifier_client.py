"""
分类器HTTP客户端
按线协议调用外部分类模型: POST /classify {"query", "doc_a", "doc_b"} -> {"score"}
"""

import asyncio
from typing import Any, Dict, Optional

import aiohttp
from pydantic import ValidationError

from ..core.errors import ClassifierTransportError
from ..schemas.records import ClassifierResponse
from ..utils.logger import logger


class ClassifierClient:
    """分类器HTTP客户端（不重试：重试不确定的模型会破坏轨迹回放）"""

    def __init__(self, base_url: str, timeout: float = 30.0, max_in_flight: int = 8):
        """
        初始化客户端

        Args:
            base_url: 服务地址，如 http://localhost:9000
            timeout: 单次请求超时（秒）
            max_in_flight: 并发请求上限
        """
        if not base_url:
            raise ValueError("分类器服务地址未配置")

        self.endpoint = base_url.rstrip("/") + "/classify"
        self.timeout = timeout
        self.max_in_flight = max(1, max_in_flight)
        self._semaphore: Optional[asyncio.Semaphore] = None
        self.session: Optional[aiohttp.ClientSession] = None
        self.request_count = 0

    async def __aenter__(self):
        """异步上下文管理器入口"""
        await self.open()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """异步上下文管理器退出"""
        await self.close()

    async def open(self):
        if self._semaphore is None:
            self._semaphore = asyncio.Semaphore(self.max_in_flight)
        if self.session is None:
            self.session = aiohttp.ClientSession(
                headers={"Content-Type": "application/json"},
                timeout=aiohttp.ClientTimeout(total=self.timeout),
            )

    async def close(self):
        if self.session:
            await self.session.close()
            self.session = None

    async def score(self, query: str, doc_a: str, doc_b: str) -> float:
        """
        请求一次分数

        Raises:
            ClassifierTransportError: 未初始化、网络错误、超时、非2xx或响应体格式错误
        """
        if not self.session or self._semaphore is None:
            raise ClassifierTransportError("ClassifierClient未初始化，请使用async with语句")

        payload = {"query": query, "doc_a": doc_a, "doc_b": doc_b}
        async with self._semaphore:
            self.request_count += 1
            try:
                async with self.session.post(self.endpoint, json=payload) as response:
                    if response.status < 200 or response.status >= 300:
                        body = await response.text()
                        raise ClassifierTransportError(
                            f"分类器请求失败: {response.status}",
                            status_code=response.status,
                            error_data={"body": body[:500]},
                        )
                    response_data: Dict[str, Any] = await response.json(content_type=None)

            except asyncio.TimeoutError as e:
                raise ClassifierTransportError(f"分类器请求超时: {self.endpoint}") from e
            except aiohttp.ClientError as e:
                raise ClassifierTransportError(f"分类器网络请求失败: {str(e)}") from e
            except ValueError as e:
                raise ClassifierTransportError(f"分类器响应不是JSON: {str(e)}") from e

        try:
            parsed = ClassifierResponse.model_validate(response_data)
        except ValidationError as e:
            logger.error(f"分类器响应格式错误: {response_data}")
            raise ClassifierTransportError(
                "分类器响应格式错误", status_code=200, error_data={"body": response_data}
            ) from e

        return parsed.score
