"""
LLM客户端
单次调用的补全接口：HTTP chat-completion客户端、确定性的夹具Mock，以及 "Answer:" 行解析
"""

import asyncio
import hashlib
import re
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import aiohttp

from ..core.backend import CompletionRequest, CompletionResult, LLMBackend
from ..core.errors import CorpusFormatError, LLMTransportError, UsageError
from ..utils.jsonl import iter_jsonl
from ..utils.logger import logger

DEFAULT_FALLBACK = "Answer: <UNKNOWN>"

_ANSWER_MARKER = re.compile(r"^\s*answer\s*:", re.IGNORECASE)
_TRAILING_PUNCTUATION = ".;,!?:。；，！？："


@dataclass(frozen=True)
class ParsedAnswer:
    """解析后的答案"""
    raw_completion: str
    extracted: str
    parse_ok: bool


def _clean_answer(value: str) -> str:
    """去掉首尾空白、末尾标点和可选的尖括号包裹"""
    value = value.strip().rstrip(_TRAILING_PUNCTUATION).strip()
    if value.startswith("<") and value.endswith(">"):
        value = value[1:-1].strip()
    return value.rstrip(_TRAILING_PUNCTUATION).strip()


def parse_answer(completion: str) -> ParsedAnswer:
    """
    解析补全文本中的最终答案

    取最后一个以 "Answer:"（不区分大小写）开头的行；没有标记或标记后为空时
    parse_ok=False，extracted为整段补全去掉首尾空白
    """
    for line in reversed(completion.splitlines()):
        match = _ANSWER_MARKER.match(line)
        if match:
            extracted = _clean_answer(line[match.end():])
            if extracted:
                return ParsedAnswer(raw_completion=completion, extracted=extracted, parse_ok=True)
            break
    return ParsedAnswer(raw_completion=completion, extracted=completion.strip(), parse_ok=False)


def prompt_sha256(prompt: str) -> str:
    """夹具文件中用于索引prompt的哈希"""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def load_fixture(path: str) -> Tuple[Dict[str, str], str]:
    """
    读取Mock夹具文件

    Returns:
        (prompt哈希 -> 补全, 兜底补全)
    """
    completions: Dict[str, str] = {}
    fallback = DEFAULT_FALLBACK
    for line_number, record in iter_jsonl(path):
        if "fallback" in record:
            fallback = str(record["fallback"])
        elif "prompt_sha256" in record and "completion" in record:
            completions[str(record["prompt_sha256"]).lower()] = str(record["completion"])
        else:
            raise CorpusFormatError("夹具行需要 prompt_sha256+completion 或 fallback", line_number)
    logger.info(f"读取LLM夹具: {path} - {len(completions)} 条")
    return completions, fallback


class MockLLMClient(LLMBackend):
    """确定性Mock：按prompt哈希查表，查不到返回兜底补全"""

    hermetic = True

    def __init__(self, argument: str = "", settings=None, completions: Optional[Dict[str, str]] = None,
                 fallback: str = DEFAULT_FALLBACK):
        super().__init__(argument, settings)
        self.completions: Dict[str, str] = dict(completions or {})
        self.fallback = fallback
        if argument:
            loaded, loaded_fallback = load_fixture(argument)
            self.completions.update(loaded)
            self.fallback = loaded_fallback

    async def _complete(self, request: CompletionRequest) -> CompletionResult:
        text = self.completions.get(prompt_sha256(request.prompt), self.fallback)
        return CompletionResult(text=text, attempts=1)


class HttpLLMClient(LLMBackend):
    """chat-completion HTTP客户端，重试默认关闭，开启后重试次数记入轨迹"""

    hermetic = False

    def __init__(self, argument: str = "", settings=None):
        super().__init__(argument, settings)
        if not argument:
            raise UsageError("LLM服务地址未配置，选择器格式 http:URL")

        self.endpoint = argument
        self.model = self.settings.llm_model
        self.max_retries = max(0, self.settings.llm_max_retries)
        self.max_in_flight = max(1, self.settings.llm_max_in_flight)
        self._semaphore: Optional[asyncio.Semaphore] = None
        self.session: Optional[aiohttp.ClientSession] = None

    async def open(self):
        if self._semaphore is None:
            self._semaphore = asyncio.Semaphore(self.max_in_flight)
        if self.session is None:
            headers = {"Content-Type": "application/json"}
            if self.settings.llm_api_key:
                headers["Authorization"] = f"Bearer {self.settings.llm_api_key}"
            self.session = aiohttp.ClientSession(
                headers=headers,
                timeout=aiohttp.ClientTimeout(total=self.settings.llm_timeout),
            )

    async def close(self):
        if self.session:
            await self.session.close()
            self.session = None

    def build_payload(self, request: CompletionRequest) -> Dict[str, Any]:
        """构造请求体"""
        payload: Dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            payload["seed"] = request.seed
        return payload

    async def _post(self, payload: Dict[str, Any]) -> str:
        """发送一次请求并取第一个choice的内容"""
        async with self.session.post(self.endpoint, json=payload) as response:
            if response.status < 200 or response.status >= 300:
                body = await response.text()
                raise LLMTransportError(
                    f"LLM请求失败: {response.status}",
                    status_code=response.status,
                    error_data={"body": body[:500]},
                )
            response_data = await response.json(content_type=None)

        try:
            return str(response_data["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as e:
            raise LLMTransportError("LLM响应格式错误", status_code=200, error_data={"body": response_data}) from e

    async def _complete(self, request: CompletionRequest) -> CompletionResult:
        """
        发送补全请求

        Raises:
            LLMTransportError: 网络错误、超时、非2xx、响应格式错误
        """
        if not self.session or self._semaphore is None:
            raise LLMTransportError("HttpLLMClient未初始化，请先调用open()")

        payload = self.build_payload(request)
        async with self._semaphore:
            for attempt in range(self.max_retries + 1):
                try:
                    text = await self._post(payload)
                    return CompletionResult(text=text, attempts=attempt + 1)

                except LLMTransportError as e:
                    retryable = e.status_code is not None and (e.status_code == 429 or e.status_code >= 500)
                    if retryable and attempt < self.max_retries:
                        wait_time = 2 ** attempt
                        logger.warning(f"LLM请求失败({e.status_code})，{wait_time}秒后重试")
                        await asyncio.sleep(wait_time)
                        continue
                    raise

                except asyncio.TimeoutError as e:
                    if attempt < self.max_retries:
                        logger.warning(f"LLM请求超时，重试第 {attempt + 1} 次")
                        continue
                    raise LLMTransportError(f"LLM请求超时: {self.endpoint}") from e

                except aiohttp.ClientError as e:
                    if attempt < self.max_retries:
                        wait_time = 2 ** attempt
                        logger.warning(f"LLM网络错误，{wait_time}秒后重试: {str(e)}")
                        await asyncio.sleep(wait_time)
                        continue
                    raise LLMTransportError(f"LLM网络请求失败: {str(e)}") from e

                except ValueError as e:
                    raise LLMTransportError(f"LLM响应不是JSON: {str(e)}") from e

        raise LLMTransportError("所有重试均失败")


async def complete(request: CompletionRequest, backend: LLMBackend) -> CompletionResult:
    """通过后端执行一次补全"""
    return await backend.complete(request)
