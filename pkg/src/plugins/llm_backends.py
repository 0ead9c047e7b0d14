"""
LLM后端插件
mock[:夹具路径]: 按prompt哈希回放的确定性后端；http:URL: chat-completion服务
"""

from ..core.backend import backend_registry
from ..services.llm_client import HttpLLMClient, MockLLMClient

# 注册LLM后端
backend_registry.register("llm", "mock", MockLLMClient)
backend_registry.register("llm", "http", HttpLLMClient)
backend_registry.register("llm", "https", HttpLLMClient)
