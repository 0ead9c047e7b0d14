"""
后端插件模块
导入即注册所有可用的分类器和LLM后端
"""

# 导入插件以触发注册
from .classifier_backends import ConstantClassifier, HttpClassifier, LexicalClassifier
from .llm_backends import HttpLLMClient, MockLLMClient

__all__ = [
    "LexicalClassifier",
    "ConstantClassifier",
    "HttpClassifier",
    "MockLLMClient",
    "HttpLLMClient",
]
