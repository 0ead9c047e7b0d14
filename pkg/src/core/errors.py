"""
异常定义
所有引擎异常都继承DrRagError，并携带命令行退出码
"""

from typing import Any, Dict, List, Optional


class DrRagError(Exception):
    """引擎异常基类"""

    exit_code = 2

    def __init__(self, message: str, details: Dict[str, Any] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class UsageError(DrRagError):
    """参数或配置错误"""

    exit_code = 1


class DataError(DrRagError):
    """输入数据错误"""

    exit_code = 2


class CorpusFormatError(DataError):
    """语料行格式错误"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"第 {line_number} 行: {message}"
        super().__init__(message, {"line_number": line_number})


class DuplicateDocumentError(CorpusFormatError):
    """重复的doc_id"""

    def __init__(self, doc_id: str, line_number: Optional[int] = None):
        self.doc_id = doc_id
        super().__init__(f"重复的doc_id: {doc_id!r}", line_number)
        self.details["doc_id"] = doc_id


class UnknownDocumentError(DataError):
    """doc_id不在语料中"""

    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"未知的doc_id: {doc_id!r}", {"doc_id": doc_id})


class DimensionMismatchError(DataError):
    """向量维度不一致"""

    def __init__(self, expected: int, actual: int, source: str = ""):
        self.expected = expected
        self.actual = actual
        message = f"向量维度不匹配: 期望 {expected}, 实际 {actual}"
        if source:
            message += f" ({source})"
        super().__init__(message, {"expected": expected, "actual": actual})


class DatasetError(DataError):
    """数据集或结果文件错误"""

    def __init__(self, message: str, offending_ids: List[str] = None):
        self.offending_ids = list(offending_ids or [])
        if self.offending_ids:
            message += f": {', '.join(self.offending_ids)}"
        super().__init__(message, {"offending_ids": self.offending_ids})


class SynthSpecError(DataError):
    """合成数据规格无法满足"""

    def __init__(self, constraint: str, message: str):
        self.constraint = constraint
        super().__init__(f"{constraint}: {message}", {"constraint": constraint})


class BackendTransportError(DrRagError):
    """后端传输错误"""

    exit_code = 3

    def __init__(self, message: str, status_code: int = None, error_data: Dict = None):
        self.status_code = status_code
        self.error_data = error_data or {}
        super().__init__(message, {"status_code": status_code})


class ClassifierTransportError(BackendTransportError):
    """分类器后端请求失败"""


class LLMTransportError(BackendTransportError):
    """LLM后端请求失败"""


class QueryFailedError(BackendTransportError):
    """单个查询在流水线中失败"""

    def __init__(self, query_id: str, cause: Exception):
        self.query_id = query_id
        self.cause = cause
        status_code = getattr(cause, "status_code", None)
        super().__init__(f"查询 {query_id} 失败: {cause}", status_code=status_code)
        self.details["query_id"] = query_id
        if isinstance(cause, DrRagError):
            self.exit_code = cause.exit_code
