"""
引擎配置
全局引擎参数（日志、BM25、嵌入维度、分类器/LLM HTTP后端），只从显式传入的值和配置文件读取
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type

from dotenv import dotenv_values
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from ..core.errors import UsageError

# 指向配置文件的唯一环境变量
CONFIG_ENV_VAR = "DRRAG_CONFIG"


class EngineSettings(BaseSettings):
    """引擎配置"""

    model_config = SettingsConfigDict(extra="ignore")

    # 日志配置
    log_level: str = "INFO"
    log_file: str = ""

    # BM25参数（Okapi默认值）
    bm25_k1: float = 1.2
    bm25_b: float = 0.75

    # 参考嵌入器维度
    embedding_dim: int = 256

    # 分类器HTTP后端
    classifier_timeout: float = 30.0
    classifier_max_in_flight: int = 8

    # LLM HTTP后端
    llm_model: str = "gpt-3.5-turbo"
    llm_api_key: str = ""
    llm_temperature: float = 0.0
    llm_max_tokens: int = 512
    llm_timeout: float = 60.0
    llm_max_in_flight: int = 8
    llm_max_retries: int = 0

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        """只接受显式传入的值，不读取进程环境变量"""
        return (init_settings,)


def normalize_key(key: str) -> str:
    """配置键与命令行参数名对齐：去掉前导'--'，'-'转为'_'，小写"""
    return key.strip().lstrip("-").replace("-", "_").lower()


def read_config_file(path: Optional[str]) -> Dict[str, Any]:
    """
    读取扁平key=value配置文件

    Args:
        path: 配置文件路径，None表示没有配置文件

    Returns:
        规范化键名后的配置字典（空值被丢弃）
    """
    if not path:
        return {}

    config_path = Path(path)
    if not config_path.is_file():
        raise UsageError(f"配置文件不存在: {path}")

    raw = dotenv_values(config_path)
    return {normalize_key(key): value for key, value in raw.items() if value not in (None, "")}


def load_settings(config_values: Optional[Dict[str, Any]] = None) -> EngineSettings:
    """根据配置文件内容构造引擎配置（未知键忽略）"""
    values = config_values or {}
    known = {key: value for key, value in values.items() if key in EngineSettings.model_fields}
    return EngineSettings(**known)


# 默认配置实例
settings = EngineSettings()
