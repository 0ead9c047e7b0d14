"""
运行配置
一次 run 的全部参数：流水线参数、文件路径、后端选择器、种子、并发和时钟模式
"""

from typing import Optional

from pydantic import Field, model_validator

from ..schemas.pipeline import PipelineConfig
from ..utils.clock import ClockMode


class RunConfig(PipelineConfig):
    """run子命令的配置，优先级：命令行 > 配置文件 > 默认值"""

    dataset: str = Field(..., min_length=1, description="数据集JSONL")
    index: str = Field(..., min_length=1, description="索引目录")
    out: str = Field(..., min_length=1, description="结果JSONL")
    classifier: Optional[str] = Field(None, description="分类器选择器，如 lexical 或 http:URL")
    llm: str = Field("mock", min_length=1, description="LLM选择器，如 mock:FIXTURE 或 http:URL")
    seed: Optional[int] = Field(None, description="随机种子，传给LLM后端")
    jobs: int = Field(1, ge=1, description="并发查询数上限")
    keep_going: bool = Field(False, description="查询失败时记录错误行并继续")
    clock: ClockMode = Field(ClockMode.AUTO, description="时钟模式")
    force: bool = Field(False, description="覆盖已存在的输出文件")

    @model_validator(mode="after")
    def validate_classifier(self) -> "RunConfig":
        """cis/cfs需要分类器"""
        if self.strategy.needs_classifier and not self.classifier:
            raise ValueError(f"{self.strategy.value}策略需要 --classifier")
        return self

    def pipeline_config(self) -> PipelineConfig:
        """只取流水线参数"""
        return PipelineConfig(**self.model_dump(include=set(PipelineConfig.model_fields)))
