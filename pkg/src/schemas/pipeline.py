"""
检索流水线配置模式
"""
import math
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Strategy(str, Enum):
    """检索策略"""
    BM25 = "bm25"
    SM = "sm"
    QDC = "qdc"
    CIS = "cis"
    CFS = "cfs"

    @property
    def is_two_stage(self) -> bool:
        return self in (Strategy.QDC, Strategy.CIS, Strategy.CFS)

    @property
    def needs_classifier(self) -> bool:
        return self in (Strategy.CIS, Strategy.CFS)


class BaseRetriever(str, Enum):
    """两阶段策略使用的检索器"""
    SM = "sm"
    BM25 = "bm25"


def default_k1(k: int) -> int:
    """第一阶段默认数量 ceil(k/2)"""
    return max(1, math.ceil(k / 2))


class PipelineConfig(BaseModel):
    """流水线配置"""
    model_config = ConfigDict(extra="ignore")

    strategy: Strategy = Field(Strategy.CFS, description="检索策略")
    k: int = Field(..., ge=1, description="总预算：送入LLM的文档数上限")
    k1: Optional[int] = Field(None, ge=1, description="第一阶段数量，默认ceil(k/2)")
    k2: Optional[int] = Field(None, ge=1, description="第二阶段每个父文档的候选深度，默认k")
    classifier_threshold: float = Field(0.5, ge=0.0, le=1.0, description="判正阈值")
    base_retriever: BaseRetriever = Field(BaseRetriever.SM, description="两阶段策略的检索器")
    cis_pairwise: bool = Field(False, description="CIS使用全成对判断")
    concat_second_stage: bool = Field(True, description="第二阶段用查询+父文档拼接检索，关闭时只用原查询")

    @model_validator(mode="before")
    @classmethod
    def fill_defaults(cls, data: Any) -> Any:
        """补全k1/k2默认值"""
        if not isinstance(data, dict):
            return data
        try:
            k = int(data.get("k"))
        except (TypeError, ValueError):
            return data
        data = dict(data)
        if data.get("k1") is None:
            data["k1"] = default_k1(k)
        if data.get("k2") is None:
            data["k2"] = k
        return data

    @model_validator(mode="after")
    def validate_budget(self) -> "PipelineConfig":
        """k1 <= k"""
        if self.k1 is not None and self.k1 > self.k:
            raise ValueError(f"k1({self.k1})不能大于k({self.k})")
        return self

    @property
    def first_stage_count(self) -> int:
        """第一阶段实际检索数：单阶段策略取k，两阶段取k1"""
        return self.k1 if self.strategy.is_two_stage else self.k

    @property
    def second_stage_depth(self) -> Optional[int]:
        """第二阶段候选深度，单阶段策略没有第二阶段"""
        return self.k2 if self.strategy.is_two_stage else None
