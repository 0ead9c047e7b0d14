"""
评测报告模式
"""
from typing import List, Optional

from pydantic import BaseModel, Field


class QueryMetrics(BaseModel):
    """单个查询的指标"""
    query_id: str = Field(..., description="查询ID")
    em: float = Field(..., ge=0, le=1, description="精确匹配")
    f1: float = Field(..., ge=0, le=1, description="token F1")
    acc: float = Field(..., ge=0, le=1, description="包含式准确率")
    recall: Optional[float] = Field(None, ge=0, le=1, description="召回率，无gold文档时为空")
    actual_number: int = Field(..., ge=0, description="送入LLM的文档数")
    steps: int = Field(..., ge=0, description="LLM调用次数")
    time_ms: float = Field(..., ge=0, description="耗时（毫秒）")


class Aggregates(BaseModel):
    """汇总指标"""
    em: float = Field(0.0, description="EM均值，百分制")
    f1: float = Field(0.0, description="F1均值，百分制")
    acc: float = Field(0.0, description="Acc均值，百分制")
    recall_rate: Optional[float] = Field(None, description="召回率均值，百分制")
    actual_numbers: float = Field(0.0, description="平均文档数")
    steps: float = Field(0.0, description="平均LLM调用次数")
    time_per_query: float = Field(0.0, description="平均耗时（毫秒）")


class EvalReport(Aggregates):
    """评测报告"""
    results_path: Optional[str] = Field(None, description="结果文件")
    dataset_path: Optional[str] = Field(None, description="数据集文件")
    strategy: Optional[str] = Field(None, description="检索策略")
    count: int = Field(0, ge=0, description="参与统计的查询数")
    failed: int = Field(0, ge=0, description="失败（status=error）的查询数")
    recall_excluded: int = Field(0, ge=0, description="无gold文档、不计入召回率的查询数")
    baseline_path: Optional[str] = Field(None, description="基线结果文件")
    normalized_time: Optional[float] = Field(None, description="相对基线的耗时")
    normalized_steps: Optional[float] = Field(None, description="相对基线的调用次数")
    per_query: List[QueryMetrics] = Field(default_factory=list, description="逐查询明细")
