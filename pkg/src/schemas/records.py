"""
文件记录的Pydantic模式
语料、嵌入旁路文件、数据集、结果、训练对和LLM夹具的行格式
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class CorpusRecord(BaseModel):
    """语料行"""
    model_config = ConfigDict(extra="ignore")

    doc_id: str = Field(..., min_length=1, description="文档ID")
    title: str = Field("", description="标题，可为空")
    text: str = Field(..., description="正文，原样保存")

    @field_validator("text")
    @classmethod
    def validate_text(cls, v: str) -> str:
        """正文不能为空"""
        if not v:
            raise ValueError("text不能为空")
        return v


class EmbeddingRecord(BaseModel):
    """预计算嵌入旁路文件行"""
    model_config = ConfigDict(extra="ignore")

    doc_id: str = Field(..., min_length=1, description="文档ID")
    vector: List[float] = Field(..., min_length=1, description="向量")


class DatasetRecord(BaseModel):
    """QA数据集行"""
    model_config = ConfigDict(extra="ignore")

    query_id: str = Field(..., min_length=1, description="查询ID")
    question: str = Field(..., min_length=1, description="问题文本")
    answers: List[str] = Field(..., min_length=1, description="标准答案（可多个别名）")
    gold_doc_ids: List[str] = Field(default_factory=list, description="支撑文档ID")
    candidates: Optional[List[str]] = Field(None, description="候选文档池（含干扰文档）")


class ResultRecord(BaseModel):
    """运行结果行"""
    model_config = ConfigDict(extra="ignore")

    query_id: str = Field(..., description="查询ID")
    strategy: str = Field(..., description="检索策略")
    k: int = Field(..., ge=1, description="总预算")
    k1: int = Field(..., ge=1, description="第一阶段数量")
    k2: Optional[int] = Field(None, ge=1, description="第二阶段每对深度，单阶段策略为空")
    answer: str = Field("", description="解析后的答案")
    context_doc_ids: List[str] = Field(default_factory=list, description="送入LLM的文档ID")
    llm_calls: int = Field(0, ge=0, description="LLM调用次数")
    wall_time_ms: float = Field(0.0, ge=0, description="耗时（毫秒）")
    status: str = Field("ok", description="ok 或 error")
    error: Optional[str] = Field(None, description="错误信息")
    trace: Optional[Dict[str, Any]] = Field(None, description="序列化的检索轨迹")


class TrainingPairRecord(BaseModel):
    """分类器训练对行"""
    query: str = Field(..., description="查询")
    doc_a: str = Field(..., description="文档A正文")
    doc_b: str = Field(..., description="文档B正文")
    label: str = Field(..., pattern="^(positive|negative)$", description="标签")
    doc_a_id: Optional[str] = Field(None, description="文档A ID")
    doc_b_id: Optional[str] = Field(None, description="文档B ID")
    case: Optional[str] = Field(None, description="样本类别")


class ClassifierResponse(BaseModel):
    """分类器HTTP响应"""
    model_config = ConfigDict(extra="ignore")

    score: float = Field(..., ge=0.0, le=1.0, description="相关性分数")


class IndexManifest(BaseModel):
    """索引目录清单"""
    model_config = ConfigDict(extra="ignore")

    format_version: int = Field(1, description="索引格式版本")
    corpus_sha256: str = Field(..., description="语料文件SHA-256")
    embeddings_sha256: Optional[str] = Field(None, description="嵌入旁路文件SHA-256")
    embedder_id: str = Field(..., description="查询嵌入器标识")
    dimension: int = Field(..., ge=1, description="向量维度")
    doc_count: int = Field(..., ge=0, description="文档数")
    mean_token_length: float = Field(..., ge=0, description="平均token数")
    bm25_k1: float = Field(..., description="BM25 k1")
    bm25_b: float = Field(..., description="BM25 b")

    def matches(self, **inputs: Any) -> bool:
        """输入与参数相同即视为索引已是最新"""
        return all(getattr(self, key) == value for key, value in inputs.items())
