"""
评估数据模型
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

from pydantic import BaseModel, Field


class MetricRecord(BaseModel):
    """逐图计算后再对图片取平均的指标"""

    rmse: float = Field(..., ge=0.0, description="人像区域均方根误差")
    psnr: float = Field(..., description="峰值信噪比（dB，上限 100）")
    ssim: float = Field(..., ge=-1.0, le=1.0, description="结构相似度")
    count: int = Field(default=1, ge=0, description="参与平均的图片数")

    @classmethod
    def average(cls, records: Sequence["MetricRecord"]) -> "MetricRecord":
        if not records:
            return cls(rmse=0.0, psnr=0.0, ssim=0.0, count=0)
        n = len(records)
        return cls(
            rmse=sum(r.rmse for r in records) / n,
            psnr=sum(r.psnr for r in records) / n,
            ssim=sum(r.ssim for r in records) / n,
            count=n,
        )


class ContinuityReport(BaseModel):
    """旋转序列相邻角度输出之间的平均 L1 变化"""

    step_changes: List[float] = Field(default_factory=list, description="每个相邻角度对的平均 L1 变化")
    mean: float = Field(default=0.0)
    median: float = Field(default=0.0)
    max: float = Field(default=0.0)
    spike_ratio: float = Field(default=0.0, description="max / median")


class SingleEvalResult(BaseModel):
    model: MetricRecord
    identity: MetricRecord = Field(..., description="输出直接取源图的基线")
    pairs: int = Field(default=0)


class SequentialEvalResult(BaseModel):
    model: MetricRecord
    per_angle: Dict[float, MetricRecord] = Field(default_factory=dict)
    continuity: ContinuityReport = Field(default_factory=ContinuityReport)
    pairs: int = Field(default=0)


class ConsistencyResult(BaseModel):
    """五个光照重叠恒等式在匹配场景与随机错配场景上的平均 L1 残差"""

    matched: List[float] = Field(default_factory=list)
    mismatched: List[float] = Field(default_factory=list)
    pseudo_anchor_error: Optional[float] = None
    pseudo_anchor_random_error: Optional[float] = None
    scenes: int = Field(default=0)

    @property
    def matched_mean(self) -> float:
        return sum(self.matched) / len(self.matched) if self.matched else 0.0

    @property
    def mismatched_mean(self) -> float:
        return sum(self.mismatched) / len(self.mismatched) if self.mismatched else 0.0


class AblationRow(BaseModel):
    variant: str
    rmse: float
    psnr: float
    ssim: float
    identity_rmse: float
    steps: int
    config_hash: str
