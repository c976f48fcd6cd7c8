"""
数据模型模块
提供数据集清单、场景记录、评估结果等数据模型
"""

from .dataset import GENERATOR_VERSION, SceneRecord, DatasetManifest, scene_stem
from .evaluation import (
    MetricRecord, ContinuityReport, SingleEvalResult, SequentialEvalResult,
    ConsistencyResult, AblationRow,
)

__all__ = [
    "GENERATOR_VERSION",
    "SceneRecord",
    "DatasetManifest",
    "scene_stem",
    "MetricRecord",
    "ContinuityReport",
    "SingleEvalResult",
    "SequentialEvalResult",
    "ConsistencyResult",
    "AblationRow",
]
