from __future__ import annotations

from pydantic import BaseModel, Field
from typing import Optional

from .configs import (
    AppConfig, LoggingConfig, ImagingConfig, DatasetConfig, ModelConfig,
    LossWeights, LossFlags, TrainingConfig, EvaluationConfig, RenderMode,
)


class GlobalConfig(BaseModel):
    app: AppConfig = Field(default_factory=AppConfig)
    logging: Optional[LoggingConfig] = None
    imaging: ImagingConfig = Field(default_factory=ImagingConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

__all__ = [
    'GlobalConfig', 'AppConfig', 'LoggingConfig', 'ImagingConfig', 'DatasetConfig',
    'ModelConfig', 'LossWeights', 'LossFlags', 'TrainingConfig', 'EvaluationConfig',
    'RenderMode',
]
