from __future__ import annotations

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class RenderMode(str, Enum):
    """渲染方式：乘性神经渲染 / 拼接 / 直接相乘（后两者用于消融）"""
    MNR = "MNR"
    CONCAT = "Concat"
    MUL = "Mul"


class AppConfig(BaseModel):
    title: Optional[str] = Field(default="ot3relight", description="title of the app")
    version: Optional[str] = Field(default=None, description="version of the app")
    description: Optional[str] = Field(default=None, description="description of the app")
    mode: Optional[str] = Field(default="dev", description="mode of the app")
    data_root: str = Field(default="data", description="default dataset root directory")
    output_root: str = Field(default="runs", description="default directory for checkpoints and reports")


class LoggingConfig(BaseModel):
    level: str = Field(default="INFO", description="Log level: DEBUG, INFO, WARNING, ERROR, CRITICAL")
    console_enabled: bool = Field(default=True, description="Enable console logging")
    log_path: Optional[str] = Field(default=None, description="General application log file path")
    metrics_log_path: Optional[str] = Field(default=None, description="Training/evaluation metrics log file path")
    error_log_path: Optional[str] = Field(default=None, description="Error log file path")


class ImagingConfig(BaseModel):
    inpaint_radius: int = Field(default=5, ge=1, description="Telea inpainting neighbourhood radius in pixels")
    feather: bool = Field(default=False, description="Feather the composite mask by one pixel")
    mask_threshold: float = Field(default=0.5, gt=0.0, lt=1.0, description="Threshold used to binarize stored masks")


class DatasetConfig(BaseModel):
    split: str = Field(default="train", description="split name: train or test")
    subjects: int = Field(default=8, ge=1, description="number of procedural subjects")
    envs: int = Field(default=6, ge=1, description="number of environment maps")
    rotations: int = Field(default=12, ge=1, description="lighting rotations per environment")
    resolution: int = Field(default=64, ge=8, description="square image resolution in pixels")
    env_width: int = Field(default=96, ge=12, description="equirectangular map width (height = width / 2)")
    area_lights: int = Field(default=2, ge=0, description="colored area lights per environment")
    fov_degrees: float = Field(default=60.0, gt=0.0, lt=170.0, description="field of view used for background rays")
    exposure: float = Field(default=1.0, gt=0.0, description="tone-mapping exposure")
    seed: int = Field(default=1, ge=0, description="master seed")
    workers: Optional[int] = Field(default=None, ge=1, description="render worker threads (None = cpu count)")

    @field_validator("env_width")
    @classmethod
    def _even_width(cls, value: int) -> int:
        if value % 2:
            raise ValueError("env_width must be even")
        return value

    @property
    def env_height(self) -> int:
        return self.env_width // 2

    @property
    def rotation_step_degrees(self) -> float:
        return 360.0 / self.rotations


class ModelConfig(BaseModel):
    resolution: int = Field(default=64, ge=8, description="input/output resolution")
    subject_channels: int = Field(default=32, ge=4, description="C_s, channels of the subject feature")
    trunk_width: int = Field(default=64, ge=8, description="hidden width of the lighting MLP trunk")
    trunk_depth: int = Field(default=2, ge=1, description="hidden layers in the lighting MLP trunk")
    render_mode: RenderMode = Field(default=RenderMode.MNR, description="MNR, Concat or Mul")
    use_ot3: bool = Field(default=True, description="three anchor heads instead of a single code")
    use_bg: bool = Field(default=True, description="separate background illumination encoder")
    subject_res_blocks: int = Field(default=2, ge=0, description="residual blocks at the end of E_s")
    init_scheme: str = Field(default="kaiming", description="kaiming (fan-in) or default torch init")
    pseudo_anchor_head: str = Field(default="zero", description="head inverted for the -180 anchor: zero or p90")
    damping: float = Field(default=1e-8, ge=0.0, description="Tikhonov damping of the head inversion")

    @field_validator("pseudo_anchor_head")
    @classmethod
    def _known_head(cls, value: str) -> str:
        if value not in {"zero", "p90"}:
            raise ValueError("pseudo_anchor_head must be 'zero' or 'p90'")
        return value

    @field_validator("init_scheme")
    @classmethod
    def _known_init(cls, value: str) -> str:
        if value not in {"kaiming", "default"}:
            raise ValueError("init_scheme must be 'kaiming' or 'default'")
        return value

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelConfig":
        if self.resolution % 8:
            raise ValueError("resolution must be divisible by 8")
        if self.subject_channels % 4:
            raise ValueError("subject_channels must be divisible by 4")
        return self

    @property
    def code_dim(self) -> int:
        return 8 * self.subject_channels


class LossWeights(BaseModel):
    auglight: float = Field(default=0.5, ge=0.0, description="lambda_a")
    feat: float = Field(default=0.1, ge=0.0, description="lambda_f")
    cons: float = Field(default=0.25, ge=0.0, description="lambda_c")


class LossFlags(BaseModel):
    use_ot3: bool = Field(default=True, description="augmented relighting and consistency need the three anchors")
    use_feat: bool = Field(default=True, description="feature cycle consistency")
    use_cons: bool = Field(default=True, description="latent lighting consistency")


class TrainingConfig(BaseModel):
    learning_rate: float = Field(default=1.5e-5, gt=0.0, description="Adam learning rate")
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=2, ge=1)
    epochs: int = Field(default=5, ge=0, description="used when steps is not set")
    steps: Optional[int] = Field(default=None, ge=0, description="explicit step budget, overrides epochs")
    seed: int = Field(default=1, ge=0)
    checkpoint_every: int = Field(default=500, ge=1)
    log_every: int = Field(default=50, ge=1)
    prefetch: int = Field(default=4, ge=1, description="bounded queue size of the batch prefetcher")
    loss_weights: LossWeights = Field(default_factory=LossWeights)
    flags: LossFlags = Field(default_factory=LossFlags)


class EvaluationConfig(BaseModel):
    seed: int = Field(default=7, ge=0)
    max_scenes: Optional[int] = Field(default=None, ge=1, description="cap on evaluated scenes (None = all)")
    sweep_step: float = Field(default=30.0, gt=0.0)
    ablation_steps: Optional[int] = Field(default=None, ge=0, description="training steps per ablation variant")
    variants: List[str] = Field(
        default_factory=lambda: ["full", "no-bg", "no-ot3", "no-feat", "no-cons", "concat", "mul"],
        description="ablation variants",
    )
