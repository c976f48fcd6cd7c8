"""
数据集数据模型
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, PrivateAttr, model_validator

from core.exceptions import MissingRecordError

GENERATOR_VERSION = "ot3-synth/1"

SceneKey = Tuple[int, int, int]


def scene_stem(subject_id: int, env_id: int, rotation_index: int) -> str:
    return f"s{subject_id:03d}_e{env_id:03d}_r{rotation_index:02d}"


class SceneRecord(BaseModel):
    """单个场景：一个主体在一个环境的一个旋转下的渲染结果"""

    subject_id: int = Field(..., ge=0, description="主体ID（split 内编号）")
    env_id: int = Field(..., ge=0, description="环境ID（split 内编号）")
    rotation_index: int = Field(..., ge=0, description="旋转序号 d，角度 = step * d")
    angle: float = Field(..., description="环境旋转角度（度）")
    image: str = Field(..., description="图片路径（相对于 split 目录）")
    mask: str = Field(..., description="掩码路径（相对于 split 目录）")

    @property
    def key(self) -> SceneKey:
        return (self.subject_id, self.env_id, self.rotation_index)


class DatasetManifest(BaseModel):
    """数据集清单：subject x env x rotation 的完整笛卡尔积"""

    split: str = Field(..., description="split 名称")
    generator_version: str = Field(default=GENERATOR_VERSION, description="生成器版本")
    resolution: int = Field(..., description="图片分辨率")
    env_width: int = Field(..., description="环境贴图宽度")
    rotations: int = Field(default=12, ge=1, description="每个环境的旋转数")
    master_seed: int = Field(..., description="生成时的主种子")
    subject_seeds: List[int] = Field(default_factory=list, description="主体种子")
    env_seeds: List[int] = Field(default_factory=list, description="环境种子")
    records: List[SceneRecord] = Field(default_factory=list, description="场景记录")

    _index: Optional[Dict[SceneKey, SceneRecord]] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _unique_records(self) -> "DatasetManifest":
        keys = [record.key for record in self.records]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate (subject, env, rotation) records in manifest")
        return self

    @property
    def num_subjects(self) -> int:
        return len(self.subject_seeds)

    @property
    def num_envs(self) -> int:
        return len(self.env_seeds)

    @property
    def expected_count(self) -> int:
        return self.num_subjects * self.num_envs * self.rotations

    @property
    def is_complete(self) -> bool:
        return len(self.records) == self.expected_count

    def index(self) -> Dict[SceneKey, SceneRecord]:
        if self._index is None or len(self._index) != len(self.records):
            self._index = {record.key: record for record in self.records}
        return self._index

    def get(self, subject_id: int, env_id: int, rotation_index: int) -> SceneRecord:
        key = (subject_id, env_id, rotation_index)
        record = self.index().get(key)
        if record is None:
            raise MissingRecordError(
                f"no record for subject={subject_id} env={env_id} rotation={rotation_index} in split '{self.split}'",
                key=key,
            )
        return record
