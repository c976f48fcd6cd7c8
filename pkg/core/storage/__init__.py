"""
存储层模块
提供数据集存储与检查点容器
"""

from .dataset_storage import DatasetStorage, resolve_split
from .checkpoint_storage import (
    CheckpointState, encode_checkpoint, decode_checkpoint, save_checkpoint, load_checkpoint,
)

__all__ = [
    "DatasetStorage",
    "resolve_split",
    "CheckpointState",
    "encode_checkpoint",
    "decode_checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
