"""
数据集存储模块
负责数据集目录布局、清单（manifest.json）的原子读写以及场景图片的加载
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from core.exceptions import DataIOError
from core.imaging.image import ImageProcessor
from core.models.dataset import DatasetManifest, SceneRecord
from core.utils import read_json, write_json

logger = logging.getLogger(__name__)


class DatasetStorage:
    """
    数据集存储类
    布局：<root>/<split>/s<id>_e<id>_r<d>.png、..._mask.png、<root>/<split>/manifest.json
    """

    MANIFEST_FILENAME = "manifest.json"

    def __init__(self, root: str, mask_threshold: float = 0.5):
        self.root = Path(root)
        self.images = ImageProcessor(mask_threshold=mask_threshold)

    def split_dir(self, split: str) -> Path:
        self._validate_split(split)
        return self.root / split

    def manifest_path(self, split: str) -> Path:
        return self.split_dir(split) / self.MANIFEST_FILENAME

    def has_manifest(self, split: str) -> bool:
        return self.manifest_path(split).is_file()

    def list_splits(self) -> List[str]:
        """根目录下所有带清单的 split"""
        if not self.root.is_dir():
            return []
        return sorted(
            child.name for child in self.root.iterdir()
            if child.is_dir() and (child / self.MANIFEST_FILENAME).is_file()
        )

    def save_manifest(self, manifest: DatasetManifest) -> Path:
        path = self.manifest_path(manifest.split)
        write_json(path, manifest.model_dump(mode="json"))
        logger.info("Manifest for split '%s' written: %d records -> %s",
                    manifest.split, len(manifest.records), path)
        return path

    def load_manifest(self, split: str) -> DatasetManifest:
        """
        读取清单

        Raises:
            DataIOError: 清单不存在、无法解析或字段非法
        """
        path = self.manifest_path(split)
        payload = read_json(path)
        try:
            return DatasetManifest.model_validate(payload)
        except ValidationError as exc:
            raise DataIOError(f"清单格式错误: {path} ({exc.errors()[0].get('msg')})", path=str(path),
                              error_code="DECODE_ERROR") from exc

    def load_other_manifests(self, split: str) -> Dict[str, DatasetManifest]:
        return {name: self.load_manifest(name) for name in self.list_splits() if name != split}

    def image_path(self, split: str, record: SceneRecord) -> Path:
        return self.split_dir(split) / record.image

    def mask_path(self, split: str, record: SceneRecord) -> Path:
        return self.split_dir(split) / record.mask

    def write_scene(self, split: str, record: SceneRecord, image: np.ndarray, mask: np.ndarray) -> None:
        self.images.write_image(self.image_path(split, record), image)
        self.images.write_mask(self.mask_path(split, record), mask)

    def read_scene(self, split: str, record: SceneRecord) -> Tuple[np.ndarray, np.ndarray]:
        image = self.images.read_image(self.image_path(split, record))
        mask = self.images.read_mask(self.mask_path(split, record))
        if image.shape[:2] != mask.shape:
            raise DataIOError(f"mask and image sizes differ for {record.image}",
                              path=str(self.mask_path(split, record)))
        return image, mask

    @staticmethod
    def _validate_split(split: str) -> None:
        if not split or any(sep in split for sep in ("/", "\\")) or split in {".", ".."}:
            raise DataIOError(f"非法的 split 名称: {split!r}")


def resolve_split(root: str, split: Optional[str] = None, default: str = "train") -> Tuple[str, str]:
    """
    解析 --data 参数：既可以是数据集根目录（配合 split），也可以直接是某个 split 目录

    Returns:
        (root, split)
    """
    path = Path(root)
    if split is None and (path / DatasetStorage.MANIFEST_FILENAME).is_file():
        return str(path.parent), path.name
    return str(path), split or default
