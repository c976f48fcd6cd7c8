"""
重光照服务模块
负责加载检查点、单次重光照、光照旋转序列以及结果合成与输出
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch

from core.engine.network import RelightNet
from core.exceptions import CheckpointMismatchError
from core.imaging.compositing import composite, make_strip
from core.imaging.image import ImageProcessor, check_same_dims, from_tensor, mask_to_tensor, to_tensor
from core.imaging.inpaint import inpaint_fast_marching
from core.schemas.configs import ImagingConfig
from core.training.trainer import load_model

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class Portrait:
    """一张输入人像及其掩码（[H,W,3] / [H,W]，取值 [0,1]）"""
    image: np.ndarray
    mask: np.ndarray


class AbstractRelightService(ABC):
    """重光照服务接口"""

    @abstractmethod
    def relight_once(self, source: Portrait, target: Portrait, angle: Optional[float] = None,
                     composite_output: bool = True) -> np.ndarray:
        """用目标图的光照重光照源人像"""

    @abstractmethod
    def rotate(self, source: Portrait, target: Portrait, angles: Sequence[float],
               composite_output: bool = True) -> List[np.ndarray]:
        """按角度列表旋转目标光照后重光照"""


class RelightService(AbstractRelightService):
    """
    重光照服务类
    推理路径只读：不修改任何网络参数
    """

    def __init__(self, model: RelightNet, imaging: Optional[ImagingConfig] = None) -> None:
        self.model = model.eval()
        self.imaging = imaging or ImagingConfig()
        self.images = ImageProcessor(mask_threshold=self.imaging.mask_threshold)
        logger.debug("Relight service ready (resolution=%d, ot3=%s)", model.resolution, model.has_ot3)

    @classmethod
    def from_checkpoint(cls, checkpoint: PathLike, imaging: Optional[ImagingConfig] = None) -> "RelightService":
        return cls(load_model(checkpoint), imaging)

    # ---------------------------- 输入 ---------------------------- #

    def load_portrait(self, image_path: PathLike, mask_path: PathLike) -> Portrait:
        portrait = Portrait(image=self.images.read_image(image_path), mask=self.images.read_mask(mask_path))
        self.check_portrait(portrait, str(image_path))
        return portrait

    def check_portrait(self, portrait: Portrait, where: str = "input") -> None:
        """
        Raises:
            InvalidInputError: 图片与掩码尺寸不一致
            CheckpointMismatchError: 分辨率与检查点配置不一致
        """
        check_same_dims(portrait.image, portrait.mask, where)
        height, width = portrait.mask.shape
        res = self.model.resolution
        if (height, width) != (res, res):
            raise CheckpointMismatchError(
                f"{where} is {width}x{height} but the checkpoint was trained at {res}x{res}",
                config_key="model.resolution",
            )

    # ---------------------------- 推理 ---------------------------- #

    def _foreground(self, source: Portrait, target: Portrait, angle: Optional[float]) -> np.ndarray:
        with torch.no_grad():
            out = self.model.relight(
                to_tensor(source.image)[None], mask_to_tensor(source.mask)[None],
                to_tensor(target.image)[None], mask_to_tensor(target.mask)[None],
                angle,
            )
        return from_tensor(out)

    def background(self, target: Portrait) -> np.ndarray:
        """目标图去掉人像区域后的快速行进修复结果"""
        return inpaint_fast_marching(target.image, target.mask, radius=self.imaging.inpaint_radius)

    def _finish(self, fg: np.ndarray, source: Portrait, background: Optional[np.ndarray]) -> np.ndarray:
        if background is None:
            return fg * source.mask[..., None]
        return composite(fg, source.mask, background, feather=self.imaging.feather)

    def relight_once(self, source: Portrait, target: Portrait, angle: Optional[float] = None,
                     composite_output: bool = True) -> np.ndarray:
        """
        s = E_s(源前景)，编码 = l^0 或按角度插值，前景 = R(编码, s)，默认合成到修复后的目标背景上

        Returns:
            [H,W,3] 图像
        """
        self.check_portrait(source, "source")
        self.check_portrait(target, "target")
        start = time.perf_counter()
        background = self.background(target) if composite_output else None
        output = self._finish(self._foreground(source, target, angle), source, background)
        logger.debug("Relit portrait (angle=%s) in %.3fs", angle, time.perf_counter() - start)
        return output

    def rotate(self, source: Portrait, target: Portrait, angles: Sequence[float],
               composite_output: bool = True) -> List[np.ndarray]:
        self.check_portrait(source, "source")
        self.check_portrait(target, "target")
        background = self.background(target) if composite_output else None
        return [self._finish(self._foreground(source, target, float(a)), source, background) for a in angles]

    # ---------------------------- 输出 ---------------------------- #

    def write(self, path: PathLike, image: np.ndarray) -> Path:
        path = Path(path)
        self.images.write_image(path, np.clip(image, 0.0, 1.0))
        logger.info("Output written -> %s", path)
        return path

    def write_rotation(self, out_dir: PathLike, angles: Sequence[float], frames: Sequence[np.ndarray]) -> List[Path]:
        """每个角度一张 PNG，再加一张水平拼接条 strip.png"""
        out_dir = Path(out_dir)
        paths = [self.write(out_dir / f"angle_{_angle_label(a)}.png", frame) for a, frame in zip(angles, frames)]
        paths.append(self.write(out_dir / "strip.png", make_strip(list(frames))))
        return paths


def _angle_label(angle: float) -> str:
    sign = "m" if angle < 0 else "p"
    return f"{sign}{abs(angle):07.2f}".replace(".", "_")
