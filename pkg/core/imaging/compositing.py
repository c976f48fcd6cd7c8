"""
合成模块
负责把重光照后的前景嵌回修复后的背景，以及拼接并排对比条
"""

from __future__ import annotations

import logging
from typing import Sequence

import cv2
import numpy as np

from core.exceptions import InvalidInputError
from core.imaging.image import check_same_dims

logger = logging.getLogger(__name__)


def feather_mask(mask: np.ndarray) -> np.ndarray:
    """3x3 盒式滤波，使掩码边缘过渡一个像素"""
    return cv2.blur(mask.astype(np.float64), (3, 3), borderType=cv2.BORDER_REPLICATE)


def composite(relit_fg: np.ndarray, mask: np.ndarray, inpainted_bg: np.ndarray,
              feather: bool = False) -> np.ndarray:
    """
    out = relit_fg * M + inpainted_bg * (1 - M)

    Args:
        relit_fg: 重光照前景 [H,W,3]
        mask: 前景掩码 [H,W]
        inpainted_bg: 修复后的背景 [H,W,3]
        feather: 是否对掩码做一个像素的羽化

    Raises:
        InvalidInputError: 尺寸不一致
    """
    check_same_dims(relit_fg, mask, "composite")
    if relit_fg.shape != inpainted_bg.shape:
        raise InvalidInputError(
            f"composite: foreground {relit_fg.shape} and background {inpainted_bg.shape} differ"
        )
    weight = feather_mask(mask) if feather else mask
    weight = weight[..., None]
    return relit_fg * weight + inpainted_bg * (1.0 - weight)


def make_strip(images: Sequence[np.ndarray], gap: int = 2, gap_value: float = 1.0) -> np.ndarray:
    """把同尺寸图片水平拼接，中间留 gap 像素的分隔列"""
    if not images:
        raise InvalidInputError("make_strip: no images")
    height = images[0].shape[0]
    for img in images:
        if img.shape != images[0].shape:
            raise InvalidInputError(f"make_strip: image shapes differ ({img.shape} vs {images[0].shape})")
    separator = np.full((height, gap, 3), gap_value, dtype=np.float64)
    parts = []
    for idx, img in enumerate(images):
        if idx and gap > 0:
            parts.append(separator)
        parts.append(np.asarray(img, dtype=np.float64))
    return np.concatenate(parts, axis=1)
