"""
评估指标模块
负责人像区域上的 RMSE / PSNR / SSIM

图像均为 [H,W,3]、取值 [0,1] 的 float64 数组，掩码为 [H,W]。
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from skimage.metrics import structural_similarity

from core.exceptions import InvalidInputError
from core.models.evaluation import MetricRecord

logger = logging.getLogger(__name__)

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0


def _check_pair(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray]) -> np.ndarray:
    if a.shape != b.shape:
        raise InvalidInputError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    if a.ndim != 3:
        raise InvalidInputError(f"metric inputs must be [H,W,C], got {a.shape}")
    if mask is None:
        return np.ones(a.shape[:2], dtype=np.float64)
    if mask.shape != a.shape[:2]:
        raise InvalidInputError(f"mask {mask.shape} does not match image {a.shape[:2]}")
    weight = np.asarray(mask, dtype=np.float64)
    if weight.sum() <= 0.0:
        raise InvalidInputError("mask is empty")
    return weight


def rmse(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """sqrt(sum M*(a-b)^2 / (掩码像素数 x 通道数))"""
    weight = _check_pair(a, b, mask)
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    total = float(np.sum(weight[..., None] * diff * diff))
    count = float(weight.sum()) * a.shape[2]
    return math.sqrt(total / count)


def psnr_from_rmse(value: float) -> float:
    if value <= 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 20.0 * math.log10(DYNAMIC_RANGE / value))


def psnr(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """20*log10(1/rmse)，相同图片封顶 100 dB"""
    return psnr_from_rmse(rmse(a, b, mask))


def _window(shape) -> int:
    side = min(SSIM_WINDOW, *shape)
    return side if side % 2 else side - 1


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    单通道 SSIM 图（高斯加权窗 sigma 1.5、对称反射边界、总体协方差）

    小于 11 像素的图像缩小有效性检查窗口，高斯权重本身不变。
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    try:
        _, smap = structural_similarity(
            a, b, win_size=_window(a.shape), gaussian_weights=True, sigma=SSIM_SIGMA,
            use_sample_covariance=False, data_range=DYNAMIC_RANGE, K1=SSIM_K1, K2=SSIM_K2, full=True,
        )
    except ValueError as exc:
        raise InvalidInputError(f"ssim: {exc}") from exc
    return smap


def ssim(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """逐通道 SSIM 图按掩码加权平均，再对通道取平均"""
    weight = _check_pair(a, b, mask)
    total = float(weight.sum())
    values = []
    for c in range(a.shape[2]):
        smap = ssim_map(a[..., c], b[..., c])
        values.append(float(np.sum(weight * smap)) / total)
    return float(np.clip(sum(values) / len(values), -1.0, 1.0))


def evaluate_image(output: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> MetricRecord:
    value = rmse(output, truth, mask)
    return MetricRecord(rmse=value, psnr=psnr_from_rmse(value), ssim=ssim(output, truth, mask), count=1)


def masked_mean_abs(a: np.ndarray, b: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """掩码区域上的平均绝对差（连续性报告使用）"""
    weight = _check_pair(a, b, mask)
    diff = np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))
    return float(np.sum(weight[..., None] * diff)) / (float(weight.sum()) * a.shape[2])
