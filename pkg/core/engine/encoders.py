"""
编码器模块
负责主体编码器 E_s 与前景/背景光照编码器 E_f、E_b
"""

from __future__ import annotations

import logging

import torch
import torch.nn as nn

from core.backbone.layers import (
    ConvBlock, ConvDown, FullyConnected, GlobalAvgPool, ResidualBlock, check_channels,
)
from core.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)

FOREGROUND_DIM = 6
BACKGROUND_DIM = 2
ILLUMINATION_DIM = FOREGROUND_DIM + BACKGROUND_DIM


class SubjectEncoder(nn.Module):
    """
    E_s：[3,H,W] -> [C_s,H/4,W/4]

    7x7 卷积 + 两次 stride-2 下采样，卷积后接实例归一化与 ReLU，末尾若干残差块。
    """

    def __init__(self, channels: int = 32, res_blocks: int = 2):
        super().__init__()
        half = channels // 2
        self.channels = channels
        self.stem = ConvBlock(3, half, kernel_size=7, stride=1, padding=3, norm="in")
        self.down1 = ConvDown(half, channels, norm="in")
        self.down2 = ConvDown(channels, channels, norm="in")
        self.blocks = nn.Sequential(*[ResidualBlock(channels, norm="in") for _ in range(res_blocks)])

    def forward(self, foreground: torch.Tensor) -> torch.Tensor:
        check_channels(foreground, 3, "SubjectEncoder")
        x = self.stem(foreground)
        x = self.down2(self.down1(x))
        return self.blocks(x)


class IlluminationEncoder(nn.Module):
    """
    E_f / E_b：三次 stride-2 卷积 -> 全局平均池化 -> 全连接

    不使用归一化层，全局强度保留在特征中。
    """

    def __init__(self, out_features: int, channels: int = 32):
        super().__init__()
        self.out_features = out_features
        self.convs = nn.Sequential(
            ConvDown(3, channels // 2),
            ConvDown(channels // 2, channels),
            ConvDown(channels, channels),
        )
        self.pool = GlobalAvgPool()
        self.fc = FullyConnected(channels, out_features)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        check_channels(image, 3, "IlluminationEncoder")
        return self.fc(self.pool(self.convs(image)))


def check_image_batch(image: torch.Tensor, resolution: int, where: str) -> None:
    """
    Raises:
        ShapeMismatchError: 不是 [N,3,R,R]
    """
    if image.dim() != 4 or image.shape[1] != 3 or tuple(image.shape[-2:]) != (resolution, resolution):
        raise ShapeMismatchError(
            f"{where}: expected [N,3,{resolution},{resolution}], got {tuple(image.shape)}",
            expected=(3, resolution, resolution), actual=tuple(image.shape[1:]),
        )


def check_mask_batch(image: torch.Tensor, mask: torch.Tensor, where: str) -> None:
    if mask.dim() != 4 or mask.shape[1] != 1 or mask.shape[0] != image.shape[0] \
            or mask.shape[-2:] != image.shape[-2:]:
        raise ShapeMismatchError(
            f"{where}: mask {tuple(mask.shape)} does not match image {tuple(image.shape)}",
            expected=(image.shape[0], 1) + tuple(image.shape[-2:]), actual=tuple(mask.shape),
        )
