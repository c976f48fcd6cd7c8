"""
可微分层原语模块
负责下采样卷积、残差块、反卷积上采样、全局平均池化、全连接层以及参数初始化
"""

from __future__ import annotations

import logging
from typing import Optional

import torch
import torch.nn as nn

from core.exceptions import ShapeMismatchError

logger = logging.getLogger(__name__)

_ACTIVATIONS = {"relu", "tanh", "none"}
_NORMS = {"in", "none"}


def check_channels(x: torch.Tensor, expected: int, where: str) -> None:
    """校验 NCHW 张量的通道数"""
    if x.dim() != 4:
        raise ShapeMismatchError(f"{where}: expected NCHW tensor, got shape {tuple(x.shape)}",
                                 expected=4, actual=x.dim())
    if x.shape[1] != expected:
        raise ShapeMismatchError(f"{where}: expected {expected} channels, got {x.shape[1]}",
                                 expected=expected, actual=x.shape[1])


def _activation(name: str) -> Optional[nn.Module]:
    if name not in _ACTIVATIONS:
        raise ValueError(f"unsupported activation: {name}")
    if name == "relu":
        return nn.ReLU()
    if name == "tanh":
        return nn.Tanh()
    return None


def _norm(name: str, channels: int) -> Optional[nn.Module]:
    if name not in _NORMS:
        raise ValueError(f"unsupported normalization: {name}")
    if name == "in":
        return nn.InstanceNorm2d(channels)
    return None


class ConvBlock(nn.Module):
    """Conv2d -> (InstanceNorm) -> activation"""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, stride: int = 1,
                 padding: int = 0, norm: str = "none", activation: str = "relu"):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size, stride, padding)
        self.norm = _norm(norm, out_channels)
        self.activation = _activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.in_channels, type(self).__name__)
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        if self.activation is not None:
            x = self.activation(x)
        return x


class ConvDown(ConvBlock):
    """stride-2 4x4 卷积：[C,H,W] -> [C',H/2,W/2]，要求 H、W 为偶数"""

    def __init__(self, in_channels: int, out_channels: int, norm: str = "none", activation: str = "relu"):
        super().__init__(in_channels, out_channels, kernel_size=4, stride=2, padding=1,
                         norm=norm, activation=activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.in_channels, "ConvDown")
        height, width = x.shape[-2:]
        if height % 2 or width % 2:
            raise ShapeMismatchError(f"ConvDown: spatial dims must be even, got {height}x{width}",
                                     expected="even", actual=(height, width))
        return super().forward(x)


class ResidualBlock(nn.Module):
    """
    残差块：x + conv(act(conv(x)))

    zero_init=True 时最后一层卷积初始化为零，初始状态为恒等映射。
    """

    def __init__(self, channels: int, norm: str = "none", zero_init: bool = False):
        super().__init__()
        self.channels = channels
        self.zero_init = zero_init
        self.body = nn.Sequential(
            ConvBlock(channels, channels, 3, 1, 1, norm=norm, activation="relu"),
            ConvBlock(channels, channels, 3, 1, 1, norm=norm, activation="none"),
        )
        if zero_init:
            self.reset_last()

    def reset_last(self) -> None:
        last = self.body[-1].conv
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, "ResidualBlock")
        return x + self.body(x)


class DeconvUp(nn.Module):
    """stride-2 反卷积：[C,H,W] -> [C',2H,2W]"""

    def __init__(self, in_channels: int, out_channels: int, activation: str = "relu"):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.deconv = nn.ConvTranspose2d(in_channels, out_channels, kernel_size=4, stride=2, padding=1)
        self.activation = _activation(activation)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.in_channels, "DeconvUp")
        x = self.deconv(x)
        if self.activation is not None:
            x = self.activation(x)
        return x


class GlobalAvgPool(nn.Module):
    """[N,C,H,W] -> [N,C]"""

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4:
            raise ShapeMismatchError(f"GlobalAvgPool: expected NCHW tensor, got shape {tuple(x.shape)}")
        return x.mean(dim=(2, 3))


class FullyConnected(nn.Module):
    """[N,n] -> [N,m]"""

    def __init__(self, in_features: int, out_features: int, activation: str = "none"):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.linear = nn.Linear(in_features, out_features)
        self.activation = _activation(activation)

    @property
    def weight(self) -> torch.Tensor:
        return self.linear.weight

    @property
    def bias(self) -> torch.Tensor:
        return self.linear.bias

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeMismatchError(
                f"FullyConnected: expected {self.in_features} features, got {x.shape[-1]}",
                expected=self.in_features, actual=x.shape[-1],
            )
        x = self.linear(x)
        if self.activation is not None:
            x = self.activation(x)
        return x


def init_weights(module: nn.Module, scheme: str = "kaiming") -> nn.Module:
    """
    参数初始化：卷积/反卷积/全连接权重使用 fan-in Kaiming 正态分布，偏置置零

    调用前先设置 torch 随机种子即可保证逐位可复现。
    零初始化的残差块在初始化后重新置零。
    """
    if scheme == "default":
        return module
    if scheme != "kaiming":
        raise ValueError(f"unknown init scheme: {scheme}")
    for sub in module.modules():
        if isinstance(sub, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.kaiming_normal_(sub.weight, mode="fan_in", nonlinearity="relu")
            if sub.bias is not None:
                nn.init.zeros_(sub.bias)
    for sub in module.modules():
        if isinstance(sub, ResidualBlock) and sub.zero_init:
            sub.reset_last()
    return module


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def to_unit_range(x: torch.Tensor) -> torch.Tensor:
    """tanh 输出映射到 [0,1]"""
    return (torch.tanh(x) + 1.0) * 0.5
