"""
神经渲染模块
负责乘性神经渲染（MNR）以及用于消融的拼接（Concat）、直接相乘（Mul）两种渲染方式

MNR 的第 k 个渲染层：out = l_mul * x + l_add（逐通道、在所有空间位置上广播），再接一个不带归一化的残差块。
四个渲染层之后由两次反卷积上采样与 7x7 卷积输出 [0,1] 图像。
"""

from __future__ import annotations

import logging

import torch
import torch.nn as nn

from core.backbone.layers import DeconvUp, ResidualBlock, check_channels, to_unit_range
from core.engine.lighting import RENDER_LAYERS, partition
from core.exceptions import ConfigurationError, ShapeMismatchError
from core.schemas.configs import RenderMode

logger = logging.getLogger(__name__)


def modulate(x: torch.Tensor, l_mul: torch.Tensor, l_add: torch.Tensor) -> torch.Tensor:
    """
    逐通道仿射调制

    Args:
        x: [N,C,H,W]
        l_mul, l_add: [N,C]

    Raises:
        ShapeMismatchError: 子编码长度与通道数不一致
    """
    channels = x.shape[1]
    for name, sub in (("l_mul", l_mul), ("l_add", l_add)):
        if sub.dim() != 2 or sub.shape[1] != channels or sub.shape[0] != x.shape[0]:
            raise ShapeMismatchError(
                f"{name} has shape {tuple(sub.shape)}, expected ({x.shape[0]}, {channels})",
                expected=(x.shape[0], channels), actual=tuple(sub.shape),
            )
    return l_mul[:, :, None, None] * x + l_add[:, :, None, None]


class RenderLayer(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.block = ResidualBlock(channels, norm="none")

    def forward(self, x: torch.Tensor, l_mul: torch.Tensor, l_add: torch.Tensor) -> torch.Tensor:
        check_channels(x, self.channels, "RenderLayer")
        return self.block(modulate(x, l_mul, l_add))


class RenderTail(nn.Module):
    """[C,h,w] -> [3,4h,4w]，输出取值 [0,1]"""

    def __init__(self, channels: int):
        super().__init__()
        self.up1 = DeconvUp(channels, channels // 2)
        self.up2 = DeconvUp(channels // 2, channels // 4)
        self.out = nn.Conv2d(channels // 4, 3, kernel_size=7, stride=1, padding=3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return to_unit_range(self.out(self.up2(self.up1(x))))


class _BaseRenderer(nn.Module):
    mode: RenderMode

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        self.code_dim = 2 * RENDER_LAYERS * channels
        self.tail = RenderTail(channels)

    def _check(self, code: torch.Tensor, s: torch.Tensor) -> None:
        check_channels(s, self.channels, type(self).__name__)
        if code.dim() != 2 or code.shape[1] != self.code_dim or code.shape[0] != s.shape[0]:
            raise ShapeMismatchError(
                f"lighting code has shape {tuple(code.shape)}, expected ({s.shape[0]}, {self.code_dim})",
                expected=(s.shape[0], self.code_dim), actual=tuple(code.shape),
            )


class MNRRenderer(_BaseRenderer):
    """四个乘性渲染层依次调制主体特征，前一层输出作为下一层输入"""

    mode = RenderMode.MNR

    def __init__(self, channels: int):
        super().__init__(channels)
        self.layers = nn.ModuleList([RenderLayer(channels) for _ in range(RENDER_LAYERS)])

    def forward(self, code: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        self._check(code, s)
        x = s
        for k, layer in enumerate(self.layers, start=1):
            l_mul, l_add = partition(code, k, self.channels)
            x = layer(x, l_mul, l_add)
        return self.tail(x)


class ConcatRenderer(_BaseRenderer):
    """光照编码在空间上广播后与 s 按通道拼接，1x1 卷积融合后接残差块和同样的上采样尾部"""

    mode = RenderMode.CONCAT

    def __init__(self, channels: int):
        super().__init__(channels)
        self.in_channels = channels + self.code_dim
        self.fuse = nn.Conv2d(self.in_channels, channels, kernel_size=1)
        self.blocks = nn.Sequential(*[ResidualBlock(channels, norm="none") for _ in range(RENDER_LAYERS)])

    def forward(self, code: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        self._check(code, s)
        broadcast = code[:, :, None, None].expand(-1, -1, s.shape[2], s.shape[3])
        x = self.fuse(torch.cat([s, broadcast], dim=1))
        return self.tail(self.blocks(x))


class MulRenderer(_BaseRenderer):
    """光照编码的 8 个子编码取平均得到 C_s 维向量，与 s 逐通道相乘一次"""

    mode = RenderMode.MUL

    def __init__(self, channels: int):
        super().__init__(channels)
        self.blocks = nn.Sequential(*[ResidualBlock(channels, norm="none") for _ in range(RENDER_LAYERS)])

    def fold(self, code: torch.Tensor) -> torch.Tensor:
        return code.reshape(code.shape[0], 2 * RENDER_LAYERS, self.channels).mean(dim=1)

    def body(self, x: torch.Tensor) -> torch.Tensor:
        return self.tail(self.blocks(x))

    def forward(self, code: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        self._check(code, s)
        return self.body(self.fold(code)[:, :, None, None] * s)


_RENDERERS = {
    RenderMode.MNR: MNRRenderer,
    RenderMode.CONCAT: ConcatRenderer,
    RenderMode.MUL: MulRenderer,
}


def make_renderer(mode: RenderMode, channels: int) -> _BaseRenderer:
    """
    Raises:
        ConfigurationError: 未知渲染方式
    """
    try:
        renderer_cls = _RENDERERS[RenderMode(mode)]
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"unknown render mode: {mode}", config_key="model.render_mode") from exc
    return renderer_cls(channels)
