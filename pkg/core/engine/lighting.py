"""
光照编解码模块
负责 OT3 锚点解码、子编码切分、-180 度伪锚点的全连接头求逆以及按角度分段线性插值

约定：对光照旋转了 +90 度的场景 I^90，0 度头给出原场景的 l^90、-90 度头给出原场景的 l^0；
对 I^-90，90 度头给出 l^0、0 度头给出 l^-90。因此求解 fc_0(h') = l^-90 得到 I^-90 的伪主干输出，
再用 fc_-90(h') 得到 l^-180。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import torch
import torch.nn as nn

from core.backbone.layers import FullyConnected
from core.engine.encoders import ILLUMINATION_DIM
from core.exceptions import ConfigurationError, InvalidInputError, RankDeficientError

logger = logging.getLogger(__name__)

ANCHOR_P90 = "p90"
ANCHOR_ZERO = "zero"
ANCHOR_M90 = "m90"
ANCHOR_ANGLES: Dict[str, float] = {ANCHOR_P90: 90.0, ANCHOR_ZERO: 0.0, ANCHOR_M90: -90.0}
RENDER_LAYERS = 4


@dataclass
class OT3Codes:
    """三个锚点编码，形状均为 [N, 8*C_s]"""
    p90: torch.Tensor
    zero: torch.Tensor
    m90: torch.Tensor

    def anchor(self, name: str) -> torch.Tensor:
        return getattr(self, name)


@dataclass
class PseudoAnchor:
    code: torch.Tensor
    trunk: torch.Tensor
    residual: float


def partition(code: torch.Tensor, k: int, channels: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    第 k 层（1..4）的 (mul, add) 子编码：偏移 (k-1)*2C 与 (k-1)*2C + C 处长度为 C 的连续切片

    Raises:
        InvalidInputError: k 越界
        ConfigurationError: 编码长度不等于 8C
    """
    if not 1 <= k <= RENDER_LAYERS:
        raise InvalidInputError(f"render layer index must be in 1..{RENDER_LAYERS}, got {k}")
    if code.shape[-1] != 2 * RENDER_LAYERS * channels:
        raise ConfigurationError(
            f"lighting code has {code.shape[-1]} entries, expected {2 * RENDER_LAYERS * channels}")
    offset = (k - 1) * 2 * channels
    return code[..., offset:offset + channels], code[..., offset + channels:offset + 2 * channels]


class LightingDecoder(nn.Module):
    """
    D：共享 MLP 主干 R^8 -> R^h，三个全连接头 fc_90 / fc_0 / fc_-90 -> R^(8*C_s)

    use_ot3=False 时只保留 fc_0。
    """

    def __init__(self, code_dim: int, trunk_width: int = 64, trunk_depth: int = 2, use_ot3: bool = True):
        super().__init__()
        if trunk_width < ILLUMINATION_DIM:
            raise ConfigurationError("trunk width must be at least the illumination dimension",
                                     config_key="model.trunk_width")
        self.code_dim = code_dim
        self.trunk_width = trunk_width
        self.use_ot3 = use_ot3
        layers: List[nn.Module] = []
        in_features = ILLUMINATION_DIM
        for _ in range(trunk_depth):
            layers.append(FullyConnected(in_features, trunk_width, activation="relu"))
            in_features = trunk_width
        self.trunk = nn.Sequential(*layers)
        names = [ANCHOR_P90, ANCHOR_ZERO, ANCHOR_M90] if use_ot3 else [ANCHOR_ZERO]
        self.heads = nn.ModuleDict({name: FullyConnected(trunk_width, code_dim) for name in names})

    def forward(self, illumination: torch.Tensor) -> OT3Codes:
        return self.decode_ot3(illumination)

    def hidden(self, illumination: torch.Tensor) -> torch.Tensor:
        return self.trunk(illumination)

    def decode_ot3(self, illumination: torch.Tensor) -> OT3Codes:
        """
        Raises:
            ConfigurationError: 单头模型没有 OT3 锚点
        """
        if not self.use_ot3:
            raise ConfigurationError("decoder was built without the OT3 heads", config_key="model.use_ot3")
        h = self.trunk(illumination)
        return OT3Codes(
            p90=self.heads[ANCHOR_P90](h),
            zero=self.heads[ANCHOR_ZERO](h),
            m90=self.heads[ANCHOR_M90](h),
        )

    def decode_anchor(self, illumination: torch.Tensor, name: str = ANCHOR_ZERO) -> torch.Tensor:
        if name not in self.heads:
            raise ConfigurationError(f"decoder has no '{name}' head", config_key="model.use_ot3")
        return self.heads[name](self.trunk(illumination))


def invert_head(head: FullyConnected, target: torch.Tensor, damping: float = 1e-8) -> Tuple[torch.Tensor, float]:
    """
    最小二乘求解 head(h) ≈ target：(W^T W + damping*I) h = W^T (target - b)，float64 计算

    Returns:
        (h [N, h_dim], 最大残差范数)

    Raises:
        RankDeficientError: h_dim 大于输出维度，或 W 数值秩不足
    """
    weight = head.weight.detach().to(torch.float64)
    bias = head.bias.detach().to(torch.float64)
    rows, cols = weight.shape
    target64 = target.detach().to(torch.float64).reshape(-1, rows)
    if cols > rows:
        raise RankDeficientError(
            f"head maps {cols} -> {rows}; cannot invert a head wider than its output",
            rank=rows, residual=float("nan"),
        )
    rank = int(torch.linalg.matrix_rank(weight).item())
    gram = weight.T @ weight + damping * torch.eye(cols, dtype=torch.float64)
    rhs = weight.T @ (target64 - bias).T
    solution = torch.linalg.solve(gram, rhs).T
    residual = float((solution @ weight.T + bias - target64).norm(dim=-1).max().item())
    if rank < cols:
        raise RankDeficientError(
            f"head has numerical rank {rank} < {cols}; residual {residual:.3e}", rank=rank, residual=residual,
        )
    return solution, residual


def pseudo_anchor_minus180(anchors: OT3Codes, decoder: LightingDecoder, head: str = ANCHOR_ZERO,
                           damping: float = 1e-8) -> PseudoAnchor:
    """
    -180 度伪锚点

    head="zero"：求解 fc_0(h') = l^-90；head="p90"：求解 fc_90(h') = l^0。两种情况都返回 fc_-90(h')。
    """
    if not decoder.use_ot3:
        raise ConfigurationError("pseudo anchor needs the OT3 heads", config_key="model.use_ot3")
    if head == ANCHOR_ZERO:
        trunk, residual = invert_head(decoder.heads[ANCHOR_ZERO], anchors.m90, damping)
    elif head == ANCHOR_P90:
        trunk, residual = invert_head(decoder.heads[ANCHOR_P90], anchors.zero, damping)
    else:
        raise ConfigurationError(f"unknown pseudo anchor head '{head}'", config_key="model.pseudo_anchor_head")
    out_head = decoder.heads[ANCHOR_M90]
    weight = out_head.weight.detach().to(torch.float64)
    bias = out_head.bias.detach().to(torch.float64)
    code = (trunk @ weight.T + bias).to(anchors.m90.dtype)
    logger.debug("pseudo anchor via '%s' head, residual %.3e", head, residual)
    return PseudoAnchor(code=code.reshape(anchors.m90.shape), trunk=trunk, residual=residual)


def wrap_angle(angle: float) -> float:
    """折回 [-180, 180)；+180 与 -180 视为同一角度"""
    return (angle + 180.0) % 360.0 - 180.0


def interpolate(anchors: OT3Codes, pseudo_m180: torch.Tensor, angle: float) -> torch.Tensor:
    """
    在 {-180, -90, 0, 90, 180} 五个锚点之间分段线性插值（+180 与 -180 都使用伪锚点）

    角度恰好落在锚点上时直接返回该锚点张量。
    """
    if not math.isfinite(angle):
        raise InvalidInputError(f"angle must be finite, got {angle}")
    a = wrap_angle(float(angle))
    codes = [pseudo_m180, anchors.m90, anchors.zero, anchors.p90, pseudo_m180]
    position = (a + 180.0) / 90.0
    k = min(int(math.floor(position)), 3)
    alpha = position - k
    if alpha == 0.0:
        return codes[k]
    return (1.0 - alpha) * codes[k] + alpha * codes[k + 1]
