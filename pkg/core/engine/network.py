"""
完整网络模块
负责组合 E_s、E_f、E_b、光照解码器 D 与渲染器 R，并提供推理时的重光照路径
"""

from __future__ import annotations

import logging
from typing import Optional

import torch
import torch.nn as nn

from core.backbone.layers import count_parameters, init_weights
from core.engine.encoders import (
    BACKGROUND_DIM, FOREGROUND_DIM, ILLUMINATION_DIM, IlluminationEncoder, SubjectEncoder,
    check_image_batch, check_mask_batch,
)
from core.engine.lighting import (
    ANCHOR_ZERO, LightingDecoder, OT3Codes, interpolate, pseudo_anchor_minus180,
)
from core.engine.renderer import make_renderer
from core.exceptions import ConfigurationError
from core.schemas.configs import ModelConfig

logger = logging.getLogger(__name__)

# 默认桌面配置（64px, C_s=32, 主干 2x64, MNR, OT3, 带背景编码器）的参数总数
DESK_PARAMETER_COUNT = 255_195


class RelightNet(nn.Module):
    """参照式人像重光照网络"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.resolution = config.resolution
        self.channels = config.subject_channels
        self.has_ot3 = config.use_ot3
        self.use_bg = config.use_bg
        self.subject_encoder = SubjectEncoder(config.subject_channels, config.subject_res_blocks)
        fg_dim = FOREGROUND_DIM if config.use_bg else ILLUMINATION_DIM
        self.fg_encoder = IlluminationEncoder(fg_dim, config.subject_channels)
        self.bg_encoder: Optional[IlluminationEncoder] = (
            IlluminationEncoder(BACKGROUND_DIM, config.subject_channels) if config.use_bg else None
        )
        self.decoder = LightingDecoder(config.code_dim, config.trunk_width, config.trunk_depth, config.use_ot3)
        self.renderer = make_renderer(config.render_mode, config.subject_channels)

    def encode_subject(self, foreground: torch.Tensor) -> torch.Tensor:
        """s = E_s(I_f)，输入为已掩码的前景"""
        check_image_batch(foreground, self.resolution, "encode_subject")
        return self.subject_encoder(foreground)

    def encode_foreground_illumination(self, foreground: torch.Tensor) -> torch.Tensor:
        """E_f(I_f)：带背景编码器时为 6 维，否则为完整的 8 维"""
        check_image_batch(foreground, self.resolution, "encode_foreground_illumination")
        return self.fg_encoder(foreground)

    def encode_illumination(self, image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """i = (i_b, i_f) = (E_b(I*(1-M)), E_f(I*M))，返回 [N,8]"""
        check_image_batch(image, self.resolution, "encode_illumination")
        check_mask_batch(image, mask, "encode_illumination")
        i_f = self.fg_encoder(image * mask)
        if self.bg_encoder is None:
            return i_f
        i_b = self.bg_encoder(image * (1.0 - mask))
        return torch.cat([i_b, i_f], dim=1)

    def decode(self, illumination: torch.Tensor) -> OT3Codes:
        return self.decoder.decode_ot3(illumination)

    def decode_anchor(self, illumination: torch.Tensor, name: str = ANCHOR_ZERO) -> torch.Tensor:
        return self.decoder.decode_anchor(illumination, name)

    def render(self, code: torch.Tensor, s: torch.Tensor) -> torch.Tensor:
        return self.renderer(code, s)

    def lighting_code(self, illumination: torch.Tensor, angle: Optional[float] = None) -> torch.Tensor:
        """
        目标光照编码：角度省略时为 l^0，否则在 OT3 锚点与伪锚点之间插值

        Raises:
            ConfigurationError: 单头模型请求非零角度
        """
        if angle is None:
            return self.decoder.decode_anchor(illumination, ANCHOR_ZERO)
        if not self.has_ot3:
            if float(angle) % 360.0 == 0.0:
                return self.decoder.decode_anchor(illumination, ANCHOR_ZERO)
            raise ConfigurationError("rotation angles need a model trained with OT3", config_key="model.use_ot3")
        anchors = self.decoder.decode_ot3(illumination)
        pseudo = pseudo_anchor_minus180(anchors, self.decoder, self.config.pseudo_anchor_head, self.config.damping)
        return interpolate(anchors, pseudo.code, angle)

    def relight(self, source: torch.Tensor, source_mask: torch.Tensor, target: torch.Tensor,
                target_mask: torch.Tensor, angle: Optional[float] = None) -> torch.Tensor:
        """
        R(E_s(src * M_src), code(E_i(target)))，返回前景图像 [N,3,H,W]
        """
        check_mask_batch(source, source_mask, "relight")
        s = self.encode_subject(source * source_mask)
        code = self.lighting_code(self.encode_illumination(target, target_mask), angle)
        return self.render(code, s)

    def count_parameters(self) -> int:
        return count_parameters(self)


def build_model(config: ModelConfig, seed: Optional[int] = None) -> RelightNet:
    """按配置构建网络；给定种子时初始化逐位可复现"""
    if seed is not None:
        torch.manual_seed(seed)
    model = RelightNet(config)
    init_weights(model, config.init_scheme)
    logger.debug("RelightNet built: mode=%s ot3=%s bg=%s params=%d",
                 config.render_mode.value, config.use_ot3, config.use_bg, model.count_parameters())
    return model
