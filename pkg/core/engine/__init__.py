"""
核心引擎层模块
提供编码器、光照编解码器、神经渲染器以及完整网络
"""

from .encoders import SubjectEncoder, IlluminationEncoder, FOREGROUND_DIM, BACKGROUND_DIM, ILLUMINATION_DIM
from .lighting import (
    OT3Codes, PseudoAnchor, LightingDecoder, partition, invert_head, pseudo_anchor_minus180,
    interpolate, wrap_angle,
)
from .renderer import modulate, RenderLayer, MNRRenderer, ConcatRenderer, MulRenderer, make_renderer
from .network import RelightNet, build_model, DESK_PARAMETER_COUNT

__all__ = [
    "SubjectEncoder",
    "IlluminationEncoder",
    "FOREGROUND_DIM",
    "BACKGROUND_DIM",
    "ILLUMINATION_DIM",
    "OT3Codes",
    "PseudoAnchor",
    "LightingDecoder",
    "partition",
    "invert_head",
    "pseudo_anchor_minus180",
    "interpolate",
    "wrap_angle",
    "modulate",
    "RenderLayer",
    "MNRRenderer",
    "ConcatRenderer",
    "MulRenderer",
    "make_renderer",
    "RelightNet",
    "build_model",
    "DESK_PARAMETER_COUNT",
]
