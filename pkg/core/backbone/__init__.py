from .layers import (
    ConvBlock, ConvDown, ResidualBlock, DeconvUp, GlobalAvgPool, FullyConnected,
    init_weights, count_parameters, check_channels, to_unit_range,
)
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "ConvBlock", "ConvDown", "ResidualBlock", "DeconvUp", "GlobalAvgPool", "FullyConnected",
    "init_weights", "count_parameters", "check_channels", "to_unit_range",
    "GradCheckReport", "grad_check",
]
