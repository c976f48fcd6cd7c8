"""
可微分层原语单元测试
"""

import pytest
import torch

from core.backbone.layers import (
    ConvBlock, ConvDown, DeconvUp, FullyConnected, GlobalAvgPool, ResidualBlock,
    count_parameters, init_weights, to_unit_range,
)
from core.exceptions import ShapeMismatchError


def test_conv_down_halves_spatial_dims():
    layer = ConvDown(3, 5)

    out = layer(torch.randn(2, 3, 8, 6))

    assert out.shape == (2, 5, 4, 3)


def test_conv_down_rejects_odd_dims():
    layer = ConvDown(3, 5)

    with pytest.raises(ShapeMismatchError):
        layer(torch.randn(1, 3, 7, 8))


def test_conv_block_rejects_wrong_channel_count():
    layer = ConvBlock(4, 4, kernel_size=3, padding=1)

    with pytest.raises(ShapeMismatchError) as exc_info:
        layer(torch.randn(1, 3, 8, 8))

    assert exc_info.value.expected == 4
    assert exc_info.value.actual == 3


def test_deconv_up_doubles_spatial_dims():
    layer = DeconvUp(6, 3)

    out = layer(torch.randn(1, 6, 5, 4))

    assert out.shape == (1, 3, 10, 8)


def test_zero_initialized_residual_block_is_identity():
    block = ResidualBlock(4, zero_init=True)
    x = torch.randn(2, 4, 6, 6)

    assert torch.equal(block(x), x)


def test_zero_init_survives_kaiming_init():
    block = ResidualBlock(4, zero_init=True)

    init_weights(block)

    x = torch.randn(1, 4, 4, 4)
    assert torch.equal(block(x), x)


def test_global_avg_pool_matches_mean():
    x = torch.randn(3, 5, 4, 4)

    pooled = GlobalAvgPool()(x)

    assert pooled.shape == (3, 5)
    assert torch.allclose(pooled, x.mean(dim=(2, 3)))


def test_fully_connected_checks_feature_count():
    fc = FullyConnected(8, 4)

    assert fc(torch.randn(2, 8)).shape == (2, 4)
    with pytest.raises(ShapeMismatchError):
        fc(torch.randn(2, 7))


def test_init_weights_is_reproducible_and_zeroes_biases():
    def build():
        torch.manual_seed(11)
        return init_weights(torch.nn.Sequential(ConvDown(3, 4), FullyConnected(4, 2)))

    first, second = build(), build()

    for a, b in zip(first.parameters(), second.parameters()):
        assert torch.equal(a, b)
    assert torch.count_nonzero(first[0].conv.bias) == 0
    assert torch.count_nonzero(first[1].bias) == 0


def test_init_weights_rejects_unknown_scheme():
    with pytest.raises(ValueError):
        init_weights(FullyConnected(2, 2), scheme="xavier")


def test_count_parameters():
    fc = FullyConnected(8, 4)

    assert count_parameters(fc) == 8 * 4 + 4


def test_to_unit_range_bounds():
    out = to_unit_range(torch.tensor([-50.0, 0.0, 50.0]))

    assert out.tolist() == pytest.approx([0.0, 0.5, 1.0])
