"""
损失函数模块
负责重建、重光照、增广重光照、特征循环一致、潜在光照一致五项损失及其加权总和

所有 L1 项都按元素取平均（掩码项按 掩码像素数 x 通道数 归一化），λ 与分辨率无关。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import torch

from core.engine.lighting import ANCHOR_M90, ANCHOR_P90, ANCHOR_ZERO
from core.exceptions import InvalidInputError, ShapeMismatchError
from core.schemas.configs import LossFlags, LossWeights

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ("recon", "relight", "auglight", "feat", "cons", "total")
CONS_TERMS = 5


@dataclass
class PairBatch:
    """
    一个训练批次（张量均为 [N,...]）

    x_*: 源场景 I_x；y_*: 目标场景 I_y；gt_*: 主体 x 在目标光照（及其 ±90 度旋转）下的真值，掩码与 M_x 相同；
    y_p90_* / y_m90_*: 目标场景光照旋转 ±90 度后的图像 I^{±90}_y，用于一致性损失。
    """
    x_image: torch.Tensor
    x_mask: torch.Tensor
    y_image: torch.Tensor
    y_mask: torch.Tensor
    gt_zero: torch.Tensor
    gt_p90: torch.Tensor
    gt_m90: torch.Tensor
    y_p90_image: torch.Tensor
    y_p90_mask: torch.Tensor
    y_m90_image: torch.Tensor
    y_m90_mask: torch.Tensor
    keys: List[Dict[str, Tuple[int, int, int]]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.x_image.shape[0]


@dataclass
class LossTerms:
    recon: torch.Tensor
    relight: torch.Tensor
    auglight: torch.Tensor
    feat: torch.Tensor
    cons: torch.Tensor
    total: torch.Tensor
    cons_terms: List[torch.Tensor] = field(default_factory=list)

    def as_floats(self) -> Dict[str, float]:
        return {name: float(getattr(self, name).detach().item()) for name in LOSS_COLUMNS}


class LossContext:
    """同一批次中各损失共享的前向结果（按需计算并缓存）"""

    def __init__(self, batch: PairBatch, model):
        self.batch = batch
        self.model = model
        self._cache: Dict[str, torch.Tensor] = {}

    def _get(self, key: str, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def s_x(self) -> torch.Tensor:
        b = self.batch
        return self._get("s_x", lambda: self.model.encode_subject(b.x_image * b.x_mask))

    @property
    def i_x(self) -> torch.Tensor:
        b = self.batch
        return self._get("i_x", lambda: self.model.encode_illumination(b.x_image, b.x_mask))

    @property
    def i_y(self) -> torch.Tensor:
        b = self.batch
        return self._get("i_y", lambda: self.model.encode_illumination(b.y_image, b.y_mask))

    @property
    def i_y_p90(self) -> torch.Tensor:
        b = self.batch
        return self._get("i_y_p90", lambda: self.model.encode_illumination(b.y_p90_image, b.y_p90_mask))

    @property
    def i_y_m90(self) -> torch.Tensor:
        b = self.batch
        return self._get("i_y_m90", lambda: self.model.encode_illumination(b.y_m90_image, b.y_m90_mask))

    def anchor(self, which: str, name: str) -> torch.Tensor:
        source = {"x": "i_x", "y": "i_y", "y_p90": "i_y_p90", "y_m90": "i_y_m90"}[which]
        return self._get(f"{which}.{name}", lambda: self.model.decode_anchor(getattr(self, source), name))


def masked_l1(a: torch.Tensor, b: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """
    sum |M * (a - b)| / (掩码像素数 x 通道数)

    Raises:
        ShapeMismatchError: 尺寸不一致
        InvalidInputError: 掩码为空
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"masked_l1: {tuple(a.shape)} vs {tuple(b.shape)}",
                                 expected=tuple(a.shape), actual=tuple(b.shape))
    if mask.shape[-2:] != a.shape[-2:]:
        raise ShapeMismatchError(f"masked_l1: mask {tuple(mask.shape)} vs image {tuple(a.shape)}",
                                 expected=tuple(a.shape[-2:]), actual=tuple(mask.shape[-2:]))
    weight = mask.expand_as(a)
    count = weight.sum()
    if float(count.detach()) <= 0.0:
        raise InvalidInputError("masked_l1: mask is empty")
    return (weight * (a - b)).abs().sum() / count


def _context(batch: PairBatch, model, context: Optional[LossContext]) -> LossContext:
    return context if context is not None else LossContext(batch, model)


def loss_recon(batch: PairBatch, model, context: Optional[LossContext] = None) -> torch.Tensor:
    """|M_x * (R(l_x^0, s_x) - I_x)|"""
    ctx = _context(batch, model, context)
    out = model.render(ctx.anchor("x", ANCHOR_ZERO), ctx.s_x)
    return masked_l1(out, batch.x_image, batch.x_mask)


def loss_relight(batch: PairBatch, model, context: Optional[LossContext] = None) -> torch.Tensor:
    """|M_x * (R(l_y^0, s_x) - I^0_{x,y})|"""
    ctx = _context(batch, model, context)
    out = model.render(ctx.anchor("y", ANCHOR_ZERO), ctx.s_x)
    return masked_l1(out, batch.gt_zero, batch.x_mask)


def loss_auglight(batch: PairBatch, model, context: Optional[LossContext] = None) -> torch.Tensor:
    """±90 度锚点渲染与 I^{±90}_{x,y} 的两项之和"""
    ctx = _context(batch, model, context)
    plus = model.render(ctx.anchor("y", ANCHOR_P90), ctx.s_x)
    minus = model.render(ctx.anchor("y", ANCHOR_M90), ctx.s_x)
    return masked_l1(plus, batch.gt_p90, batch.x_mask) + masked_l1(minus, batch.gt_m90, batch.x_mask)


def loss_feat(batch: PairBatch, model, generator: torch.Generator,
              context: Optional[LossContext] = None) -> torch.Tensor:
    """
    特征循环一致：i ~ N(0, I_8)，Î = M_x * R(D^0(i), s_x)，
    返回 mean|E_s(Î) - s_x| + mean|E_f(Î) - i_f|；不带背景编码器时与完整的 i 比较。
    """
    ctx = _context(batch, model, context)
    s_x = ctx.s_x
    sample = torch.randn(batch.size, 8, generator=generator, dtype=s_x.dtype)
    rendered = batch.x_mask * model.render(model.decode_anchor(sample, ANCHOR_ZERO), s_x)
    s_hat = model.encode_subject(rendered)
    i_hat = model.encode_foreground_illumination(rendered)
    i_target = sample[:, 2:] if i_hat.shape[1] == 6 else sample
    return (s_hat - s_x).abs().mean() + (i_hat - i_target).abs().mean()


def cons_terms(batch: PairBatch, model, context: Optional[LossContext] = None) -> List[torch.Tensor]:
    """
    五个重叠恒等式的 L1 残差：
        D^0(E_i(I^90_y)) ~ l^90_y        D^-90(E_i(I^90_y)) ~ l^0_y
        D^90(E_i(I^-90_y)) ~ l^0_y       D^0(E_i(I^-90_y)) ~ l^-90_y
        D^-90(E_i(I^-90_y)) ~ D^90(E_i(I^90_y))   （两者都对应 ±180 度）
    """
    ctx = _context(batch, model, context)
    l90 = ctx.anchor("y", ANCHOR_P90)
    l0 = ctx.anchor("y", ANCHOR_ZERO)
    lm90 = ctx.anchor("y", ANCHOR_M90)
    p_zero = ctx.anchor("y_p90", ANCHOR_ZERO)
    p_m90 = ctx.anchor("y_p90", ANCHOR_M90)
    m_p90 = ctx.anchor("y_m90", ANCHOR_P90)
    m_zero = ctx.anchor("y_m90", ANCHOR_ZERO)
    m_m90 = ctx.anchor("y_m90", ANCHOR_M90)
    p_p90 = ctx.anchor("y_p90", ANCHOR_P90)
    return [
        (p_zero - l90).abs().mean(),
        (p_m90 - l0).abs().mean(),
        (m_p90 - l0).abs().mean(),
        (m_zero - lm90).abs().mean(),
        (m_m90 - p_p90).abs().mean(),
    ]


def loss_cons(batch: PairBatch, model, context: Optional[LossContext] = None) -> torch.Tensor:
    return torch.stack(cons_terms(batch, model, context)).sum()


def loss_total(batch: PairBatch, model, weights: LossWeights, flags: LossFlags,
               generator: torch.Generator) -> LossTerms:
    """
    L_recon + L_relight + λa*L_auglight + λf*L_feat + λc*L_cons

    use_ot3 关闭（或模型没有 OT3 头）时 L_auglight 与 L_cons 为零；use_feat / use_cons 分别关闭对应项。
    """
    ctx = LossContext(batch, model)
    use_ot3 = flags.use_ot3 and bool(getattr(model, "has_ot3", True))
    zero = ctx.s_x.new_zeros(())
    recon = loss_recon(batch, model, ctx)
    relight = loss_relight(batch, model, ctx)
    auglight = loss_auglight(batch, model, ctx) if use_ot3 else zero
    feat = loss_feat(batch, model, generator, ctx) if flags.use_feat else zero
    terms: List[torch.Tensor] = []
    if use_ot3 and flags.use_cons:
        terms = cons_terms(batch, model, ctx)
        cons = torch.stack(terms).sum()
    else:
        cons = zero
    total = recon + relight + weights.auglight * auglight + weights.feat * feat + weights.cons * cons
    return LossTerms(recon=recon, relight=relight, auglight=auglight, feat=feat, cons=cons,
                     total=total, cons_terms=terms)
