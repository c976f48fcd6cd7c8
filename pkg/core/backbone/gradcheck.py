"""
梯度检查模块
负责在双精度下比较解析梯度与中心差分数值梯度
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Union

import torch
import torch.nn as nn

from core.exceptions import NumericalError

logger = logging.getLogger(__name__)

_TINY = 1e-12


@dataclass
class GradCheckReport:
    """梯度检查结果"""
    max_rel_error: float
    max_abs_error: float
    checked: int
    tol: float
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def _scalarize(output: Union[torch.Tensor, Sequence[torch.Tensor]],
               projections: List[torch.Tensor]) -> torch.Tensor:
    outputs = [output] if isinstance(output, torch.Tensor) else list(output)
    if not projections:
        generator = torch.Generator().manual_seed(1234)
        for out in outputs:
            projections.append(torch.randn(out.shape, generator=generator, dtype=torch.float64))
    total = torch.zeros((), dtype=torch.float64)
    for out, weight in zip(outputs, projections):
        if not torch.isfinite(out).all():
            raise NumericalError("grad_check: non-finite value in forward output")
        total = total + (out.to(torch.float64) * weight).sum()
    return total


def grad_check(
    op: Callable[..., Union[torch.Tensor, Sequence[torch.Tensor]]],
    inputs: Sequence[torch.Tensor],
    eps: float = 1e-6,
    tol: float = 1e-4,
    params: Optional[Iterable[nn.Parameter]] = None,
    max_elements: int = 1000,
    seed: int = 0,
) -> GradCheckReport:
    """
    中心差分梯度检查

    非标量输出先与固定随机投影做内积得到标量。
    每个被检查张量的相对误差为 ||g_a - g_n|| / max(||g_a||, ||g_n||)，
    两者都为零时记为 0。

    Args:
        op: 待检查的可微函数，参数为 inputs
        inputs: 输入张量，会转换为 float64 并开启 requires_grad
        eps: 差分步长
        tol: 相对误差阈值
        params: 额外检查的参数（调用方需先将模块转换为 double）
        max_elements: 每个张量最多检查的元素个数（超出时按 seed 随机抽取）
        seed: 抽样种子

    Returns:
        GradCheckReport

    Raises:
        NumericalError: 前向输出或梯度出现非有限值
    """
    xs = [x.detach().to(torch.float64).clone().requires_grad_(True) for x in inputs]
    targets: List[torch.Tensor] = list(xs)
    names = [f"input{i}" for i in range(len(xs))]
    if params is not None:
        for i, param in enumerate(params):
            if param.dtype != torch.float64:
                raise NumericalError("grad_check: parameters must be float64")
            targets.append(param)
            names.append(f"param{i}")

    projections: List[torch.Tensor] = []
    value = _scalarize(op(*xs), projections)
    grads = torch.autograd.grad(value, targets, allow_unused=True)
    analytic = [torch.zeros_like(t) if g is None else g.detach() for t, g in zip(targets, grads)]

    generator = torch.Generator().manual_seed(seed)
    report = GradCheckReport(max_rel_error=0.0, max_abs_error=0.0, checked=0, tol=tol)
    for name, target, grad in zip(names, targets, analytic):
        if not torch.isfinite(grad).all():
            raise NumericalError(f"grad_check: non-finite analytic gradient for {name}")
        flat = target.data.view(-1)
        count = flat.numel()
        if count > max_elements:
            indices = torch.randperm(count, generator=generator)[:max_elements]
        else:
            indices = torch.arange(count)
        numeric = torch.zeros(len(indices), dtype=torch.float64)
        with torch.no_grad():
            for j, idx in enumerate(indices.tolist()):
                original = flat[idx].item()
                flat[idx] = original + eps
                plus = _scalarize(op(*xs), projections).item()
                flat[idx] = original - eps
                minus = _scalarize(op(*xs), projections).item()
                flat[idx] = original
                numeric[j] = (plus - minus) / (2.0 * eps)
        picked = grad.reshape(-1)[indices]
        diff = (picked - numeric).norm().item()
        scale = max(picked.norm().item(), numeric.norm().item())
        rel = 0.0 if scale < _TINY else diff / scale
        abs_err = (picked - numeric).abs().max().item() if len(indices) else 0.0
        report.errors[name] = rel
        report.max_rel_error = max(report.max_rel_error, rel)
        report.max_abs_error = max(report.max_abs_error, abs_err)
        report.checked += len(indices)

    logger.debug("grad_check: %d elements, max rel error %.3e", report.checked, report.max_rel_error)
    return report
