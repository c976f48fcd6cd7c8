"""
快速行进修复模块
负责按到边界距离递增的顺序填充孔洞像素（Telea 方法）

每个孔洞像素的值是邻域 B(p, radius) 内已知像素的加权一阶外推：
    I(p) = sum_q w(p,q) * (I(q) + grad I(q) . (p - q)) / sum_q w(p,q)
    w = dir * dst * lev
    dir = |(p - q) . N(p)| / |p - q|       N 为距离场 T 的单位梯度
    dst = 1 / |p - q|^2
    lev = 1 / (1 + |T(q) - T(p)|)
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from core.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

KNOWN = 0
BAND = 1
INSIDE = 2
OUTSIDE = 3

_FAR = 1.0e6
_DIR_FLOOR = 1.0e-6


@dataclass
class InpaintTrace:
    """记录孔洞像素的出堆顺序及其距离值"""
    order: List[Tuple[int, int]] = field(default_factory=list)
    distances: List[float] = field(default_factory=list)


def _solve(flags: np.ndarray, dist: np.ndarray, a: Tuple[int, int], b: Tuple[int, int]) -> float:
    """由两个正交邻居求解程函方程 |grad T| = 1"""
    sol = _FAR
    ka = flags[a] == KNOWN
    kb = flags[b] == KNOWN
    if ka and kb:
        ta, tb = dist[a], dist[b]
        r = np.sqrt(max(2.0 - (ta - tb) ** 2, 0.0))
        s = (ta + tb - r) / 2.0
        if s >= ta and s >= tb:
            sol = s
        else:
            s += r
            if s >= ta and s >= tb:
                sol = s
    elif ka:
        sol = 1.0 + dist[a]
    elif kb:
        sol = 1.0 + dist[b]
    return sol


def _arrival_time(flags: np.ndarray, dist: np.ndarray, i: int, j: int) -> float:
    return min(
        _solve(flags, dist, (i - 1, j), (i, j - 1)),
        _solve(flags, dist, (i + 1, j), (i, j - 1)),
        _solve(flags, dist, (i - 1, j), (i, j + 1)),
        _solve(flags, dist, (i + 1, j), (i, j + 1)),
    )


def _axis_gradient(values: np.ndarray, usable: np.ndarray, i: np.ndarray, j: np.ndarray,
                   di: int, dj: int) -> np.ndarray:
    """沿一个坐标轴的差分：两侧可用时取中心差分，否则取单侧差分，都不可用为 0"""
    fwd = usable[i + di, j + dj][:, None]
    bwd = usable[i - di, j - dj][:, None]
    center = values[i, j]
    plus = values[i + di, j + dj]
    minus = values[i - di, j - dj]
    both = fwd & bwd
    only_f = fwd & ~bwd
    only_b = ~fwd & bwd
    return np.where(both, (plus - minus) * 0.5,
                    np.where(only_f, plus - center, np.where(only_b, center - minus, 0.0)))


def _fill_pixel(image: np.ndarray, flags: np.ndarray, dist: np.ndarray, i: int, j: int,
                offsets: np.ndarray) -> np.ndarray:
    """按 Telea 权重计算单个孔洞像素（坐标均为填充后的坐标）"""
    usable_t = flags != INSIDE
    usable_t &= flags != OUTSIDE
    gt = np.zeros(2)
    for axis, (di, dj) in enumerate(((1, 0), (0, 1))):
        fwd = usable_t[i + di, j + dj]
        bwd = usable_t[i - di, j - dj]
        if fwd and bwd:
            gt[axis] = (dist[i + di, j + dj] - dist[i - di, j - dj]) * 0.5
        elif fwd:
            gt[axis] = dist[i + di, j + dj] - dist[i, j]
        elif bwd:
            gt[axis] = dist[i, j] - dist[i - di, j - dj]

    qi = i + offsets[:, 0]
    qj = j + offsets[:, 1]
    inside_bounds = (qi >= 0) & (qi < flags.shape[0]) & (qj >= 0) & (qj < flags.shape[1])
    qi, qj = qi[inside_bounds], qj[inside_bounds]
    valid = usable_t[qi, qj]
    qi, qj = qi[valid], qj[valid]
    if qi.size == 0:
        return image[i, j]

    ri = (i - qi).astype(np.float64)
    rj = (j - qj).astype(np.float64)
    length_sq = ri * ri + rj * rj
    length = np.sqrt(length_sq)
    direction = np.abs(ri * gt[0] + rj * gt[1]) / length
    direction = np.where(direction <= _DIR_FLOOR, _DIR_FLOOR, direction)
    distance = 1.0 / length_sq
    level = 1.0 / (1.0 + np.abs(dist[qi, qj] - dist[i, j]))
    weight = direction * distance * level

    grad_i = _axis_gradient(image, usable_t, qi, qj, 1, 0)
    grad_j = _axis_gradient(image, usable_t, qi, qj, 0, 1)
    estimate = image[qi, qj] + grad_i * ri[:, None] + grad_j * rj[:, None]
    return (weight[:, None] * estimate).sum(axis=0) / weight.sum()


def disk_offsets(radius: int) -> np.ndarray:
    """半径 radius 的圆形邻域偏移（不含原点）"""
    span = np.arange(-radius, radius + 1)
    di, dj = np.meshgrid(span, span, indexing="ij")
    keep = (di * di + dj * dj <= radius * radius) & ~((di == 0) & (dj == 0))
    return np.stack([di[keep], dj[keep]], axis=1)


def inpaint_fast_marching(image: np.ndarray, hole: np.ndarray, radius: int = 5,
                          trace: Optional[InpaintTrace] = None) -> np.ndarray:
    """
    快速行进修复

    Args:
        image: [H,W,3]（或 [H,W]）浮点图片
        hole: [H,W] 孔洞掩码，>0.5 视为孔洞
        radius: 邻域半径（像素）
        trace: 可选，记录出堆顺序

    Returns:
        修复后的图片；孔洞外像素与输入逐位相同

    Raises:
        InvalidInputError: 尺寸不一致、半径非法或孔洞覆盖整幅图像
    """
    if image.shape[:2] != hole.shape[:2]:
        raise InvalidInputError(f"inpaint: image {image.shape[:2]} and hole {hole.shape[:2]} dims differ")
    if radius < 1:
        raise InvalidInputError("inpaint: radius must be >= 1")
    squeeze = image.ndim == 2
    source = image[..., None] if squeeze else image
    inside = hole > 0.5
    if not inside.any():
        return image.copy()
    if inside.all():
        raise InvalidInputError("inpaint: hole covers the entire image")

    height, width = inside.shape
    # 四周各补一圈 OUTSIDE，邻居访问无需边界判断
    flags = np.full((height + 2, width + 2), OUTSIDE, dtype=np.int8)
    flags[1:-1, 1:-1] = np.where(inside, INSIDE, KNOWN)
    dist = np.zeros((height + 2, width + 2), dtype=np.float64)
    dist[1:-1, 1:-1][inside] = _FAR
    work = np.zeros((height + 2, width + 2, source.shape[2]), dtype=np.float64)
    work[1:-1, 1:-1] = source

    heap: List[Tuple[float, int, int]] = []
    inner = flags[1:-1, 1:-1] == INSIDE
    neighbour_inside = np.zeros_like(inner)
    neighbour_inside[1:, :] |= inner[:-1, :]
    neighbour_inside[:-1, :] |= inner[1:, :]
    neighbour_inside[:, 1:] |= inner[:, :-1]
    neighbour_inside[:, :-1] |= inner[:, 1:]
    band = neighbour_inside & ~inner
    for bi, bj in zip(*np.nonzero(band)):
        flags[bi + 1, bj + 1] = BAND
        heapq.heappush(heap, (0.0, int(bi) + 1, int(bj) + 1))

    offsets = disk_offsets(radius)
    while heap:
        t, i, j = heapq.heappop(heap)
        if flags[i, j] == KNOWN:
            continue
        flags[i, j] = KNOWN
        if inside[i - 1, j - 1] and trace is not None:
            trace.order.append((i - 1, j - 1))
            trace.distances.append(t)
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if flags[ni, nj] != INSIDE:
                continue
            dist[ni, nj] = _arrival_time(flags, dist, ni, nj)
            work[ni, nj] = _fill_pixel(work, flags, dist, ni, nj, offsets)
            flags[ni, nj] = BAND
            heapq.heappush(heap, (float(dist[ni, nj]), ni, nj))

    result = source.copy()
    result[inside] = work[1:-1, 1:-1][inside]
    logger.debug("inpaint: filled %d pixels (radius %d)", int(inside.sum()), radius)
    return result[..., 0] if squeeze else result
