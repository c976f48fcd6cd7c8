"""
程序化主体模块
负责由种子生成 球体头部 + 竖直胶囊躯干 + 水平胶囊肩部 的人像替身，并做正交投影求交
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from core.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

PARTS = ("head", "torso", "shoulders")


@dataclass(frozen=True)
class Primitive:
    """
    图像平面（z=0）内线段 a-b 的胶囊；a == b 时退化为球
    坐标为归一化图像坐标：x 向右、y 向上，画面范围 [-1, 1]
    """
    part: str
    a: Tuple[float, float]
    b: Tuple[float, float]
    radius: float


@dataclass
class SubjectSpec:
    primitives: List[Primitive]
    albedo: Dict[str, Tuple[float, float, float]]
    specular_strength: float = 0.2
    specular_exponent: float = 24.0
    seed: int = 0
    margin: float = field(default=0.08)

    def validate(self) -> None:
        """
        Raises:
            InvalidInputError: 图元尺寸为零/负、缺少反照率或轮廓超出画面
        """
        if not self.primitives:
            raise InvalidInputError("subject has no primitives")
        for prim in self.primitives:
            if not prim.radius > 0.0:
                raise InvalidInputError(f"degenerate primitive '{prim.part}': radius {prim.radius}")
            if prim.part not in self.albedo:
                raise InvalidInputError(f"no albedo for part '{prim.part}'")
            for x, y in (prim.a, prim.b):
                if max(abs(x), abs(y)) + prim.radius > 1.0 - self.margin:
                    raise InvalidInputError(f"primitive '{prim.part}' leaves the frame")
        if self.specular_exponent <= 0.0 or self.specular_strength < 0.0:
            raise InvalidInputError("invalid specular parameters")


def random_subject(seed: int) -> SubjectSpec:
    """由种子生成带几何抖动与随机反照率的主体"""
    rng = np.random.default_rng(seed)
    head_r = float(rng.uniform(0.24, 0.30))
    head_y = float(rng.uniform(0.30, 0.38))
    head_x = float(rng.uniform(-0.04, 0.04))
    shoulder_y = float(rng.uniform(-0.26, -0.18))
    half_span = float(rng.uniform(0.38, 0.48))
    shoulder_r = float(rng.uniform(0.15, 0.19))
    torso_r = float(rng.uniform(0.28, 0.34))
    torso_bottom = float(rng.uniform(-0.50, -0.42))

    skin_tone = rng.uniform(0.35, 0.95)
    skin = (float(skin_tone), float(skin_tone * rng.uniform(0.72, 0.85)), float(skin_tone * rng.uniform(0.58, 0.72)))
    cloth = tuple(float(c) for c in rng.uniform(0.1, 0.9, size=3))
    primitives = [
        Primitive("head", (head_x, head_y), (head_x, head_y), head_r),
        Primitive("torso", (0.0, shoulder_y), (0.0, torso_bottom), torso_r),
        Primitive("shoulders", (-half_span, shoulder_y), (half_span, shoulder_y), shoulder_r),
    ]
    spec = SubjectSpec(
        primitives=primitives,
        albedo={"head": skin, "torso": cloth, "shoulders": cloth},
        specular_strength=float(rng.uniform(0.05, 0.35)),
        specular_exponent=float(rng.uniform(8.0, 48.0)),
        seed=seed,
    )
    spec.validate()
    return spec


def pixel_grid(resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """像素中心的归一化坐标 (x, y)，行 0 位于画面顶部"""
    coords = -1.0 + 2.0 * (np.arange(resolution) + 0.5) / resolution
    x, y = np.meshgrid(coords, -coords)
    return x, y


@dataclass
class Hit:
    mask: np.ndarray      # [R,R] bool
    depth: np.ndarray     # [R,R]
    normal: np.ndarray    # [R,R,3]
    part: np.ndarray      # [R,R] int, -1 表示背景


def intersect(subject: SubjectSpec, resolution: int) -> Hit:
    """沿 -z 方向的正交光线求最前面的交点"""
    subject.validate()
    x, y = pixel_grid(resolution)
    best_z = np.full(x.shape, -np.inf)
    normal = np.zeros(x.shape + (3,))
    part = np.full(x.shape, -1, dtype=int)
    for index, prim in enumerate(subject.primitives):
        a = np.asarray(prim.a, dtype=np.float64)
        b = np.asarray(prim.b, dtype=np.float64)
        axis = b - a
        length = float(np.linalg.norm(axis))
        if length > 0.0:
            unit = axis / length
            t = np.clip((x - a[0]) * unit[0] + (y - a[1]) * unit[1], 0.0, length)
            cx = a[0] + t * unit[0]
            cy = a[1] + t * unit[1]
        else:
            cx = np.full(x.shape, a[0])
            cy = np.full(x.shape, a[1])
        planar_sq = (x - cx) ** 2 + (y - cy) ** 2
        covered = planar_sq <= prim.radius ** 2
        z = np.sqrt(np.clip(prim.radius ** 2 - planar_sq, 0.0, None))
        closer = covered & (z > best_z)
        best_z = np.where(closer, z, best_z)
        n = np.stack([(x - cx) / prim.radius, (y - cy) / prim.radius, z / prim.radius], axis=-1)
        normal = np.where(closer[..., None], n, normal)
        part = np.where(closer, index, part)
    mask = part >= 0
    depth = np.where(mask, best_z, 0.0)
    lengths = np.linalg.norm(normal, axis=-1, keepdims=True)
    normal = np.where(mask[..., None], normal / np.maximum(lengths, 1e-12), 0.0)
    return Hit(mask=mask, depth=depth, normal=normal, part=part)
