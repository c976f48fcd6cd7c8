"""
环境贴图模块
负责程序化生成等距柱状（equirectangular）环境贴图，以及绕竖直轴的旋转

方向约定：
    方位角 az 从 +x 轴量向 +z 轴（相机位于 +z，看向 -z），仰角 el 从水平面向 +y 量。
    第 u 列中心方位角 az = -pi + 2*pi*(u + 0.5) / W，第 v 行中心仰角 el = pi/2 - pi*(v + 0.5) / H。
    正的旋转角使所有光源方位角增大：rotated(az) = original(az - deg)。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.exceptions import InvalidInputError

logger = logging.getLogger(__name__)

Color = Tuple[float, float, float]


def wrap_degrees(angle: float) -> float:
    """把角度折回 [-180, 180)"""
    return (angle + 180.0) % 360.0 - 180.0


def direction(az_deg: float, el_deg: float) -> np.ndarray:
    az, el = np.radians(az_deg), np.radians(el_deg)
    return np.array([np.cos(el) * np.cos(az), np.sin(el), np.cos(el) * np.sin(az)])


@dataclass(frozen=True)
class Light:
    """vMF 形状的光瓣：radiance = intensity * color * exp(sharpness * (cos - 1))"""
    azimuth: float
    elevation: float
    color: Color
    intensity: float
    sharpness: float

    @property
    def direction(self) -> np.ndarray:
        return direction(self.azimuth, self.elevation)

    @property
    def power(self) -> float:
        """光瓣在球面上的积分（近似 2*pi/sharpness），用于高光"""
        k = self.sharpness
        return float(self.intensity * 2.0 * np.pi / k * (1.0 - np.exp(-2.0 * k)))


@dataclass
class EnvMap:
    """等距柱状辐亮度网格 [H, W, 3]，W = 2H"""
    radiance: np.ndarray
    lights: List[Light] = field(default_factory=list)
    rotation: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.radiance.ndim != 3 or self.radiance.shape[2] != 3:
            raise InvalidInputError(f"env map must be [H,W,3], got {self.radiance.shape}")
        if self.radiance.shape[1] != 2 * self.radiance.shape[0]:
            raise InvalidInputError(f"env map width must be 2x height, got {self.radiance.shape[:2]}")

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    @property
    def width(self) -> int:
        return self.radiance.shape[1]

    @classmethod
    def constant(cls, width: int, value: float = 1.0) -> "EnvMap":
        return cls(radiance=np.full((width // 2, width, 3), float(value)))

    @classmethod
    def build(cls, width: int, lights: Sequence[Light] = (), zenith: Color = (0.0, 0.0, 0.0),
              horizon: Color = (0.0, 0.0, 0.0), ground: Color = (0.0, 0.0, 0.0),
              seed: Optional[int] = None) -> "EnvMap":
        """由天空渐变、地面颜色和若干光瓣合成贴图"""
        if width < 4 or width % 2:
            raise InvalidInputError(f"env map width must be an even number >= 4, got {width}")
        dirs = texel_directions(width // 2, width)
        el = np.arcsin(np.clip(dirs[..., 1], -1.0, 1.0))
        t = np.sqrt(np.clip(np.sin(el), 0.0, 1.0))[..., None]
        sky = np.asarray(horizon) * (1.0 - t) + np.asarray(zenith) * t
        radiance = np.where((el >= 0.0)[..., None], sky, np.asarray(ground, dtype=np.float64))
        radiance = np.array(radiance, dtype=np.float64)
        for light in lights:
            cosine = dirs @ light.direction
            lobe = light.intensity * np.exp(light.sharpness * (cosine - 1.0))
            radiance += lobe[..., None] * np.asarray(light.color)
        return cls(radiance=radiance, lights=list(lights), seed=seed)

    def dominant_lights(self) -> List[Light]:
        return list(self.lights)


def texel_directions(height: int, width: int) -> np.ndarray:
    """每个纹素中心的单位方向 [H, W, 3]"""
    az = -np.pi + 2.0 * np.pi * (np.arange(width) + 0.5) / width
    el = np.pi / 2.0 - np.pi * (np.arange(height) + 0.5) / height
    az_grid, el_grid = np.meshgrid(az, el)
    return np.stack([
        np.cos(el_grid) * np.cos(az_grid),
        np.sin(el_grid),
        np.cos(el_grid) * np.sin(az_grid),
    ], axis=-1)


def texel_solid_angles(height: int, width: int) -> np.ndarray:
    """每个纹素的立体角 [H, W]，总和约为 4*pi"""
    el = np.pi / 2.0 - np.pi * (np.arange(height) + 0.5) / height
    per_row = (2.0 * np.pi / width) * (np.pi / height) * np.cos(el)
    return np.repeat(per_row[:, None], width, axis=1)


def rotate_env(env: EnvMap, degrees: float) -> EnvMap:
    """
    绕竖直轴旋转环境：等距柱状网格水平循环平移 degrees/360*W 列

    整数列平移使用 np.roll（逐位精确），非整数平移在相邻两个整数平移之间线性插值。
    """
    shift = degrees * env.width / 360.0
    whole = int(np.floor(shift))
    frac = shift - whole
    if abs(frac) < 1e-9 or abs(frac - 1.0) < 1e-9:
        radiance = np.roll(env.radiance, int(round(shift)) % env.width, axis=1)
    else:
        lower = np.roll(env.radiance, whole % env.width, axis=1)
        upper = np.roll(env.radiance, (whole + 1) % env.width, axis=1)
        radiance = (1.0 - frac) * lower + frac * upper
    lights = [replace(light, azimuth=wrap_degrees(light.azimuth + degrees)) for light in env.lights]
    return EnvMap(radiance=radiance, lights=lights, rotation=wrap_degrees(env.rotation + degrees), seed=env.seed)


def sample_env(env: EnvMap, dirs: np.ndarray) -> np.ndarray:
    """沿方向 dirs [..., 3] 双线性采样贴图（水平循环，竖直钳位）"""
    dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    az = np.arctan2(dirs[..., 2], dirs[..., 0])
    el = np.arcsin(np.clip(dirs[..., 1], -1.0, 1.0))
    u = (az + np.pi) / (2.0 * np.pi) * env.width - 0.5
    v = (np.pi / 2.0 - el) / np.pi * env.height - 0.5
    v = np.clip(v, 0.0, env.height - 1.0)
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    fu = (u - u0)[..., None]
    fv = (v - v0)[..., None]
    u1 = (u0 + 1) % env.width
    u0 = u0 % env.width
    v1 = np.minimum(v0 + 1, env.height - 1)
    grid = env.radiance
    top = grid[v0, u0] * (1.0 - fu) + grid[v0, u1] * fu
    bottom = grid[v1, u0] * (1.0 - fu) + grid[v1, u1] * fu
    return top * (1.0 - fv) + bottom * fv


def random_envmap(seed: int, width: int = 96, area_lights: int = 2) -> EnvMap:
    """
    由种子生成环境：太阳 + 天空渐变 + 地面 + K 个彩色面光源

    Args:
        seed: 环境种子
        width: 贴图宽度（高度为一半）
        area_lights: 面光源数量
    """
    rng = np.random.default_rng(seed)
    warmth = rng.uniform(0.0, 0.3)
    sun = Light(
        azimuth=float(rng.uniform(-180.0, 180.0)),
        elevation=float(rng.uniform(5.0, 55.0)),
        color=(1.0, 1.0 - 0.4 * warmth, 1.0 - warmth),
        intensity=float(rng.uniform(20.0, 60.0)),
        sharpness=float(rng.uniform(150.0, 300.0)),
    )
    lights = [sun]
    for _ in range(area_lights):
        hue = rng.uniform(0.2, 1.0, size=3)
        lights.append(Light(
            azimuth=float(rng.uniform(-180.0, 180.0)),
            elevation=float(rng.uniform(-10.0, 45.0)),
            color=tuple(float(c) for c in hue / hue.max()),
            intensity=float(rng.uniform(1.0, 4.0)),
            sharpness=float(rng.uniform(6.0, 25.0)),
        ))
    sky_level = rng.uniform(0.15, 0.5)
    zenith = tuple(float(c) for c in sky_level * np.array([0.55, 0.7, 1.0]) * rng.uniform(0.8, 1.2, size=3))
    horizon = tuple(float(c) for c in sky_level * np.array([0.9, 0.9, 0.95]) * rng.uniform(0.8, 1.2, size=3))
    ground = tuple(float(c) for c in rng.uniform(0.05, 0.25) * rng.uniform(0.6, 1.0, size=3))
    return EnvMap.build(width, lights, zenith=zenith, horizon=horizon, ground=ground, seed=seed)
