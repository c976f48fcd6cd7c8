"""
着色模块
负责 Lambert 漫反射 + Phong 高光的程序化渲染，以及透视背景的环境采样

漫反射辐照度按纹素立体角做求积：
    E(n) = sum_t max(n . w_t, 0) * L_t * dOmega_t
出射辐亮度 = albedo * E / pi + specular，之后做 1 - exp(-exposure * x) 色调映射。
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from core.synthdata.envmap import EnvMap, sample_env, texel_directions, texel_solid_angles
from core.synthdata.subject import SubjectSpec, intersect, pixel_grid

logger = logging.getLogger(__name__)

VIEW_DIRECTION = np.array([0.0, 0.0, 1.0])
_CHUNK = 4096


def diffuse_irradiance(normals: np.ndarray, env: EnvMap) -> np.ndarray:
    """
    法线 [N,3] 处的漫反射辐照度 [N,3]

    均匀辐亮度 c 的贴图对任意法线给出约 pi * c。
    """
    dirs = texel_directions(env.height, env.width).reshape(-1, 3)
    weighted = env.radiance.reshape(-1, 3) * texel_solid_angles(env.height, env.width).reshape(-1, 1)
    out = np.empty((normals.shape[0], 3))
    for start in range(0, normals.shape[0], _CHUNK):
        chunk = normals[start:start + _CHUNK]
        cosine = np.clip(chunk @ dirs.T, 0.0, None)
        out[start:start + _CHUNK] = cosine @ weighted
    return out


def phong_specular(normals: np.ndarray, env: EnvMap, strength: float, exponent: float) -> np.ndarray:
    """主光源（太阳与面光源）的 Phong 高光 [N,3]"""
    out = np.zeros((normals.shape[0], 3))
    if strength == 0.0:
        return out
    for light in env.dominant_lights():
        omega = light.direction
        n_dot_l = normals @ omega
        reflected = 2.0 * n_dot_l[:, None] * normals - omega
        r_dot_v = np.clip(reflected @ VIEW_DIRECTION, 0.0, None)
        lobe = np.where(n_dot_l > 0.0, r_dot_v ** exponent, 0.0)
        out += strength * light.power * lobe[:, None] * np.asarray(light.color)
    return out


def tone_map(radiance: np.ndarray, exposure: float = 1.0) -> np.ndarray:
    return 1.0 - np.exp(-exposure * np.clip(radiance, 0.0, None))


def render_background(env: EnvMap, resolution: int, fov_degrees: float = 60.0) -> np.ndarray:
    """透视相机视线（看向 -z）采样环境贴图，返回线性辐亮度 [R,R,3]"""
    x, y = pixel_grid(resolution)
    half = np.tan(np.radians(fov_degrees) / 2.0)
    rays = np.stack([x * half, y * half, -np.ones_like(x)], axis=-1)
    return sample_env(env, rays)


def shade_subject(subject: SubjectSpec, env: EnvMap, resolution: int, fov_degrees: float = 60.0,
                  exposure: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    渲染主体与背景

    Args:
        subject: 主体
        env: 环境贴图（已旋转）
        resolution: 输出分辨率
        fov_degrees: 背景视线的视场角
        exposure: 色调映射曝光

    Returns:
        (image [R,R,3] in [0,1], mask [R,R] in {0,1})

    Raises:
        InvalidInputError: 主体退化
    """
    hit = intersect(subject, resolution)
    radiance = render_background(env, resolution, fov_degrees)
    if hit.mask.any():
        normals = hit.normal[hit.mask]
        albedo_table = np.array([subject.albedo[p.part] for p in subject.primitives])
        albedo = albedo_table[hit.part[hit.mask]]
        color = albedo * diffuse_irradiance(normals, env) / np.pi
        color += phong_specular(normals, env, subject.specular_strength, subject.specular_exponent)
        radiance[hit.mask] = color
    image = tone_map(radiance, exposure)
    return image, hit.mask.astype(np.float64)
