"""
程序化主体与着色单元测试
"""

import numpy as np
import pytest

from core.exceptions import InvalidInputError
from core.synthdata.envmap import EnvMap, Light, random_envmap, rotate_env, texel_directions, texel_solid_angles
from core.synthdata.shading import diffuse_irradiance, render_background, shade_subject, tone_map
from core.synthdata.subject import Primitive, SubjectSpec, intersect, pixel_grid, random_subject


def test_random_subject_is_valid_and_seeded():
    first = random_subject(9)
    second = random_subject(9)

    assert first == second
    assert [p.part for p in first.primitives] == ["head", "torso", "shoulders"]


def test_degenerate_primitive_is_rejected():
    spec = SubjectSpec(primitives=[Primitive("head", (0.0, 0.0), (0.0, 0.0), 0.0)],
                       albedo={"head": (0.5, 0.5, 0.5)})

    with pytest.raises(InvalidInputError):
        spec.validate()


def test_primitive_leaving_frame_is_rejected():
    spec = SubjectSpec(primitives=[Primitive("head", (0.8, 0.0), (0.8, 0.0), 0.3)],
                       albedo={"head": (0.5, 0.5, 0.5)})

    with pytest.raises(InvalidInputError):
        intersect(spec, 16)


def test_intersection_normals_face_the_camera():
    hit = intersect(random_subject(1), 32)

    assert hit.mask.any()
    assert not hit.mask.all()
    normals = hit.normal[hit.mask]
    assert np.allclose(np.linalg.norm(normals, axis=-1), 1.0)
    assert np.all(normals[:, 2] >= 0.0)


def test_constant_environment_irradiance_is_pi_times_radiance():
    env = EnvMap.constant(96, value=0.5)
    normals = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.6, 0.0, 0.8]])

    irradiance = diffuse_irradiance(normals, env)

    assert np.allclose(irradiance, np.pi * 0.5, rtol=2e-2)


def test_tone_map_is_bounded():
    values = tone_map(np.array([0.0, 1.0, 100.0, -1.0]))

    assert values[0] == 0.0
    assert values[3] == 0.0
    assert 0.0 < values[1] < values[2] <= 1.0


def test_lambert_subject_under_constant_light():
    # 均匀环境下辐照度为 pi * c，出射辐亮度为 albedo * c
    subject = random_subject(4)
    env = EnvMap.constant(96, value=0.8)

    image, mask = shade_subject(subject, env, 16)

    hit = intersect(subject, 16)
    albedo_table = np.array([subject.albedo[p.part] for p in subject.primitives])
    expected = tone_map(albedo_table[hit.part[hit.mask]] * 0.8)
    assert np.allclose(image[hit.mask], expected, atol=2e-2)
    assert np.array_equal(mask, hit.mask.astype(np.float64))


def test_background_sees_the_environment():
    env = EnvMap.constant(24, value=0.25)

    assert np.allclose(render_background(env, 8), 0.25)


def test_shading_is_deterministic():
    subject = random_subject(2)
    env = random_envmap(3, width=24)

    first = shade_subject(subject, env, 16)
    second = shade_subject(subject, env, 16)

    assert np.array_equal(first[0], second[0])
    assert first[0].min() >= 0.0
    assert first[0].max() <= 1.0
    assert set(np.unique(first[1]).tolist()) <= {0.0, 1.0}


def _side_light_env():
    """方位角 0（+x，画面右侧）的单个主光源，外加弱天空"""
    sun = Light(azimuth=0.0, elevation=0.0, color=(1.0, 1.0, 1.0), intensity=20.0, sharpness=40.0)
    return EnvMap.build(48, [sun], zenith=(0.05, 0.05, 0.05), horizon=(0.05, 0.05, 0.05))


def _brute_force_irradiance(normal, env):
    dirs = texel_directions(env.height, env.width)
    omega = texel_solid_angles(env.height, env.width)
    total = np.zeros(3)
    for v in range(env.height):
        for u in range(env.width):
            total += max(float(dirs[v, u] @ normal), 0.0) * env.radiance[v, u] * omega[v, u]
    return total


def _left_right_asymmetry(image, mask):
    luminance = image.mean(axis=-1)
    half = image.shape[1] // 2
    left = luminance[:, :half][mask[:, :half] > 0].mean()
    right = luminance[:, half:][mask[:, half:] > 0].mean()
    return right - left


def test_half_turn_of_the_environment_mirrors_the_shading():
    sphere = SubjectSpec(primitives=[Primitive("head", (0.0, 0.0), (0.0, 0.0), 0.6)],
                         albedo={"head": (0.6, 0.6, 0.6)}, specular_strength=0.0)
    env = _side_light_env()
    turned = rotate_env(env, 180.0)

    before = _left_right_asymmetry(*shade_subject(sphere, env, 16))
    after = _left_right_asymmetry(*shade_subject(sphere, turned, 16))

    assert before > 0.05
    assert after < -0.05
    assert after == pytest.approx(-before, rel=1e-6)


def test_irradiance_matches_brute_force_sum():
    env = _side_light_env()
    normals = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])

    irradiance = diffuse_irradiance(normals, env)

    assert np.allclose(irradiance[0], _brute_force_irradiance(normals[0], env), rtol=1e-9)
    assert np.allclose(irradiance[1], _brute_force_irradiance(normals[1], env), rtol=1e-9)
    assert irradiance[0, 0] > 2.0 * irradiance[1, 0]


def test_sphere_and_capsule_silhouettes():
    # a == b 时为球：覆盖像素中心到圆心距离不超过半径的像素
    resolution = 16
    sphere = SubjectSpec(primitives=[Primitive("head", (0.1, 0.0), (0.1, 0.0), 0.5)], albedo={"head": (1, 1, 1)})
    capsule = SubjectSpec(primitives=[Primitive("torso", (-0.3, 0.0), (0.3, 0.0), 0.25)],
                          albedo={"torso": (1, 1, 1)})
    x, y = pixel_grid(resolution)

    sphere_hit = intersect(sphere, resolution)
    capsule_hit = intersect(capsule, resolution)

    assert np.array_equal(sphere_hit.mask, (x - 0.1) ** 2 + y ** 2 <= 0.25)
    nearest = -0.3 + np.clip(x + 0.3, 0.0, 0.6)
    assert np.array_equal(capsule_hit.mask, (x - nearest) ** 2 + y ** 2 <= 0.25 ** 2)
    # 胶囊中段的法线没有沿轴向的分量
    middle = capsule_hit.mask & (np.abs(x) < 0.3)
    assert np.allclose(capsule_hit.normal[middle][:, 0], 0.0)
