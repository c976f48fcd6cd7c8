"""
快速行进修复单元测试
"""

import heapq
import math

import cv2
import numpy as np
import pytest

from core.exceptions import InvalidInputError
from core.imaging.inpaint import InpaintTrace, disk_offsets, inpaint_fast_marching


def _ramp(height=12, width=12):
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    return np.stack([0.05 * cols, 0.03 * rows, 0.02 * rows + 0.04 * cols + 0.1], axis=-1)


def test_disk_offsets_exclude_origin():
    offsets = disk_offsets(1)

    assert sorted(map(tuple, offsets.tolist())) == [(-1, 0), (0, -1), (0, 1), (1, 0)]
    assert len(disk_offsets(2)) == 12


def test_empty_hole_returns_copy():
    image = np.random.default_rng(0).random((5, 5, 3))

    result = inpaint_fast_marching(image, np.zeros((5, 5)))

    assert np.array_equal(result, image)
    assert result is not image


def test_full_hole_raises():
    with pytest.raises(InvalidInputError):
        inpaint_fast_marching(np.zeros((4, 4, 3)), np.ones((4, 4)))


def test_invalid_radius_and_dims():
    with pytest.raises(InvalidInputError):
        inpaint_fast_marching(np.zeros((4, 4, 3)), np.zeros((4, 4)), radius=0)
    with pytest.raises(InvalidInputError):
        inpaint_fast_marching(np.zeros((4, 4, 3)), np.zeros((3, 4)))


def test_known_pixels_are_untouched():
    image = np.random.default_rng(1).random((10, 10, 3))
    hole = np.zeros((10, 10))
    hole[3:7, 2:6] = 1.0

    result = inpaint_fast_marching(image, hole)

    known = hole < 0.5
    assert np.array_equal(result[known], image[known])
    assert np.isfinite(result).all()


def test_single_pixel_hole_matches_closed_form():
    # 半径 1 时四个邻居权重相等；每个邻居沿指向孔洞的方向只能取单侧差分
    image = np.random.default_rng(2).random((5, 5, 3))
    hole = np.zeros((5, 5))
    hole[2, 2] = 1.0

    result = inpaint_fast_marching(image, hole, radius=1)

    expected = (
        (2 * image[1, 2] - image[0, 2])
        + (2 * image[3, 2] - image[4, 2])
        + (2 * image[2, 1] - image[2, 0])
        + (2 * image[2, 3] - image[2, 4])
    ) / 4.0
    assert np.allclose(result[2, 2], expected, atol=1e-12)


def test_linear_ramp_is_reconstructed():
    image = _ramp()
    hole = np.zeros(image.shape[:2])
    hole[4:8, 3:9] = 1.0
    damaged = image.copy()
    damaged[hole > 0.5] = 0.0

    result = inpaint_fast_marching(damaged, hole, radius=3)

    assert np.allclose(result, image, atol=1e-9)


def test_constant_region_stays_constant():
    image = np.full((9, 9, 3), 0.4)
    hole = np.zeros((9, 9))
    hole[2:7, 2:7] = 1.0

    result = inpaint_fast_marching(image, hole)

    assert np.allclose(result, 0.4, atol=1e-12)


def test_fill_order_follows_distance():
    image = np.random.default_rng(3).random((9, 9))
    hole = np.zeros((9, 9))
    hole[2:7, 2:7] = 1.0
    trace = InpaintTrace()

    result = inpaint_fast_marching(image, hole, trace=trace)

    assert result.shape == (9, 9)
    assert len(trace.order) == int(hole.sum())
    assert trace.distances == sorted(trace.distances)
    assert trace.order[-1] == (4, 4)


def _telea_by_hand(image, hole, radius):
    """
    逐像素、逐邻居写出的 Telea 修复，用作对照

    与被测实现共享的约定：出堆按 (T, 行, 列) 排序；邻居按 上、下、左、右 更新；
    差分在两侧都可用时取中心差分，否则取单侧差分。
    """
    height, width = hole.shape
    values = {(i, j): np.array(image[i, j], dtype=np.float64) for i in range(height) for j in range(width)}
    state = {(i, j): "inside" if hole[i, j] > 0.5 else "known" for i in range(height) for j in range(width)}
    arrival = {p: (1.0e6 if s == "inside" else 0.0) for p, s in state.items()}

    def usable(p):
        return state.get(p, "outside") in ("known", "band")

    def difference(field, p, step):
        fwd = (p[0] + step[0], p[1] + step[1])
        bwd = (p[0] - step[0], p[1] - step[1])
        if usable(fwd) and usable(bwd):
            return (field[fwd] - field[bwd]) / 2.0
        if usable(fwd):
            return field[fwd] - field[p]
        if usable(bwd):
            return field[p] - field[bwd]
        return 0.0 * field[p]

    def solve(a, b):
        known_a = state.get(a) == "known"
        known_b = state.get(b) == "known"
        if known_a and known_b:
            ta, tb = arrival[a], arrival[b]
            r = math.sqrt(max(2.0 - (ta - tb) ** 2, 0.0))
            s = (ta + tb - r) / 2.0
            if s >= ta and s >= tb:
                return s
            s += r
            return s if s >= ta and s >= tb else 1.0e6
        if known_a:
            return 1.0 + arrival[a]
        if known_b:
            return 1.0 + arrival[b]
        return 1.0e6

    def fill(p):
        n_i = difference(arrival, p, (1, 0))
        n_j = difference(arrival, p, (0, 1))
        numerator, denominator = 0.0, 0.0
        for k in range(p[0] - radius, p[0] + radius + 1):
            for m in range(p[1] - radius, p[1] + radius + 1):
                ri, rj = p[0] - k, p[1] - m
                if (ri, rj) == (0, 0) or ri * ri + rj * rj > radius * radius or not usable((k, m)):
                    continue
                length = math.sqrt(ri * ri + rj * rj)
                w_dir = max(abs(ri * n_i + rj * n_j) / length, 1.0e-6)
                w_dst = 1.0 / (ri * ri + rj * rj)
                w_lev = 1.0 / (1.0 + abs(arrival[(k, m)] - arrival[p]))
                weight = w_dir * w_dst * w_lev
                q = (k, m)
                estimate = values[q] + difference(values, q, (1, 0)) * ri + difference(values, q, (0, 1)) * rj
                numerator = numerator + weight * estimate
                denominator += weight
        return numerator / denominator

    queue = []
    for (i, j), s in state.items():
        if s == "known" and any(state.get(n) == "inside" for n in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1))):
            state[(i, j)] = "band"
            heapq.heappush(queue, (0.0, i, j))
    while queue:
        _, i, j = heapq.heappop(queue)
        if state[(i, j)] == "known":
            continue
        state[(i, j)] = "known"
        for n in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if state.get(n) != "inside":
                continue
            arrival[n] = min(solve((n[0] - 1, n[1]), (n[0], n[1] - 1)), solve((n[0] + 1, n[1]), (n[0], n[1] - 1)),
                             solve((n[0] - 1, n[1]), (n[0], n[1] + 1)), solve((n[0] + 1, n[1]), (n[0], n[1] + 1)))
            values[n] = fill(n)
            state[n] = "band"
            heapq.heappush(queue, (arrival[n], n[0], n[1]))
    return np.array([[values[(i, j)] for j in range(width)] for i in range(height)])


def _seven_by_seven(curvature):
    rows, cols = np.mgrid[0:7, 0:7].astype(np.float64)
    gray = 0.1 + 0.08 * cols + 0.05 * rows + curvature * (rows - 3.0) * (cols - 1.0) ** 2
    return np.stack([gray, 0.5 * gray, 1.0 - gray], axis=-1)


@pytest.mark.parametrize("curvature", [0.0, 0.01])
def test_seven_by_seven_matches_hand_written_weights(curvature):
    image = _seven_by_seven(curvature)
    hole = np.zeros((7, 7))
    hole[2:5, 2:5] = 1.0

    result = inpaint_fast_marching(image, hole, radius=2)

    assert np.allclose(result, _telea_by_hand(image, hole, radius=2), rtol=0.0, atol=1e-6)


def test_linear_gradient_hole_stays_within_its_boundary_ring():
    image = _seven_by_seven(0.0)
    hole = np.zeros((7, 7))
    hole[2:5, 2:5] = 1.0
    ring = np.zeros((7, 7), dtype=bool)
    ring[1:6, 1:6] = True
    ring[2:5, 2:5] = False

    result = inpaint_fast_marching(image, hole, radius=2)

    filled = result[2:5, 2:5]
    low = image[ring].min(axis=0)
    high = image[ring].max(axis=0)
    assert np.all(filled >= low - 1e-12)
    assert np.all(filled <= high + 1e-12)


def test_smooth_field_agrees_with_opencv_telea():
    rows, cols = np.mgrid[0:32, 0:32].astype(np.float64)
    field = 0.5 + 0.15 * np.sin(cols / 12.0) * np.cos(rows / 14.0)
    image_u8 = np.round(np.stack([field, 0.8 * field, 1.0 - field], axis=-1) * 255.0).astype(np.uint8)
    hole = np.zeros((32, 32))
    hole[12:20, 10:22] = 1.0

    ours = inpaint_fast_marching(image_u8 / 255.0, hole, radius=5)
    reference = cv2.inpaint(image_u8, (hole * 255).astype(np.uint8), 5, cv2.INPAINT_TELEA) / 255.0

    # OpenCV 只取加权平均并加一个限幅的梯度修正，与一阶外推有 梯度 x 偏移 量级的差别
    diff = np.abs(ours - reference)[hole > 0.5]
    assert diff.mean() < 0.02
    assert diff.max() < 0.06
