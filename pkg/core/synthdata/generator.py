"""
数据集生成模块
负责生成 主体 x 环境 x 旋转 的完整笛卡尔积数据集、清单，以及按旋转偏移查找场景记录
"""

from __future__ import annotations

import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from core.exceptions import ConfigurationError, InvalidInputError
from core.models.dataset import DatasetManifest, SceneRecord, scene_stem
from core.schemas.configs import DatasetConfig
from core.storage.dataset_storage import DatasetStorage
from core.synthdata.envmap import random_envmap, rotate_env
from core.synthdata.shading import shade_subject
from core.synthdata.subject import random_subject
from core.workers import worker_count

logger = logging.getLogger(__name__)


def split_seeds(master_seed: int, split: str, subjects: int, envs: int) -> Tuple[List[int], List[int]]:
    """
    由主种子和 split 名称派生主体/环境种子

    不同 split 使用不同的 SeedSequence 熵，保证各 split 的种子流互不相关。
    """
    split_key = zlib.crc32(split.encode("utf-8"))
    root = np.random.SeedSequence([int(master_seed), split_key])
    subject_seq, env_seq = root.spawn(2)
    subject_seeds = [int(s) for s in subject_seq.generate_state(subjects, dtype=np.uint32)]
    env_seeds = [int(s) for s in env_seq.generate_state(envs, dtype=np.uint32)]
    if len(set(subject_seeds)) != subjects or len(set(env_seeds)) != envs:
        raise ConfigurationError("derived seeds collide within the split; choose another master seed")
    return subject_seeds, env_seeds


def check_disjoint(manifest: DatasetManifest, others: List[DatasetManifest]) -> None:
    """
    Raises:
        ConfigurationError: 与其他 split 共享主体或环境种子
    """
    for other in others:
        shared_subjects = set(manifest.subject_seeds) & set(other.subject_seeds)
        shared_envs = set(manifest.env_seeds) & set(other.env_seeds)
        if shared_subjects or shared_envs:
            raise ConfigurationError(
                f"split '{manifest.split}' shares {len(shared_subjects)} subject and "
                f"{len(shared_envs)} environment seeds with split '{other.split}'",
                config_key="dataset.seed",
            )


def _render_pair(storage: DatasetStorage, config: DatasetConfig, split: str, subject_id: int,
                 subject_seed: int, env_id: int, env_seed: int) -> List[SceneRecord]:
    subject = random_subject(subject_seed)
    base_env = random_envmap(env_seed, width=config.env_width, area_lights=config.area_lights)
    records = []
    step = config.rotation_step_degrees
    for d in range(config.rotations):
        env = rotate_env(base_env, d * step)
        image, mask = shade_subject(subject, env, config.resolution, config.fov_degrees, config.exposure)
        stem = scene_stem(subject_id, env_id, d)
        record = SceneRecord(
            subject_id=subject_id, env_id=env_id, rotation_index=d, angle=d * step,
            image=f"{stem}.png", mask=f"{stem}_mask.png",
        )
        storage.write_scene(split, record, image, mask)
        records.append(record)
    return records


def generate_dataset(config: DatasetConfig, root: str, split: Optional[str] = None) -> DatasetManifest:
    """
    生成数据集并写入清单

    Args:
        config: 数据集配置
        root: 数据集根目录
        split: split 名称，默认取 config.split

    Returns:
        DatasetManifest，包含 S*E*rotations 条记录

    Raises:
        ConfigurationError: 与已有的其他 split 种子重叠
        DataIOError: 写文件失败
    """
    split = split or config.split
    storage = DatasetStorage(root)
    subject_seeds, env_seeds = split_seeds(config.seed, split, config.subjects, config.envs)
    manifest = DatasetManifest(
        split=split,
        resolution=config.resolution,
        env_width=config.env_width,
        rotations=config.rotations,
        master_seed=config.seed,
        subject_seeds=subject_seeds,
        env_seeds=env_seeds,
    )
    check_disjoint(manifest, list(storage.load_other_manifests(split).values()))

    start = time.perf_counter()
    jobs = [(s, sseed, e, eseed) for s, sseed in enumerate(subject_seeds) for e, eseed in enumerate(env_seeds)]
    workers = worker_count(config.workers)
    records: List[SceneRecord] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_render_pair, storage, config, split, s, sseed, e, eseed)
                   for s, sseed, e, eseed in jobs]
        for future in futures:
            records.extend(future.result())
    records.sort(key=lambda r: r.key)
    manifest.records = records
    storage.save_manifest(manifest)
    logger.info("Dataset split '%s' generated: %d subjects x %d envs x %d rotations = %d images in %.1fs (%d workers)",
                split, config.subjects, config.envs, config.rotations, len(records),
                time.perf_counter() - start, workers)
    return manifest


def angle_to_steps(degrees: float, rotations: int = 12) -> int:
    """
    角度换算为旋转步数（+90 度 = +3 步）

    Raises:
        InvalidInputError: 角度不是步长的整数倍
    """
    step = 360.0 / rotations
    steps = degrees / step
    if abs(steps - round(steps)) > 1e-9:
        raise InvalidInputError(f"angle {degrees} is not a multiple of the {step} degree rotation step")
    return int(round(steps))


def lookup_rotated(manifest: DatasetManifest, subject_id: int, env_id: int, d: int,
                   offset_steps: int) -> SceneRecord:
    """
    旋转序号为 (d + offset_steps) mod rotations 的场景记录

    Raises:
        MissingRecordError: 清单中没有该记录
    """
    return manifest.get(subject_id, env_id, (d + offset_steps) % manifest.rotations)
