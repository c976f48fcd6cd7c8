"""
训练样本采样模块
负责 (源场景 x, 目标场景 y) 配对采样、真值查找、场景缓存以及后台预取
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from queue import Empty, Full, Queue
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import torch

from core.exceptions import InvalidInputError, RelightError
from core.imaging.image import mask_to_tensor, to_tensor
from core.models.dataset import DatasetManifest, SceneRecord
from core.storage.dataset_storage import DatasetStorage
from core.synthdata.generator import angle_to_steps, lookup_rotated
from core.training.losses import PairBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PairSample:
    """一个训练配对及其查找到的全部真值记录"""
    x: SceneRecord
    y: SceneRecord
    gt_zero: SceneRecord
    gt_p90: SceneRecord
    gt_m90: SceneRecord
    y_p90: SceneRecord
    y_m90: SceneRecord


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def sample_pair(manifest: DatasetManifest, rng: np.random.Generator) -> PairSample:
    """
    在清单记录上均匀采样 x、y（允许 x = y）

    真值 I^0_{x,y} 取 (subject_x, env_y, rot_y)，I^{±90}_{x,y} 取 rot_y ± 3 步；
    一致性损失所需的 I^{±90}_y 取 (subject_y, env_y, rot_y ± 3)。

    Raises:
        InvalidInputError: 清单为空，或旋转数不能表示 90 度
        MissingRecordError: 清单不是完整笛卡尔积
    """
    records = manifest.records
    if not records:
        raise InvalidInputError(f"manifest for split '{manifest.split}' has no records")
    quarter = angle_to_steps(90.0, manifest.rotations)
    x = records[int(rng.integers(len(records)))]
    y = records[int(rng.integers(len(records)))]
    d = y.rotation_index
    return PairSample(
        x=x,
        y=y,
        gt_zero=lookup_rotated(manifest, x.subject_id, y.env_id, d, 0),
        gt_p90=lookup_rotated(manifest, x.subject_id, y.env_id, d, quarter),
        gt_m90=lookup_rotated(manifest, x.subject_id, y.env_id, d, -quarter),
        y_p90=lookup_rotated(manifest, y.subject_id, y.env_id, d, quarter),
        y_m90=lookup_rotated(manifest, y.subject_id, y.env_id, d, -quarter),
    )


class SceneCache:
    """已解码场景的线程安全缓存，存放 [3,H,W] 图像与 [1,H,W] 掩码张量"""

    def __init__(self, storage: DatasetStorage, split: str, enabled: bool = True):
        self.storage = storage
        self.split = split
        self.enabled = enabled
        self._items: Dict[str, Tuple[torch.Tensor, torch.Tensor]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._items)

    def get(self, record: SceneRecord) -> Tuple[torch.Tensor, torch.Tensor]:
        with self._lock:
            hit = self._items.get(record.image)
        if hit is not None:
            return hit
        image, mask = self.storage.read_scene(self.split, record)
        item = (to_tensor(image), mask_to_tensor(mask))
        if self.enabled:
            with self._lock:
                self._items[record.image] = item
        return item


class PairSampler:
    """
    批次采样器

    所有随机性来自一个 PCG64 生成器；state() / set_state() 用于检查点恢复。
    """

    def __init__(self, manifest: DatasetManifest, storage: DatasetStorage, seed: int,
                 batch_size: int, cache: bool = True):
        if batch_size < 1:
            raise InvalidInputError("batch_size must be positive")
        self.manifest = manifest
        self.batch_size = batch_size
        self.rng = make_rng(seed)
        self.scenes = SceneCache(storage, manifest.split, enabled=cache)

    def state(self) -> Dict[str, Any]:
        return self.rng.bit_generator.state

    def set_state(self, state: Dict[str, Any]) -> None:
        self.rng.bit_generator.state = state

    def sample(self) -> PairSample:
        return sample_pair(self.manifest, self.rng)

    def next_batch(self) -> PairBatch:
        samples = [self.sample() for _ in range(self.batch_size)]
        return self.assemble(samples)

    def assemble(self, samples: List[PairSample]) -> PairBatch:
        def stack(field_name: str) -> Tuple[torch.Tensor, torch.Tensor]:
            pairs = [self.scenes.get(getattr(s, field_name)) for s in samples]
            return torch.stack([p[0] for p in pairs]), torch.stack([p[1] for p in pairs])

        x_image, x_mask = stack("x")
        y_image, y_mask = stack("y")
        gt_zero, _ = stack("gt_zero")
        gt_p90, _ = stack("gt_p90")
        gt_m90, _ = stack("gt_m90")
        y_p90_image, y_p90_mask = stack("y_p90")
        y_m90_image, y_m90_mask = stack("y_m90")
        keys = [{"x": s.x.key, "y": s.y.key} for s in samples]
        return PairBatch(
            x_image=x_image, x_mask=x_mask, y_image=y_image, y_mask=y_mask,
            gt_zero=gt_zero, gt_p90=gt_p90, gt_m90=gt_m90,
            y_p90_image=y_p90_image, y_p90_mask=y_p90_mask,
            y_m90_image=y_m90_image, y_m90_mask=y_m90_mask,
            keys=keys,
        )


@dataclass
class PrefetchedBatch:
    batch: PairBatch
    rng_state: Dict[str, Any]


class _Failure:
    def __init__(self, error: BaseException):
        self.error = error


class BatchPrefetcher:
    """
    单生产者预取线程

    生产者按顺序调用 sampler.next_batch() 并放入有界队列，每个批次附带生成后的采样器状态，
    因此即使预取领先于训练循环，检查点中保存的状态也正好对应已消费的批次。
    """

    _SENTINEL = object()

    def __init__(self, sampler: PairSampler, count: int, queue_size: int = 4):
        self.sampler = sampler
        self.count = count
        self._queue: Queue = Queue(maxsize=max(1, queue_size))
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._consumed = 0

    def start(self) -> "BatchPrefetcher":
        if self._thread is None:
            self._thread = threading.Thread(target=self._produce, name="batch-prefetcher", daemon=True)
            self._thread.start()
            logger.debug("Batch prefetcher started: %d batches, queue size %d", self.count, self._queue.maxsize)
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            while self._thread.is_alive():
                try:
                    self._queue.get_nowait()
                except Empty:
                    pass
                self._thread.join(timeout=0.1)
            self._thread = None

    def __enter__(self) -> "BatchPrefetcher":
        return self.start()

    def __exit__(self, exc_type, exc, tb) -> None:
        self.stop()

    def __iter__(self):
        return self

    def __next__(self) -> PrefetchedBatch:
        if self._thread is None:
            self.start()
        item = self._queue.get()
        if item is self._SENTINEL:
            raise StopIteration
        if isinstance(item, _Failure):
            raise item.error
        self._consumed += 1
        return item

    def _put(self, item) -> bool:
        while not self._stop.is_set():
            try:
                self._queue.put(item, timeout=0.1)
                return True
            except Full:
                continue
        return False

    def _produce(self) -> None:
        try:
            for _ in range(self.count):
                if self._stop.is_set():
                    return
                batch = self.sampler.next_batch()
                if not self._put(PrefetchedBatch(batch=batch, rng_state=self.sampler.state())):
                    return
        except RelightError as exc:
            logger.error("Batch prefetcher failed: %s", exc)
            self._put(_Failure(exc))
            return
        except Exception as exc:  # noqa: BLE001
            logger.exception("Unexpected error in batch prefetcher")
            self._put(_Failure(exc))
            return
        self._put(self._SENTINEL)
