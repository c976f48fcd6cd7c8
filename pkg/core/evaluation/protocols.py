"""
评估协议模块
负责单图重光照评估、旋转序列评估、潜在光照一致性评估以及定性对比条输出
"""

from __future__ import annotations

import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from core.engine.lighting import ANCHOR_M90, pseudo_anchor_minus180
from core.evaluation.metrics import evaluate_image, masked_mean_abs
from core.exceptions import InvalidInputError
from core.imaging.compositing import make_strip
from core.imaging.image import ImageProcessor, from_tensor
from core.models.dataset import DatasetManifest, SceneRecord
from core.models.evaluation import (
    ConsistencyResult, ContinuityReport, MetricRecord, SequentialEvalResult, SingleEvalResult,
)
from core.storage.dataset_storage import DatasetStorage
from core.synthdata.generator import angle_to_steps, lookup_rotated
from core.training.losses import PairBatch, cons_terms
from core.training.sampler import SceneCache, make_rng
from core.utils import sweep_angles
from core.workers import worker_count

logger = logging.getLogger(__name__)

STRIP_COUNT = 4


@dataclass(frozen=True)
class EvalPair:
    source: SceneRecord
    target: SceneRecord
    truth: SceneRecord


def _scenes(manifest: DatasetManifest, rng: np.random.Generator, max_scenes: Optional[int]) -> List[SceneRecord]:
    if not manifest.records:
        raise InvalidInputError(f"manifest for split '{manifest.split}' has no records")
    records = list(manifest.records)
    if max_scenes is not None and max_scenes < len(records):
        chosen = sorted(int(i) for i in rng.choice(len(records), size=max_scenes, replace=False))
        records = [records[i] for i in chosen]
    return records


def sample_eval_pairs(manifest: DatasetManifest, seed: int, max_scenes: Optional[int] = None) -> List[EvalPair]:
    """
    每个测试场景随机选取整个数据集中的另一张图作为目标

    真值为 (subject_source, env_target, rot_target)。
    """
    rng = make_rng(seed)
    sources = _scenes(manifest, rng, max_scenes)
    records = manifest.records
    pairs = []
    for source in sources:
        target = records[int(rng.integers(len(records)))]
        truth = lookup_rotated(manifest, source.subject_id, target.env_id, target.rotation_index, 0)
        pairs.append(EvalPair(source=source, target=target, truth=truth))
    return pairs


def _batch1(scenes: SceneCache, record: SceneRecord) -> Tuple[torch.Tensor, torch.Tensor]:
    image, mask = scenes.get(record)
    return image[None], mask[None]


def _as_array(scenes: SceneCache, record: SceneRecord) -> Tuple[np.ndarray, np.ndarray]:
    image, mask = scenes.get(record)
    return from_tensor(image), mask[0].to(torch.float64).numpy()


def _relight(model, scenes: SceneCache, source: SceneRecord, target: SceneRecord,
             angle: Optional[float] = None) -> np.ndarray:
    src, src_mask = _batch1(scenes, source)
    tgt, tgt_mask = _batch1(scenes, target)
    with torch.no_grad():
        out = model.relight(src, src_mask, tgt, tgt_mask, angle)
    return from_tensor(out)


def _parallel(fn, items: Sequence, workers: Optional[int]) -> List:
    count = worker_count(workers)
    if count <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, items))


def write_strip(path: Union[str, Path], images: Sequence[np.ndarray]) -> Path:
    path = Path(path)
    ImageProcessor().write_image(path, np.clip(make_strip(images), 0.0, 1.0))
    return path


def eval_single(model, manifest: DatasetManifest, storage: DatasetStorage, seed: int,
                max_scenes: Optional[int] = None, strips_dir: Optional[Union[str, Path]] = None,
                workers: Optional[int] = None) -> SingleEvalResult:
    """
    单图评估：每个测试场景与随机目标配对，重光照结果与真值在人像区域上比较

    同时计算恒等基线（输出 = 源图）。
    """
    scenes = SceneCache(storage, manifest.split)
    pairs = sample_eval_pairs(manifest, seed, max_scenes)
    model_eval = getattr(model, "eval", None)
    if callable(model_eval):
        model_eval()

    def run(pair: EvalPair) -> Tuple[MetricRecord, MetricRecord, np.ndarray]:
        output = _relight(model, scenes, pair.source, pair.target)
        truth, mask = _as_array(scenes, pair.truth)
        source, _ = _as_array(scenes, pair.source)
        return evaluate_image(output, truth, mask), evaluate_image(source, truth, mask), output

    results = _parallel(run, pairs, workers)
    if strips_dir is not None:
        for idx, (pair, (_, _, output)) in enumerate(zip(pairs[:STRIP_COUNT], results)):
            source, _ = _as_array(scenes, pair.source)
            target, _ = _as_array(scenes, pair.target)
            truth, _ = _as_array(scenes, pair.truth)
            write_strip(Path(strips_dir) / f"single_{idx:03d}.png", [source, target, output, truth])
    result = SingleEvalResult(
        model=MetricRecord.average([r[0] for r in results]),
        identity=MetricRecord.average([r[1] for r in results]),
        pairs=len(pairs),
    )
    logger.info("Single-image evaluation on %d pairs: rmse %.4f psnr %.2f ssim %.4f (identity rmse %.4f)",
                result.pairs, result.model.rmse, result.model.psnr, result.model.ssim, result.identity.rmse)
    return result


def continuity_report(sweeps: Sequence[Sequence[float]]) -> ContinuityReport:
    """
    sweeps[p][k] 为第 p 个配对在第 k 个相邻角度对上的平均 L1 变化；先对配对取平均
    """
    if not sweeps:
        return ContinuityReport()
    changes = [float(np.mean([s[k] for s in sweeps])) for k in range(len(sweeps[0]))]
    median = statistics.median(changes)
    peak = max(changes)
    if median > 0.0:
        spike = peak / median
    else:
        spike = 0.0 if peak == 0.0 else float("inf")
    return ContinuityReport(step_changes=changes, mean=float(np.mean(changes)), median=median,
                            max=peak, spike_ratio=spike)


def eval_sequential(model, manifest: DatasetManifest, storage: DatasetStorage, seed: int,
                    max_scenes: Optional[int] = None, sweep_step: float = 30.0,
                    strips_dir: Optional[Union[str, Path]] = None,
                    workers: Optional[int] = None) -> SequentialEvalResult:
    """
    旋转序列评估：每个配对在 -180..180 的 sweep 角度上渲染，与数据集中真实旋转后的渲染比较

    相邻角度（含 150 -> -180 的回绕）的输出变化汇总为连续性报告。
    """
    scenes = SceneCache(storage, manifest.split)
    pairs = sample_eval_pairs(manifest, seed, max_scenes)
    angles = sweep_angles(sweep_step)
    offsets = [angle_to_steps(a, manifest.rotations) for a in angles]
    model_eval = getattr(model, "eval", None)
    if callable(model_eval):
        model_eval()

    def run(pair: EvalPair) -> Tuple[List[MetricRecord], List[float], List[np.ndarray]]:
        _, mask = _as_array(scenes, pair.source)
        outputs, records = [], []
        for angle, offset in zip(angles, offsets):
            output = _relight(model, scenes, pair.source, pair.target, angle)
            truth_record = lookup_rotated(manifest, pair.source.subject_id, pair.target.env_id,
                                          pair.target.rotation_index, offset)
            truth, truth_mask = _as_array(scenes, truth_record)
            records.append(evaluate_image(output, truth, truth_mask))
            outputs.append(output)
        steps = [masked_mean_abs(outputs[(k + 1) % len(outputs)], outputs[k], mask) for k in range(len(outputs))]
        return records, steps, outputs

    results = _parallel(run, pairs, workers)
    per_angle = {
        angle: MetricRecord.average([r[0][k] for r in results]) for k, angle in enumerate(angles)
    }
    if strips_dir is not None:
        for idx, (_, _, outputs) in enumerate(results[:STRIP_COUNT]):
            write_strip(Path(strips_dir) / f"sweep_{idx:03d}.png", outputs)
    result = SequentialEvalResult(
        model=MetricRecord.average([rec for r in results for rec in r[0]]),
        per_angle=per_angle,
        continuity=continuity_report([r[1] for r in results]),
        pairs=len(pairs),
    )
    logger.info("Sequential evaluation on %d pairs x %d angles: rmse %.4f, spike ratio %.2f",
                result.pairs, len(angles), result.model.rmse, result.continuity.spike_ratio)
    return result


def _cons_batch(scenes: SceneCache, center: SceneRecord, plus: SceneRecord, minus: SceneRecord) -> PairBatch:
    image, mask = _batch1(scenes, center)
    p_image, p_mask = _batch1(scenes, plus)
    m_image, m_mask = _batch1(scenes, minus)
    return PairBatch(
        x_image=image, x_mask=mask, y_image=image, y_mask=mask,
        gt_zero=image, gt_p90=p_image, gt_m90=m_image,
        y_p90_image=p_image, y_p90_mask=p_mask, y_m90_image=m_image, y_m90_mask=m_mask,
        keys=[{"x": center.key, "y": center.key}],
    )


def _m90_code(model, scenes: SceneCache, record: SceneRecord) -> torch.Tensor:
    image, mask = _batch1(scenes, record)
    return model.decode_anchor(model.encode_illumination(image, mask), ANCHOR_M90)


def eval_consistency(model, manifest: DatasetManifest, storage: DatasetStorage, seed: int,
                     max_scenes: Optional[int] = None) -> ConsistencyResult:
    """
    五个光照重叠恒等式的平均 L1 残差：真实 ±90 度旋转场景 vs 随机错配场景

    同时以 D^-90(E_i(I^-90)) 为参照，比较 -180 度伪锚点与随机场景的 -90 度编码到它的距离。
    """
    if not getattr(model, "has_ot3", False):
        raise InvalidInputError("consistency evaluation needs a model with the OT3 heads")
    scenes = SceneCache(storage, manifest.split)
    rng = make_rng(seed)
    centers = _scenes(manifest, rng, max_scenes)
    quarter = angle_to_steps(90.0, manifest.rotations)
    records = manifest.records
    model.eval()
    matched: List[List[float]] = []
    mismatched: List[List[float]] = []
    pseudo_err: List[float] = []
    pseudo_rand: List[float] = []
    with torch.no_grad():
        for center in centers:
            s, e, d = center.key
            plus = lookup_rotated(manifest, s, e, d, quarter)
            minus = lookup_rotated(manifest, s, e, d, -quarter)
            rand_plus = records[int(rng.integers(len(records)))]
            rand_minus = records[int(rng.integers(len(records)))]
            rand_other = records[int(rng.integers(len(records)))]
            matched.append([float(t) for t in cons_terms(_cons_batch(scenes, center, plus, minus), model)])
            mismatched.append([float(t) for t in cons_terms(_cons_batch(scenes, center, rand_plus, rand_minus),
                                                            model)])

            image, mask = _batch1(scenes, center)
            anchors = model.decode(model.encode_illumination(image, mask))
            pseudo = pseudo_anchor_minus180(anchors, model.decoder, model.config.pseudo_anchor_head,
                                            model.config.damping)
            reference = _m90_code(model, scenes, minus)
            pseudo_err.append(float((pseudo.code - reference).abs().mean()))
            pseudo_rand.append(float((_m90_code(model, scenes, rand_other) - reference).abs().mean()))

    result = ConsistencyResult(
        matched=[float(np.mean([m[k] for m in matched])) for k in range(5)],
        mismatched=[float(np.mean([m[k] for m in mismatched])) for k in range(5)],
        pseudo_anchor_error=float(np.mean(pseudo_err)),
        pseudo_anchor_random_error=float(np.mean(pseudo_rand)),
        scenes=len(centers),
    )
    logger.info("Consistency on %d scenes: matched %.4f vs mismatched %.4f; pseudo anchor %.4f vs random %.4f",
                result.scenes, result.matched_mean, result.mismatched_mean,
                result.pseudo_anchor_error, result.pseudo_anchor_random_error)
    return result

