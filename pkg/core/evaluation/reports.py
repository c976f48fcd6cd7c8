"""
评估报告模块
负责把评估结果写成 CSV
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from core.models.evaluation import AblationRow, ConsistencyResult, SequentialEvalResult, SingleEvalResult
from core.utils import atomic_write

logger = logging.getLogger(__name__)

METRIC_HEADER = ("protocol", "angle", "rmse", "psnr", "ssim", "count")
CONSISTENCY_HEADER = ("quantity", "matched", "mismatched")
ABLATION_HEADER = ("variant", "rmse", "psnr", "ssim", "identity_rmse", "steps", "config_hash")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return "" if value is None else str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: List[Dict[str, Any]]) -> Path:
    path = Path(path)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(column)) for column in header])
    atomic_write(path, buffer.getvalue().encode("utf-8"))
    logger.info("Report written: %d rows -> %s", len(rows), path)
    return path


def single_rows(result: SingleEvalResult) -> List[Dict[str, Any]]:
    return [
        {"protocol": "single", "angle": "", **result.model.model_dump()},
        {"protocol": "identity", "angle": "", **result.identity.model_dump()},
    ]


def sequential_rows(result: SequentialEvalResult) -> List[Dict[str, Any]]:
    rows = [{"protocol": "sequential", "angle": "", **result.model.model_dump()}]
    for angle, record in sorted(result.per_angle.items()):
        rows.append({"protocol": "sequential", "angle": f"{angle:g}", **record.model_dump()})
    continuity = result.continuity
    rows.append({"protocol": "continuity_mean", "angle": "", "rmse": continuity.mean})
    rows.append({"protocol": "continuity_median", "angle": "", "rmse": continuity.median})
    rows.append({"protocol": "continuity_max", "angle": "", "rmse": continuity.max})
    rows.append({"protocol": "continuity_spike_ratio", "angle": "", "rmse": continuity.spike_ratio})
    return rows


def write_metrics_csv(path: Union[str, Path], single: Optional[SingleEvalResult] = None,
                      sequential: Optional[SequentialEvalResult] = None) -> Path:
    rows: List[Dict[str, Any]] = []
    if single is not None:
        rows.extend(single_rows(single))
    if sequential is not None:
        rows.extend(sequential_rows(sequential))
    return write_csv(path, METRIC_HEADER, rows)


def write_consistency_csv(path: Union[str, Path], result: ConsistencyResult) -> Path:
    rows = [
        {"quantity": f"overlap_{k + 1}", "matched": m, "mismatched": mm}
        for k, (m, mm) in enumerate(zip(result.matched, result.mismatched))
    ]
    rows.append({"quantity": "overlap_mean", "matched": result.matched_mean, "mismatched": result.mismatched_mean})
    rows.append({"quantity": "pseudo_anchor", "matched": result.pseudo_anchor_error,
                 "mismatched": result.pseudo_anchor_random_error})
    return write_csv(path, CONSISTENCY_HEADER, rows)


def write_ablation_csv(path: Union[str, Path], rows: List[AblationRow]) -> Path:
    return write_csv(path, ABLATION_HEADER, [row.model_dump() for row in rows])
