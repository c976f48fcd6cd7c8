"""
评估报告与图表单元测试
"""

import csv

import pytest

from core.evaluation.charts import ChartGenerator, write_ablation_chart, write_loss_chart
from core.evaluation.reports import (
    ABLATION_HEADER, write_ablation_csv, write_consistency_csv, write_csv, write_metrics_csv,
)
from core.exceptions import InvalidInputError
from core.models.evaluation import (
    AblationRow, ConsistencyResult, ContinuityReport, MetricRecord, SequentialEvalResult, SingleEvalResult,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _read(path):
    with open(path, newline="", encoding="utf-8") as fp:
        return list(csv.reader(fp))


def _record(value):
    return MetricRecord(rmse=value, psnr=20.0, ssim=0.5, count=2)


def test_write_csv_formats_floats(tmp_path):
    path = write_csv(tmp_path / "out" / "table.csv", ("name", "value", "note"),
                     [{"name": "a", "value": 0.1234567}, {"name": "b", "value": 3, "note": None}])

    assert _read(path) == [["name", "value", "note"], ["a", "0.123457", ""], ["b", "3", ""]]


def test_metrics_csv_rows(tmp_path):
    single = SingleEvalResult(model=_record(0.1), identity=_record(0.2), pairs=2)
    sequential = SequentialEvalResult(
        model=_record(0.3),
        per_angle={90.0: _record(0.4), -90.0: _record(0.5)},
        continuity=ContinuityReport(step_changes=[0.1, 0.2], mean=0.15, median=0.15, max=0.2, spike_ratio=1.25),
        pairs=1,
    )

    rows = _read(write_metrics_csv(tmp_path / "metrics.csv", single, sequential))

    assert rows[0] == ["protocol", "angle", "rmse", "psnr", "ssim", "count"]
    assert [r[:3] for r in rows[1:6]] == [
        ["single", "", "0.100000"],
        ["identity", "", "0.200000"],
        ["sequential", "", "0.300000"],
        ["sequential", "-90", "0.500000"],
        ["sequential", "90", "0.400000"],
    ]
    assert rows[-1] == ["continuity_spike_ratio", "", "1.250000", "", "", ""]


def test_consistency_csv_rows(tmp_path):
    result = ConsistencyResult(matched=[0.1] * 5, mismatched=[0.3] * 5,
                               pseudo_anchor_error=0.2, pseudo_anchor_random_error=0.6, scenes=3)

    rows = _read(write_consistency_csv(tmp_path / "consistency.csv", result))

    assert rows[0] == ["quantity", "matched", "mismatched"]
    assert rows[1] == ["overlap_1", "0.100000", "0.300000"]
    assert rows[6] == ["overlap_mean", "0.100000", "0.300000"]
    assert rows[7] == ["pseudo_anchor", "0.200000", "0.600000"]


def test_ablation_csv_and_chart(tmp_path):
    rows = [
        AblationRow(variant="full", rmse=0.1, psnr=20.0, ssim=0.9, identity_rmse=0.2, steps=4, config_hash="a"),
        AblationRow(variant="mul", rmse=0.2, psnr=14.0, ssim=0.7, identity_rmse=0.2, steps=4, config_hash="b"),
    ]

    table = _read(write_ablation_csv(tmp_path / "ablation.csv", rows))
    chart = write_ablation_chart([row.model_dump() for row in rows], tmp_path / "ablation.png")

    assert tuple(table[0]) == ABLATION_HEADER
    assert [r[0] for r in table[1:]] == ["full", "mul"]
    assert chart.read_bytes()[:8] == PNG_MAGIC


def test_loss_chart(tmp_path):
    history = [
        {"step": 1, "recon": 0.5, "relight": 0.6, "auglight": 0.7, "feat": 0.1, "cons": 0.2, "total": 2.0},
        {"step": 2, "recon": 0.4, "relight": 0.5, "auglight": 0.6, "feat": 0.1, "cons": 0.1, "total": 1.7},
    ]

    path = write_loss_chart(history, tmp_path / "losses.png")

    assert path.read_bytes()[:8] == PNG_MAGIC


def test_chart_generator_rejects_bad_input():
    generator = ChartGenerator()

    with pytest.raises(InvalidInputError):
        generator.generate_line_chart([], "step", ["total"])
    with pytest.raises(InvalidInputError):
        generator.generate_line_chart([{"step": 1, "total": "n/a"}], "step", ["total"])
    with pytest.raises(InvalidInputError):
        generator.generate_bar_chart([{"rmse": 0.1}], "variant", ["rmse"])
    with pytest.raises(InvalidInputError):
        generator.generate_line_chart([{"step": 1, "total": 1.0}], "step", ["total"], {"dpi": 0})
