"""
图表生成器模块：负责训练损失曲线与消融柱状图的绘制
"""

from __future__ import annotations

import logging
from copy import deepcopy
from dataclasses import dataclass
from io import BytesIO
from numbers import Number
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402

from core.exceptions import InvalidInputError  # noqa: E402
from core.utils import atomic_write  # noqa: E402

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class _SeriesConfig:
    label: str
    x_field: str
    y_field: str
    color: Optional[str] = None


class ChartGenerator:
    """
    图表生成器
    负责折线图（损失曲线）与分组柱状图（消融表）的绘制与 PNG 输出
    """

    DEFAULT_CONFIG: Dict[str, Any] = {
        "title": "",
        "x_label": "",
        "y_label": "",
        "width": 800,
        "height": 480,
        "dpi": 120,
        "grid": True,
        "legend": True,
        "line_width": 1.5,
        "bar_width": 0.8,
        "log_y": False,
        "palette": [
            "#2563EB",
            "#F97316",
            "#10B981",
            "#F43F5E",
            "#9333EA",
            "#14B8A6",
        ],
    }

    def generate_line_chart(self, data: List[Dict[str, Any]], x_field: str, y_fields: Sequence[str],
                            config: Optional[Dict[str, Any]] = None) -> bytes:
        cfg = self._normalize_config(config)
        series = [_SeriesConfig(label=field, x_field=x_field, y_field=field) for field in y_fields]
        return self._render(data, cfg, lambda ax: self._plot_line_chart(ax, data, cfg, series))

    def generate_bar_chart(self, data: List[Dict[str, Any]], category_field: str, y_fields: Sequence[str],
                           config: Optional[Dict[str, Any]] = None) -> bytes:
        cfg = self._normalize_config(config)
        series = [_SeriesConfig(label=field, x_field=category_field, y_field=field) for field in y_fields]
        return self._render(data, cfg, lambda ax: self._plot_bar_chart(ax, data, cfg, series, category_field))

    # ---------------------------- 绘图实现 ---------------------------- #

    def _plot_line_chart(self, ax, data: List[Dict[str, Any]], config: Dict[str, Any],
                         series_list: Sequence[_SeriesConfig]) -> None:
        plotted = 0
        palette = self._resolve_palette(config, len(series_list))
        for idx, series in enumerate(series_list):
            points = self._extract_xy_points(data, series.x_field, series.y_field)
            if not points:
                logger.debug("Line chart skip series %s: no valid points", series.label)
                continue
            xs, ys = zip(*points)
            ax.plot(xs, ys, label=series.label, color=series.color or palette[idx],
                    linewidth=config["line_width"])
            plotted += 1
        if plotted == 0:
            raise InvalidInputError("折线图缺少可绘制的数据点")
        if config.get("log_y"):
            ax.set_yscale("log")
        self._apply_axes_style(ax, config)

    def _plot_bar_chart(self, ax, data: List[Dict[str, Any]], config: Dict[str, Any],
                        series_list: Sequence[_SeriesConfig], category_field: str) -> None:
        categories = [row[category_field] for row in data if row.get(category_field) is not None]
        if not categories:
            raise InvalidInputError("柱状图缺少有效的分类数据")
        palette = self._resolve_palette(config, len(series_list))
        total_series = len(series_list)
        single_width = config["bar_width"] / max(total_series, 1)
        indices = list(range(len(categories)))
        rows = {row[category_field]: row for row in data if row.get(category_field) is not None}
        for idx, series in enumerate(series_list):
            offsets = [i + (idx - (total_series - 1) / 2) * single_width for i in indices]
            values = [self._coerce_numeric(rows[cat].get(series.y_field)) or 0.0 for cat in categories]
            ax.bar(offsets, values, width=single_width * 0.9, label=series.label,
                   color=series.color or palette[idx])
        ax.set_xticks(indices)
        ax.set_xticklabels(categories, rotation=20)
        self._apply_axes_style(ax, config)

    # ---------------------------- 辅助方法 ---------------------------- #

    def _render(self, data: List[Dict[str, Any]], config: Dict[str, Any], plotter) -> bytes:
        if not isinstance(data, list) or not data:
            raise InvalidInputError("data 必须是非空列表")
        fig, ax = plt.subplots(figsize=(config["width"] / config["dpi"], config["height"] / config["dpi"]),
                               dpi=config["dpi"])
        try:
            plotter(ax)
            fig.tight_layout()
            buffer = BytesIO()
            fig.savefig(buffer, format="png", dpi=config["dpi"])
            return buffer.getvalue()
        finally:
            plt.close(fig)

    def _normalize_config(self, config: Optional[Dict[str, Any]]) -> Dict[str, Any]:
        cfg = deepcopy(self.DEFAULT_CONFIG)
        for key, value in (config or {}).items():
            if value is not None:
                cfg[key] = value
        for key in ("width", "height", "dpi"):
            if int(cfg[key]) <= 0:
                raise InvalidInputError(f"{key} 必须大于 0")
            cfg[key] = int(cfg[key])
        return cfg

    def _resolve_palette(self, config: Dict[str, Any], series_count: int) -> List[str]:
        palette = [color for color in config.get("palette", []) if color] or list(self.DEFAULT_CONFIG["palette"])
        while len(palette) < series_count:
            palette.extend(self.DEFAULT_CONFIG["palette"])
        return palette[:series_count]

    def _extract_xy_points(self, data: Iterable[Dict[str, Any]], x_field: str,
                           y_field: str) -> List[Tuple[Any, float]]:
        points: List[Tuple[Any, float]] = []
        for row in data:
            if x_field not in row or y_field not in row:
                continue
            numeric = self._coerce_numeric(row[y_field])
            if numeric is None:
                continue
            points.append((row[x_field], numeric))
        return points

    @staticmethod
    def _apply_axes_style(ax, config: Dict[str, Any]) -> None:
        if config.get("title"):
            ax.set_title(config["title"])
        if config.get("x_label"):
            ax.set_xlabel(config["x_label"])
        if config.get("y_label"):
            ax.set_ylabel(config["y_label"])
        if config.get("grid", True):
            ax.grid(True, linestyle="--", alpha=0.3)
        if config.get("legend", True):
            ax.legend()

    @staticmethod
    def _coerce_numeric(value: Any) -> Optional[float]:
        if isinstance(value, Number):
            return float(value)
        if isinstance(value, str) and value.strip():
            try:
                return float(value)
            except ValueError:
                return None
        return None


def write_loss_chart(rows: List[Dict[str, float]], path: Union[str, Path]) -> Path:
    """把损失曲线写成 PNG（损失 CSV 旁边）"""
    path = Path(path)
    chart = ChartGenerator().generate_line_chart(
        rows, "step", ["recon", "relight", "auglight", "feat", "cons", "total"],
        {"title": "training losses", "x_label": "step", "y_label": "loss"},
    )
    atomic_write(path, chart)
    logger.info("Loss chart written -> %s", path)
    return path


def write_ablation_chart(rows: List[Dict[str, Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    chart = ChartGenerator().generate_bar_chart(
        rows, "variant", ["rmse", "ssim"],
        {"title": "ablation", "y_label": "metric"},
    )
    atomic_write(path, chart)
    logger.info("Ablation chart written -> %s", path)
    return path
