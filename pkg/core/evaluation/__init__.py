"""
评估层模块
提供指标、评估协议、报告与图表（消融实验依赖训练模块，需从 core.evaluation.ablation 导入）
"""

from .metrics import rmse, psnr, ssim, ssim_map, evaluate_image, masked_mean_abs, PSNR_CAP
from .protocols import (
    EvalPair, sample_eval_pairs, eval_single, eval_sequential, eval_consistency, continuity_report,
    write_strip,
)
from .reports import write_csv, write_metrics_csv, write_consistency_csv, write_ablation_csv
from .charts import ChartGenerator, write_loss_chart, write_ablation_chart

__all__ = [
    "rmse", "psnr", "ssim", "ssim_map", "evaluate_image", "masked_mean_abs", "PSNR_CAP",
    "EvalPair", "sample_eval_pairs", "eval_single", "eval_sequential", "eval_consistency",
    "continuity_report", "write_strip",
    "write_csv", "write_metrics_csv", "write_consistency_csv", "write_ablation_csv",
    "ChartGenerator", "write_loss_chart", "write_ablation_chart",
]
