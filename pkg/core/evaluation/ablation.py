"""
消融实验模块
负责按变体训练、在测试集上评估并输出消融表（CSV + 柱状图）
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from core.evaluation.charts import write_ablation_chart
from core.evaluation.protocols import eval_single
from core.evaluation.reports import write_ablation_csv
from core.exceptions import ConfigurationError
from core.models.dataset import DatasetManifest
from core.models.evaluation import AblationRow
from core.schemas import GlobalConfig
from core.schemas.configs import ModelConfig, TrainingConfig
from core.storage.dataset_storage import DatasetStorage
from core.training.trainer import Trainer, checkpoint_config

logger = logging.getLogger(__name__)

# 变体 -> (模型配置覆盖, 损失开关覆盖)
VARIANTS: Dict[str, Tuple[Dict[str, object], Dict[str, bool]]] = {
    "full": ({}, {}),
    "no-bg": ({"use_bg": False}, {}),
    "no-ot3": ({"use_ot3": False}, {"use_ot3": False}),
    "no-feat": ({}, {"use_feat": False}),
    "no-cons": ({}, {"use_cons": False}),
    "concat": ({"render_mode": "Concat", "use_ot3": False}, {"use_ot3": False}),
    "mul": ({"render_mode": "Mul", "use_ot3": False}, {"use_ot3": False}),
}


def variant_configs(name: str, model: ModelConfig, training: TrainingConfig) -> Tuple[ModelConfig, TrainingConfig]:
    """
    Raises:
        ConfigurationError: 未知变体
    """
    if name not in VARIANTS:
        raise ConfigurationError(f"unknown ablation variant '{name}' (known: {', '.join(VARIANTS)})",
                                 config_key="evaluation.variants")
    model_updates, flag_updates = VARIANTS[name]
    model_cfg = ModelConfig.model_validate({**model.model_dump(), **model_updates})
    flags = training.flags.model_copy(update=flag_updates)
    return model_cfg, training.model_copy(update={"flags": flags})


def eval_ablations(variants: List[str], config: GlobalConfig, train_manifest: DatasetManifest,
                   train_storage: DatasetStorage, test_manifest: DatasetManifest, test_storage: DatasetStorage,
                   out_dir: Union[str, Path], steps: Optional[int] = None,
                   csv_path: Optional[Union[str, Path]] = None) -> List[AblationRow]:
    """
    依次训练并评估每个变体，返回与请求顺序一致的表格行

    Args:
        variants: 变体名称列表（full / no-bg / no-ot3 / no-feat / no-cons / concat / mul）
        steps: 每个变体的训练步数，缺省取 evaluation.ablation_steps 或 training 配置
    """
    for name in variants:
        if name not in VARIANTS:
            raise ConfigurationError(f"unknown ablation variant '{name}'", config_key="evaluation.variants")
    out_dir = Path(out_dir)
    budget = steps if steps is not None else config.evaluation.ablation_steps
    training = config.training
    if budget is not None:
        training = training.model_copy(update={"steps": budget})

    rows: List[AblationRow] = []
    for name in variants:
        model_cfg, training_cfg = variant_configs(name, config.model, training)
        logger.info("Ablation variant '%s': mode=%s ot3=%s bg=%s feat=%s cons=%s", name,
                    model_cfg.render_mode.value, model_cfg.use_ot3, model_cfg.use_bg,
                    training_cfg.flags.use_feat, training_cfg.flags.use_cons)
        trainer = Trainer(model_cfg, training_cfg, train_manifest, train_storage, out_dir / f"{name}.ckpt")
        run = trainer.run()
        result = eval_single(trainer.model, test_manifest, test_storage, config.evaluation.seed,
                             max_scenes=config.evaluation.max_scenes)
        rows.append(AblationRow(
            variant=name,
            rmse=result.model.rmse,
            psnr=result.model.psnr,
            ssim=result.model.ssim,
            identity_rmse=result.identity.rmse,
            steps=run.steps,
            config_hash=str(checkpoint_config(model_cfg, training_cfg)["config_hash"]),
        ))

    table = Path(csv_path) if csv_path else out_dir / "ablation.csv"
    write_ablation_csv(table, rows)
    if rows:
        write_ablation_chart([row.model_dump() for row in rows], table.with_suffix(".png"))
    return rows
