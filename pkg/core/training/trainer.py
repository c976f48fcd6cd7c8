"""
训练模块
负责联合优化全部编码器/解码器/渲染器参数、逐步损失 CSV、周期性检查点、断点续训与 NaN 诊断
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import torch

from core.engine.network import RelightNet, build_model
from core.evaluation.charts import write_loss_chart
from core.exceptions import CheckpointMismatchError, NumericalError
from core.logging import get_metrics_logger
from core.models.dataset import DatasetManifest
from core.schemas.configs import ModelConfig, TrainingConfig
from core.storage.checkpoint_storage import CheckpointState, load_checkpoint, save_checkpoint
from core.storage.dataset_storage import DatasetStorage
from core.training.losses import LOSS_COLUMNS, LossTerms, PairBatch, loss_total
from core.training.sampler import BatchPrefetcher, PairSampler
from core.utils import atomic_write, config_hash, seed_everything, write_json

logger = logging.getLogger(__name__)

CSV_HEADER = ("step",) + LOSS_COLUMNS


@dataclass
class TrainingRun:
    checkpoint: Path
    loss_csv: Path
    steps: int
    start_step: int
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def final_losses(self) -> Optional[Dict[str, float]]:
        return self.history[-1] if self.history else None


def total_steps(training: TrainingConfig, manifest: DatasetManifest) -> int:
    """显式 steps 优先，否则 epochs x ceil(记录数 / batch_size)"""
    if training.steps is not None:
        return training.steps
    per_epoch = math.ceil(len(manifest.records) / training.batch_size)
    return training.epochs * per_epoch


def checkpoint_config(model_config: ModelConfig, training: TrainingConfig) -> Dict[str, object]:
    model_dump = model_config.model_dump(mode="json")
    training_dump = training.model_dump(mode="json")
    return {
        "model": model_dump,
        "training": training_dump,
        "config_hash": config_hash({"model": model_dump, "training": training_dump}),
    }


def model_from_checkpoint(state: CheckpointState) -> RelightNet:
    """
    按检查点中的配置快照重建网络并载入参数

    Raises:
        CheckpointMismatchError: 配置快照缺失/非法，或参数名、形状与网络不一致
    """
    try:
        model_config = ModelConfig.model_validate(state.config["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointMismatchError("checkpoint carries no valid model configuration",
                                      config_key="model") from exc
    model = build_model(model_config)
    load_parameters(model, state.model)
    model.eval()
    return model


def load_parameters(model: RelightNet, parameters: Dict[str, torch.Tensor]) -> None:
    try:
        model.load_state_dict(parameters, strict=True)
    except RuntimeError as exc:
        raise CheckpointMismatchError(f"checkpoint parameters do not match the network: {exc}") from exc


def load_model(path: Union[str, Path]) -> RelightNet:
    return model_from_checkpoint(load_checkpoint(path))


def _csv_line(values: List[object]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerow(values)
    return buffer.getvalue()


def _format_row(step: int, losses: Dict[str, float]) -> List[object]:
    return [step] + [repr(float(losses[name])) for name in LOSS_COLUMNS]


def read_loss_csv(path: Union[str, Path]) -> List[Dict[str, float]]:
    path = Path(path)
    if not path.is_file():
        return []
    with path.open("r", encoding="utf-8", newline="") as fp:
        reader = csv.DictReader(fp)
        return [{"step": int(row["step"]), **{k: float(row[k]) for k in LOSS_COLUMNS}} for row in reader]


class Trainer:
    """
    训练器

    单个更新线程；批次组装由 BatchPrefetcher 在后台线程中提前完成。
    """

    def __init__(self, model_config: ModelConfig, training: TrainingConfig, manifest: DatasetManifest,
                 storage: DatasetStorage, checkpoint_path: Union[str, Path],
                 loss_csv: Optional[Union[str, Path]] = None):
        self.model_config = model_config
        self.training = training
        self.manifest = manifest
        self.storage = storage
        self.checkpoint_path = Path(checkpoint_path)
        self.loss_csv = Path(loss_csv) if loss_csv else self.checkpoint_path.with_suffix(".losses.csv")
        self.metrics = get_metrics_logger()

        if manifest.resolution != model_config.resolution:
            raise CheckpointMismatchError(
                f"dataset resolution {manifest.resolution} differs from model resolution {model_config.resolution}",
                config_key="model.resolution",
            )
        torch.use_deterministic_algorithms(True, warn_only=True)
        seed_everything(training.seed)
        self.model = build_model(model_config, seed=training.seed)
        self.optimizer = torch.optim.Adam(
            self.model.parameters(),
            lr=training.learning_rate,
            betas=(training.beta1, training.beta2),
            eps=training.adam_eps,
        )
        self.sampler = PairSampler(manifest, storage, seed=training.seed, batch_size=training.batch_size)
        self.feat_generator = torch.Generator().manual_seed(training.seed + 1)
        self.step = 0
        self.history: List[Dict[str, float]] = []

    # ---------------------------- 检查点 ---------------------------- #

    def state(self, sampler_state: Optional[Dict[str, object]] = None) -> CheckpointState:
        return CheckpointState(
            config=checkpoint_config(self.model_config, self.training),
            step=self.step,
            model={k: v.detach().clone() for k, v in self.model.state_dict().items()},
            optimizer=self.optimizer.state_dict(),
            rng={"sampler": sampler_state if sampler_state is not None else self.sampler.state()},
            torch_rng={"feat": self.feat_generator.get_state()},
            extra={
                "split": self.manifest.split,
                "generator_version": self.manifest.generator_version,
                "parameters": self.model.count_parameters(),
            },
        )

    def save(self, sampler_state: Optional[Dict[str, object]] = None) -> Path:
        return save_checkpoint(self.checkpoint_path, self.state(sampler_state))

    def resume(self, path: Union[str, Path]) -> None:
        """
        恢复参数、Adam 状态、步数与两个随机数状态

        Raises:
            CheckpointMismatchError: 检查点的网络配置与当前配置不同
        """
        state = load_checkpoint(path)
        saved_model = state.config.get("model")
        if saved_model != self.model_config.model_dump(mode="json"):
            raise CheckpointMismatchError(f"checkpoint {path} was trained with a different model configuration",
                                          config_key="model")
        load_parameters(self.model, state.model)
        if state.optimizer:
            self.optimizer.load_state_dict(state.optimizer)
        if "sampler" in state.rng:
            self.sampler.set_state(state.rng["sampler"])
        if "feat" in state.torch_rng:
            self.feat_generator.set_state(state.torch_rng["feat"])
        self.step = state.step
        self.history = [row for row in read_loss_csv(self.loss_csv) if row["step"] <= self.step]
        logger.info("Resumed training from %s at step %d", path, self.step)

    # ---------------------------- 训练循环 ---------------------------- #

    def compute_losses(self, batch: PairBatch) -> LossTerms:
        return loss_total(batch, self.model, self.training.loss_weights, self.training.flags, self.feat_generator)

    def _dump_nan(self, step: int, batch: PairBatch, terms: LossTerms) -> Path:
        dump_path = self.checkpoint_path.with_suffix(".nan_dump.json")
        payload = {
            "step": step,
            "losses": {name: repr(value) for name, value in terms.as_floats().items()},
            "cons_terms": [repr(float(t.detach())) for t in terms.cons_terms],
            "batch": [{"x": list(k["x"]), "y": list(k["y"])} for k in batch.keys],
            "inputs_finite": {
                name: bool(torch.isfinite(getattr(batch, name)).all())
                for name in ("x_image", "y_image", "gt_zero", "gt_p90", "gt_m90")
            },
            "parameters_finite": {
                name: bool(torch.isfinite(p).all()) for name, p in self.model.named_parameters()
            },
        }
        write_json(dump_path, payload)
        return dump_path

    def _write_csv(self) -> None:
        text = _csv_line(list(CSV_HEADER)) + "".join(
            _csv_line(_format_row(int(row["step"]), row)) for row in self.history
        )
        atomic_write(self.loss_csv, text.encode("utf-8"))

    def train_step(self, batch: PairBatch) -> Dict[str, float]:
        """
        一次 Adam 更新

        Raises:
            NumericalError: 任一损失项非有限（先写出诊断文件）
        """
        step = self.step + 1
        self.model.train()
        terms = self.compute_losses(batch)
        values = terms.as_floats()
        if not all(math.isfinite(v) for v in values.values()):
            dump_path = self._dump_nan(step, batch, terms)
            raise NumericalError(f"non-finite loss at step {step}; batch dump written to {dump_path}")
        self.optimizer.zero_grad(set_to_none=True)
        terms.total.backward()
        self.optimizer.step()
        self.step = step
        row = {"step": float(step), **values}
        self.history.append(row)
        return values

    def run(self, steps: Optional[int] = None) -> TrainingRun:
        total = total_steps(self.training, self.manifest) if steps is None else steps
        start_step = self.step
        remaining = max(0, total - self.step)
        logger.info("Training %s: steps %d..%d, batch %d, lr %g, params %d",
                    self.model_config.render_mode.value, start_step, total, self.training.batch_size,
                    self.training.learning_rate, self.model.count_parameters())
        started = time.perf_counter()
        sampler_state = self.sampler.state()
        try:
            with BatchPrefetcher(self.sampler, remaining, self.training.prefetch) as prefetcher:
                for item in prefetcher:
                    values = self.train_step(item.batch)
                    sampler_state = item.rng_state
                    if self.step % self.training.log_every == 0 or self.step == total:
                        self.metrics.info("step=%d %s", self.step,
                                          " ".join(f"{k}={values[k]:.6f}" for k in LOSS_COLUMNS))
                    if self.step % self.training.checkpoint_every == 0 and self.step < total:
                        self.save(sampler_state)
                        self._write_csv()
        finally:
            self._write_csv()
        checkpoint = self.save(sampler_state)
        if self.history:
            write_loss_chart(self.history, self.loss_csv.with_suffix(".png"))
        logger.info("Training finished at step %d in %.1fs -> %s", self.step,
                    time.perf_counter() - started, checkpoint)
        return TrainingRun(checkpoint=checkpoint, loss_csv=self.loss_csv, steps=self.step,
                           start_step=start_step, history=list(self.history))


def train(model_config: ModelConfig, training: TrainingConfig, manifest: DatasetManifest,
          storage: DatasetStorage, checkpoint_path: Union[str, Path], resume: Optional[Union[str, Path]] = None,
          loss_csv: Optional[Union[str, Path]] = None) -> TrainingRun:
    """训练入口：构建 Trainer，必要时断点续训，运行到配置的步数"""
    trainer = Trainer(model_config, training, manifest, storage, checkpoint_path, loss_csv)
    if resume is not None:
        trainer.resume(resume)
    return trainer.run()
