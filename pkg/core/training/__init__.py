"""
训练层模块
提供损失函数、配对采样与预取、训练循环
"""

from .losses import (
    PairBatch, LossTerms, LossContext, masked_l1, loss_recon, loss_relight, loss_auglight,
    loss_feat, loss_cons, cons_terms, loss_total, LOSS_COLUMNS,
)
from .sampler import PairSample, PairSampler, SceneCache, BatchPrefetcher, sample_pair, make_rng
from .trainer import (
    Trainer, TrainingRun, train, total_steps, load_model, model_from_checkpoint, read_loss_csv,
)

__all__ = [
    "PairBatch", "LossTerms", "LossContext", "masked_l1", "loss_recon", "loss_relight",
    "loss_auglight", "loss_feat", "loss_cons", "cons_terms", "loss_total", "LOSS_COLUMNS",
    "PairSample", "PairSampler", "SceneCache", "BatchPrefetcher", "sample_pair", "make_rng",
    "Trainer", "TrainingRun", "train", "total_steps", "load_model", "model_from_checkpoint",
    "read_loss_csv",
]
