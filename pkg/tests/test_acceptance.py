"""
长时间验收测试（默认不运行，使用 pytest -m slow）
在桌面规模数据上训练，检查过拟合能力、重光照效果与 OT3 锚点自组织
"""

import pytest

from core.engine.network import build_model
from core.evaluation.protocols import eval_consistency, eval_sequential, eval_single
from core.schemas.configs import DatasetConfig, ModelConfig, TrainingConfig
from core.storage.dataset_storage import DatasetStorage
from core.synthdata.generator import generate_dataset
from core.training.trainer import Trainer

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def desk_data(tmp_path_factory):
    """4 主体 x 2 环境 x 12 旋转训练集，外加一个独立的测试 split"""
    root = tmp_path_factory.mktemp("desk")
    config = DatasetConfig(subjects=4, envs=2, rotations=12, resolution=32, env_width=48, seed=5)
    generate_dataset(config, str(root), split="train")
    generate_dataset(config.model_copy(update={"subjects": 2}), str(root), split="test")
    storage = DatasetStorage(str(root))
    return storage, storage.load_manifest("train"), storage.load_manifest("test")


@pytest.fixture(scope="module")
def desk_model():
    return ModelConfig(resolution=32, subject_channels=16, trunk_width=32, trunk_depth=2, subject_res_blocks=1)


@pytest.fixture(scope="module")
def trained(tmp_path_factory, desk_data, desk_model):
    storage, train_manifest, _ = desk_data
    training = TrainingConfig(learning_rate=2e-4, batch_size=4, steps=2000, seed=1,
                              checkpoint_every=1000, log_every=100)
    trainer = Trainer(desk_model, training, train_manifest, storage, tmp_path_factory.mktemp("run") / "desk.ckpt")
    run = trainer.run()
    return trainer.model, run


def test_full_dataset_size(tmp_path):
    manifest = generate_dataset(DatasetConfig(subjects=8, envs=6, rotations=12, seed=1), str(tmp_path), "train")

    assert len(manifest.records) == 576
    assert manifest.is_complete
    assert len(list((tmp_path / "train").glob("*_mask.png"))) == 576


def test_overfit_reduces_relight_loss(trained):
    _, run = trained
    first = run.history[0]["relight"]
    last = sum(row["relight"] for row in run.history[-20:]) / 20

    assert last <= 0.2 * first


def test_model_beats_identity_baseline(trained, desk_data):
    model, _ = trained
    storage, _, test_manifest = desk_data

    result = eval_single(model, test_manifest, storage, seed=7)

    assert result.model.rmse < result.identity.rmse


def test_overlap_identities_self_organize(trained, desk_data):
    model, _ = trained
    storage, _, test_manifest = desk_data

    result = eval_consistency(model, test_manifest, storage, seed=7)

    assert result.matched_mean < 0.5 * result.mismatched_mean


def test_sweep_has_no_spikes(trained, desk_data):
    model, _ = trained
    storage, _, test_manifest = desk_data

    result = eval_sequential(model, test_manifest, storage, seed=7, max_scenes=8)

    assert result.continuity.spike_ratio <= 5.0


def test_untrained_model_is_worse_than_trained(trained, desk_data, desk_model):
    model, _ = trained
    storage, _, test_manifest = desk_data

    fresh = eval_single(build_model(desk_model, seed=1), test_manifest, storage, seed=7, max_scenes=16)
    desk = eval_single(model, test_manifest, storage, seed=7, max_scenes=16)

    assert desk.model.rmse < fresh.model.rmse
