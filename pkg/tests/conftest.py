"""
共享测试夹具
生成一次极小的合成数据集（train / test 两个 split），供训练、评估、服务与命令行测试复用
"""

from __future__ import annotations

import pytest

from core.schemas.configs import DatasetConfig, ModelConfig, TrainingConfig
from core.storage.dataset_storage import DatasetStorage
from core.synthdata.generator import generate_dataset


@pytest.fixture(scope="session")
def dataset_config():
    """2 主体 x 2 环境 x 12 旋转，16px"""
    return DatasetConfig(subjects=2, envs=2, rotations=12, resolution=16, env_width=24,
                         area_lights=1, seed=3, workers=2)


@pytest.fixture(scope="session")
def dataset_root(tmp_path_factory, dataset_config):
    """在会话临时目录下生成 train 与 test 两个 split"""
    root = tmp_path_factory.mktemp("dataset")
    generate_dataset(dataset_config, str(root), split="train")
    generate_dataset(dataset_config, str(root), split="test")
    return root


@pytest.fixture(scope="session")
def storage(dataset_root):
    return DatasetStorage(str(dataset_root))


@pytest.fixture(scope="session")
def train_manifest(storage):
    return storage.load_manifest("train")


@pytest.fixture(scope="session")
def test_manifest(storage):
    return storage.load_manifest("test")


@pytest.fixture
def model_config():
    """与数据集分辨率一致的小网络"""
    return ModelConfig(resolution=16, subject_channels=8, trunk_width=16, trunk_depth=2, subject_res_blocks=1)


@pytest.fixture
def training_config():
    return TrainingConfig(learning_rate=1e-3, batch_size=2, steps=3, seed=1,
                          checkpoint_every=2, log_every=1, prefetch=2)
