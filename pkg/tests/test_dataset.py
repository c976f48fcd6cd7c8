"""
合成数据集生成与存储单元测试
"""

import pytest

from core.exceptions import ConfigurationError, DataIOError, InvalidInputError, MissingRecordError
from core.models.dataset import DatasetManifest, SceneRecord, scene_stem
from core.schemas.configs import DatasetConfig
from core.storage.dataset_storage import DatasetStorage, resolve_split
from core.synthdata.generator import (
    angle_to_steps, check_disjoint, generate_dataset, lookup_rotated, split_seeds,
)


@pytest.fixture
def small_config():
    return DatasetConfig(subjects=1, envs=2, rotations=4, resolution=16, env_width=24, area_lights=1,
                         seed=11, workers=2)


def _manifest(split="train", subjects=2, envs=2, rotations=12, subject_seeds=None, env_seeds=None):
    records = [
        SceneRecord(subject_id=s, env_id=e, rotation_index=d, angle=d * 360.0 / rotations,
                    image=f"{scene_stem(s, e, d)}.png", mask=f"{scene_stem(s, e, d)}_mask.png")
        for s in range(subjects) for e in range(envs) for d in range(rotations)
    ]
    return DatasetManifest(
        split=split, resolution=16, env_width=24, rotations=rotations, master_seed=0,
        subject_seeds=subject_seeds or list(range(subjects)),
        env_seeds=env_seeds or list(range(100, 100 + envs)),
        records=records,
    )


def test_generated_manifest_is_complete(tmp_path, small_config):
    manifest = generate_dataset(small_config, str(tmp_path))

    assert manifest.is_complete
    assert len(manifest.records) == 1 * 2 * 4
    assert [r.key for r in manifest.records] == sorted(r.key for r in manifest.records)
    for record in manifest.records:
        assert (tmp_path / "train" / record.image).is_file()
        assert (tmp_path / "train" / record.mask).is_file()
        assert record.angle == record.rotation_index * 90.0


def test_generation_is_reproducible(tmp_path, small_config):
    generate_dataset(small_config, str(tmp_path / "a"))
    generate_dataset(small_config, str(tmp_path / "b"))

    for name in ("s000_e001_r03.png", "s000_e000_r00_mask.png", "manifest.json"):
        assert (tmp_path / "a" / "train" / name).read_bytes() == (tmp_path / "b" / "train" / name).read_bytes()


def test_stored_scene_reads_back(tmp_path, small_config):
    manifest = generate_dataset(small_config, str(tmp_path))
    storage = DatasetStorage(str(tmp_path))

    image, mask = storage.read_scene("train", manifest.records[0])

    assert image.shape == (16, 16, 3)
    assert mask.shape == (16, 16)
    assert 0.0 < mask.mean() < 1.0
    assert storage.load_manifest("train").model_dump() == manifest.model_dump()


def test_splits_have_disjoint_seeds():
    train_subjects, train_envs = split_seeds(1, "train", 8, 6)
    test_subjects, test_envs = split_seeds(1, "test", 8, 6)

    assert not set(train_subjects) & set(test_subjects)
    assert not set(train_envs) & set(test_envs)
    assert split_seeds(1, "train", 8, 6) == (train_subjects, train_envs)


def test_check_disjoint_rejects_shared_seeds():
    train = _manifest("train", subject_seeds=[1, 2])
    test = _manifest("test", subject_seeds=[2, 3], env_seeds=[500, 501])

    with pytest.raises(ConfigurationError):
        check_disjoint(test, [train])


def test_angle_to_steps():
    assert angle_to_steps(90.0) == 3
    assert angle_to_steps(-90.0) == -3
    assert angle_to_steps(180.0, rotations=4) == 2
    with pytest.raises(InvalidInputError):
        angle_to_steps(45.0)


def test_lookup_rotated_wraps_cyclically():
    manifest = _manifest()

    assert lookup_rotated(manifest, 1, 0, 10, 3).rotation_index == 1
    assert lookup_rotated(manifest, 1, 0, 1, -3).rotation_index == 10
    assert lookup_rotated(manifest, 0, 1, 4, 0).key == (0, 1, 4)


def test_missing_record_raises():
    manifest = _manifest()
    manifest.records = [r for r in manifest.records if r.key != (0, 0, 3)]

    with pytest.raises(MissingRecordError) as exc_info:
        lookup_rotated(manifest, 0, 0, 0, 3)

    assert exc_info.value.key == (0, 0, 3)
    assert exc_info.value.exit_code == 3
    assert not manifest.is_complete


def test_duplicate_records_are_rejected():
    manifest = _manifest(subjects=1, envs=1, rotations=2)
    payload = manifest.model_dump()
    payload["records"].append(payload["records"][0])

    with pytest.raises(ValueError):
        DatasetManifest.model_validate(payload)


def test_corrupt_manifest_raises(tmp_path):
    (tmp_path / "train").mkdir()
    (tmp_path / "train" / "manifest.json").write_text("{not json", encoding="utf-8")

    with pytest.raises(DataIOError) as exc_info:
        DatasetStorage(str(tmp_path)).load_manifest("train")

    assert exc_info.value.error_code == "DECODE_ERROR"


def test_invalid_split_name_raises(tmp_path):
    with pytest.raises(DataIOError):
        DatasetStorage(str(tmp_path)).split_dir("../escape")


def test_resolve_split_accepts_root_or_split_dir(tmp_path):
    storage = DatasetStorage(str(tmp_path))
    storage.save_manifest(_manifest("test", subjects=1, envs=1, rotations=1))

    assert resolve_split(str(tmp_path), "test") == (str(tmp_path), "test")
    assert resolve_split(str(tmp_path / "test")) == (str(tmp_path), "test")
    assert resolve_split(str(tmp_path), default="test") == (str(tmp_path), "test")
    assert storage.list_splits() == ["test"]
