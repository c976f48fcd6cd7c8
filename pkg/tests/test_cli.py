"""
命令行入口测试
从生成数据、训练、重光照、旋转到评估走一遍完整流程，并检查错误行与退出码
"""

import logging
from pathlib import Path

import numpy as np
import pytest

import main as cli
from core.imaging.image import ImageProcessor
from core.storage.dataset_storage import DatasetStorage

TEST_CONFIG = str(Path(__file__).resolve().parents[1] / "config.test.yaml")


@pytest.fixture(autouse=True)
def _restore_logging():
    """main() 会重新配置根日志器，测试结束后恢复"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
    logging.getLogger("metrics").handlers.clear()


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """用测试配置生成数据并训练一个两步的检查点，模块内共享"""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert cli.main(["gen-data", "--config", TEST_CONFIG, "--out", str(data), "--split", "train"]) == 0
    assert cli.main(["gen-data", "--config", TEST_CONFIG, "--out", str(data), "--split", "test"]) == 0
    ckpt = root / "model.ckpt"
    assert cli.main(["train", "--config", TEST_CONFIG, "--data", str(data), "--steps", "2",
                     "--out", str(ckpt)]) == 0
    logging.getLogger().handlers.clear()
    logging.getLogger("metrics").handlers.clear()
    return root, data, ckpt


def _portrait_args(data, ckpt):
    storage = DatasetStorage(str(data))
    manifest = storage.load_manifest("test")
    source, target = manifest.get(0, 0, 0), manifest.get(1, 0, 5)
    return [
        "--config", TEST_CONFIG, "--ckpt", str(ckpt),
        "--source", str(storage.image_path("test", source)), "--source-mask", str(storage.mask_path("test", source)),
        "--target", str(storage.image_path("test", target)), "--target-mask", str(storage.mask_path("test", target)),
    ]


def _error_line(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.startswith("error code=")]
    assert len(lines) == 1
    return lines[0]


def test_usage_errors_exit_with_two(capsys):
    assert cli.main([]) == 2
    assert _error_line(capsys).startswith("error code=USAGE exit=2 message=")

    assert cli.main(["train", "--bogus"]) == 2
    assert "code=USAGE" in _error_line(capsys)


def test_invalid_config_value(tmp_path, capsys):
    code = cli.main(["gen-data", "--config", TEST_CONFIG, "--out", str(tmp_path), "--res", "4"])

    assert code == 2
    assert _error_line(capsys).startswith("error code=CONFIG_ERROR exit=2 message=invalid value for dataset.resolution")


def test_flag_overrides_take_precedence():
    args = cli.build_parser().parse_args(["train", "--config", TEST_CONFIG, "--steps", "9", "--no-ot3",
                                          "--mode", "Concat"])

    config = cli.resolve_config(args)

    assert config.training.steps == 9
    assert config.model.use_ot3 is False
    assert config.training.flags.use_ot3 is False
    assert config.model.render_mode.value == "Concat"
    assert config.training.batch_size == 2


def test_train_writes_checkpoint_and_losses(workspace):
    root, _, ckpt = workspace

    assert ckpt.is_file()
    lines = (root / "model.losses.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "step,recon,relight,auglight,feat,cons,total"
    assert len(lines) == 3


def test_resume_with_other_model_fails(workspace, tmp_path, capsys):
    _, data, ckpt = workspace

    code = cli.main(["train", "--config", TEST_CONFIG, "--data", str(data), "--steps", "3", "--mode", "Mul",
                     "--no-ot3", "--resume", str(ckpt), "--out", str(tmp_path / "other.ckpt")])

    assert code == 5
    assert "exit=5" in _error_line(capsys)


def test_relight_writes_png(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "relit.png"

    assert cli.main(["relight", *_portrait_args(data, ckpt), "--out", str(out)]) == 0
    assert cli.main(["relight", *_portrait_args(data, ckpt), "--angle", "0", "--out", str(tmp_path / "zero.png")]) == 0

    image = ImageProcessor().read_image(out)
    assert image.shape == (16, 16, 3)
    assert np.array_equal(image, ImageProcessor().read_image(tmp_path / "zero.png"))


def test_relight_missing_checkpoint(workspace, tmp_path, capsys):
    _, data, _ = workspace

    code = cli.main(["relight", *_portrait_args(data, tmp_path / "none.ckpt"), "--out", str(tmp_path / "o.png")])

    assert code == 3
    assert _error_line(capsys).startswith("error code=IO_ERROR exit=3")


def test_relight_resolution_mismatch(workspace, tmp_path, capsys):
    _, data, ckpt = workspace
    images = ImageProcessor()
    images.write_image(tmp_path / "big.png", np.zeros((32, 32, 3)))
    images.write_mask(tmp_path / "big_mask.png", np.ones((32, 32)))
    args = _portrait_args(data, ckpt)
    args[args.index("--source") + 1] = str(tmp_path / "big.png")
    args[args.index("--source-mask") + 1] = str(tmp_path / "big_mask.png")

    assert cli.main(["relight", *args, "--out", str(tmp_path / "o.png")]) == 5
    assert "exit=5" in _error_line(capsys)


def test_rotate_writes_frames_and_strip(workspace, tmp_path):
    _, data, ckpt = workspace
    out_dir = tmp_path / "frames"

    assert cli.main(["rotate", *_portrait_args(data, ckpt), "--angles", "-90,0,45", "--out-dir", str(out_dir)]) == 0

    assert sorted(p.name for p in out_dir.iterdir()) == [
        "angle_m0090_00.png", "angle_p0000_00.png", "angle_p0045_00.png", "strip.png",
    ]


@pytest.mark.parametrize("argv, expected", [
    (["rotate", "--angles", "-90,0,45"], ["rotate", "--angles=-90,0,45"]),
    (["rotate", "--angles", "-.5"], ["rotate", "--angles=-.5"]),
    (["rotate", "--angles", "30,60"], ["rotate", "--angles", "30,60"]),
    (["rotate", "--angles", "--out-dir", "x"], ["rotate", "--angles", "--out-dir", "x"]),
    (["relight", "--angle", "-45"], ["relight", "--angle", "-45"]),
])
def test_negative_angle_lists_are_kept_as_values(argv, expected):
    assert cli.normalize_argv(argv) == expected


def test_negative_angle_list_parses():
    args = cli.build_parser().parse_args(cli.normalize_argv(
        ["rotate", "--ckpt", "m.ckpt", "--source", "a.png", "--source-mask", "am.png", "--target", "b.png",
         "--target-mask", "bm.png", "--angles", "-90,0,45", "--out-dir", "out"]))

    assert args.angles == "-90,0,45"


def test_rotate_rejects_bad_sweep(workspace, tmp_path, capsys):
    _, data, ckpt = workspace

    code = cli.main(["rotate", *_portrait_args(data, ckpt), "--sweep", "7", "--out-dir", str(tmp_path)])

    assert code == 2
    assert "code=USAGE" in _error_line(capsys)


def test_eval_writes_reports(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "metrics.csv"

    code = cli.main(["eval", "--config", TEST_CONFIG, "--ckpt", str(ckpt), "--data", str(data),
                     "--sequential", "--consistency", "--max-scenes", "2", "--out", str(out)])

    assert code == 0
    rows = out.read_text(encoding="utf-8").splitlines()
    assert rows[0] == "protocol,angle,rmse,psnr,ssim,count"
    assert rows[1].startswith("single,")
    assert rows[2].startswith("identity,")
    assert any(row.startswith("sequential,-180,") for row in rows)
    consistency = (tmp_path / "metrics.consistency.csv").read_text(encoding="utf-8").splitlines()
    assert consistency[0] == "quantity,matched,mismatched"
    assert len(consistency) == 8


def test_eval_needs_checkpoint(workspace, tmp_path, capsys):
    _, data, _ = workspace

    assert cli.main(["eval", "--config", TEST_CONFIG, "--data", str(data), "--out", str(tmp_path / "m.csv")]) == 2
    assert "code=USAGE" in _error_line(capsys)
