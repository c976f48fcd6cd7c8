from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from core import load_config
from core.exceptions import CheckpointMismatchError, ConfigurationError, RelightError
from core.schemas import GlobalConfig
from core.schemas.configs import ModelConfig

logger = logging.getLogger("ot3relight")

DATA_ROOT_ENV = "OT3_DATA_ROOT"
USAGE_EXIT = 2
ANGLE_LIST_OPTIONS = ("--angles",)
NEGATIVE_VALUE = re.compile(r"^-[\d.]")


class UsageError(Exception):
    """命令行用法错误（未知参数、缺少必填项等）"""


class CliParser(argparse.ArgumentParser):
    """用法错误不直接退出，统一交给 main() 输出单行错误"""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


# ---------------------------- 参数定义 ---------------------------- #

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML or JSON configuration file (flags override its values)")
    parser.add_argument("--seed", type=int, help="single seed for all randomness of the command")


def _add_portraits(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ckpt", required=True, help="trained checkpoint")
    parser.add_argument("--source", required=True, help="source portrait (PNG/JPEG)")
    parser.add_argument("--source-mask", required=True, help="source foreground mask")
    parser.add_argument("--target", required=True, help="lighting reference portrait")
    parser.add_argument("--target-mask", required=True, help="target foreground mask")
    parser.add_argument("--no-composite", action="store_true",
                        help="write the masked foreground instead of compositing over the inpainted target background")
    parser.add_argument("--feather", action="store_true", help="feather the composite mask by one pixel")


def build_parser() -> CliParser:
    parser = CliParser(prog="ot3relight", description="Referral-based portrait relighting (OT3 + MNR)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliParser)
    sub.required = True

    gen = sub.add_parser("gen-data", help="generate the synthetic subject x environment x rotation dataset")
    _add_common(gen)
    gen.add_argument("--out", help=f"dataset root (default: ${DATA_ROOT_ENV} or app.data_root)")
    gen.add_argument("--split", help="split name, e.g. train or test")
    gen.add_argument("--subjects", type=int, help="number of procedural subjects")
    gen.add_argument("--envs", type=int, help="number of environment maps")
    gen.add_argument("--rotations", type=int, help="lighting rotations per environment")
    gen.add_argument("--res", type=int, help="image resolution")
    gen.add_argument("--env-width", type=int, help="equirectangular map width")
    gen.add_argument("--workers", type=int, help="render worker threads")

    train = sub.add_parser("train", help="train the relighting network")
    _add_common(train)
    train.add_argument("--data", help=f"dataset root or split directory (default: ${DATA_ROOT_ENV})")
    train.add_argument("--split", default=None, help="training split (default: train)")
    train.add_argument("--out", help="checkpoint path (default: <output_root>/model.ckpt)")
    budget = train.add_mutually_exclusive_group()
    budget.add_argument("--steps", type=int, help="number of optimizer steps")
    budget.add_argument("--epochs", type=int, help="number of epochs over the manifest")
    train.add_argument("--mode", choices=["MNR", "Concat", "Mul"], help="render mode")
    train.add_argument("--no-ot3", action="store_true", help="single lighting head; disables L_auglight and L_cons")
    train.add_argument("--no-bg", action="store_true", help="no background illumination encoder")
    train.add_argument("--no-feat", action="store_true", help="disable the feature cycle loss")
    train.add_argument("--no-cons", action="store_true", help="disable the latent lighting consistency loss")
    train.add_argument("--lr", type=float, help="Adam learning rate")
    train.add_argument("--batch-size", type=int, help="batch size")
    train.add_argument("--channels", type=int, help="subject feature channels C_s")
    train.add_argument("--resume", help="checkpoint to resume from")
    train.add_argument("--loss-csv", help="loss CSV path (default: next to the checkpoint)")

    relight = sub.add_parser("relight", help="relight a source portrait with the lighting of a target portrait")
    _add_common(relight)
    _add_portraits(relight)
    relight.add_argument("--angle", type=float, help="rotate the target lighting by this many degrees")
    relight.add_argument("--out", required=True, help="output PNG")

    rotate = sub.add_parser("rotate", help="render the source under a rotating target lighting")
    _add_common(rotate)
    _add_portraits(rotate)
    angles = rotate.add_mutually_exclusive_group(required=True)
    angles.add_argument("--angles", help='comma separated angles, e.g. "-90,0,45" (also accepted as --angles=-90,0,45)')
    angles.add_argument("--sweep", type=float, help="sweep [-180, 180) with this step in degrees")
    rotate.add_argument("--out-dir", required=True, help="directory for per-angle PNGs and strip.png")

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a held-out split")
    _add_common(ev)
    ev.add_argument("--ckpt", help="checkpoint to evaluate (not needed for --ablation-table)")
    ev.add_argument("--data", help=f"dataset root or split directory (default: ${DATA_ROOT_ENV})")
    ev.add_argument("--split", default=None, help="evaluation split (default: test)")
    ev.add_argument("--sequential", action="store_true", help="also run the 12-rotation sequential protocol")
    ev.add_argument("--consistency", action="store_true", help="also report the latent lighting consistency")
    ev.add_argument("--ablation-table", metavar="CFGS",
                    help='comma separated variants (full,no-bg,no-ot3,no-feat,no-cons,concat,mul) or "all"')
    ev.add_argument("--train-split", default="train", help="training split used by --ablation-table")
    ev.add_argument("--steps", type=int, help="training steps per ablation variant")
    ev.add_argument("--max-scenes", type=int, help="cap on evaluated scenes")
    ev.add_argument("--strips", help="directory for qualitative side-by-side strips")
    ev.add_argument("--out", required=True, help="CSV report path")
    return parser



def normalize_argv(argv: Sequence[str]) -> List[str]:
    """`--angles -90,0,45` 改写为 `--angles=-90,0,45`，以负数开头的角度列表不会被当成选项"""
    items = list(argv)
    out: List[str] = []
    i = 0
    while i < len(items):
        item = items[i]
        if item in ANGLE_LIST_OPTIONS and i + 1 < len(items) and NEGATIVE_VALUE.match(items[i + 1]):
            out.append(f"{item}={items[i + 1]}")
            i += 2
            continue
        out.append(item)
        i += 1
    return out


# ---------------------------- 配置合并 ---------------------------- #

def _deep_merge(base: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set(updates: Dict[str, Any], dotted: str, value: Any) -> None:
    if value is None:
        return
    node = updates
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """命令行参数 -> 配置树上的覆盖值"""
    updates: Dict[str, Any] = {}
    seed = getattr(args, "seed", None)
    if args.command == "gen-data":
        _set(updates, "dataset.seed", seed)
        _set(updates, "dataset.split", args.split)
        _set(updates, "dataset.subjects", args.subjects)
        _set(updates, "dataset.envs", args.envs)
        _set(updates, "dataset.rotations", args.rotations)
        _set(updates, "dataset.resolution", args.res)
        _set(updates, "dataset.env_width", args.env_width)
        _set(updates, "dataset.workers", args.workers)
    elif args.command == "train":
        _set(updates, "training.seed", seed)
        _set(updates, "training.steps", args.steps)
        _set(updates, "training.learning_rate", args.lr)
        _set(updates, "training.batch_size", args.batch_size)
        _set(updates, "model.render_mode", args.mode)
        _set(updates, "model.subject_channels", args.channels)
        if args.epochs is not None:
            _set(updates, "training.epochs", args.epochs)
            updates["training"]["steps"] = None
        if args.no_ot3:
            _set(updates, "model.use_ot3", False)
            _set(updates, "training.flags.use_ot3", False)
        if args.no_bg:
            _set(updates, "model.use_bg", False)
        if args.no_feat:
            _set(updates, "training.flags.use_feat", False)
        if args.no_cons:
            _set(updates, "training.flags.use_cons", False)
    elif args.command == "eval":
        _set(updates, "evaluation.seed", seed)
        _set(updates, "training.seed", seed)
        _set(updates, "evaluation.max_scenes", args.max_scenes)
        _set(updates, "evaluation.ablation_steps", args.steps)
    if args.command in {"relight", "rotate"} and args.feather:
        _set(updates, "imaging.feather", True)
    return updates


def resolve_config(args: argparse.Namespace) -> GlobalConfig:
    """
    读取配置文件（或按 ENV 选择的默认文件）并应用命令行覆盖，合并结果重新校验

    Raises:
        ConfigurationError: 合并后的配置非法
    """
    config = load_config(args.config) if args.config else load_config()
    merged = _deep_merge(config.model_dump(mode="json"), flag_overrides(args))
    try:
        return GlobalConfig.model_validate(merged)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = ".".join(str(p) for p in error.get("loc", ()))
        raise ConfigurationError(f"invalid value for {key}: {error.get('msg')}", config_key=key) from exc


def _data_root(flag: Optional[str], config: GlobalConfig) -> str:
    return flag or os.getenv(DATA_ROOT_ENV) or config.app.data_root


# ---------------------------- 子命令 ---------------------------- #

def cmd_gen_data(args: argparse.Namespace, config: GlobalConfig) -> int:
    from core.synthdata.generator import generate_dataset

    root = _data_root(args.out, config)
    manifest = generate_dataset(config.dataset, root)
    print(f"{len(manifest.records)} images written to {Path(root) / manifest.split}")
    return 0


def _load_split(data: Optional[str], split: Optional[str], default_split: str, config: GlobalConfig):
    from core.storage.dataset_storage import DatasetStorage, resolve_split

    root, split_name = resolve_split(_data_root(data, config), split, default=default_split)
    storage = DatasetStorage(root, mask_threshold=config.imaging.mask_threshold)
    return storage, storage.load_manifest(split_name)


def cmd_train(args: argparse.Namespace, config: GlobalConfig) -> int:
    from core.training.trainer import train

    storage, manifest = _load_split(args.data, args.split, "train", config)
    model_config = config.model
    if model_config.resolution != manifest.resolution:
        logger.info("Model resolution set to the dataset resolution %d", manifest.resolution)
        model_config = ModelConfig.model_validate({**model_config.model_dump(), "resolution": manifest.resolution})
    out = args.out or str(Path(config.app.output_root) / "model.ckpt")
    run = train(model_config, config.training, manifest, storage, out, resume=args.resume, loss_csv=args.loss_csv)
    final = run.final_losses
    summary = f" total={final['total']:.6f}" if final else ""
    print(f"checkpoint {run.checkpoint} at step {run.steps}{summary}")
    return 0


def _service(args: argparse.Namespace, config: GlobalConfig):
    from core.service.relight_service import RelightService

    service = RelightService.from_checkpoint(args.ckpt, config.imaging)
    source = service.load_portrait(args.source, args.source_mask)
    target = service.load_portrait(args.target, args.target_mask)
    return service, source, target


def cmd_relight(args: argparse.Namespace, config: GlobalConfig) -> int:
    service, source, target = _service(args, config)
    output = service.relight_once(source, target, args.angle, composite_output=not args.no_composite)
    service.write(args.out, output)
    return 0


def cmd_rotate(args: argparse.Namespace, config: GlobalConfig) -> int:
    from core.utils import parse_angles, sweep_angles

    try:
        angles = parse_angles(args.angles) if args.angles is not None else sweep_angles(args.sweep)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    service, source, target = _service(args, config)
    frames = service.rotate(source, target, angles, composite_output=not args.no_composite)
    paths = service.write_rotation(args.out_dir, angles, frames)
    print(f"{len(frames)} frames written to {args.out_dir} ({paths[-1].name})")
    return 0


def cmd_eval(args: argparse.Namespace, config: GlobalConfig) -> int:
    from core.evaluation import ablation, protocols, reports

    storage, manifest = _load_split(args.data, args.split, "test", config)
    evaluation = config.evaluation
    if args.ablation_table:
        variants = (evaluation.variants if args.ablation_table.strip() == "all"
                    else [v.strip() for v in args.ablation_table.split(",") if v.strip()])
        train_storage = storage
        train_manifest = storage.load_manifest(args.train_split)
        model_config = ModelConfig.model_validate({**config.model.model_dump(), "resolution": train_manifest.resolution})
        run_config = config.model_copy(update={"model": model_config})
        out_dir = Path(args.out).parent / "ablation"
        rows = ablation.eval_ablations(variants, run_config, train_manifest, train_storage, manifest, storage,
                                       out_dir, csv_path=args.out)
        print(f"ablation table with {len(rows)} rows written to {args.out}")
        return 0

    if not args.ckpt:
        raise UsageError("eval needs --ckpt unless --ablation-table is given")
    from core.training.trainer import load_model

    model = load_model(args.ckpt)
    if model.resolution != manifest.resolution:
        raise CheckpointMismatchError(
            f"checkpoint resolution {model.resolution} differs from dataset resolution {manifest.resolution}",
            config_key="model.resolution",
        )
    single = protocols.eval_single(model, manifest, storage, evaluation.seed, evaluation.max_scenes,
                                   strips_dir=args.strips)
    sequential = None
    if args.sequential:
        sequential = protocols.eval_sequential(model, manifest, storage, evaluation.seed, evaluation.max_scenes,
                                               sweep_step=evaluation.sweep_step, strips_dir=args.strips)
    reports.write_metrics_csv(args.out, single, sequential)
    if args.consistency:
        result = protocols.eval_consistency(model, manifest, storage, evaluation.seed, evaluation.max_scenes)
        reports.write_consistency_csv(Path(args.out).with_suffix(".consistency.csv"), result)
    print(f"rmse={single.model.rmse:.4f} psnr={single.model.psnr:.2f} ssim={single.model.ssim:.4f} "
          f"(identity rmse={single.identity.rmse:.4f})")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "relight": cmd_relight,
    "rotate": cmd_rotate,
    "eval": cmd_eval,
}


def _report(code: str, exit_code: int, message: str) -> int:
    text = " ".join(str(message).split())
    print(f"error code={code} exit={exit_code} message={text}", file=sys.stderr)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(normalize_argv(sys.argv[1:] if argv is None else argv))
        config = resolve_config(args)
        from core.logging import setup_logging

        setup_logging(config.logging)
        return COMMANDS[args.command](args, config)
    except UsageError as exc:
        return _report("USAGE", USAGE_EXIT, str(exc))
    except RelightError as exc:
        return _report(exc.error_code or type(exc).__name__, exc.exit_code, exc.message)


if __name__ == "__main__":
    sys.exit(main())
