"""
检查点存储模块
负责自描述二进制检查点容器的读写

布局（全部小端）：
    magic        8 字节 b"OT3CKPT\\0"
    version      uint32
    header_len   uint32，随后是 UTF-8 JSON 头（配置快照、步数、优化器超参数、随机数状态）
    array_count  uint32
    每个数组：name_len uint16 + name、tag_len uint8 + dtype 标签、ndim uint8、
             ndim 个 uint64 形状、nbytes uint64、原始数据
数组命名：model.<参数名>、optim.<参数序号>.<状态键>、rng.<名称>
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path
from typing import Any, BinaryIO, Dict, Tuple, Union

import numpy as np
import torch

from core.exceptions import CheckpointMismatchError, DataIOError
from core.utils import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"OT3CKPT\0"
FORMAT_VERSION = 1

_DTYPES: Dict[str, Tuple[torch.dtype, str]] = {
    "f32": (torch.float32, "<f4"),
    "f64": (torch.float64, "<f8"),
    "i64": (torch.int64, "<i8"),
    "i32": (torch.int32, "<i4"),
    "u8": (torch.uint8, "|u1"),
    "bool": (torch.bool, "|b1"),
}
_TAGS = {torch_dtype: tag for tag, (torch_dtype, _) in _DTYPES.items()}


@dataclass
class CheckpointState:
    """检查点内容：头部 JSON 字段 + 命名数组"""
    config: Dict[str, Any]
    step: int
    model: Dict[str, torch.Tensor]
    optimizer: Dict[str, Any] = field(default_factory=dict)
    rng: Dict[str, Any] = field(default_factory=dict)
    torch_rng: Dict[str, torch.Tensor] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)


def _write_array(out: BinaryIO, name: str, tensor: torch.Tensor) -> None:
    tensor = tensor.detach().cpu().contiguous()
    tag = _TAGS.get(tensor.dtype)
    if tag is None:
        raise DataIOError(f"unsupported dtype {tensor.dtype} for array {name}")
    data = tensor.numpy().astype(_DTYPES[tag][1], copy=False).tobytes()
    name_bytes = name.encode("utf-8")
    tag_bytes = tag.encode("ascii")
    out.write(struct.pack("<H", len(name_bytes)))
    out.write(name_bytes)
    out.write(struct.pack("<B", len(tag_bytes)))
    out.write(tag_bytes)
    out.write(struct.pack("<B", tensor.dim()))
    for size in tensor.shape:
        out.write(struct.pack("<Q", size))
    out.write(struct.pack("<Q", len(data)))
    out.write(data)


def _read_exact(buf: BinaryIO, size: int) -> bytes:
    data = buf.read(size)
    if len(data) != size:
        raise DataIOError("checkpoint file is truncated", error_code="DECODE_ERROR")
    return data


def _read_array(buf: BinaryIO) -> Tuple[str, torch.Tensor]:
    (name_len,) = struct.unpack("<H", _read_exact(buf, 2))
    name = _read_exact(buf, name_len).decode("utf-8")
    (tag_len,) = struct.unpack("<B", _read_exact(buf, 1))
    tag = _read_exact(buf, tag_len).decode("ascii")
    if tag not in _DTYPES:
        raise DataIOError(f"unknown dtype tag '{tag}' for array {name}", error_code="DECODE_ERROR")
    (ndim,) = struct.unpack("<B", _read_exact(buf, 1))
    shape = tuple(struct.unpack("<Q", _read_exact(buf, 8))[0] for _ in range(ndim))
    (nbytes,) = struct.unpack("<Q", _read_exact(buf, 8))
    torch_dtype, np_dtype = _DTYPES[tag]
    array = np.frombuffer(_read_exact(buf, nbytes), dtype=np.dtype(np_dtype))
    if array.size != int(np.prod(shape, dtype=np.int64)):
        raise DataIOError(f"array {name}: {array.size} values do not fill shape {shape}", error_code="DECODE_ERROR")
    tensor = torch.from_numpy(array.reshape(shape).copy())
    if tensor.dtype != torch_dtype:
        tensor = tensor.to(torch_dtype)
    return name, tensor


def _split_optimizer(optimizer: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, torch.Tensor]]:
    """把 torch 优化器 state_dict 拆成 JSON 部分与张量部分"""
    arrays: Dict[str, torch.Tensor] = {}
    scalars: Dict[str, Dict[str, Any]] = {}
    for idx, entry in optimizer.get("state", {}).items():
        for key, value in entry.items():
            if isinstance(value, torch.Tensor):
                arrays[f"optim.{idx}.{key}"] = value
            else:
                scalars.setdefault(str(idx), {})[key] = value
    groups = []
    for group in optimizer.get("param_groups", []):
        groups.append({k: (list(v) if isinstance(v, tuple) else v) for k, v in group.items()})
    return {"param_groups": groups, "scalars": scalars, "present": bool(optimizer)}, arrays


def _join_optimizer(meta: Dict[str, Any], arrays: Dict[str, torch.Tensor]) -> Dict[str, Any]:
    if not meta.get("present"):
        return {}
    state: Dict[int, Dict[str, Any]] = {}
    for name, tensor in arrays.items():
        _, idx, key = name.split(".", 2)
        state.setdefault(int(idx), {})[key] = tensor
    for idx, entries in meta.get("scalars", {}).items():
        state.setdefault(int(idx), {}).update(entries)
    groups = []
    for group in meta.get("param_groups", []):
        group = dict(group)
        if isinstance(group.get("betas"), list):
            group["betas"] = tuple(group["betas"])
        groups.append(group)
    return {"state": state, "param_groups": groups}


def encode_checkpoint(state: CheckpointState) -> bytes:
    optim_meta, optim_arrays = _split_optimizer(state.optimizer)
    header = {
        "config": state.config,
        "step": state.step,
        "optimizer": optim_meta,
        "rng": state.rng,
        "extra": state.extra,
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    arrays: Dict[str, torch.Tensor] = {}
    arrays.update({f"model.{k}": v for k, v in state.model.items()})
    arrays.update(optim_arrays)
    arrays.update({f"rng.{k}": v for k, v in state.torch_rng.items()})

    out = BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", FORMAT_VERSION))
    out.write(struct.pack("<I", len(header_bytes)))
    out.write(header_bytes)
    out.write(struct.pack("<I", len(arrays)))
    for name, tensor in arrays.items():
        _write_array(out, name, tensor)
    return out.getvalue()


def decode_checkpoint(data: bytes, source: str = "<bytes>") -> CheckpointState:
    """
    Raises:
        DataIOError: 不是检查点文件或文件损坏
        CheckpointMismatchError: 格式版本不兼容
    """
    buf = BytesIO(data)
    if buf.read(len(MAGIC)) != MAGIC:
        raise DataIOError(f"not a checkpoint file: {source}", path=source, error_code="DECODE_ERROR")
    (version,) = struct.unpack("<I", _read_exact(buf, 4))
    if version != FORMAT_VERSION:
        raise CheckpointMismatchError(f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
    (header_len,) = struct.unpack("<I", _read_exact(buf, 4))
    try:
        header = json.loads(_read_exact(buf, header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataIOError(f"checkpoint header is corrupt: {source}", path=source, error_code="DECODE_ERROR") from exc
    (count,) = struct.unpack("<I", _read_exact(buf, 4))
    model: Dict[str, torch.Tensor] = {}
    optim_arrays: Dict[str, torch.Tensor] = {}
    torch_rng: Dict[str, torch.Tensor] = {}
    for _ in range(count):
        name, tensor = _read_array(buf)
        prefix, _, rest = name.partition(".")
        if prefix == "model":
            model[rest] = tensor
        elif prefix == "optim":
            optim_arrays[name] = tensor
        elif prefix == "rng":
            torch_rng[rest] = tensor
        else:
            raise DataIOError(f"unexpected array '{name}' in checkpoint", path=source, error_code="DECODE_ERROR")
    return CheckpointState(
        config=header.get("config", {}),
        step=int(header.get("step", 0)),
        model=model,
        optimizer=_join_optimizer(header.get("optimizer", {}), optim_arrays),
        rng=header.get("rng", {}),
        torch_rng=torch_rng,
        extra=header.get("extra", {}),
    )


def save_checkpoint(path: Union[str, Path], state: CheckpointState) -> Path:
    path = Path(path)
    atomic_write(path, encode_checkpoint(state))
    logger.info("Checkpoint saved at step %d -> %s", state.step, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> CheckpointState:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"checkpoint not found: {path}", path=str(path))
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read checkpoint: {path} ({exc})", path=str(path)) from exc
    state = decode_checkpoint(data, source=str(path))
    logger.debug("Checkpoint loaded from %s (step %d, %d arrays)", path, state.step, len(state.model))
    return state
