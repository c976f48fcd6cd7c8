from __future__ import annotations

import hashlib
import json
import os
import random
import tempfile
from pathlib import Path
from typing import Any, List, Union

import numpy as np
import torch
from pydantic import BaseModel

from core.exceptions import DataIOError


def config_hash(config: Any) -> str:
    """
    计算配置的稳定哈希（排序键的 JSON 的 SHA-256）

    Args:
        config: pydantic 模型或可 JSON 序列化的对象

    Returns:
        十六进制摘要
    """
    if isinstance(config, BaseModel):
        payload = config.model_dump(mode="json")
    else:
        payload = config
    json_str = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(json_str.encode("utf-8")).hexdigest()


def seed_everything(seed: int) -> None:
    """固定 python / numpy / torch 的全局随机种子"""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)


def parse_angles(text: str) -> List[float]:
    """
    解析逗号分隔的角度列表，例如 "-90,0,45"

    Raises:
        ValueError: 格式错误或列表为空
    """
    if not text or not text.strip():
        raise ValueError("angle list must not be empty")
    angles = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        angles.append(float(part))
    if not angles:
        raise ValueError("angle list must not be empty")
    return angles


def sweep_angles(step: float) -> List[float]:
    """[-180, 180) 上以 step 为间隔的角度序列，例如 step=30 得到 12 个角度"""
    if step <= 0 or step > 360:
        raise ValueError("sweep step must be in (0, 360]")
    count = int(round(360.0 / step))
    if abs(count * step - 360.0) > 1e-9:
        raise ValueError("sweep step must divide 360")
    return [-180.0 + k * step for k in range(count)]


def atomic_write(path: Union[str, Path], data: bytes) -> None:
    """
    原子写入文件：先写同目录临时文件，再替换目标文件

    Raises:
        DataIOError: 目录无法创建或写入失败
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=str(path.parent))
    except OSError as exc:
        raise DataIOError(f"无法写入文件: {path} ({exc})", path=str(path)) from exc
    try:
        with os.fdopen(fd, "wb") as tmp_file:
            tmp_file.write(data)
        os.replace(temp_path, path)
    except OSError as exc:
        if os.path.exists(temp_path):
            os.unlink(temp_path)
        raise DataIOError(f"无法写入文件: {path} ({exc})", path=str(path)) from exc


def write_json(path: Union[str, Path], payload: Any) -> None:
    data = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)
    atomic_write(path, (data + "\n").encode("utf-8"))


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    if not path.is_file():
        raise DataIOError(f"文件不存在: {path}", path=str(path))
    try:
        with path.open("r", encoding="utf-8") as fp:
            return json.load(fp)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataIOError(f"JSON 文件无法解析: {path} ({exc})", path=str(path),
                          error_code="DECODE_ERROR") from exc
    except OSError as exc:
        raise DataIOError(f"无法读取文件: {path} ({exc})", path=str(path)) from exc
