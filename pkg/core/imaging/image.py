"""
图片处理器模块
负责 PNG 图片与掩码的读写、数组与张量之间的转换、前景/背景拆分
"""

from __future__ import annotations

import logging
from io import BytesIO
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from core.exceptions import DataIOError, ImageDecodeError, InvalidInputError
from core.utils import atomic_write

logger = logging.getLogger(__name__)

_SUPPORTED_FORMATS = {"PNG", "JPEG"}

PathLike = Union[str, Path]


class ImageProcessor:
    """
    图片处理器类
    图片统一表示为 float64 的 [H,W,3] 数组，取值 [0,1]；掩码为 [H,W] 数组
    """

    def __init__(self, mask_threshold: float = 0.5) -> None:
        self.mask_threshold = mask_threshold

    def load_from_path(self, path: PathLike) -> bytes:
        """
        从本地文件路径加载图片字节

        Raises:
            DataIOError: 文件不存在或不是文件
        """
        file_path = Path(path).expanduser()
        if not file_path.exists():
            raise DataIOError(f"文件不存在: {file_path}", path=str(file_path))
        if not file_path.is_file():
            raise DataIOError(f"路径不是文件: {file_path}", path=str(file_path))
        try:
            return file_path.read_bytes()
        except OSError as exc:
            raise DataIOError(f"无法读取文件: {file_path} ({exc})", path=str(file_path)) from exc

    def decode(self, data: bytes, mode: str = "RGB", source: str = "<bytes>") -> np.ndarray:
        """
        解码图片字节为 [0,1] 浮点数组

        Args:
            data: 图片内容（字节）
            mode: "RGB" 或 "L"
            source: 用于错误信息的来源描述

        Raises:
            ImageDecodeError: 无法解析或格式不受支持
        """
        try:
            with Image.open(BytesIO(data)) as img:
                if img.format not in _SUPPORTED_FORMATS:
                    raise ImageDecodeError(f"不支持的图片格式 {img.format}: {source}", path=source)
                img.load()
                array = np.asarray(img.convert(mode), dtype=np.uint8)
        except (UnidentifiedImageError, OSError, SyntaxError) as exc:
            logger.error("图片无法解析: %s (%s)", source, exc)
            raise ImageDecodeError(f"无法解析图片内容: {source}", path=source) from exc
        return array.astype(np.float64) / 255.0

    def encode_png(self, array: np.ndarray) -> bytes:
        """[0,1] 数组量化为 8 位并编码为 PNG"""
        if array.ndim == 3 and array.shape[2] == 3:
            mode = "RGB"
        elif array.ndim == 2:
            mode = "L"
        else:
            raise InvalidInputError(f"不支持的数组形状: {array.shape}")
        if not np.isfinite(array).all():
            raise InvalidInputError("图片中包含非有限值")
        quantized = np.clip(np.rint(np.asarray(array, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
        buffer = BytesIO()
        Image.fromarray(quantized, mode=mode).save(buffer, format="PNG")
        return buffer.getvalue()

    def read_image(self, path: PathLike) -> np.ndarray:
        return self.decode(self.load_from_path(path), "RGB", source=str(path))

    def read_mask(self, path: PathLike) -> np.ndarray:
        """读取灰度掩码并按阈值二值化"""
        gray = self.decode(self.load_from_path(path), "L", source=str(path))
        return (gray >= self.mask_threshold).astype(np.float64)

    def write_image(self, path: PathLike, image: np.ndarray) -> None:
        self._check_png_suffix(path)
        atomic_write(path, self.encode_png(image))

    def write_mask(self, path: PathLike, mask: np.ndarray) -> None:
        self._check_png_suffix(path)
        atomic_write(path, self.encode_png(mask))

    @staticmethod
    def _check_png_suffix(path: PathLike) -> None:
        if Path(path).suffix.lower() != ".png":
            raise DataIOError(f"只支持写入 PNG 文件: {path}", path=str(path), error_code="UNSUPPORTED_FORMAT")


_default_processor = ImageProcessor()


def read_image(path: PathLike) -> np.ndarray:
    return _default_processor.read_image(path)


def write_image(path: PathLike, image: np.ndarray) -> None:
    _default_processor.write_image(path, image)


def read_mask(path: PathLike, threshold: float = 0.5) -> np.ndarray:
    return ImageProcessor(mask_threshold=threshold).read_mask(path)


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    _default_processor.write_mask(path, mask)


def check_same_dims(image: np.ndarray, mask: np.ndarray, where: str) -> None:
    if image.shape[:2] != mask.shape[:2]:
        raise InvalidInputError(f"{where}: image {image.shape[:2]} and mask {mask.shape[:2]} dims differ")


def split(image: np.ndarray, mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    前景/背景拆分：foreground = I*M, background = I*(1-M)

    Raises:
        InvalidInputError: 尺寸不一致
    """
    check_same_dims(image, mask, "split")
    weight = mask[..., None]
    return image * weight, image * (1.0 - weight)


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """[H,W,3] 数组 -> [3,H,W] float32 张量"""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).to(torch.float32)


def mask_to_tensor(mask: np.ndarray) -> torch.Tensor:
    """[H,W] 数组 -> [1,H,W] float32 张量"""
    return torch.from_numpy(np.ascontiguousarray(mask[None])).to(torch.float32)


def from_tensor(tensor: torch.Tensor) -> np.ndarray:
    """[3,H,W]（或 [1,3,H,W]）张量 -> [H,W,3] float64 数组"""
    if tensor.dim() == 4:
        if tensor.shape[0] != 1:
            raise InvalidInputError("from_tensor expects a single image")
        tensor = tensor[0]
    return tensor.detach().cpu().to(torch.float64).numpy().transpose(1, 2, 0).copy()
