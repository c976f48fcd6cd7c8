"""
异常定义模块

定义重光照流水线的异常类；每个异常携带错误码和命令行退出码。
"""

from typing import Optional


class RelightError(Exception):
    """基础异常类"""

    exit_code = 1

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code

    def __str__(self):
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class ConfigurationError(RelightError):
    """配置异常（包括非法参数组合）"""

    exit_code = 2

    def __init__(self, message: str, config_key: Optional[str] = None, error_code: str = "CONFIG_ERROR"):
        super().__init__(message, error_code)
        self.config_key = config_key


class ShapeMismatchError(ConfigurationError):
    """张量形状与层配置不一致"""

    def __init__(self, message: str, expected=None, actual=None):
        super().__init__(message, error_code="SHAPE_MISMATCH")
        self.expected = expected
        self.actual = actual


class InvalidInputError(RelightError):
    """输入数据不满足前置条件（空掩码、孔洞覆盖整幅图像等）"""

    exit_code = 2

    def __init__(self, message: str):
        super().__init__(message, "INVALID_INPUT")


class DataIOError(RelightError):
    """文件读写异常"""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, error_code: str = "IO_ERROR"):
        super().__init__(message, error_code)
        self.path = path


class ImageDecodeError(DataIOError):
    """图片无法解码"""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message, path=path, error_code="DECODE_ERROR")


class MissingRecordError(DataIOError):
    """清单中缺少需要的场景记录"""

    def __init__(self, message: str, key: Optional[tuple] = None):
        super().__init__(message, error_code="MISSING_RECORD")
        self.key = key


class NumericalError(RelightError):
    """数值异常（NaN 损失、梯度检查失败等）"""

    exit_code = 4

    def __init__(self, message: str, error_code: str = "NUMERIC_ERROR"):
        super().__init__(message, error_code)


class RankDeficientError(NumericalError):
    """全连接头不可逆（数值秩不足）"""

    def __init__(self, message: str, rank: Optional[int] = None, residual: Optional[float] = None):
        super().__init__(message, error_code="RANK_DEFICIENT")
        self.rank = rank
        self.residual = residual


class CheckpointMismatchError(ConfigurationError):
    """检查点与当前配置/输入不一致"""

    exit_code = 5

    def __init__(self, message: str, config_key: Optional[str] = None):
        super().__init__(message, config_key=config_key, error_code="CHECKPOINT_MISMATCH")
