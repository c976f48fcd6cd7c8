"""
服务层模块
提供命令行使用的重光照 / 光照旋转推理服务
"""

from .relight_service import AbstractRelightService, RelightService, Portrait

__all__ = [
    "AbstractRelightService",
    "RelightService",
    "Portrait",
]
