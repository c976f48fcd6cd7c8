import os
from typing import Optional


def worker_count(requested: Optional[int] = None) -> int:
    """
    根据系统的CPU核心数返回workers数量（显式指定时优先）
    """
    if requested is not None and requested > 0:
        return requested
    return os.cpu_count() or 1
