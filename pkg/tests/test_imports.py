"""
模块导入顺序测试
每个入口模块在全新解释器中单独导入，避免包之间的循环导入
"""

import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.mark.parametrize("module", [
    "core.training.trainer",
    "core.training",
    "core.service.relight_service",
    "core.evaluation",
    "core.evaluation.ablation",
    "core.evaluation.charts",
    "main",
])
def test_module_imports_in_fresh_interpreter(module):
    completed = subprocess.run(
        [sys.executable, "-c", f"import {module}"],
        cwd=REPO_ROOT, capture_output=True, text=True, timeout=300,
    )

    assert completed.returncode == 0, completed.stderr
