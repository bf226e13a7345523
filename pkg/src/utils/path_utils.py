"""Path and filename utility functions for LoRa_EnergyKits.

This module provides utilities for sanitizing filenames, locating the
settings directory and resolving the calibration file in a cross-platform
manner.
"""

import logging
import os
import re
import sys
from pathlib import Path
from typing import Optional, Union

logger = logging.getLogger(__name__)

CALIBRATION_ENV_VAR = "LORA_ENERGY_CALIBRATION"
DEFAULT_CALIBRATION_NAME = "calibration_table1.json"
SETTINGS_FILE_NAME = "settings.toml"


def sanitize_filename(name: str, max_length: int = 50) -> str:
    r"""清理文件名中的非法字符

    移除 Windows 非法字符: < > : " / \ | ? *
    限制文件名长度为 max_length 字符
    去除首尾空格和点

    Args:
        name: 原始文件名（通常为场景名）
        max_length: 最大长度限制（默认 50）

    Returns:
        清理后的文件名，如果清理后为空则返回 "unnamed_scenario"

    Examples:
        >>> sanitize_filename("poll<1Hz>")
        'poll_1Hz_'
        >>> sanitize_filename("")
        'unnamed_scenario'
    """
    if not name:
        return "unnamed_scenario"

    illegal_chars = r'[<>:"/\\|?*\x00-\x1f]'
    cleaned = re.sub(illegal_chars, '_', name)

    cleaned = cleaned.strip('. ')

    if len(cleaned) > max_length:
        cleaned = cleaned[:max_length].strip()

    if not cleaned or cleaned == '_' * len(cleaned):
        cleaned = "unnamed_scenario"

    return cleaned


def get_settings_dir() -> Path:
    """获取平台相关的设置目录

    %APPDATA%/LoRa_EnergyKits (Windows) 或 ~/.config/lora_energykits (Linux/macOS)
    """
    if sys.platform == "win32":
        return Path.home() / "AppData" / "Roaming" / "LoRa_EnergyKits"
    return Path.home() / ".config" / "lora_energykits"


def get_settings_path() -> Path:
    return get_settings_dir() / SETTINGS_FILE_NAME


def get_project_root() -> Path:
    return Path(__file__).resolve().parent.parent.parent


def default_calibration_path() -> Path:
    """随工具发布的校准文件 configs/calibration_table1.json"""
    return get_project_root() / "configs" / DEFAULT_CALIBRATION_NAME


def resolve_calibration_path(
    explicit: Optional[Union[str, Path]] = None,
    settings_path: Optional[str] = None,
) -> Path:
    """按优先级解析校准文件路径

    显式参数 → 环境变量 LORA_ENERGY_CALIBRATION → 设置 calibration_path → 内置默认

    Args:
        explicit: 命令行或场景给出的路径
        settings_path: 用户设置中的 calibration_path

    Returns:
        校准文件路径（不检查是否存在）
    """
    if explicit:
        return Path(explicit)
    env_value = os.environ.get(CALIBRATION_ENV_VAR)
    if env_value:
        logger.debug(f"使用环境变量 {CALIBRATION_ENV_VAR}: {env_value}")
        return Path(env_value)
    if settings_path:
        return Path(settings_path)
    return default_calibration_path()


def ensure_output_dir(path: Union[str, Path]) -> Path:
    """确保输出目录存在

    Raises:
        OSError: 目录无法创建
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out
