"""Utility modules for LoRa_EnergyKits."""

from utils.path_utils import (
    ensure_output_dir,
    resolve_calibration_path,
    sanitize_filename,
)

__all__ = [
    "ensure_output_dir",
    "resolve_calibration_path",
    "sanitize_filename",
]
