"""Pytest configuration for LoRa_EnergyKits."""
import copy
import sys
from pathlib import Path

import pytest

# Add src directory to Python path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

PROJECT_ROOT = Path(__file__).parent.parent
CALIBRATION_FILE = PROJECT_ROOT / "configs" / "calibration_table1.json"
SCENARIO_DIR = PROJECT_ROOT / "configs" / "scenarios"

# 最小可运行场景：轮询、无上行（信号恒低于阈值）
BASE_SCENARIO = {
    "version": "1.0",
    "name": "unit",
    "duration_s": 600.0,
    "battery": {"capacity_mah": 1000, "voltage": 3.3},
    "radio": {"dr": 5, "tx_power_dbm": 14},
    "sensing": {"mode": "poll", "period_s": 60.0, "sample_duration_s": 0.01},
    "signal": {"event_rate_per_hour": 0.0},
    "strategy": {
        "accumulation": {"batch_size": 1, "sample_bytes": 2, "overhead_bytes": 13},
        "filter": {"threshold": 40.0, "hysteresis": 0.0},
    },
}


@pytest.fixture(autouse=True)
def _no_calibration_env(monkeypatch):
    """隔离环境变量，避免用户的校准路径影响测试"""
    monkeypatch.delenv("LORA_ENERGY_CALIBRATION", raising=False)


@pytest.fixture
def calibration():
    from core.config import load_calibration
    return load_calibration(CALIBRATION_FILE)


@pytest.fixture
def profile(calibration):
    return calibration.profile


@pytest.fixture
def rx_cal(calibration):
    return calibration.rx


@pytest.fixture
def scenario_dict():
    """返回可修改的基础场景字典"""
    return copy.deepcopy(BASE_SCENARIO)


@pytest.fixture
def make_scenario(calibration):
    """由字典构建已附带校准的场景"""
    from core.config import scenario_from_dict

    def _make(data: dict):
        return scenario_from_dict(data, source="test", calibration=calibration)

    return _make
