"""Core module for LoRa_EnergyKits."""

from core.config import load_calibration, load_scenario, load_settings, save_settings
from core.models import Calibration, Scenario
from core.sim_engine import SimReport, battery_lifetime, run

__all__ = [
    "Calibration",
    "Scenario",
    "SimReport",
    "battery_lifetime",
    "load_calibration",
    "load_scenario",
    "load_settings",
    "run",
    "save_settings",
]
