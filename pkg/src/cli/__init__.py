"""Command-line front end for LoRa_EnergyKits."""

__version__ = "0.1.0"
