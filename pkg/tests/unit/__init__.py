"""Unit tests for LoRa_EnergyKits."""
