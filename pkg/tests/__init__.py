"""Test suite for LoRa_EnergyKits."""
