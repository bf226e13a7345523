"""LoRa_EnergyKits - LoRaWAN end-node energy and battery lifetime toolkit."""
