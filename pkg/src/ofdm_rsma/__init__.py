"""OFDM downlink with rate-splitting, NOMA and OFDMA over linear time-varying channels."""

__version__ = "0.1.0"
