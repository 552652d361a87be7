"""rulescene: traffic-rule driven scenario generation and checking for ADS tests."""

__version__ = "0.1.0"
