"""Multi-scale simulator of ultrasonic intra-body networking (UsWB)."""

__version__ = "0.1.0"
