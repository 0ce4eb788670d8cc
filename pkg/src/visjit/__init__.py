"""Just-in-time defect prediction for repositories mixing textual and visual (Max/MSP) code."""

__version__ = "0.1.0"
