"""Adversarial robustness of FNN and SNN intrusion detectors on BoT-IoT-style flows."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
