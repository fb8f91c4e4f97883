"""
deintensify
Design engine, calibrator and Monte-Carlo simulator for Bayesian multi-arm
de-intensification (non-inferiority) trials.
"""

__version__ = "0.1.0"
