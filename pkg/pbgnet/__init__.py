"""
PBGNet

Aggregated binary activated networks trained by PAC-Bayesian bound minimization.
"""

__version__ = "0.1.0"
