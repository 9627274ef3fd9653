"""Decentralized stochastic saddle-point optimization with compressed communication."""

__version__ = "0.1.0"
