"""Confidence bounds for bounded means, PAC-Bayes bound minimization, and a
seeded online-learning simulator with a small experiment CLI."""

__version__ = "0.1.0"
