"""Stochastic electrodynamics toolkit: zero-point field synthesis, radiation-damped
charge dynamics and energy-throughput diagnostics."""

__version__ = "0.1.0"
