"""Swendsen-Wang dynamics for the mean-field Potts model: analytics, fast
simulation, couplings, a Lyapunov potential and an experiment harness."""

__version__ = "0.1.0"
