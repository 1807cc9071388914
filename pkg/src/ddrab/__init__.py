"""Dipole-exchange driven Rydberg antiblockade: models, effective
Hamiltonians, dissipative dynamics and experiment reproductions."""

__version__ = "0.1.0"
