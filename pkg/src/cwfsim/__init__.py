"""Stochastic conditional-wave-function transport simulator.

Subpackages by responsibility: `fields` (grids + spectral primitives),
`schrodinger` (1D effective-mass propagation with momentum kicks),
`dirac` (2D linear-band propagation and collisions), `bohm` (trajectory
guidance, sampling, ensemble density matrix), `scattering` (mechanism
tables and event selection), `device` (1D transport experiments),
`presets` (prepared experiments), `config`/`cli` (run front end).
"""

from . import bohm, config, constants, device, dirac, fields, presets, scattering, schrodinger

__all__ = [
    "bohm",
    "config",
    "constants",
    "device",
    "dirac",
    "fields",
    "presets",
    "scattering",
    "schrodinger",
]

__version__ = "0.1.0"
