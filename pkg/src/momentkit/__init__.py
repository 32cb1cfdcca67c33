"""Moment maps, Kempf-Ness functionals and lattice vortices."""
from . import filtstab, kempfness, liecore, targets, vortexlat

__all__ = ["filtstab", "kempfness", "liecore", "targets", "vortexlat"]
__version__ = "0.1.0"
