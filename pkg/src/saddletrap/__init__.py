"""Particle in a rotating saddle potential: simulation, guiding-center maps,
exact verification of the averaging reduction, and stability/precession
experiments."""

__version__ = "0.1.0"
