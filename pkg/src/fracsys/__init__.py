"""Time-fractional reaction-diffusion systems: special functions, mild solver, criteria."""

__version__ = "0.1.0"
