"""Component-level evaluation of optimization formulations."""

__version__ = "0.1.0"
