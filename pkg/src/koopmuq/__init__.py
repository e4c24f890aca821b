"""Koopman matrix estimation with analytic measurement-uncertainty quantification."""

__version__ = "0.1.0"
