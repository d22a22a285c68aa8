"""Index-sum certificates for equilibria of SIS, Lotka-Volterra and
DeGroot-Friedkin models."""

__version__ = "0.1.0"
