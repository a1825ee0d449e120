"""Normal approximation of Wiener chaos functionals: Stein bounds and their corrections."""

__version__ = "0.1.0"
