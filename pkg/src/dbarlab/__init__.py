"""Numerical homotopy operators for the dbar equation on model domains in C^n."""

__version__ = "0.1.0"

from .errors import DbarLabError  # noqa: F401
