"""One-dimensional arterial network hemodynamics with structured-tree outlets."""

__version__ = "0.1.0"
