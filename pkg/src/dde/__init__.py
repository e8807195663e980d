"""Distillation of dominant eigenproperties from time correlators."""

__version__ = "0.1.0"
