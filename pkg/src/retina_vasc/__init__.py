"""Retinal vascular parameter quantification and classifier evaluation."""

__version__ = "0.1.0"
