"""Classifiers, scoring, cross-validation and embedding."""
