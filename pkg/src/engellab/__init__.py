"""Desk-scale toolkit for even contact structures, Engel plane fields,
weakly hyperbolic characteristic flows and bi-Engel constructions on
explicit 4-manifold models."""

__version__ = "0.1.0"
