"""Numerical equivariant geometry: G-G-bundles, clutching maps and Cheeger deformations."""

__version__ = "0.1.0"
