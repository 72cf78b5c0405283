"""Numerical laboratory for Hitchin-section Higgs fields, equivariant harmonic
maps of a genus-2 surface and the energy functional on Teichmueller space."""

__version__ = "0.1.0"
