"""Biharmonic NLS pseudospectral laboratory."""
