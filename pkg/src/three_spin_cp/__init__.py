"""Three-spin cross-polarization simulations (liquids and MAS solids)."""
__version__ = "0.1.0"
