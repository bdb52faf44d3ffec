"""Calibration workbench for linear-elastic material parameters from
full-field displacement data."""

__version__ = "0.1.0"
