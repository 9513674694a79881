"""Exact symbolic engine for Getzler rescaling analysis and Wodzicki-type
residue densities of geometric differential operators at desk scale (n <= 6).
"""

__version__ = "0.1.0"
