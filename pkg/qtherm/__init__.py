"""
qtherm: pure-state quantum thermodynamics of a system coupled to a bath
"""

__version__ = "1.0.0"
