"""
Immutable numeric value types holding numpy arrays
"""
